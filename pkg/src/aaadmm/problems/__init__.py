"""Benchmark problems solved by ADMM and cast as fixed-point maps."""

from .admm import (
    ADMMOperator,
    ADMMState,
    build_fpi,
    get_operator,
    residual_norms,
    ridge_closed_form,
    ridge_iteration_matrix,
    zero_state,
)
from .instance import (
    DEFAULTS,
    KINDS,
    InstanceError,
    ProblemInstance,
    difference_operator,
    generate_instance,
    read_instance,
    write_instance,
)
from .newton import InnerSolverError, newton_inner_solve
from .prox import project_box, project_nonneg, prox_l1

__all__ = [
    "ADMMOperator",
    "ADMMState",
    "DEFAULTS",
    "InnerSolverError",
    "InstanceError",
    "KINDS",
    "ProblemInstance",
    "build_fpi",
    "difference_operator",
    "generate_instance",
    "get_operator",
    "newton_inner_solve",
    "project_box",
    "project_nonneg",
    "prox_l1",
    "read_instance",
    "residual_norms",
    "ridge_closed_form",
    "ridge_iteration_matrix",
    "write_instance",
    "zero_state",
]
