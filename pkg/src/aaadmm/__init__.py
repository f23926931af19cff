"""ADMM as a fixed-point iteration, accelerated with AA(m) and stationary sAA(m).

Convergence factors of the accelerated iterations are predicted from the
spectrum of the fixed-point Jacobian and checked against measured runs.
"""

from .anderson import SAAPlan, Scheme, WindowBuffer, aa_coefficients, aa_step, run_accelerated, saa_step
from .fixed_point import (
    ConvergenceEstimate,
    FixedPointMap,
    IterationTrace,
    estimate_convergence_factor,
    iterate,
    reference_solution,
)
from .jacobian import Spectrum, analytic_jacobian, fd_jacobian, spectrum_of
from .kernels import BACKEND
from .theory import (
    OptimalSAAResult,
    brute_force_sweep,
    circle_params,
    companion_psi,
    lambda_roots,
    optimal_saa1,
    rho_saa,
    s_mu,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "ConvergenceEstimate",
    "FixedPointMap",
    "IterationTrace",
    "OptimalSAAResult",
    "SAAPlan",
    "Scheme",
    "Spectrum",
    "WindowBuffer",
    "aa_coefficients",
    "aa_step",
    "analytic_jacobian",
    "brute_force_sweep",
    "circle_params",
    "companion_psi",
    "estimate_convergence_factor",
    "fd_jacobian",
    "iterate",
    "lambda_roots",
    "optimal_saa1",
    "reference_solution",
    "rho_saa",
    "run_accelerated",
    "s_mu",
    "saa_step",
    "spectrum_of",
]
