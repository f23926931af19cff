"""Fixed-point iteration ``x_{k+1} = q(x_k)`` with error tracking.

A :class:`FixedPointMap` wraps one sweep of an iterative method. The drivers
here record an :class:`IterationTrace` of error norms and optional ADMM
residuals, and :func:`estimate_convergence_factor` turns the tail of a trace
into an observed root-linear convergence factor.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

BLOWUP_CEILING = 1e12
DEFAULT_WINDOW = 20
FLOOR_MULTIPLE = 100.0
STAGNATION_ITERS = 50
TRACE_HEADER = ("k", "error_norm", "primal_residual", "dual_residual")

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
DIVERGED = "diverged"


class ContractViolation(ValueError):
    """A map or vector does not have the declared dimension."""


class DivergenceError(RuntimeError):
    """Raised when an iteration that must converge produces non-finite values."""

    def __init__(self, message, last_residual=None):
        super().__init__(message)
        self.last_residual = last_residual


@dataclass
class FixedPointMap:
    """One sweep ``x -> q(x)`` over vectors of length ``dimension``.

    ``residual_hooks(x, qx)`` may return ``(primal, dual)`` residual norms of
    the sweep that produced ``qx`` from ``x``.
    """

    dimension: int
    evaluate: Callable[[np.ndarray], np.ndarray]
    residual_hooks: Optional[Callable[[np.ndarray, np.ndarray], tuple]] = None
    name: str = ""

    def __post_init__(self):
        if int(self.dimension) < 1:
            raise ContractViolation("dimension must be positive")
        self.dimension = int(self.dimension)

    def __call__(self, x):
        x = self.check(x)
        qx = np.asarray(self.evaluate(x), dtype=float)
        if qx.shape != (self.dimension,):
            raise ContractViolation(
                f"map returned shape {qx.shape}, expected ({self.dimension},)"
            )
        return qx

    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,):
            raise ContractViolation(f"vector of shape {x.shape}, expected ({self.dimension},)")
        return x


@dataclass(frozen=True)
class TraceRecord:
    k: int
    error: float
    primal: Optional[float] = None
    dual: Optional[float] = None


@dataclass
class IterationTrace:
    """Per-iteration error norms plus how the run ended.

    ``floor`` is the accuracy of the reference the errors were measured
    against (0 when unknown); ratio estimates ignore errors near it.
    """

    records: list = field(default_factory=list)
    terminal_status: str = MAX_ITERATIONS
    floor: float = 0.0
    x_final: Optional[np.ndarray] = None
    label: str = ""

    def __len__(self):
        return len(self.records)

    @property
    def errors(self) -> np.ndarray:
        return np.array([r.error for r in self.records], dtype=float)

    @property
    def iterations(self) -> int:
        return self.records[-1].k if self.records else 0

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(TRACE_HEADER)
            for r in self.records:
                writer.writerow([r.k, _fmt(r.error), _fmt(r.primal), _fmt(r.dual)])

    @classmethod
    def read_csv(cls, path, terminal_status=MAX_ITERATIONS, floor=0.0):
        records = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != TRACE_HEADER:
                raise ValueError(f"unexpected trace header {header}")
            for row in reader:
                records.append(TraceRecord(int(row[0]), float(row[1]), _parse(row[2]), _parse(row[3])))
        return cls(records=records, terminal_status=terminal_status, floor=floor)


def _fmt(value):
    return "" if value is None else format(float(value), ".17g")


def _parse(cell):
    return None if cell == "" else float(cell)


@dataclass(frozen=True)
class ConvergenceEstimate:
    """Geometric mean of trailing error ratios.

    ``factor`` is NaN when fewer than two usable records exist.
    """

    factor: float
    window: int
    reliable: bool
    ratios_used: int = 0

    def describe(self) -> str:
        if math.isnan(self.factor):
            return "unreliable"
        return format(self.factor, ".6g") + ("" if self.reliable else " (unreliable)")


def drive(fpmap, x0, step, max_iter, tol, reference=None, ceiling=BLOWUP_CEILING, floor=0.0):
    """Run ``x_{k+1} = step(k, x_k, q(x_k))`` and record a trace.

    ``step`` sees the map value already computed for the current iterate so
    that every scheme costs one map evaluation per iteration. The error column
    is ``||x_k - reference||`` when a reference is given and the residual
    ``||q(x_k) - x_k||`` otherwise.
    """
    if max_iter < 0:
        raise ValueError("max_iter must be nonnegative")
    x = fpmap.check(x0).copy()
    if reference is not None:
        reference = fpmap.check(reference)
    trace = IterationTrace(floor=floor)
    for k in range(max_iter + 1):
        qx = fpmap(x)
        err = float(np.linalg.norm(x - reference)) if reference is not None else float(np.linalg.norm(qx - x))
        if not math.isfinite(err):
            trace.terminal_status = DIVERGED
            break
        primal = dual = None
        if fpmap.residual_hooks is not None and np.all(np.isfinite(qx)):
            primal, dual = (float(v) for v in fpmap.residual_hooks(x, qx))
        trace.records.append(TraceRecord(k, err, primal, dual))
        trace.x_final = x
        if err > ceiling:
            trace.terminal_status = DIVERGED
            break
        if err <= tol:
            trace.terminal_status = CONVERGED
            break
        if k == max_iter:
            trace.terminal_status = MAX_ITERATIONS
            break
        x = step(k, x, qx)
    return trace


def _plain_step(k, x, qx):
    return qx


def iterate(fpmap, x0, max_iter, tol, reference=None, ceiling=BLOWUP_CEILING, floor=0.0):
    """Plain fixed-point iteration; see :func:`drive` for the error column."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return drive(fpmap, x0, _plain_step, max_iter, tol, reference, ceiling, floor)


@dataclass(frozen=True)
class ReferenceInfo:
    x: np.ndarray
    final_step: float
    iterations: int
    reason: str


def reference_solution_info(fpmap, x0, floor_tol=1e-16, max_iter=200000) -> ReferenceInfo:
    """Iterate to step norm ``max(floor_tol, 50 eps ||x||)`` or until stagnation.

    Stagnation means the smallest step norm seen has not decreased for
    ``STAGNATION_ITERS`` consecutive iterations.
    """
    if floor_tol <= 0:
        raise ValueError("floor_tol must be positive")
    x = fpmap.check(x0).copy()
    eps = np.finfo(float).eps
    best = math.inf
    since_best = 0
    step = math.inf
    for it in range(1, max_iter + 1):
        qx = fpmap(x)
        new_step = float(np.linalg.norm(qx - x))
        if not math.isfinite(new_step):
            raise DivergenceError(
                f"reference iteration diverged at iteration {it}; last finite step norm {step:.3g}",
                last_residual=step,
            )
        step = new_step
        x = qx
        if step <= max(floor_tol, 50.0 * eps * float(np.linalg.norm(x))):
            return ReferenceInfo(x, step, it, "tolerance")
        if step < best:
            best, since_best = step, 0
        else:
            since_best += 1
            if since_best >= STAGNATION_ITERS:
                return ReferenceInfo(x, step, it, "stagnation")
    return ReferenceInfo(x, step, max_iter, "max_iterations")


def reference_solution(fpmap, x0, floor_tol=1e-16, max_iter=200000) -> np.ndarray:
    """Fixed point to near machine precision; see :func:`reference_solution_info`."""
    return reference_solution_info(fpmap, x0, floor_tol, max_iter).x


def estimate_convergence_factor(trace, window=DEFAULT_WINDOW, floor=None) -> ConvergenceEstimate:
    """Observed root-linear factor from the last ``window`` error ratios.

    ``trace`` is an :class:`IterationTrace` or a plain sequence of errors.

    Only the leading run of records with error above ``100 * floor`` is used,
    so the rounding plateau at the end of a converged run is ignored.
    """
    if window < 2:
        raise ValueError("window must be at least 2")
    if isinstance(trace, IterationTrace):
        errors = trace.errors
        floor = trace.floor if floor is None else floor
    else:
        errors = np.asarray(trace, dtype=float)
        floor = 0.0 if floor is None else floor
    threshold = FLOOR_MULTIPLE * floor
    usable = 0
    for e in errors:
        if not (e > threshold and math.isfinite(e)):
            break
        usable += 1
    if usable < 2:
        return ConvergenceEstimate(math.nan, window, False, 0)
    tail = errors[max(0, usable - window - 1):usable]
    ratios = tail[1:] / tail[:-1]
    factor = float(np.exp(np.mean(np.log(ratios))))
    return ConvergenceEstimate(factor, window, ratios.size >= window, int(ratios.size))
