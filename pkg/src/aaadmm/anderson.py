"""Windowed and stationary Anderson acceleration for fixed-point maps.

AA(m) re-solves a small least-squares problem every iteration

    min_beta || r_k + sum_i beta_i (r_{k-i} - r_{k-i-1}) ||_2,   r = x - q(x),

and extrapolates ``x_{k+1} = q_k + sum_i beta_i (q_{k-i} - q_{k-i-1})``.
sAA(m) freezes the coefficients: ``x_{k+1} = (1 + sum b) q_k - sum_i b_i q_{k-i}``.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .fixed_point import BLOWUP_CEILING, ContractViolation, drive

RANK_RTOL = 1e-12
PROVENANCES = ("closed_form", "lower_bound_only", "grid_sweep", "user_supplied")


class WindowBuffer:
    """Most recent ``m + 1`` triples ``(x, q(x), x - q(x))``, oldest first."""

    def __init__(self, m: int):
        if m < 0:
            raise ValueError("window size must be nonnegative")
        self.m = m
        self._items = deque(maxlen=m + 1)

    def push(self, x, qx):
        x = np.asarray(x, dtype=float)
        qx = np.asarray(qx, dtype=float)
        if x.shape != qx.shape or x.ndim != 1:
            raise ContractViolation("iterate and map value must be vectors of equal length")
        if self._items and self._items[-1][0].shape != x.shape:
            raise ContractViolation("buffer entries differ in dimension")
        self._items.append((x, qx, x - qx))

    def __len__(self):
        return len(self._items)

    @property
    def xs(self):
        return [item[0] for item in self._items]

    @property
    def qs(self):
        return [item[1] for item in self._items]

    @property
    def residuals(self):
        return [item[2] for item in self._items]


def _difference_matrix(columns):
    # column i holds v_{k-i} - v_{k-i-1}
    newest_first = columns[::-1]
    return np.column_stack([newest_first[i] - newest_first[i + 1] for i in range(len(columns) - 1)])


def min_norm_lstsq(a, b, rtol=RANK_RTOL) -> np.ndarray:
    """Minimum-norm least-squares solution via pivoted QR.

    The numerical rank counts diagonal entries of ``R`` above ``rtol`` times
    the largest column norm of ``a``. Rank-deficient problems are completed to
    a complete orthogonal decomposition.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float)
    n = a.shape[1]
    colmax = float(np.max(np.linalg.norm(a, axis=0))) if a.size else 0.0
    if colmax == 0.0:
        return np.zeros(n)
    q, r, perm = scipy.linalg.qr(a, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > rtol * colmax))
    c = q[:, :rank].T @ b
    if rank == n:
        y = scipy.linalg.solve_triangular(r[:n, :n], c)
    else:
        # R[:rank] = L^T Z^T with Z orthonormal columns
        z, lower_t = scipy.linalg.qr(r[:rank, :].T, mode="economic")
        w = scipy.linalg.solve_triangular(lower_t.T, c, lower=True)
        y = z @ w
    out = np.empty(n)
    out[perm] = y
    return out


def aa_coefficients(buffer: WindowBuffer) -> np.ndarray:
    """Coefficients ``beta_0 .. beta_{m_k - 1}`` of the AA least-squares problem."""
    if len(buffer) < 2:
        raise ValueError("buffer needs at least two entries")
    res = buffer.residuals
    return min_norm_lstsq(_difference_matrix(res), -res[-1])


def aa_objective(buffer: WindowBuffer, beta) -> float:
    """Squared norm minimized by :func:`aa_coefficients`."""
    res = buffer.residuals
    v = res[-1] + _difference_matrix(res) @ np.asarray(beta, dtype=float)
    return float(v @ v)


def aa_step(buffer: WindowBuffer) -> np.ndarray:
    """AA extrapolation from the buffered history; ``q(x_k)`` when only one entry."""
    if len(buffer) == 0:
        raise ValueError("empty buffer")
    qs = buffer.qs
    if len(buffer) == 1:
        return qs[-1]
    beta = aa_coefficients(buffer)
    return qs[-1] + _difference_matrix(qs) @ beta


@dataclass(frozen=True)
class SAAPlan:
    """Fixed sAA(m) coefficients with their predicted factor and origin."""

    beta: tuple
    predicted_factor: float = float("nan")
    provenance: str = "user_supplied"

    def __post_init__(self):
        beta = tuple(float(b) for b in np.atleast_1d(self.beta))
        if len(beta) < 1:
            raise ValueError("sAA needs at least one coefficient")
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "beta", beta)

    @property
    def m(self) -> int:
        return len(self.beta)

    @classmethod
    def from_result(cls, result):
        """Plan from a theory result (``OptimalSAAResult``)."""
        provenance = {
            "exact_closed_form": "closed_form",
            "lower_bound_equality_check": "closed_form",
            "lower_bound_only": "lower_bound_only",
            "grid_optimum": "grid_sweep",
        }[result.kind]
        return cls(tuple(result.beta), float(result.factor), provenance)


def saa_step(qs, plan: SAAPlan) -> np.ndarray:
    """Stationary step from map values ``qs`` (oldest first, newest last).

    With fewer than ``m + 1`` values the window is truncated to the
    coefficients that fit the available history.
    """
    if not qs:
        raise ValueError("empty history")
    mk = min(plan.m, len(qs) - 1)
    newest = qs[-1]
    if mk == 0:
        return newest
    beta = plan.beta[:mk]
    out = (1.0 + sum(beta)) * newest
    for i, b in enumerate(beta, start=1):
        other = qs[-1 - i]
        if other.shape != newest.shape:
            raise ContractViolation("history entries differ in dimension")
        out = out - b * other
    return out


_SCHEME_RE = re.compile(r"^\s*(plain|AA|sAA)\s*(?:\(\s*(\d+)\s*\))?\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class Scheme:
    """``plain``, ``AA(m)`` or ``sAA(plan)``."""

    kind: str
    m: int = 0
    plan: Optional[SAAPlan] = None

    def __post_init__(self):
        if self.kind not in ("plain", "aa", "saa"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "saa":
            if self.plan is None:
                raise ValueError("sAA scheme needs a plan")
            object.__setattr__(self, "m", self.plan.m)

    @classmethod
    def plain(cls):
        return cls("plain")

    @classmethod
    def aa(cls, m: int):
        return cls("aa", int(m))

    @classmethod
    def saa(cls, plan: SAAPlan):
        return cls("saa", plan.m, plan)

    @property
    def label(self) -> str:
        if self.kind == "plain":
            return "plain"
        return f"{'AA' if self.kind == 'aa' else 'sAA'}({self.m})"

    @staticmethod
    def parse(text: str):
        """Parse ``plain``, ``AA(m)`` or ``sAA(m)``; returns ``(kind, m)``."""
        match = _SCHEME_RE.match(text)
        if not match:
            raise ValueError(f"cannot parse scheme {text!r}")
        kind = match.group(1).lower()
        m = match.group(2)
        if kind == "plain":
            if m is not None:
                raise ValueError("plain takes no window size")
            return "plain", 0
        if m is None:
            raise ValueError(f"{text!r} needs a window size")
        m = int(m)
        if kind == "saa" and m < 1:
            raise ValueError("sAA window size must be at least 1")
        return kind, m


def make_stepper(scheme: Scheme):
    """Closure ``step(k, x_k, q_k) -> x_{k+1}`` for the given scheme."""
    if scheme.kind == "plain":
        return lambda k, x, qx: qx
    if scheme.kind == "aa":
        buffer = WindowBuffer(scheme.m)

        def step(k, x, qx):
            buffer.push(x, qx)
            return aa_step(buffer)

        return step
    history = deque(maxlen=scheme.plan.m + 1)

    def step(k, x, qx):
        history.append(qx)
        return saa_step(list(history), scheme.plan)

    return step


def run_accelerated(fpmap, x0, scheme: Scheme, max_iter, tol, reference=None,
                    ceiling=BLOWUP_CEILING, floor=0.0):
    """Run ``scheme`` on ``fpmap`` and record a trace like ``iterate`` does."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    trace = drive(fpmap, x0, make_stepper(scheme), max_iter, tol, reference, ceiling, floor)
    trace.label = scheme.label
    return trace
