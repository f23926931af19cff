"""Jacobians of fixed-point maps and their spectra.

``fd_jacobian`` approximates ``q'(x*)`` by finite differences.
``analytic_jacobian`` gives the piecewise closed forms for the problems where
they exist, and ``spectrum_of`` returns a classified :class:`Spectrum`.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.linalg

DEFAULT_IMAG_TOL = 1e-8
NEUTRAL_TOL = 1e-8
KINK_TOL = 1e-10
FD_STEPS = {
    "reg_logistic": 1e-4,
    "total_variation": 1e-5,
    "lasso": 1e-3,
    "nnls": 1e-3,
    "box_logistic": 1e-3,
    "scalar_l1": 1e-3,
    "ridge": 1e-3,
}


class JacobianError(RuntimeError):
    """A probe of the map produced non-finite values."""


class NondifferentiableError(ValueError):
    """The state sits on a kink of a piecewise-smooth map."""


class SpectrumError(RuntimeError):
    """Eigenvalue computation failed or was given invalid input."""


def fd_jacobian(fpmap, x_star, h, central=False, workers=None) -> np.ndarray:
    """Finite-difference Jacobian, one column per coordinate.

    Column ``j`` is ``(q(x + h e_j) - q(x)) / h``, or the central quotient
    ``(q(x + h e_j) - q(x - h e_j)) / (2h)`` with ``central=True``. Columns
    may be evaluated on ``workers`` threads; assembly is column ordered, so the
    result does not depend on the worker count.
    """
    if not h > 0:
        raise ValueError("step size must be positive")
    x = fpmap.check(x_star)
    n = fpmap.dimension
    base = None if central else fpmap(x)

    def column(j):
        e = x.copy()
        e[j] += h
        plus = fpmap(e)
        if central:
            e[j] = x[j] - h
            col = (plus - fpmap(e)) / (2.0 * h)
        else:
            col = (plus - base) / h
        if not np.all(np.isfinite(col)):
            raise JacobianError(f"non-finite map output when probing column {j}")
        return col

    jac = np.empty((n, n))
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for j, col in enumerate(pool.map(column, range(n))):
                jac[:, j] = col
    else:
        for j in range(n):
            jac[:, j] = column(j)
    return jac


def _branch_mask(w, threshold):
    gap = np.abs(np.abs(w) - threshold)
    if np.any(gap < KINK_TOL):
        j = int(np.argmin(gap))
        raise NondifferentiableError(
            f"component {j} of the prox argument lies on the threshold "
            f"(|w| = {abs(w[j]):.17g}, threshold {threshold:.17g})"
        )
    return np.abs(w) > threshold


def _piecewise_blocks(p, active):
    # rows of [[P, I - P], [P, I - P]] routed to z (active) or u (inactive)
    n = p.shape[0]
    top = np.hstack([p, np.eye(n) - p])
    jac = np.zeros((2 * n, 2 * n))
    jac[:n][active] = top[active]
    jac[n:][~active] = top[~active]
    return jac


def analytic_jacobian(instance, state) -> np.ndarray:
    """Closed-form ``q'`` for ridge, scalar_l1, lasso and total variation.

    For the l1 problems the rows follow the soft-threshold branch of each
    component of the prox argument at ``state``. ``P = rho R`` (lasso, with
    ``R = (A^T A + rho I)^-1``) or ``P = rho D R D^T`` (total variation, with
    ``R = (I + rho D^T D)^-1``) and the Jacobian is

        active rows:   z-block [P, I - P], u-block 0
        inactive rows: z-block 0,          u-block [P, I - P]

    Raises
    ------
    NondifferentiableError
        If a component lies within 1e-10 of the threshold.
    """
    from .problems.admm import get_operator, ridge_iteration_matrix

    kind = instance.kind
    if kind == "ridge":
        return ridge_iteration_matrix(instance)[0]
    if kind not in ("scalar_l1", "lasso", "total_variation"):
        raise ValueError(f"no analytic Jacobian for {kind}")
    op = get_operator(instance)
    state = np.asarray(state, dtype=float)
    if state.shape != (2 * op.c,):
        raise ValueError(f"state must have length {2 * op.c}")
    z, u = state[:op.c], state[op.c:]
    active = _branch_mask(op.prox_argument(z, u), op.threshold())
    rho = op.rho
    if kind == "total_variation":
        d = op.K.toarray()
        r = scipy.linalg.cho_solve_banded((op._band, False), np.eye(op.n))
        p = rho * d @ r @ d.T
    else:
        p = rho * scipy.linalg.cho_solve(op._chol, np.eye(op.n))
    return _piecewise_blocks(p, active)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a real matrix with their real/complex classification.

    An eigenvalue counts as real when ``|Im| <= imag_tolerance * max(1, rho)``.
    ``neutral_removed`` records how many eigenvalues equal to one were dropped
    by :meth:`without_neutral`.
    """

    eigenvalues: np.ndarray
    imag_tolerance: float = DEFAULT_IMAG_TOL
    neutral_removed: int = 0

    def __post_init__(self):
        eigs = np.asarray(self.eigenvalues, dtype=complex).ravel()
        eigs.setflags(write=False)
        object.__setattr__(self, "eigenvalues", eigs)

    def __len__(self):
        return self.eigenvalues.size

    @property
    def spectral_radius(self) -> float:
        return float(np.abs(self.eigenvalues).max()) if len(self) else 0.0

    @property
    def _real_mask(self):
        tol = self.imag_tolerance * max(1.0, self.spectral_radius)
        return np.abs(self.eigenvalues.imag) <= tol

    @property
    def is_real(self) -> bool:
        return bool(np.all(self._real_mask))

    @property
    def classification(self) -> str:
        return "real" if self.is_real else "complex"

    @property
    def real_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[self._real_mask].real

    @property
    def complex_count(self) -> int:
        return int(np.sum(~self._real_mask))

    @property
    def sigma_min(self) -> Optional[float]:
        real = self.real_eigenvalues
        return float(real.min()) if real.size else None

    @property
    def sigma_max(self) -> Optional[float]:
        real = self.real_eigenvalues
        return float(real.max()) if real.size else None

    @property
    def mu_plus(self) -> Optional[float]:
        """Largest nonnegative real eigenvalue, or None."""
        real = self.real_eigenvalues
        real = real[real >= 0]
        return float(real.max()) if real.size else None

    def without_neutral(self, tol=NEUTRAL_TOL) -> "Spectrum":
        """Drop eigenvalues within ``tol`` of one.

        Such eigenvalues belong to directions along a continuum of fixed points
        (for example coordinates of the nonnegativity projection held exactly
        at zero); they neither grow nor decay and do not set the rate.
        """
        keep = np.abs(self.eigenvalues - 1.0) > tol
        return replace(self, eigenvalues=self.eigenvalues[keep],
                       neutral_removed=self.neutral_removed + int(np.sum(~keep)))

    def summary(self) -> dict:
        out = {
            "size": len(self),
            "spectral_radius": self.spectral_radius,
            "classification": self.classification,
            "complex_count": self.complex_count,
            "imag_tolerance": self.imag_tolerance,
            "neutral_removed": self.neutral_removed,
        }
        for key in ("sigma_min", "sigma_max", "mu_plus"):
            value = getattr(self, key)
            out[key] = None if value is None else float(value)
        return out

    def write_csv(self, path):
        write_eigenvalues_csv(self.eigenvalues, path)

    @classmethod
    def read_csv(cls, path, imag_tolerance=DEFAULT_IMAG_TOL):
        return cls(read_eigenvalues_csv(path), imag_tolerance)


def write_eigenvalues_csv(values, path):
    """``re,im`` CSV with 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("re", "im"))
        for v in np.asarray(values, dtype=complex).ravel():
            writer.writerow((format(v.real, ".17g"), format(v.imag, ".17g")))


def read_eigenvalues_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != ("re", "im"):
            raise ValueError(f"unexpected spectrum header {header}")
        return np.array([complex(float(a), float(b)) for a, b in reader], dtype=complex)


def spectrum_of(matrix, imag_tolerance=DEFAULT_IMAG_TOL) -> Spectrum:
    """All eigenvalues of a dense real square matrix (LAPACK ``geev``)."""
    mat = np.asarray(matrix, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise SpectrumError(f"matrix must be square, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise SpectrumError("matrix has non-finite entries")
    try:
        eigs = np.linalg.eigvals(mat)
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(f"eigenvalue iteration did not converge: {exc}") from exc
    if not math.isfinite(float(np.abs(eigs).max(initial=0.0))):
        raise SpectrumError("eigenvalue computation returned non-finite values")
    return Spectrum(eigs, imag_tolerance)
