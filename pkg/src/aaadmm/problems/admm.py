"""ADMM sweeps for the benchmark problems, written as fixed-point maps.

Every problem uses the constraint ``K x - z = 0`` with ``K = I`` or, for total
variation, ``K = D``. One scaled-form sweep from ``(z, u)`` is

    x+ = x_step(z - u)
    w  = K x+ + u
    z+ = z_step(w)
    u+ = w - z+            (= u + K x+ - z+)

Ridge and regularized logistic regression keep ``u = (2 lambda / rho) z``
after the first sweep, so they are iterated over ``z`` alone; the remaining
problems iterate over the stack ``[z; u]``.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.special import expit

from ..fixed_point import FixedPointMap
from .instance import LOGISTIC_KINDS, ProblemInstance
from .newton import newton_inner_solve
from .prox import project_box, project_nonneg, prox_l1

Z_ONLY_KINDS = ("ridge", "reg_logistic")
NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50


@dataclass
class ADMMState:
    x: np.ndarray
    z: np.ndarray
    u: np.ndarray


class ADMMOperator:
    """Cached factorizations and the x-/z-steps for one instance."""

    def __init__(self, instance: ProblemInstance):
        self.instance = instance
        self.kind = instance.kind
        self.rho = float(instance.penalty_rho)
        self.lam = float(instance.reg_lambda)
        mat = instance.data_matrix
        rho = self.rho
        if self.kind == "total_variation":
            self.K = sp.csr_matrix(mat)
            self.n = mat.shape[1]
            self.c = mat.shape[0]
            # I + rho D^T D is tridiagonal: upper banded storage for cholesky_banded
            n = self.n
            diag = np.full(n, 1.0 + 2.0 * rho)
            diag[0] = diag[-1] = 1.0 + rho
            band = np.zeros((2, n))
            band[0, 1:] = -rho
            band[1] = diag
            self._band = scipy.linalg.cholesky_banded(band)
            self._y = instance.rhs
        elif self.kind in LOGISTIC_KINDS:
            feats = instance.dense_matrix()
            samples = feats.shape[0]
            self.n = self.c = feats.shape[1] + 1
            self.K = None
            # rows y_i [1, a_i]; x = [c; w]
            self._ya = instance.rhs[:, None] * np.hstack([np.ones((samples, 1)), feats])
            self._inv_m = 1.0 / samples
            self._ridge = 2.0 * self.lam if self.kind == "box_logistic" else 0.0
        else:
            dense = instance.dense_matrix()
            self.n = self.c = dense.shape[1]
            self.K = None
            weight = 2.0 if self.kind == "nnls" else 1.0
            gram = weight * dense.T @ dense
            gram[np.diag_indices_from(gram)] += rho
            self._chol = scipy.linalg.cho_factor(gram)
            self._atb = weight * dense.T @ instance.rhs

    # x-updates -----------------------------------------------------------
    def x_step(self, v):
        """Minimizer of ``f1(x) + rho/2 ||K x - v||^2``."""
        rho = self.rho
        if self.kind == "total_variation":
            rhs = self._y + rho * (self.K.T @ v)
            return scipy.linalg.cho_solve_banded((self._band, False), rhs)
        if self.kind in LOGISTIC_KINDS:
            return self._logistic_x(v)
        return scipy.linalg.cho_solve(self._chol, self._atb + rho * v)

    def _logistic_x(self, v):
        ya, inv_m, ridge, rho = self._ya, self._inv_m, self._ridge, self.rho

        def gradient(x):
            s = expit(-(ya @ x))
            return -inv_m * (ya.T @ s) + ridge * x + rho * (x - v)

        def hessian(x):
            s = expit(-(ya @ x))
            h = inv_m * (ya.T * (s * (1.0 - s))) @ ya
            h[np.diag_indices_from(h)] += ridge + rho
            return h

        return newton_inner_solve(gradient, hessian, v, NEWTON_TOL, NEWTON_MAX_ITER)

    def apply_k(self, x):
        return x if self.K is None else self.K @ x

    # z-updates -----------------------------------------------------------
    def threshold(self) -> float:
        """Soft-threshold level of the l1 z-step (lasso-type and TV)."""
        if self.kind == "total_variation":
            return self.instance.smoothing_alpha / self.rho
        return self.lam / self.rho

    def z_step(self, w):
        kind, rho = self.kind, self.rho
        if kind in Z_ONLY_KINDS:
            return rho / (2.0 * self.lam + rho) * w
        if kind in ("lasso", "scalar_l1", "total_variation"):
            return prox_l1(w, self.threshold())
        if kind == "nnls":
            z = project_nonneg(w)
        else:
            z = project_box(w, self.instance.box_lo, self.instance.box_hi)
        return z / rho if self.instance.scaled_projection else z

    # full sweep ----------------------------------------------------------
    def sweep(self, z, u) -> ADMMState:
        x = self.x_step(z - u)
        w = self.apply_k(x) + u
        z_new = self.z_step(w)
        return ADMMState(x=x, z=z_new, u=w - z_new)

    def prox_argument(self, z, u) -> np.ndarray:
        """``K x+ + u``, the argument of the z-step."""
        return self.apply_k(self.x_step(z - u)) + u

    # state packing -------------------------------------------------------
    @property
    def z_only(self) -> bool:
        return self.kind in Z_ONLY_KINDS

    def u_from_z(self, z):
        return (2.0 * self.lam / self.rho) * z

    def unpack(self, vec, stacked=None):
        stacked = (not self.z_only) if stacked is None else stacked
        if stacked:
            return vec[:self.c], vec[self.c:]
        return vec, self.u_from_z(vec)

    def dimension(self, stacked=None) -> int:
        stacked = (not self.z_only) if stacked is None else stacked
        return 2 * self.c if stacked else self.c


_OPERATORS: "weakref.WeakKeyDictionary[ProblemInstance, ADMMOperator]" = weakref.WeakKeyDictionary()


def get_operator(instance: ProblemInstance) -> ADMMOperator:
    """The cached operator of ``instance`` (factorized once)."""
    op = _OPERATORS.get(instance)
    if op is None:
        op = ADMMOperator(instance)
        _OPERATORS[instance] = op
    return op


def residual_norms(instance, state_before, state_after, stacked=None):
    """Primal ``||K x+ - z+||`` and dual ``rho ||K^T (z+ - z)||`` residual norms.

    States are fixed-point vectors (``z`` or ``[z; u]``) of consecutive sweeps.
    """
    op = get_operator(instance)
    z0, u0 = op.unpack(np.asarray(state_before, dtype=float), stacked)
    z1, u1 = op.unpack(np.asarray(state_after, dtype=float), stacked)
    dz = z1 - z0
    if op.K is not None:
        dz = op.K.T @ dz
    return float(np.linalg.norm(u1 - u0)), float(op.rho * np.linalg.norm(dz))


def build_fpi(instance: ProblemInstance, stacked=None) -> FixedPointMap:
    """One ADMM sweep as a fixed-point map.

    ``stacked`` forces the ``[z; u]`` form for ridge or regularized logistic
    regression; the other kinds are always stacked.
    """
    op = get_operator(instance)
    if stacked is False and not op.z_only:
        raise ValueError(f"{instance.kind} has no z-only reduction")
    stacked = (not op.z_only) if stacked is None else bool(stacked)
    c = op.c

    if stacked:
        def evaluate(vec):
            state = op.sweep(vec[:c], vec[c:])
            return np.concatenate([state.z, state.u])
    else:
        def evaluate(z):
            return op.sweep(z, op.u_from_z(z)).z

    def hooks(before, after):
        return residual_norms(instance, before, after, stacked)

    return FixedPointMap(op.dimension(stacked), evaluate, hooks, name=instance.kind)


def zero_state(instance, stacked=None) -> np.ndarray:
    """Zero initial guess of the fixed-point iteration."""
    return np.zeros(get_operator(instance).dimension(stacked))


def ridge_iteration_matrix(instance):
    """``M`` and ``b_hat`` of the affine z-only ridge map ``q(z) = M z + b_hat``."""
    if instance.kind != "ridge":
        raise ValueError("iteration matrix is defined for ridge only")
    op = get_operator(instance)
    rho, lam = op.rho, op.lam
    r = scipy.linalg.cho_solve(op._chol, np.eye(op.n))
    m = (rho * (rho - 2 * lam) / (rho + 2 * lam)) * r + (2 * lam / (rho + 2 * lam)) * np.eye(op.n)
    b_hat = (rho / (rho + 2 * lam)) * (r @ op._atb)
    return m, b_hat


def ridge_closed_form(instance):
    """Exact ridge solution ``(A^T A + 2 lambda I)^{-1} A^T b``."""
    a = instance.dense_matrix()
    gram = a.T @ a + 2.0 * instance.reg_lambda * np.eye(a.shape[1])
    return scipy.linalg.solve(gram, a.T @ instance.rhs, assume_a="pos")
