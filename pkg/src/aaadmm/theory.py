"""Optimal coefficients for stationary Anderson acceleration.

An sAA(m) iteration ``x_{k+1} = (1 + sum b) q(x_k) - sum_i b_i q(x_{k-i})``
converges with the spectral radius of its block companion Jacobian. Every
eigenvalue ``lam`` of that matrix solves

    lam^(m+1) - (1 + sum b) mu lam^m + b_1 mu lam^(m-1) + ... + b_m mu = 0

for some eigenvalue ``mu`` of the fixed-point Jacobian ``q'``. For ``m = 1`` the
optimal coefficient has closed forms (real spectra) or a lower bound (complex
spectra); for ``m >= 2`` it is found by grid search.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .jacobian import Spectrum

EQUALITY_TOL = 1e-6
DEDUP_TOL = 1e-12


class TheoryDomainError(ValueError):
    """The requested closed form does not apply to the given spectrum."""


@dataclass(frozen=True)
class OptimalSAAResult:
    """Coefficients and predicted convergence factor for sAA(m).

    ``kind`` is one of ``exact_closed_form``, ``lower_bound_equality_check``,
    ``lower_bound_only`` or ``grid_optimum``. For the two lower-bound kinds,
    ``bound`` holds ``1 - sqrt(1 - rho)`` and ``factor`` the measured spectral
    radius of the companion Jacobian at ``beta``.
    """

    beta: tuple[float, ...]
    factor: float
    kind: str
    case_label: str
    circle: tuple[float, float] | None = None
    bound: float | None = None
    notes: tuple[str, ...] = ()
    grid: dict = field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.beta)

    def to_dict(self) -> dict:
        out = {
            "m": self.m,
            "beta": [float(b) for b in self.beta],
            "factor": float(self.factor),
            "kind": self.kind,
            "case_label": self.case_label,
        }
        if self.circle is not None:
            out["circle"] = {"center": float(self.circle[0]), "radius": float(self.circle[1])}
        if self.bound is not None:
            out["bound"] = float(self.bound)
        if self.notes:
            out["notes"] = list(self.notes)
        if self.grid:
            out["grid"] = dict(self.grid)
        return out


def characteristic_coefficients(mu, beta) -> np.ndarray:
    """Monic coefficients (highest degree first) of the lambda-mu polynomial."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    mu = complex(mu)
    coef = np.empty(beta.size + 2, dtype=complex)
    coef[0] = 1.0
    coef[1] = -(1.0 + beta.sum()) * mu
    coef[2:] = beta * mu
    return coef


def lambda_roots(mu, beta) -> np.ndarray:
    """All ``m + 1`` roots ``lam`` associated with one eigenvalue ``mu``."""
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if beta.size < 1:
        raise ValueError("beta must have at least one entry")
    return np.roots(characteristic_coefficients(mu, beta))


def s_mu(mu, beta):
    """Largest root modulus of ``lam^2 - (1+beta) mu lam + beta mu`` (real inputs).

    Vectorized over ``mu`` and ``beta``.
    """
    mu = np.asarray(mu, dtype=float)
    beta = np.asarray(beta, dtype=float)
    trace = (1.0 + beta) * mu
    prod = beta * mu
    disc = trace * trace - 4.0 * prod
    real_branch = 0.5 * (np.abs(trace) + np.sqrt(np.maximum(disc, 0.0)))
    complex_branch = np.sqrt(np.maximum(prod, 0.0))
    out = np.where(disc >= 0.0, real_branch, complex_branch)
    return out[()] if out.ndim == 0 else out


def _beta_from(mu: float) -> float:
    root = math.sqrt(1.0 - mu)
    return (1.0 - root) / (1.0 + root)


def optimal_beta_single_mu(mu: float) -> tuple[float, float]:
    """Minimizer and minimum of ``s_mu(mu, .)`` for one real eigenvalue."""
    mu = float(mu)
    if mu == 0.0:
        return 0.0, 0.0
    if mu >= 1.0:
        return -1.0, math.sqrt(mu)
    root = math.sqrt(1.0 - mu)
    if mu > 0.0:
        return (1.0 - root) / (1.0 + root), 1.0 - root
    return (1.0 - root) / (1.0 + root), root - 1.0


def circle_params(beta: float) -> tuple[float, float]:
    """Center and radius of the circle holding complex sAA(1) eigenvalues."""
    beta = float(beta)
    if beta == -1.0:
        raise ValueError("beta = -1 gives a degenerate circle")
    center = beta / (1.0 + beta)
    return center, abs(center)


def companion_psi(q_prime, beta) -> np.ndarray:
    """Block companion Jacobian of sAA(m) at the fixed point.

    The first block row is ``[(1 + sum b) J, -b_1 J, ..., -b_m J]``; identity
    blocks sit on the block subdiagonal.
    """
    jac = np.atleast_2d(np.asarray(q_prime, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    m = beta.size
    if m < 1:
        raise ValueError("window size must be at least 1")
    n = jac.shape[0]
    psi = np.zeros(((m + 1) * n, (m + 1) * n))
    psi[:n, :n] = (1.0 + beta.sum()) * jac
    for i, b in enumerate(beta, start=1):
        psi[:n, i * n:(i + 1) * n] = -b * jac
    for i in range(m):
        psi[(i + 1) * n:(i + 2) * n, i * n:(i + 1) * n] = np.eye(n)
    return psi


def _eigenvalues(spectrum) -> np.ndarray:
    if isinstance(spectrum, Spectrum):
        return spectrum.eigenvalues
    return np.asarray(spectrum, dtype=complex).ravel()


def reduced_eigenvalues(spectrum, tol: float = DEDUP_TOL) -> np.ndarray:
    """Eigenvalues with duplicates and lower-half-plane conjugates removed.

    Root moduli of the characteristic polynomial are invariant under
    conjugating ``mu``, so one member of each conjugate pair suffices.
    """
    eigs = _eigenvalues(spectrum)
    if eigs.size == 0:
        return eigs
    upper = eigs.real + 1j * np.abs(eigs.imag)
    scale = max(1.0, float(np.abs(upper).max()))
    keys = np.round(upper / (tol * scale))
    _, idx = np.unique(np.stack([keys.real, keys.imag], axis=1), axis=0, return_index=True)
    return upper[np.sort(idx)]


def spectrum_of_psi(spectrum, beta) -> np.ndarray:
    """Eigenvalues of the sAA companion Jacobian via the lambda-mu relation."""
    eigs = _eigenvalues(spectrum)
    if eigs.size == 0:
        return eigs
    return np.concatenate([lambda_roots(mu, beta) for mu in eigs])


def rho_saa(spectrum, beta, backend=None) -> float:
    """Spectral radius of the sAA(m) companion Jacobian for coefficients ``beta``."""
    mus = reduced_eigenvalues(spectrum)
    if mus.size == 0:
        return 0.0
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    return float(kernels.max_root_modulus_grid(mus, beta[None, :], backend=backend)[0])


def _root_pair(sigma: float, beta: float, sign: int) -> float:
    disc = max((1.0 + beta) ** 2 * sigma**2 - 4.0 * beta * sigma, 0.0)
    return (sign * (1.0 + beta) * sigma + math.sqrt(disc)) / 2.0


def _real_case(smin: float, smax: float) -> tuple[float, float, str]:
    if smin >= 0.0:
        if smax == 0.0:
            return 0.0, 0.0, "real_zero"
        beta, value = optimal_beta_single_mu(smax)
        return beta, value, "real_nonnegative"
    if smax <= 0.0:
        beta, value = optimal_beta_single_mu(smin)
        return beta, value, "real_nonpositive"
    if smax == -smin:
        return 0.0, smax, "mixed_a"
    if smax > -smin:
        beta_plus = _beta_from(smax)
        target = 1.0 - math.sqrt(1.0 - smax)
        if _root_pair(smin, beta_plus, -1) <= target:
            return beta_plus, target, "mixed_b1"
        m_plus = (smax - smin) / math.sqrt(-2.0 * smax * smin * (smax + smin))
        beta = (m_plus - math.sqrt(max(m_plus**2 - 4.0, 0.0))) ** 2 / 4.0
        return beta, _root_pair(smax, beta, 1), "mixed_b2"
    beta_minus = _beta_from(smin)
    target = math.sqrt(1.0 - smin) - 1.0
    if _root_pair(smax, beta_minus, 1) <= target:
        return beta_minus, target, "mixed_c1"
    m_minus = (smax - smin) / math.sqrt(2.0 * smax * smin * (smax + smin))
    beta = -((math.sqrt(m_minus**2 + 4.0) - m_minus) ** 2) / 4.0
    return beta, _root_pair(smax, beta, 1), "mixed_c2"


def optimal_saa1(spectrum: Spectrum) -> OptimalSAAResult:
    """Optimal sAA(1) coefficient for a fixed-point Jacobian spectrum.

    Real spectra in (-1, 1) use the closed forms, including the mixed-sign
    subcases. Complex spectra whose radius is attained by a real eigenvalue get
    the lower-bound coefficient, followed by a numerical check of whether the
    bound is attained. Otherwise the bound coefficient is returned without any
    optimality claim.

    Raises
    ------
    TheoryDomainError
        If the spectral radius is not below one.
    """
    rho = spectrum.spectral_radius
    if not rho < 1.0:
        raise TheoryDomainError(f"spectral radius {rho:.6g} is not below 1")

    if spectrum.is_real:
        beta, factor, label = _real_case(spectrum.sigma_min, spectrum.sigma_max)
        return OptimalSAAResult(
            beta=(beta,),
            factor=factor,
            kind="exact_closed_form",
            case_label=label,
            circle=circle_params(beta),
        )

    beta = _beta_from(rho)
    bound = 1.0 - math.sqrt(1.0 - rho)
    measured = rho_saa(spectrum, [beta])
    mu_plus = spectrum.mu_plus
    notes = []
    attains = mu_plus is not None and rho - mu_plus <= spectrum.imag_tolerance * max(1.0, rho)
    if attains and abs(measured - bound) <= EQUALITY_TOL:
        kind, label = "lower_bound_equality_check", "complex_real_dominant_equality"
    elif attains:
        kind, label = "lower_bound_only", "complex_real_dominant_mapped_complex_exceeds"
        notes.append(
            "mapped complex eigenvalues leave the circle and set the radius; "
            "the coefficient is not optimal and runs may diverge"
        )
    else:
        kind, label = "lower_bound_only", "complex_no_real_dominant"
        notes.append("no real eigenvalue attains the spectral radius; bound is not guaranteed")
    return OptimalSAAResult(
        beta=(beta,),
        factor=measured,
        kind=kind,
        case_label=label,
        circle=circle_params(beta),
        bound=bound,
        notes=tuple(notes),
    )


def beta_grid(lo: float, hi: float, step: float) -> np.ndarray:
    """Values ``lo, lo + step, ..., hi`` rounded to kill accumulation error."""
    if not lo < hi:
        raise ValueError("grid needs lo < hi")
    if not step > 0:
        raise ValueError("grid step must be positive")
    count = int(math.floor((hi - lo) / step + 1e-9))
    values = np.round(lo + step * np.arange(count + 1), 12)
    if values.size == 0:
        raise ValueError("empty grid")
    return values


def _sweep(mus, axes, backend) -> tuple[np.ndarray, np.ndarray]:
    grid = np.array(list(itertools.product(*axes)), dtype=float)
    values = kernels.max_root_modulus_grid(mus, grid, backend=backend)
    return grid, values


def brute_force_sweep(
    spectrum,
    m: int,
    lo: float = -1.0,
    hi: float = 1.0,
    step: float = 0.05,
    refine: bool = False,
    refine_factor: int = 5,
    backend=None,
) -> OptimalSAAResult:
    """Grid search for sAA(m) coefficients minimizing the companion radius.

    The grid is the Cartesian power of ``lo, lo + step, ..., hi`` visited in
    lexicographic order, so ties resolve to the lexicographically smallest
    coefficient vector. With ``refine`` a second grid of spacing
    ``step / refine_factor`` spanning one coarse step around the coarse optimum
    is searched as well.
    """
    if m < 1:
        raise ValueError("window size must be at least 1")
    mus = reduced_eigenvalues(spectrum)
    axis = beta_grid(lo, hi, step)
    grid, values = _sweep(mus, [axis] * m, backend)
    best = int(np.argmin(values))
    beta, factor = grid[best], float(values[best])
    info = {"lo": lo, "hi": hi, "step": step, "points": int(grid.shape[0]), "refined": False}

    if refine:
        fine = step / refine_factor
        axes = [beta_grid(b - step, b + step, fine) for b in beta]
        fgrid, fvalues = _sweep(mus, axes, backend)
        fbest = int(np.argmin(fvalues))
        info.update(refined=True, refine_step=fine, coarse_factor=factor,
                    coarse_beta=[float(b) for b in beta])
        if fvalues[fbest] < factor:
            beta, factor = fgrid[fbest], float(fvalues[fbest])

    return OptimalSAAResult(
        beta=tuple(float(b) for b in beta),
        factor=factor,
        kind="grid_optimum",
        case_label=f"grid_m{m}",
        grid=info,
    )
