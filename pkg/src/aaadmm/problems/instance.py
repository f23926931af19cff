"""Benchmark problem instances: seeded generation and a plain-text file format.

Instance file layout::

    # aaadmm instance v1
    kind = lasso
    seed = 0
    ...                          (one ``key = value`` line per scalar field)
    [data_matrix coo 150 300 45] (then ``row col value`` per nonzero)
    [data_matrix dense 60 20]    (or one whitespace-separated row per line)
    [rhs 150]                    (then one value per line)

Floats are written with ``repr`` so a reload reproduces every bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

KINDS = ("ridge", "reg_logistic", "total_variation", "lasso", "nnls", "box_logistic", "scalar_l1")
LOGISTIC_KINDS = ("reg_logistic", "box_logistic")
HEADER = "# aaadmm instance v1"

DEFAULTS = {
    "ridge": dict(m=150, n=300, density=0.001, reg_lambda=1.0, penalty_rho=10.0),
    "lasso": dict(m=150, n=300, density=0.001, reg_lambda=1.0, penalty_rho=10.0),
    "nnls": dict(m=150, n=300, density=0.001, reg_lambda=0.0, penalty_rho=2.0),
    "total_variation": dict(m=999, n=1000, density=1.0, reg_lambda=0.0, penalty_rho=10.0),
    "reg_logistic": dict(m=200, n=40, density=1.0, reg_lambda=2.0, penalty_rho=10.0),
    "box_logistic": dict(m=200, n=40, density=1.0, reg_lambda=2.0, penalty_rho=10.0),
    "scalar_l1": dict(m=1, n=1, density=1.0, reg_lambda=1.0, penalty_rho=10.0),
}
PARAM_KEYS = ("reg_lambda", "penalty_rho", "smoothing_alpha", "box_lo", "box_hi",
              "scaled_projection", "feature_scale", "flip_rate")


class InstanceError(ValueError):
    """Invalid problem parameters or a malformed instance file."""


@dataclass(eq=False)
class ProblemInstance:
    """Data and parameters of one benchmark problem.

    ``data_matrix`` is ``A`` (ridge, lasso), ``F`` (nnls), the feature matrix
    without bias column (logistic kinds) or the difference operator ``D``
    (total variation). ``rhs`` holds ``b``, ``g``, the +-1 labels or ``y``.
    """

    kind: str
    data_matrix: object
    rhs: np.ndarray
    reg_lambda: float = 0.0
    smoothing_alpha: float = 0.0
    penalty_rho: float = 1.0
    seed: int = 0
    density: float = 1.0
    box_lo: float = -1.0
    box_hi: float = 1.0
    scaled_projection: bool = False
    feature_scale: float = 1.0
    flip_rate: float = 0.1
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InstanceError(f"unknown problem kind {self.kind!r}")
        if not self.penalty_rho > 0:
            raise InstanceError("penalty_rho must be positive")
        if self.reg_lambda < 0 or self.smoothing_alpha < 0:
            raise InstanceError("regularization parameters must be nonnegative")
        if not 0 < self.density <= 1:
            raise InstanceError("density must lie in (0, 1]")
        if not self.box_lo < self.box_hi:
            raise InstanceError("box needs box_lo < box_hi")
        self.rhs = np.asarray(self.rhs, dtype=float).ravel()
        rows, cols = self.data_matrix.shape
        if self.kind == "total_variation":
            if rows != cols - 1:
                raise InstanceError("total variation needs an (n-1) x n difference operator")
            if self.rhs.size != cols:
                raise InstanceError("total variation data y must have length n")
        elif self.rhs.size != rows:
            raise InstanceError(f"rhs has length {self.rhs.size}, expected {rows}")
        if self.kind in LOGISTIC_KINDS and not np.all(np.isin(self.rhs, (-1.0, 1.0))):
            raise InstanceError("logistic labels must be +-1")

    @property
    def shape(self):
        return self.data_matrix.shape

    @property
    def is_sparse(self):
        return sp.issparse(self.data_matrix)

    def dense_matrix(self) -> np.ndarray:
        return self.data_matrix.toarray() if self.is_sparse else np.asarray(self.data_matrix)

    def with_params(self, **changes):
        return replace(self, **changes)

    def scalar_fields(self) -> dict:
        rows, cols = self.shape
        return {
            "kind": self.kind,
            "seed": int(self.seed),
            "rows": rows,
            "cols": cols,
            "density": float(self.density),
            "reg_lambda": float(self.reg_lambda),
            "smoothing_alpha": float(self.smoothing_alpha),
            "penalty_rho": float(self.penalty_rho),
            "box_lo": float(self.box_lo),
            "box_hi": float(self.box_hi),
            "scaled_projection": bool(self.scaled_projection),
            "feature_scale": float(self.feature_scale),
            "flip_rate": float(self.flip_rate),
        }


def difference_operator(n: int):
    """Sparse forward difference ``D`` with rows ``(.., -1, 1, ..)``, shape (n-1, n)."""
    if n < 2:
        raise InstanceError("difference operator needs n >= 2")
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")


def _sparse(rng, m, n, density, sampler):
    mat = sp.random(m, n, density=density, random_state=rng, data_rvs=sampler, format="csr")
    mat.sort_indices()
    return mat


def generate_instance(kind, m=None, n=None, density=None, seed=0, params=None) -> ProblemInstance:
    """Seeded synthetic instance; unspecified sizes and parameters use the defaults.

    ridge and nnls draw standard-normal sparse matrices, lasso uniform [0, 1)
    sparse entries, total variation a standard-normal signal ``y`` with
    ``alpha = 0.001 * ||y||_inf``. The logistic kinds draw dense
    standard-normal features (times ``feature_scale``) and labels from a random
    hyperplane with a fraction ``flip_rate`` flipped.
    """
    if kind not in KINDS:
        raise InstanceError(f"unknown problem kind {kind!r}")
    params = dict(params or {})
    unknown = set(params) - set(PARAM_KEYS)
    if unknown:
        raise InstanceError(f"unknown parameters {sorted(unknown)}")
    defaults = DEFAULTS[kind]
    m = int(defaults["m"] if m is None else m)
    n = int(defaults["n"] if n is None else n)
    density = float(defaults["density"] if density is None else density)
    if not 0 < density <= 1:
        raise InstanceError("density must lie in (0, 1]")
    if m < 1 or n < 1:
        raise InstanceError("dimensions must be positive")
    if seed is None or int(seed) < 0:
        raise InstanceError("seed must be a nonnegative integer")
    seed = int(seed)
    rng = np.random.default_rng(seed)
    fields = dict(
        reg_lambda=params.pop("reg_lambda", defaults["reg_lambda"]),
        penalty_rho=params.pop("penalty_rho", defaults["penalty_rho"]),
    )

    if kind in ("ridge", "nnls"):
        mat = _sparse(rng, m, n, density, rng.standard_normal)
        rhs = rng.standard_normal(m)
    elif kind == "lasso":
        mat = _sparse(rng, m, n, density, rng.random)
        rhs = rng.standard_normal(m)
    elif kind == "total_variation":
        rhs = rng.standard_normal(n)
        mat = difference_operator(n)
        fields["smoothing_alpha"] = params.pop("smoothing_alpha", 0.001 * float(np.max(np.abs(rhs))))
    elif kind in LOGISTIC_KINDS:
        scale = float(params.pop("feature_scale", 1.0))
        flip = float(params.pop("flip_rate", 0.1))
        if not 0 <= flip < 1:
            raise InstanceError("flip_rate must lie in [0, 1)")
        mat = scale * rng.standard_normal((m, n))
        truth = rng.standard_normal(n)
        offset = rng.standard_normal()
        rhs = np.where(mat @ truth + scale * offset >= 0, 1.0, -1.0)
        rhs[rng.random(m) < flip] *= -1.0
        fields.update(feature_scale=scale, flip_rate=flip)
    else:  # scalar_l1: min 0.5 x^2 + lambda |x|
        mat = np.ones((1, 1))
        rhs = np.zeros(1)
    fields.update(params)
    return ProblemInstance(kind=kind, data_matrix=mat, rhs=rhs, seed=seed, density=density, **fields)


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_instance(instance: ProblemInstance, path):
    """Write ``instance`` in the text format described in the module docstring."""
    lines = [HEADER]
    for key, value in instance.scalar_fields().items():
        lines.append(f"{key} = {_format_value(value)}")
    rows, cols = instance.shape
    if instance.is_sparse:
        coo = instance.data_matrix.tocoo()
        lines.append(f"[data_matrix coo {rows} {cols} {coo.nnz}]")
        lines.extend(f"{i} {j} {repr(float(v))}" for i, j, v in zip(coo.row, coo.col, coo.data))
    else:
        lines.append(f"[data_matrix dense {rows} {cols}]")
        for row in np.asarray(instance.data_matrix, dtype=float):
            lines.append(" ".join(repr(float(v)) for v in row))
    lines.append(f"[rhs {instance.rhs.size}]")
    lines.extend(repr(float(v)) for v in instance.rhs)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


_INT_KEYS = {"seed", "rows", "cols"}
_BOOL_KEYS = {"scaled_projection"}


def _parse_scalar(key, text):
    if key == "kind":
        return text
    if key in _INT_KEYS:
        return int(text)
    if key in _BOOL_KEYS:
        if text not in ("true", "false"):
            raise InstanceError(f"{key} must be true or false")
        return text == "true"
    value = float(text)
    if not math.isfinite(value):
        raise InstanceError(f"{key} is not finite")
    return value


def read_instance(path) -> ProblemInstance:
    """Load an instance written by :func:`write_instance`."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0].strip() != HEADER:
        raise InstanceError(f"{path}: missing header {HEADER!r}")
    scalars = {}
    pos = 1
    while pos < len(lines) and not lines[pos].startswith("["):
        line = lines[pos].strip()
        pos += 1
        if not line or line.startswith("#"):
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise InstanceError(f"{path}: malformed line {line!r}")
        scalars[key] = _parse_scalar(key, value)
    try:
        rows, cols = scalars.pop("rows"), scalars.pop("cols")
        kind = scalars.pop("kind")
    except KeyError as exc:
        raise InstanceError(f"{path}: missing field {exc}") from None

    def block(expected):
        nonlocal pos
        if pos >= len(lines):
            raise InstanceError(f"{path}: missing [{expected}] block")
        tokens = lines[pos].strip("[]").split()
        pos += 1
        if tokens[0] != expected:
            raise InstanceError(f"{path}: expected [{expected}], found {tokens[0]!r}")
        return tokens[1:]

    spec = block("data_matrix")
    try:
        if spec[0] == "coo":
            nnz = int(spec[3])
            entries = [lines[pos + i].split() for i in range(nnz)]
            pos += nnz
            ii = np.array([int(e[0]) for e in entries], dtype=int)
            jj = np.array([int(e[1]) for e in entries], dtype=int)
            vv = np.array([float(e[2]) for e in entries])
            matrix = sp.csr_matrix((vv, (ii, jj)), shape=(rows, cols))
            matrix.sort_indices()
        elif spec[0] == "dense":
            matrix = np.array([[float(t) for t in lines[pos + i].split()] for i in range(rows)])
            pos += rows
            if matrix.shape != (rows, cols):
                raise InstanceError(f"{path}: dense block has shape {matrix.shape}")
        else:
            raise InstanceError(f"{path}: unknown matrix storage {spec[0]!r}")
        count = int(block("rhs")[0])
        rhs = np.array([float(lines[pos + i]) for i in range(count)])
    except (IndexError, ValueError) as exc:
        if isinstance(exc, InstanceError):
            raise
        raise InstanceError(f"{path}: truncated or malformed block ({exc})") from None
    return ProblemInstance(kind=kind, data_matrix=matrix, rhs=rhs, **scalars)
