"""Pure-numpy fallback for the root-modulus kernel.

Roots come from batched eigenvalues of companion matrices, so this path is
algorithmically independent of the compiled Aberth iteration.
"""

import numpy as np

_CHUNK = 20000


def _quadratic_max_modulus(b, c):
    disc = np.sqrt(b * b - 4.0 * c)
    plus, minus = -b + disc, -b - disc
    r1 = np.where(np.abs(plus) >= np.abs(minus), plus, minus) / 2.0
    a1 = np.abs(r1)
    with np.errstate(divide="ignore", invalid="ignore"):
        a2 = np.where(a1 > 0, np.abs(c) / np.where(a1 > 0, a1, 1.0), 0.0)
    return np.maximum(a1, a2)


def max_root_modulus_grid(mu_re, mu_im, betas):
    """Max root modulus over all ``mu`` for each row of ``betas``."""
    mu = np.asarray(mu_re, dtype=float) + 1j * np.asarray(mu_im, dtype=float)
    betas = np.atleast_2d(np.asarray(betas, dtype=float))
    n_grid, m = betas.shape
    out = np.zeros(n_grid)
    if mu.size == 0:
        return out
    total = betas.sum(axis=1)
    if m == 1:
        for start in range(0, n_grid, _CHUNK):
            sl = slice(start, start + _CHUNK)
            b = -(1.0 + total[sl, None]) * mu[None, :]
            c = betas[sl, 0, None] * mu[None, :]
            out[sl] = _quadratic_max_modulus(b, c).max(axis=1)
        return out

    deg = m + 1
    per_chunk = max(1, _CHUNK // mu.size)
    for start in range(0, n_grid, per_chunk):
        sl = slice(start, start + per_chunk)
        rows = betas[sl]
        count = rows.shape[0]
        comp = np.zeros((count, mu.size, deg, deg), dtype=complex)
        # first row holds -coef[1:], subdiagonal identity
        comp[:, :, 0, 0] = (1.0 + total[sl, None]) * mu[None, :]
        for i in range(m):
            comp[:, :, 0, i + 1] = -rows[:, i, None] * mu[None, :]
        idx = np.arange(deg - 1)
        comp[:, :, idx + 1, idx] = 1.0
        roots = np.linalg.eigvals(comp)
        out[sl] = np.abs(roots).max(axis=(1, 2))
    return out
