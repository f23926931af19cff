"""Proximal operators and projections used by the z-updates."""

import numpy as np


def prox_l1(v, t):
    """Soft thresholding ``sign(v) * max(|v| - t, 0)``, the prox of ``t ||.||_1``."""
    if not t > 0:
        raise ValueError("threshold must be positive")
    v = np.asarray(v, dtype=float)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def project_box(v, lo, hi):
    """Componentwise clamp onto ``[lo, hi]``."""
    if not lo < hi:
        raise ValueError("box needs lo < hi")
    return np.clip(np.asarray(v, dtype=float), lo, hi)


def project_nonneg(v):
    """Projection onto the nonnegative orthant."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)
