"""Backend selection for the hot sweep kernel.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``AAADMM_PURE_PYTHON`` is set to a non-empty value, the
numpy implementation is used. Both expose ``max_root_modulus_grid``.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_compiled = None

if not os.environ.get("AAADMM_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _compiled = None


def max_root_modulus_grid(mus, betas, backend=None):
    """Largest root modulus of the stationary-AA characteristic polynomial.

    Parameters
    ----------
    mus : array_like of complex
        Eigenvalues of the fixed-point Jacobian.
    betas : array_like, shape (G, m)
        Coefficient rows; ``m`` is the window size.
    backend : {"compiled", "python"}, optional
        Force a backend. Defaults to the one selected at import.

    Returns
    -------
    ndarray, shape (G,)
        ``max_mu max|lambda|`` for each coefficient row.
    """
    mus = np.asarray(mus, dtype=complex).ravel()
    betas = np.ascontiguousarray(np.atleast_2d(np.asarray(betas, dtype=float)))
    mu_re = np.ascontiguousarray(mus.real)
    mu_im = np.ascontiguousarray(mus.imag)
    chosen = backend or BACKEND
    if chosen == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel is not available")
        return _compiled.max_root_modulus_grid(mu_re, mu_im, betas)
    if chosen != "python":
        raise ValueError(f"unknown backend {chosen!r}")
    return _kernels_py.max_root_modulus_grid(mu_re, mu_im, betas)
