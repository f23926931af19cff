import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aaadmm import kernels, theory

compiled = pytest.mark.skipif(kernels._compiled is None, reason="extension not built")


def brute(mus, betas):
    return np.array([max(np.abs(theory.lambda_roots(mu, b)).max() for mu in mus) for b in betas])


@pytest.mark.parametrize("m", [1, 2, 3])
def test_python_backend_matches_roots(m, rng):
    mus = np.concatenate([rng.uniform(-0.99, 0.99, 6), 0.6 * np.exp(1j * rng.uniform(0, np.pi, 4))])
    betas = rng.uniform(-1, 1, (25, m))
    got = kernels.max_root_modulus_grid(mus, betas, backend="python")
    np.testing.assert_allclose(got, brute(mus, betas), atol=1e-9)


@compiled
@pytest.mark.parametrize("m", [1, 2, 3])
def test_compiled_matches_python(m, rng):
    mus = np.concatenate([rng.uniform(-0.99, 0.99, 20), 0.9 * np.exp(1j * rng.uniform(0, np.pi, 10)), [0.0]])
    betas = rng.uniform(-1, 1, (400, m))
    a = kernels.max_root_modulus_grid(mus, betas, backend="compiled")
    b = kernels.max_root_modulus_grid(mus, betas, backend="python")
    # multiple roots limit the attainable accuracy to ~sqrt(eps)
    np.testing.assert_allclose(a, b, atol=1e-7)


@compiled
@settings(max_examples=100, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=1.0, allow_nan=False), min_size=1, max_size=6),
       st.lists(st.floats(-1, 1), min_size=1, max_size=3))
def test_backends_agree_property(mus, beta):
    betas = np.array([beta])
    a = kernels.max_root_modulus_grid(np.array(mus), betas, backend="compiled")
    b = kernels.max_root_modulus_grid(np.array(mus), betas, backend="python")
    np.testing.assert_allclose(a, b, atol=1e-6)


def test_empty_spectrum():
    assert kernels.max_root_modulus_grid(np.array([]), np.zeros((3, 2))).tolist() == [0.0, 0.0, 0.0]


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.max_root_modulus_grid(np.array([0.5]), np.zeros((1, 1)), backend="fortran")


def test_env_forces_fallback():
    env = dict(os.environ, AAADMM_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import aaadmm.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_default_backend_selected():
    assert kernels.BACKEND in ("compiled", "python")
    if kernels._compiled is not None and not os.environ.get("AAADMM_PURE_PYTHON"):
        assert kernels.BACKEND == "compiled"
