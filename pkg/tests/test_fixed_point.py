import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aaadmm.fixed_point import (
    ContractViolation,
    DivergenceError,
    FixedPointMap,
    IterationTrace,
    TraceRecord,
    estimate_convergence_factor,
    iterate,
    reference_solution,
    reference_solution_info,
)
from aaadmm.problems import ridge_closed_form, ridge_iteration_matrix


def scalar_map(fn):
    return FixedPointMap(1, lambda x: np.atleast_1d(fn(x)))


def test_identity_converges_immediately():
    fp = FixedPointMap(3, lambda x: x.copy())
    trace = iterate(fp, np.array([1.0, -2.0, 3.0]), 10, 1e-12)
    assert trace.terminal_status == "converged"
    assert trace.iterations == 0
    assert trace.records[0].error == 0.0


def test_half_map_errors_and_factor():
    trace = iterate(scalar_map(lambda x: 0.5 * x), np.ones(1), 60, 1e-12, reference=np.zeros(1))
    np.testing.assert_allclose(trace.errors[:4], [1.0, 0.5, 0.25, 0.125])
    assert estimate_convergence_factor(trace, 3).factor == pytest.approx(0.5, abs=1e-12)


def test_indices_consecutive_and_dimension_preserved():
    fp = FixedPointMap(2, lambda x: 0.3 * x + 1.0)
    trace = iterate(fp, np.zeros(2), 20, 1e-30)
    assert [r.k for r in trace.records] == list(range(len(trace)))
    assert fp(np.zeros(2)).shape == (2,)


def test_dimension_contract():
    fp = FixedPointMap(2, lambda x: np.zeros(3))
    with pytest.raises(ContractViolation):
        fp(np.zeros(2))
    with pytest.raises(ContractViolation):
        iterate(FixedPointMap(2, lambda x: x), np.zeros(3), 5, 1e-8)


def test_divergence_on_non_finite():
    trace = iterate(scalar_map(lambda x: x * np.inf if x[0] else x + 1.0), np.zeros(1), 10, 1e-12)
    assert trace.terminal_status == "diverged"
    assert all(math.isfinite(r.error) for r in trace.records)


def test_divergence_on_ceiling():
    trace = iterate(scalar_map(lambda x: 10.0 * x), np.ones(1), 100, 1e-12, reference=np.zeros(1))
    assert trace.terminal_status == "diverged"
    assert trace.records[-1].error > 1e12
    assert trace.iterations == 13


def test_max_iterations_status():
    trace = iterate(scalar_map(lambda x: 0.99 * x), np.ones(1), 5, 1e-12, reference=np.zeros(1))
    assert trace.terminal_status == "max_iterations"
    assert len(trace) == 6


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(-5, 5), st.floats(1e-10, 1e-3))
def test_never_converged_above_tol(a, c, tol):
    fp = scalar_map(lambda x: a * x + c)
    fixed = np.array([c / (1 - a)])
    trace = iterate(fp, np.zeros(1), 500, tol, reference=fixed)
    if trace.terminal_status == "converged":
        assert trace.records[-1].error <= tol
    assert all(r.error > tol for r in trace.records[:-1])


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_contraction_errors_eventually_monotone(n, seed):
    r = np.random.default_rng(seed)
    mat = r.standard_normal((n, n))
    mat *= 0.9 / max(np.abs(np.linalg.eigvals(mat)).max(), 1e-3)
    fixed = r.standard_normal(n)
    fp = FixedPointMap(n, lambda x: mat @ (x - fixed) + fixed)
    trace = iterate(fp, np.zeros(n), 3000, 1e-11, reference=fixed)
    tail = trace.errors[-40:]
    # non-normal transients are allowed, but late ratios must shrink on average
    assert trace.terminal_status == "converged"
    assert np.exp(np.mean(np.diff(np.log(tail)))) < 1.0


def test_reference_solution_affine_scalar():
    x = reference_solution(scalar_map(lambda x: 0.5 * x + 1.0), np.zeros(1), 1e-15)
    # stops once the step is below 50 eps |x|
    assert x[0] == pytest.approx(2.0, abs=1e-13)


def test_reference_solution_divergence():
    with pytest.raises(DivergenceError) as err:
        reference_solution(scalar_map(lambda x: x * 1e200 + 1.0), np.zeros(1), 1e-15)
    assert err.value.last_residual is not None


def test_reference_solution_stagnation():
    # oscillating map whose step never shrinks below a fixed size
    info = reference_solution_info(scalar_map(lambda x: 1.0 - x), np.zeros(1), 1e-15, 10000)
    assert info.reason == "stagnation"
    assert info.iterations < 200


def test_ridge_reference_matches_closed_form(ridge):
    np.testing.assert_allclose(ridge.x_star, ridge_closed_form(ridge.instance), atol=1e-10)


def test_nnls_reference_feasible(nnls):
    z = nnls.x_star[: nnls.x_star.size // 2]
    assert np.all(z >= -1e-12)


def test_ridge_plain_factor_matches_spectral_radius(ridge):
    rho = np.abs(np.linalg.eigvals(ridge_iteration_matrix(ridge.instance)[0])).max()
    trace = iterate(ridge.fpmap, ridge.x0, 3000, 1e-13, reference=ridge.x_star)
    # zero columns of A give the 5/6 modes but are never excited from z0 = 0
    assert rho == pytest.approx(5.0 / 6.0, abs=1e-12)
    assert estimate_convergence_factor(trace, 20, floor=1e-15).factor == pytest.approx(rho, abs=0.05)


def test_estimate_window_two():
    assert estimate_convergence_factor(np.array([1, 0.4, 0.2, 0.1]), 2).factor == pytest.approx(0.5)


def test_estimate_single_record():
    trace = IterationTrace(records=[TraceRecord(0, 1.0)])
    est = estimate_convergence_factor(trace, 5)
    assert not est.reliable
    assert math.isnan(est.factor)
    assert est.describe() == "unreliable"


def test_estimate_ignores_floor_plateau():
    errors = np.concatenate([0.5 ** np.arange(30), np.full(20, 1e-11)])
    est = estimate_convergence_factor(errors, 10, floor=1e-12)
    assert est.factor == pytest.approx(0.5, abs=1e-12)
    assert est.reliable


def test_estimate_short_window_unreliable():
    est = estimate_convergence_factor(np.array([1.0, 0.5, 0.25]), 20)
    assert est.factor == pytest.approx(0.5)
    assert not est.reliable


def test_estimate_rejects_window_one():
    with pytest.raises(ValueError):
        estimate_convergence_factor(np.ones(3), 1)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 0.999), st.floats(1e-3, 1e3), st.integers(2, 30))
def test_geometric_trace_exact(ratio, start, window):
    errors = start * ratio ** np.arange(window + 5)
    assert estimate_convergence_factor(errors, window).factor == pytest.approx(ratio, abs=1e-12)


def test_trace_csv_roundtrip(tmp_path):
    fp = FixedPointMap(2, lambda x: 0.5 * x, residual_hooks=lambda x, q: (1.0 / 3.0, 0.0))
    trace = iterate(fp, np.ones(2), 10, 1e-3)
    trace.records.append(TraceRecord(len(trace), 0.1))
    path = tmp_path / "t.csv"
    trace.write_csv(path)
    text = path.read_text().splitlines()
    assert text[0] == "k,error_norm,primal_residual,dual_residual"
    assert text[1].split(",")[2] == "0.33333333333333331"
    assert text[-1].endswith(",,")
    back = IterationTrace.read_csv(path)
    assert back.records == trace.records
