import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from aaadmm.fixed_point import estimate_convergence_factor, iterate
from aaadmm.problems import (
    DEFAULTS,
    InnerSolverError,
    InstanceError,
    build_fpi,
    generate_instance,
    get_operator,
    newton_inner_solve,
    project_box,
    project_nonneg,
    prox_l1,
    read_instance,
    residual_norms,
    ridge_iteration_matrix,
    write_instance,
    zero_state,
)
from aaadmm.problems.admm import ADMMOperator

vectors = arrays(np.float64, st.integers(1, 12), elements=st.floats(-1e3, 1e3))


@pytest.mark.parametrize("v,t,out", [(2.0, 1.0, 1.0), (-0.5, 1.0, 0.0), (-3.0, 1.0, -2.0)])
def test_prox_l1_examples(v, t, out):
    assert prox_l1(np.array([v]), t)[0] == out


def test_prox_l1_rejects_nonpositive_threshold():
    with pytest.raises(ValueError):
        prox_l1(np.ones(2), 0.0)


def test_projection_examples():
    np.testing.assert_array_equal(project_box(np.array([1.5, -2.0, 0.3]), -1, 1), [1.0, -1.0, 0.3])
    np.testing.assert_array_equal(project_nonneg(np.array([-1.0, 2.0])), [0.0, 2.0])
    inside = np.array([0.2, -0.7])
    np.testing.assert_array_equal(project_box(inside, -1, 1), inside)


def test_project_box_needs_ordered_bounds():
    with pytest.raises(ValueError):
        project_box(np.zeros(1), 1.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(vectors, st.floats(1e-3, 10))
def test_prox_l1_nonexpansive(a, t):
    b = a[::-1].copy()
    assert np.linalg.norm(prox_l1(a, t) - prox_l1(b, t)) <= np.linalg.norm(a - b) + 1e-12


@settings(max_examples=200, deadline=None)
@given(vectors, st.floats(1e-3, 10))
def test_prox_l1_firmly_nonexpansive(a, t):
    b = np.roll(a, 1)
    pa, pb = prox_l1(a, t), prox_l1(b, t)
    assert np.dot(pa - pb, pa - pb) <= np.dot(pa - pb, a - b) + 1e-9


@settings(max_examples=200, deadline=None)
@given(vectors, st.floats(-5, 0), st.floats(0.01, 5))
def test_projections_idempotent_nonexpansive(a, lo, width):
    hi = lo + width
    b = a[::-1].copy()
    for proj in (lambda v: project_box(v, lo, hi), project_nonneg):
        pa = proj(a)
        np.testing.assert_array_equal(proj(pa), pa)
        assert np.linalg.norm(pa - proj(b)) <= np.linalg.norm(a - b) + 1e-12


def test_newton_quadratic_one_step(rng):
    q = rng.standard_normal((5, 5))
    q = q @ q.T + 5 * np.eye(5)
    c = rng.standard_normal(5)
    calls = []

    def grad(x):
        calls.append(1)
        return q @ x - c

    x = newton_inner_solve(grad, lambda x: q, np.zeros(5), tol=1e-10)
    np.testing.assert_allclose(x, np.linalg.solve(q, c), atol=1e-12)
    assert len(calls) == 2


def test_newton_scalar_logistic_matches_bisection():
    rho = 10.0

    def grad(x):
        return np.array([-1.0 / (1.0 + np.exp(x[0])) + rho * x[0]])

    def hess(x):
        s = 1.0 / (1.0 + np.exp(-x[0]))
        return np.array([[s * (1 - s) + rho]])

    x = newton_inner_solve(grad, hess, np.array([3.0]))
    root = scipy.optimize.bisect(lambda t: grad(np.array([t]))[0], -5, 5, xtol=1e-15)
    assert x[0] == pytest.approx(root, abs=1e-10)


def test_newton_returns_start_when_stationary():
    x0 = np.array([1.0, 2.0])
    out = newton_inner_solve(lambda x: np.zeros(2), lambda x: np.eye(2), x0)
    np.testing.assert_array_equal(out, x0)


def test_newton_reports_indefinite_hessian():
    with pytest.raises(InnerSolverError) as err:
        newton_inner_solve(lambda x: x - 1.0, lambda x: -np.eye(2), np.zeros(2))
    assert err.value.gradient_norm > 0


def test_newton_reports_max_iter():
    # Newton on arctan overshoots from |x0| > 1.39
    with pytest.raises(InnerSolverError):
        newton_inner_solve(lambda x: np.arctan(x), lambda x: np.diag(1.0 / (1.0 + x**2)),
                           np.array([3.0]), tol=1e-14, max_iter=2)


def test_generation_deterministic():
    a = generate_instance("lasso", seed=5)
    b = generate_instance("lasso", seed=5)
    assert (a.data_matrix != b.data_matrix).nnz == 0
    np.testing.assert_array_equal(a.rhs, b.rhs)
    c = generate_instance("lasso", seed=6)
    assert not np.array_equal(a.rhs, c.rhs)


def test_ridge_defaults_echo_parameters():
    inst = generate_instance("ridge", seed=0)
    assert inst.shape == (150, 300)
    assert inst.density == 0.001
    assert inst.reg_lambda == 1.0
    assert inst.penalty_rho == 10.0


def test_tv_defaults_alpha():
    inst = generate_instance("total_variation", seed=0)
    assert inst.shape == (999, 1000)
    assert inst.penalty_rho == 10.0
    assert inst.smoothing_alpha == 0.001 * np.max(np.abs(inst.rhs))


def test_lasso_entries_uniform():
    inst = generate_instance("lasso", density=0.06, seed=0)
    data = inst.data_matrix.data
    assert data.min() >= 0.0 and data.max() < 1.0
    assert inst.data_matrix.nnz == round(0.06 * 150 * 300)


def test_logistic_labels():
    inst = generate_instance("reg_logistic", seed=0)
    assert set(np.unique(inst.rhs)) == {-1.0, 1.0}
    assert inst.shape == (DEFAULTS["reg_logistic"]["m"], DEFAULTS["reg_logistic"]["n"])


@pytest.mark.parametrize("kwargs", [
    dict(kind="ridge", density=0.0), dict(kind="ridge", density=1.5), dict(kind="ridge", seed=-1),
    dict(kind="nope"), dict(kind="lasso", params={"penalty_rho": 0.0}),
    dict(kind="lasso", params={"mystery": 1.0}),
])
def test_generation_rejects(kwargs):
    kind = kwargs.pop("kind")
    with pytest.raises(InstanceError):
        generate_instance(kind, **kwargs)


@pytest.mark.parametrize("kind", ["ridge", "lasso", "total_variation", "reg_logistic", "scalar_l1"])
def test_instance_file_roundtrip(tmp_path, kind):
    kw = dict(n=50) if kind == "total_variation" else {}
    inst = generate_instance(kind, seed=4, **kw)
    path = tmp_path / "inst.txt"
    write_instance(inst, path)
    back = read_instance(path)
    assert back.scalar_fields() == inst.scalar_fields()
    np.testing.assert_array_equal(back.dense_matrix(), inst.dense_matrix())
    np.testing.assert_array_equal(back.rhs, inst.rhs)
    write_instance(back, tmp_path / "again.txt")
    assert (tmp_path / "again.txt").read_bytes() == path.read_bytes()


def test_instance_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("not an instance\n")
    with pytest.raises(InstanceError):
        read_instance(path)


def test_ridge_map_affine(ridge, rng):
    mat, b_hat = ridge_iteration_matrix(ridge.instance)
    z1, z2 = rng.standard_normal((2, mat.shape[0]))
    np.testing.assert_allclose(ridge.fpmap(z1) - ridge.fpmap(z2), mat @ (z1 - z2), atol=1e-12)
    np.testing.assert_allclose(ridge.fpmap(z1), mat @ z1 + b_hat, atol=1e-12)


def test_stacked_ridge_agrees_with_z_only(ridge):
    fp = build_fpi(ridge.instance, stacked=True)
    op = get_operator(ridge.instance)
    z = ridge.x_star
    out = fp(np.concatenate([z, op.u_from_z(z)]))
    np.testing.assert_allclose(out[:z.size], z, atol=1e-10)
    with pytest.raises(ValueError):
        build_fpi(generate_instance("lasso", seed=0), stacked=False)


def test_lasso_huge_lambda_zero_solution():
    inst = generate_instance("lasso", m=20, n=30, density=0.2, seed=1, params={"reg_lambda": 1e6})
    fp = build_fpi(inst)
    trace = iterate(fp, zero_state(inst), 200, 1e-14)
    np.testing.assert_allclose(trace.x_final[:30], 0.0, atol=1e-14)


def test_nnls_fixed_point_feasibility(nnls):
    op = get_operator(nnls.instance)
    z, u = op.unpack(nnls.x_star)
    x = op.x_step(z - u)
    assert np.all(z >= 0.0)
    assert np.linalg.norm(x - z) <= 1e-8


def test_ridge_fixed_point_closed_form(ridge):
    from aaadmm.problems import ridge_closed_form

    np.testing.assert_allclose(ridge.x_star, ridge_closed_form(ridge.instance), rtol=0, atol=1e-10)


@pytest.mark.parametrize("name", ["ridge", "reg_logistic"])
def test_dual_proportional_at_fixed_point(request, name):
    solved = request.getfixturevalue(name)
    inst = solved.instance
    op = get_operator(inst)
    z = solved.x_star
    state = op.sweep(z, op.u_from_z(z))
    np.testing.assert_allclose(state.z, z, atol=1e-10)
    np.testing.assert_allclose(state.u, (2 * inst.reg_lambda / inst.penalty_rho) * state.z, atol=1e-10)
    # stacked iteration from zero keeps the relation after the first sweep
    fp = build_fpi(inst, stacked=True)
    vec = fp(fp(np.zeros(2 * z.size)))
    np.testing.assert_allclose(vec[z.size:], (2 * inst.reg_lambda / inst.penalty_rho) * vec[:z.size],
                               atol=1e-10)


def test_residuals_zero_at_fixed_point(lasso):
    primal, dual = residual_norms(lasso.instance, lasso.x_star, lasso.fpmap(lasso.x_star))
    assert primal < 1e-10 and dual < 1e-9


def test_ridge_dual_zero_for_equal_z(ridge):
    _, dual = residual_norms(ridge.instance, ridge.x_star, ridge.x_star)
    assert dual == 0.0


def test_residuals_decay(lasso):
    trace = iterate(lasso.fpmap, lasso.x0, 3000, 1e-12, reference=lasso.x_star)
    primal = np.array([r.primal for r in trace.records])
    dual = np.array([r.dual for r in trace.records])
    assert primal[-1] < 1e-6 * primal[1]
    assert dual[-1] < 1e-6 * dual[1]


def test_scaled_projection_flag():
    inst = generate_instance("nnls", m=10, n=20, density=0.3, seed=0, params={"scaled_projection": True})
    op = ADMMOperator(inst)
    w = np.array([-1.0, 4.0])
    np.testing.assert_allclose(op.z_step(np.resize(w, 20))[:2], [0.0, 4.0 / inst.penalty_rho])


def test_box_logistic_in_box():
    inst = generate_instance("box_logistic", seed=0)
    fp = build_fpi(inst)
    out = fp(np.zeros(fp.dimension))
    z = out[: fp.dimension // 2]
    assert np.all(z >= -1.0) and np.all(z <= 1.0)


@pytest.mark.parametrize("kind", ["ridge", "lasso", "nnls", "reg_logistic", "box_logistic"])
def test_plain_runs_converge_linearly(kind):
    inst = generate_instance(kind, seed=0)
    fp = build_fpi(inst)
    trace = iterate(fp, zero_state(inst), 3000, 1e-11)
    errors = trace.errors
    est = estimate_convergence_factor(errors[errors > 1e-10], 20)
    assert est.factor < 1.0
    tail = errors[errors > 1e-10][-11:]
    assert np.std(tail[1:] / tail[:-1]) < 0.02


def test_tv_plain_converges():
    inst = generate_instance("total_variation", seed=0)
    trace = iterate(build_fpi(inst), zero_state(inst), 3000, 1e-10)
    assert trace.terminal_status == "converged"
