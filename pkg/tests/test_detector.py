import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from masm_rls.channel import complex_gaussian
from masm_rls.codec import build_codebook, encode
from masm_rls.detector import (
    DecisionRule,
    DetectorSpec,
    SolverParams,
    brute_force_map,
    decide,
    max_eigenvalue,
    objective,
    prox_l1_box,
    solve_box_lasso,
    solve_complex_lasso,
)
from oracles import grid_search_box_lasso


def random_instance(rng, n=8, m=4, sigma2=0.05):
    h = complex_gaussian(rng, (n, m), 1.0 / m)
    x = (rng.random(m) < 0.3).astype(float)
    y = h @ x + complex_gaussian(rng, n, sigma2)
    return y, h, x


def prox_residual(y, h, est, lam, lo, hi):
    g = 2 * np.real(h.conj().T @ (h @ est.x_star - y))
    return np.max(np.abs(est.x_star - prox_l1_box(est.x_star - est.step * g, est.step * lam, lo, hi)))


@pytest.mark.parametrize("v,t,expected", [(0.5, 0.2, 0.3), (-0.5, 0.2, 0.0), (5.0, 0.2, 1.0)])
def test_prox_examples(v, t, expected):
    assert prox_l1_box(v, t, 0.0, 1.0) == pytest.approx(expected)


def test_prox_requires_zero_in_box():
    with pytest.raises(ValueError):
        prox_l1_box(0.3, 0.1, 0.2, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.floats(0, 2), st.floats(0, 3), st.floats(0, 3))
def test_prox_is_scalar_minimizer(v, t, ell, u):
    # compare with a dense search of 0.5 (w - v)^2 + t |w| over [-ell, u]
    w = np.linspace(-ell, u, 20001)
    cost = 0.5 * (w - v) ** 2 + t * np.abs(w)
    p = prox_l1_box(v, t, -ell, u)
    assert 0.5 * (p - v) ** 2 + t * abs(p) <= cost.min() + 1e-9


def test_identity_channel_decouples():
    est = solve_box_lasso(np.array([1.0, 0.01]), np.eye(2), 0.2, 0.0, 1.0)
    assert est.converged
    assert np.allclose(est.x_star, [0.9, 0.0], atol=1e-9)


def test_lambda_zero_beats_clamped_least_squares(rng):
    y, h, _ = random_instance(rng, n=4, m=4)
    est = solve_box_lasso(y, h, 0.0, 0.0, 1.0)
    hr = np.vstack([h.real, h.imag])
    ls = np.linalg.lstsq(hr, np.concatenate([y.real, y.imag]), rcond=None)[0]
    assert est.objective <= objective(y, h, np.clip(ls, 0, 1), 0.0) + 1e-12


def test_solver_matches_grid_oracle(rng):
    for _ in range(5):
        y, h, _ = random_instance(rng)
        lam = rng.uniform(0.0, 0.5)
        lo = -rng.choice([0.0, 0.5])
        est = solve_box_lasso(y, h, lam, lo, 1.0)
        grid_val, _ = grid_search_box_lasso(y, h, lam, lo, 1.0)
        assert est.objective <= grid_val + 1e-6
        assert prox_residual(y, h, est, lam, lo, 1.0) < 1e-8


def test_reported_objective_is_exact(rng):
    y, h, _ = random_instance(rng, n=16, m=12)
    est = solve_box_lasso(y, h, 0.1, -0.5, 1.0)
    assert est.objective == pytest.approx(objective(y, h, est.x_star, 0.1), rel=1e-10)


def test_unaccelerated_objective_is_monotone(rng):
    y, h, _ = random_instance(rng, n=40, m=80)
    trace = []
    est = solve_box_lasso(y, h, 0.15, 0.0, 1.0, SolverParams(acceleration=False, max_iters=3000),
                          trace=trace)
    diffs = np.diff(trace)
    assert np.all(diffs <= 1e-12 * np.abs(trace[1:]))
    assert len(trace) == est.iters_used + 1


def test_feasibility_and_fixed_point_at_scale(rng):
    y, h, _ = random_instance(rng, n=80, m=160, sigma2=0.04)
    est = solve_box_lasso(y, h, 0.13, -0.2, 1.0)
    assert est.converged
    assert np.all((est.x_star >= -0.2) & (est.x_star <= 1.0))
    assert prox_residual(y, h, est, 0.13, -0.2, 1.0) < 1e-8


def test_doubling_lambda_does_not_densify(rng):
    violations = 0
    for _ in range(100):
        y, h, _ = random_instance(rng, n=8, m=12, sigma2=0.1)
        lam = rng.uniform(0.02, 0.4)
        a = solve_box_lasso(y, h, lam, -1.0, 1.0).x_star
        b = solve_box_lasso(y, h, 2 * lam, -1.0, 1.0).x_star
        violations += np.count_nonzero(np.abs(b) > 1e-9) > np.count_nonzero(np.abs(a) > 1e-9)
    assert violations <= 2


def test_non_finite_input_rejected():
    with pytest.raises(ValueError):
        solve_box_lasso(np.array([np.nan, 0.0]), np.eye(2), 0.1)


def test_nonconvergence_is_flagged(rng):
    y, h, _ = random_instance(rng, n=40, m=80)
    est = solve_box_lasso(y, h, 0.01, 0.0, 1.0, SolverParams(max_iters=3))
    assert not est.converged and est.iters_used == 3


def test_power_iteration_estimate(rng):
    h = complex_gaussian(rng, (30, 20), 1 / 20)
    g = np.real(h.conj().T @ h)
    exact = np.linalg.eigvalsh(g)[-1]
    est = max_eigenvalue(g, iters=500, tol=1e-12)
    assert est == pytest.approx(exact, rel=1e-6)
    assert max_eigenvalue(g) <= exact * (1 + 1e-12)


def test_decision_rules():
    rule = DecisionRule("threshold-ssk", eps=0.5, power=1.0)
    assert decide(np.array([0.7, 0.2]), rule).tolist() == [1.0, 0.0]
    assert decide(np.array([0.5]), rule).tolist() == [1.0]
    x = np.array([0.3, -0.1])
    assert np.array_equal(decide(x, DecisionRule("identity")), x)
    near = DecisionRule("nearest", alphabet=(1.0, -1.0))
    assert decide(np.array([0.8, -0.6, 0.2]), near).tolist() == [1, -1, 0]


def test_detector_spec_validation():
    with pytest.raises(ValueError):
        DetectorSpec(lam=-1.0)
    with pytest.raises(ValueError):
        DetectorSpec(lo=0.1)


def test_map_recovers_noiseless_column(rng):
    cb = build_codebook(4, 1, [1.0])
    h = complex_gaussian(rng, (4, 4), 0.25)
    x = brute_force_map(h[:, 2], h, cb, 1, sigma2=0.0)
    assert np.flatnonzero(x).tolist() == [2]


def test_map_is_exhaustive_minimum(rng):
    cb = build_codebook(4, 1, [1.0])
    h = complex_gaussian(rng, (4, 8), 1 / 8)
    y = complex_gaussian(rng, 4, 1.0)
    x = brute_force_map(y, h, cb, 2)
    blocks = cb.all_blocks()
    costs = [np.linalg.norm(y - h @ np.concatenate([a, b])) ** 2 for a in blocks for b in blocks]
    assert np.linalg.norm(y - h @ x) ** 2 == pytest.approx(min(costs))


def test_map_refuses_huge_search(rng):
    cb = build_codebook(8, 1, [1.0])
    with pytest.raises(ValueError):
        brute_force_map(np.zeros(4), np.zeros((4, 8 * 7)), cb, 7)


def test_map_error_rate_not_worse_than_box_lasso():
    rng = np.random.default_rng(11)
    cb = build_codebook(4, 1, [1.0])
    rule = DecisionRule("threshold-ssk", eps=0.5)
    err_map = err_lasso = 0
    for _ in range(500):
        h = complex_gaussian(rng, (4, 8), 1 / 8)
        x = np.concatenate([encode(cb, rng.integers(0, 2, 2)) for _ in range(2)])
        y = h @ x + complex_gaussian(rng, 4, 0.1)
        err_map += np.sum(brute_force_map(y, h, cb, 2, 0.1) != x)
        err_lasso += np.sum(decide(solve_box_lasso(y, h, 0.1, 0, 1).x_star, rule) != x)
    assert err_map <= err_lasso


def test_complex_lasso_extension(rng):
    est = solve_complex_lasso(np.array([1.0 + 1.0j, 0.01]), np.eye(2), 0.2)
    shrink = 1 - 0.1 / np.sqrt(2)
    assert np.allclose(est.x_star, [shrink * (1 + 1j), 0.0], atol=1e-8)
