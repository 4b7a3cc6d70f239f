import math

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr

from conftest import central_difference, rel_err
from gstl.core import l21_norm, project_l21_ball, row_group_soft_threshold
from gstl.factor import FactorProblem, SolverConfig, bm_gradient, bm_objective, fit_burer_monteiro
from gstl.sensing import (Observations, SyntheticSpec, apply_operator, gaussian_ensemble,
                          generate_synthetic)
from gstl.transfer import (TransferProblem, cross_validate_lambda, default_big_l, fit_transfer,
                           fold_indices, lambda_from_theorem, transfer_smooth_gradient,
                           transfer_smooth_loss)


def small_problem(seed, d=8, r=2, n=60, lam=0.1, sigma=0.5, big_l=math.inf):
    g = np.random.default_rng(seed)
    u_p = g.standard_normal((d, r))
    u_g = u_p.copy()
    u_g[:2] += 1.0
    ens = gaussian_ensemble(d, n, seed)
    x = apply_operator(ens, u_g @ u_g.T) + sigma * g.standard_normal(n)
    return TransferProblem(ens, Observations(x, sigma), u_p, lam, big_l), u_g


def test_zero_delta_is_gold_objective():
    p, _ = small_problem(0)
    fp = FactorProblem(p.gold_ensemble, p.x_g, 2)
    assert transfer_smooth_loss(p, np.zeros((8, 2))) == pytest.approx(bm_objective(fp, p.u_p_hat), rel=1e-14)


def test_zero_residual():
    p, u_g = small_problem(1, sigma=0.0)
    delta = u_g - p.u_p_hat
    assert transfer_smooth_loss(p, delta) < 1e-20
    assert np.allclose(transfer_smooth_gradient(p, delta), 0, atol=1e-10)


def test_loss_matches_double_loop(rng):
    p, _ = small_problem(2, d=4, n=10)
    delta = rng.standard_normal((4, 2))
    u = p.u_p_hat + delta
    mats = p.gold_ensemble.matrices()
    total = 0.0
    for i in range(p.n):
        inner = sum(mats[i, a, b] * sum(u[a, k] * u[b, k] for k in range(2))
                    for a in range(4) for b in range(4))
        total += (p.x_g.x[i] - inner) ** 2
    assert abs(transfer_smooth_loss(p, delta) - total / p.n) < 1e-12


def test_gradient_finite_differences():
    g = np.random.default_rng(1)
    for k in range(20):
        p, _ = small_problem(k)
        delta = 0.3 * g.standard_normal((8, 2))
        fd = central_difference(lambda z: transfer_smooth_loss(p, z), delta)
        assert rel_err(transfer_smooth_gradient(p, delta), fd) < 1e-5


def test_gradient_reduces_to_bm_at_zero_proxy(rng):
    p, _ = small_problem(3)
    p0 = TransferProblem(p.gold_ensemble, p.x_g, np.zeros((8, 2)), 0.1)
    delta = rng.standard_normal((8, 2))
    fp = FactorProblem(p.gold_ensemble, p.x_g, 2)
    assert np.allclose(transfer_smooth_gradient(p0, delta), bm_gradient(fp, delta))


def test_huge_lambda_gives_zero_delta():
    p, _ = small_problem(4, lam=1e6)
    sol = fit_transfer(p)
    assert np.array_equal(sol.delta_hat, np.zeros((8, 2)))
    assert np.array_equal(sol.u_g_hat, p.u_p_hat)
    assert sol.active_rows.size == 0


def test_lambda_zero_matches_gold_fit():
    d, r = 10, 2
    g = np.random.default_rng(5)
    u_g = g.standard_normal((d, r))
    ens = gaussian_ensemble(d, 5000, 5)
    x = apply_operator(ens, u_g @ u_g.T) + g.standard_normal(5000)
    u_p = u_g + 0.3 * g.standard_normal((d, r))
    sol = fit_transfer(TransferProblem(ens, Observations(x, 1.0), u_p, 0.0, 1e6),
                       SolverConfig(max_iters=5000, tol=1e-14))
    gold = fit_burer_monteiro(FactorProblem(ens, Observations(x, 1.0), r),
                              SolverConfig(max_iters=5000, tol=1e-14))
    assert np.linalg.norm(sol.u_g_hat @ sol.u_g_hat.T - gold.u @ gold.u.T) < 1e-3


@settings(max_examples=25)
@given(st.integers(0, 10**6), st.floats(0.0, 2.0), st.floats(0.5, 5.0))
def test_composite_monotone_and_feasible(seed, lam, big_l):
    p, _ = small_problem(seed, lam=lam, big_l=big_l)
    sol = fit_transfer(p, SolverConfig(max_iters=300))
    assert np.all(np.diff(sol.objective_trace) <= 0)
    assert max(sol.l21_trace) <= 2 * big_l + 1e-9


def test_prox_then_project_matches_constrained_prox(rng):
    for _ in range(20):
        m = 2 * rng.standard_normal((3, 2))
        t = rng.uniform(0.05, 0.8)
        radius = rng.uniform(0.2, 0.8) * l21_norm(m)
        ours = project_l21_ball(row_group_soft_threshold(m, t), radius)
        z = cp.Variable((3, 2))
        cp.Problem(cp.Minimize(t * cp.sum(cp.norm(z, 2, axis=1)) + 0.5 * cp.sum_squares(z - m)),
                   [cp.sum(cp.norm(z, 2, axis=1)) <= radius]).solve()
        assert np.max(np.abs(ours - z.value)) < 1e-5


def test_theorem_lambda():
    base = lambda_from_theorem(50, 20, 5, 1.0, 1.0, 3.0, 5.0, 0.1)
    assert base == pytest.approx(104.16791236599867, rel=1e-12)
    assert lambda_from_theorem(100, 20, 5, 1.0, 1.0, 3.0, 5.0, 0.1) == pytest.approx(base / math.sqrt(2), rel=1e-12)
    # first branch is linear in L once it dominates
    a = lambda_from_theorem(50, 20, 5, 1.0, 1.0, 3.0, 100.0, 0.1)
    b = lambda_from_theorem(50, 20, 5, 1.0, 1.0, 3.0, 200.0, 0.1)
    assert b == pytest.approx(2 * a, rel=1e-12)
    small = lambda_from_theorem(50, 20, 5, 1.0, 1.0, 3.0, 1e-3, 0.1)
    assert lambda_from_theorem(50, 20, 5, 1.0, 1.0, 3.0, 2e-3, 0.1) == small
    with pytest.raises(ValueError):
        lambda_from_theorem(50, 20, 5, 1.0, 1.0, 3.0, 5.0, 1.5)


def test_fold_indices_partition():
    parts = fold_indices(23, 5, seed=0)
    assert sorted(np.concatenate(parts).tolist()) == list(range(23))
    assert [len(q) for q in parts] == [5, 5, 5, 4, 4]
    assert all(np.array_equal(a, b) for a, b in zip(parts, fold_indices(23, 5, seed=0)))


def test_cv_single_and_duplicate_grid():
    p, _ = small_problem(6)
    best, rows = cross_validate_lambda(p.gold_ensemble, p.x_g, p.u_p_hat, [0.3], folds=3)
    assert best == 0.3 and len(rows) == 3
    b1, _ = cross_validate_lambda(p.gold_ensemble, p.x_g, p.u_p_hat, [0.1, 0.1, 1.0], folds=3)
    b2, _ = cross_validate_lambda(p.gold_ensemble, p.x_g, p.u_p_hat, [0.1, 0.1, 1.0], folds=3)
    assert b1 == b2
    with pytest.raises(ValueError):
        cross_validate_lambda(p.gold_ensemble, p.x_g, p.u_p_hat, [], folds=3)


def test_default_big_l_at_least_ten():
    p, _ = small_problem(7)
    assert default_big_l(p.gold_ensemble, p.x_g, p.u_p_hat) >= 10.0


def test_problem_validation():
    p, _ = small_problem(8)
    with pytest.raises(ValueError):
        TransferProblem(p.gold_ensemble, p.x_g, p.u_p_hat, -1.0)
    with pytest.raises(ValueError):
        TransferProblem(p.gold_ensemble, p.x_g, p.u_p_hat[:3], 1.0)


def test_sparsity_decreases_with_lambda():
    grid = np.logspace(-3, 1, 9)
    active = np.zeros(grid.size)
    for seed in range(50):
        inst = generate_synthetic(SyntheticSpec(seed=seed))
        u_p = inst.u_p_star + 0.05 * np.random.default_rng(seed).standard_normal((20, 5))
        for k, lam in enumerate(grid):
            sol = fit_transfer(TransferProblem(inst.gold_ensemble, inst.gold_obs, u_p, lam),
                               SolverConfig(max_iters=500))
            active[k] += len(sol.active_rows)
    rho = spearmanr(grid, active / 50).statistic
    assert rho <= -0.9
