import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gstl.sensing import (MeasurementEnsemble, SyntheticSpec, adjoint, apply_operator,
                          gaussian_ensemble, generate_synthetic, sample_word_pair_outcomes,
                          word_pair_ensemble, word_pair_ensemble_full,
                          word_pair_ensemble_sampled)


def test_word_pair_picks_entry():
    theta = np.zeros((4, 4))
    theta[2, 3] = 0.7
    assert np.array_equal(apply_operator(word_pair_ensemble(4, [(2, 3)]), theta), [0.7])


def test_identity_matrix_gives_trace(rng):
    mats = rng.standard_normal((3, 4, 4))
    mats[0] = np.eye(4)
    theta = rng.standard_normal((4, 4))
    assert np.isclose(apply_operator(MeasurementEnsemble.from_matrices(mats), theta)[0],
                      np.trace(theta))


def test_zero_inputs():
    ens = gaussian_ensemble(3, 7, seed=1)
    assert np.array_equal(apply_operator(ens, np.zeros((3, 3))), np.zeros(7))
    assert np.array_equal(adjoint(ens, np.zeros(7)), np.zeros((3, 3)))


def test_adjoint_of_unit_vector():
    ens = word_pair_ensemble(3, [(1, 2), (0, 0)])
    expected = np.zeros((3, 3))
    expected[1, 2] = 1
    assert np.array_equal(adjoint(ens, np.array([1.0, 0.0])), expected)


def test_shape_errors():
    ens = gaussian_ensemble(3, 5, seed=0)
    with pytest.raises(ValueError):
        apply_operator(ens, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        adjoint(ens, np.zeros(4))
    with pytest.raises(ValueError):
        word_pair_ensemble(3, [(0, 3)])


@given(st.integers(1, 6), st.integers(1, 40), st.integers(0, 2**40),
       st.sampled_from(["gaussian", "word_pair"]))
def test_adjoint_identity(d, n, seed, kind):
    g = np.random.default_rng(seed)
    ens = (gaussian_ensemble(d, n, seed) if kind == "gaussian"
           else word_pair_ensemble_sampled(d, n, seed))
    eps = g.standard_normal(n)
    z = g.standard_normal((d, d))
    lhs = float(np.sum(adjoint(ens, eps) * z))
    rhs = float(eps @ apply_operator(ens, z))
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_adjoint_identity_hundred_triples():
    g = np.random.default_rng(7)
    for _ in range(100):
        d, n = int(g.integers(1, 8)), int(g.integers(1, 300))
        ens = gaussian_ensemble(d, n, int(g.integers(2**40)))
        eps, z = g.standard_normal(n), g.standard_normal((d, d))
        lhs, rhs = np.sum(adjoint(ens, eps) * z), eps @ apply_operator(ens, z)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_streamed_and_materialized_agree():
    a = gaussian_ensemble(5, 600, seed=3, materialize=True)
    b = gaussian_ensemble(5, 600, seed=3, materialize=False)
    assert np.array_equal(a.matrices(), b.matrices())
    theta = np.arange(25.0).reshape(5, 5)
    assert np.array_equal(apply_operator(a, theta), apply_operator(b, theta))


def test_large_d_is_streamed():
    ens = gaussian_ensemble(70, 3, seed=0)
    assert not ens.materialized
    assert ens.matrices().shape == (3, 70, 70)


def test_word_pair_full_enumeration():
    ens = word_pair_ensemble_full(2, 1)
    assert ens.n == 4
    assert [tuple(p) for p in ens.pairs] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    with pytest.raises(ValueError):
        word_pair_ensemble_full(2, 0)


def test_word_pair_full_ratio_is_one_over_d_squared(rng):
    ens = word_pair_ensemble_full(3, 2)
    z = rng.standard_normal((3, 3))
    az = apply_operator(ens, z)
    assert np.isclose(az @ az / ens.n / np.sum(z * z), 1 / 9, rtol=1e-14)


def test_bernoulli_outcomes():
    ens = word_pair_ensemble_sampled(4, 2000, seed=0)
    theta = np.full((4, 4), 0.3)
    obs = sample_word_pair_outcomes(ens, theta, seed=1)
    assert set(np.unique(obs.x)) <= {0.0, 1.0}
    assert abs(obs.x.mean() - 0.3) < 0.05
    with pytest.raises(TypeError):
        sample_word_pair_outcomes(gaussian_ensemble(2, 3, 0), theta[:2, :2], 0)


def test_synthetic_default_instance():
    inst = generate_synthetic(SyntheticSpec())
    nz = np.flatnonzero(np.linalg.norm(inst.delta_star, axis=1))
    assert len(nz) == 2 and np.array_equal(nz, inst.support)
    assert np.array_equal(inst.delta_star[nz], np.ones((2, 5)))
    assert inst.proxy_obs.n == 5000 and inst.gold_obs.n == 50


def test_synthetic_noiseless_and_deterministic():
    spec = SyntheticSpec(d=6, r=2, s=1, n_g=30, n_p=40, sigma_g=0, sigma_p=0, seed=4)
    inst = generate_synthetic(spec)
    assert np.array_equal(inst.gold_obs.x, apply_operator(inst.gold_ensemble, inst.theta_g_star))
    again = generate_synthetic(spec)
    for a, b in [(inst.u_p_star, again.u_p_star), (inst.proxy_obs.x, again.proxy_obs.x),
                 (inst.gold_obs.x, again.gold_obs.x),
                 (inst.gold_ensemble.matrices(), again.gold_ensemble.matrices())]:
        assert np.array_equal(a, b)


@given(st.integers(1, 12), st.data())
def test_support_size_is_s(d, data):
    s = data.draw(st.integers(0, d))
    inst = generate_synthetic(SyntheticSpec(d=d, r=1, s=s, n_g=2, n_p=2, seed=data.draw(st.integers(0, 999))))
    rows = np.linalg.norm(inst.delta_star, axis=1)
    assert len(inst.support) == s
    assert np.all(rows[np.setdiff1d(np.arange(d), inst.support)] == 0)


def test_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(d=3, s=4)
    with pytest.raises(ValueError):
        SyntheticSpec(d=3, r=4)


def test_subset_and_scaled():
    ens = gaussian_ensemble(3, 10, seed=2)
    sub = ens.subset([4, 1])
    assert np.array_equal(sub.matrices(), ens.matrices()[[4, 1]])
    assert np.allclose(ens.scaled(2.0).matrices(), 2 * ens.matrices())
