import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from hmmar import HmMarModel, SimulationConfig, empirical_moments, simulate, simulate_ensemble, stationary_distribution
from hmmar.errors import DimensionMismatch, InvalidSeries
from hmmar.simulate import (
    CHAIN_STREAM,
    NOISE_STREAM,
    normal_quantile,
    read_series_csv,
    series_csv,
    standard_normals,
    uniforms,
    write_series_csv,
)

from conftest import ar1, two_regime


def test_uniforms_follow_documented_transform():
    raw = np.random.Philox(key=5 | (CHAIN_STREAM << 64)).random_raw(4)
    expected = [((int(w) >> 11) + 0.5) / 2.0**53 for w in raw]
    assert_array_equal(uniforms(5, CHAIN_STREAM, 4), expected)
    u = uniforms(123, NOISE_STREAM, 100000)
    assert u.min() > 0 and u.max() < 1


@pytest.mark.parametrize("u", [1e-300, 1e-12, 0.001, 0.3, 0.5, 0.7, 0.999, 1 - 2.0**-53])
def test_normal_quantile_against_extended_precision(u):
    with mpmath.workdps(60):
        target = mpmath.mpf(u)
        ref = float(mpmath.findroot(lambda x: mpmath.ncdf(x) - target, float(stats.norm.ppf(u))))
    assert_allclose(normal_quantile(u), ref, rtol=1e-14, atol=1e-15)


def test_single_regime_matches_hand_iteration():
    m = ar1(c=0.0, r=0.5)
    eps = standard_normals(42, 20)
    res = simulate(m, SimulationConfig(n=20, seed=42))
    y = [0.0]
    for e in eps:
        y.append(0.5 * y[-1] + e)
    assert_array_equal(res.y, y)
    assert res.observations.shape == (20,)


def test_absorbing_regime_path_is_constant():
    m = two_regime(P=[[1.0, 0.0], [0.5, 0.5]], rho=[0.5, 0.5])
    res = simulate(m, SimulationConfig(n=200, seed=1, initial_regime=0, emit_latent=True))
    assert_array_equal(res.z, 0)


def test_initial_lags_are_used(shipped):
    res = simulate(shipped, SimulationConfig(n=3, seed=0, initial_lags=(1.5, -2.0)))
    assert_array_equal(res.y[:2], [1.5, -2.0])
    with pytest.raises(DimensionMismatch):
        simulate(shipped, SimulationConfig(n=3, seed=0, initial_lags=(1.0,)))


def test_config_guards(shipped):
    with pytest.raises(ValueError):
        simulate(shipped, SimulationConfig(n=0))
    with pytest.raises(ValueError):
        simulate(shipped, SimulationConfig(n=5, initial_regime=2))


def test_shipped_transition_frequencies(shipped):
    ens = simulate_ensemble(shipped, SimulationConfig(n=100, seed=9000, emit_latent=True), 200)
    z = ens.z
    prev, nxt = z[:, :-1].ravel(), z[:, 1:].ravel()
    for i in range(2):
        from_i = prev == i
        n_i = from_i.sum()
        for j in range(2):
            p_ij = shipped.transition[i, j]
            freq = np.mean(nxt[from_i] == j)
            se = np.sqrt(p_ij * (1 - p_ij) / n_i)
            assert abs(freq - p_ij) <= 3 * se, (i, j, freq, p_ij, se)


def test_chain_marginals_match_stationary_law():
    P = np.array([[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.25, 0.25, 0.5]])
    mu = stationary_distribution(P)
    m = HmMarModel(3, 1, np.zeros((3, 2)), np.ones(3), P, mu)
    z = simulate_ensemble(m, SimulationConfig(n=10, seed=777, emit_latent=True), 5000).z
    for t in (0, 4, 9):
        counts = np.bincount(z[:, t], minlength=3)
        assert stats.chisquare(counts, 5000 * mu).pvalue > 0.01


def test_deterministic_and_ensemble_consistent(shipped):
    cfg = SimulationConfig(n=50, seed=2**64 - 2, emit_latent=True)
    a, b = simulate(shipped, cfg), simulate(shipped, cfg)
    assert a.y.tobytes() == b.y.tobytes()
    ens = simulate_ensemble(shipped, cfg, 4)
    for r in range(4):
        single = simulate(shipped, SimulationConfig(n=50, seed=(2**64 - 2 + r) % 2**64, emit_latent=True))
        assert ens.y[r].tobytes() == single.y.tobytes()
        assert_array_equal(ens.z[r], single.z)


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1))
@settings(max_examples=25, deadline=None)
def test_noise_seed_does_not_move_regime_path(seed, noise_seed):
    m = two_regime(P=[[0.6, 0.4], [0.3, 0.7]], rho=[0.5, 0.5])
    base = simulate(m, SimulationConfig(n=40, seed=seed, emit_latent=True))
    other = simulate(m, SimulationConfig(n=40, seed=seed, emit_latent=True, noise_seed=noise_seed))
    assert_array_equal(base.z, other.z)
    if noise_seed != seed:
        assert not np.array_equal(base.y, other.y)


def test_empirical_moments_identical_replicates():
    mom = empirical_moments(np.tile(np.arange(30.0), (2, 1)))
    assert_array_equal(mom.var, 0.0)
    assert mom.tail == 10


def test_empirical_moments_alternating_signs():
    x = np.array([[1.0, -1.0, 1.0], [-1.0, 1.0, -1.0]])
    mom = empirical_moments(x)
    assert_array_equal(mom.mean, 0.0)
    assert_array_equal(mom.var, 1.0)


def test_empirical_moments_tail_window():
    x = np.random.default_rng(0).normal(size=(5, 300))
    mom = empirical_moments(x)
    assert mom.tail == 30
    assert_allclose(mom.tail_mean, x[:, -30:].mean())
    assert_allclose(mom.tail_second_moment, (x[:, -30:] ** 2).mean())


def test_empirical_moments_guards():
    with pytest.raises(DimensionMismatch):
        empirical_moments(np.zeros((1, 10)))
    with pytest.raises(DimensionMismatch):
        empirical_moments(np.zeros(10))


def test_csv_round_trip(tmp_path, shipped):
    res = simulate(shipped, SimulationConfig(n=30, seed=3, emit_latent=True))
    path = tmp_path / "s.csv"
    write_series_csv(path, res.observations, res.z)
    text = path.read_text()
    assert text.splitlines()[0] == "y,z"
    assert len(text.splitlines()) == 31
    assert_array_equal(read_series_csv(path), res.observations)
    assert series_csv([1.0, 0.1]).splitlines() == ["y", "1.0", "0.10000000000000001"]


def test_csv_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x\n1\n")
    with pytest.raises(InvalidSeries):
        read_series_csv(bad)
    bad.write_text("y\nabc\n")
    with pytest.raises(InvalidSeries):
        read_series_csv(bad)
