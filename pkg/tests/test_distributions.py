
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from refund_lab.core_math import MarketParams, best_guaranteed_profit
from refund_lab.distributions import (
    MeanMismatchError,
    ParetoDensity,
    SignalDistribution,
    cdf,
    discretize,
    from_csv,
    integral_cdf,
    make_discrete,
    make_full_info,
    make_point_mass,
    make_rs,
    make_worst_case,
    mean,
    quantile,
    random_discrete,
    sample,
    to_csv,
    total_mass,
)

CASES = [(0.75, 0.25), (0.75, 0.8), (0.5, 1.0), (0.3, 0.9), (0.9, 0.0), (0.6, 0.5)]


@pytest.mark.parametrize("mu,gamma", CASES)
def test_worst_case_moments(mu, gamma):
    F = make_worst_case(MarketParams(mu, gamma))
    assert total_mass(F) == pytest.approx(1.0, abs=1e-14)
    assert mean(F) == pytest.approx(mu, abs=1e-12)
    # int_0^1 F = 1 - mean for any distribution on [0, 1]
    assert integral_cdf(F, 0.0, 1.0) == pytest.approx(1 - mu, abs=1e-12)


def test_worst_case_shape_high_cost():
    p = MarketParams(0.75, 0.8)
    v = best_guaranteed_profit(p).v_star
    F = make_worst_case(p)
    qs = np.linspace(v, 0.8, 50, endpoint=False)
    np.testing.assert_allclose(cdf(F, qs), 1 - v / qs, atol=1e-14)
    assert cdf(F, v * 0.999) == 0.0
    # atom at gamma, then flat until the atom at 1
    assert cdf(F, 0.8) == pytest.approx(1 - v, abs=1e-14)
    assert cdf(F, 0.99) == pytest.approx(1 - v, abs=1e-14)
    assert cdf(F, 1.0) == pytest.approx(1.0)


def test_worst_case_low_cost_atoms():
    F = make_worst_case(MarketParams(0.75, 0.25))
    np.testing.assert_allclose(F.atoms_q, [2 / 3, 1.0])
    np.testing.assert_allclose(F.atoms_m, [0.75, 0.25])


def test_rs_is_gamma_one_worst_case():
    mu = 0.5
    v1 = best_guaranteed_profit(MarketParams(mu, 1.0)).v_star
    G = make_rs(mu)
    assert G.atoms_q.tolist() == [1.0]
    assert G.atoms_m[0] == pytest.approx(v1)
    assert cdf(G, 0.5) == pytest.approx(1 - v1 / 0.5)


@pytest.mark.parametrize("mu,gamma", CASES)
def test_integral_cdf_against_quadrature(mu, gamma):
    F = make_worst_case(MarketParams(mu, gamma))
    brk = sorted({0.0, 1.0, *F.atoms_q.tolist(), *(d.a for d in F.densities)})
    for a, b in [(0.0, 1.0), (0.1, 0.7), (0.35, 0.95), (0.2, 0.2)]:
        pts = [x for x in brk if a < x < b]
        ref = quad(lambda q: float(cdf(F, q)), a, b, points=pts or None, limit=200)[0] if b > a else 0.0
        assert integral_cdf(F, a, b) == pytest.approx(ref, abs=1e-9)


def test_mass_validation():
    with pytest.raises(ValueError):
        SignalDistribution([0.5], [0.9])
    with pytest.raises(ValueError):
        SignalDistribution([1.5], [1.0])
    with pytest.raises(ValueError):
        SignalDistribution([0.5], [-1.0])
    with pytest.raises(ValueError):
        ParetoDensity(0.5, 0.4, 1.0)


def test_duplicates_merged_and_zero_mass_dropped():
    F = SignalDistribution([0.5, 0.2, 0.5, 0.9], [0.25, 0.5, 0.25, 0.0])
    assert F.atoms_q.tolist() == [0.2, 0.5]
    assert F.atoms_m.tolist() == [0.5, 0.5]
    with pytest.raises(ValueError):
        F.atoms_q[0] = 0.3


def test_make_discrete_checks_mean():
    make_discrete([0.0, 1.0], [0.5, 0.5], mu=0.5)
    with pytest.raises(MeanMismatchError):
        make_discrete([0.0, 1.0], [0.5, 0.5], mu=0.6)


@settings(max_examples=100)
@given(st.floats(0.01, 0.99), st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_random_discrete_has_exact_mean(mu, n, seed):
    F = random_discrete(mu, n, np.random.default_rng(seed))
    assert mean(F) == pytest.approx(mu, abs=1e-12)
    assert F.atoms_q.size <= n + 1
    assert total_mass(F) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("mu,gamma", CASES)
def test_discretize_preserves_mass_and_mean(mu, gamma):
    F = make_worst_case(MarketParams(mu, gamma))
    D = discretize(F, 501)
    assert D.is_discrete
    assert D.atoms_q.size <= 501 + 2
    assert mean(D) == pytest.approx(mu, abs=1e-12)
    assert total_mass(D) == pytest.approx(1.0, abs=1e-12)
    # CDF error bounded by the largest cell mass
    qs = np.linspace(0, 1, 997)
    assert np.max(np.abs(cdf(D, qs) - cdf(F, qs))) < 0.05


def test_discretize_keeps_discrete_unchanged():
    F = make_full_info(0.4)
    assert discretize(F, 100).same_as(F)


def test_quantile_inverts_cdf():
    F = make_worst_case(MarketParams(0.75, 0.8))
    u = np.linspace(0.001, 0.999, 500)
    q = quantile(F, u)
    assert np.all(np.diff(q) >= 0)
    assert np.all(cdf(F, q) >= u - 1e-12)
    # just below the quantile the CDF is still short of u
    assert np.all(cdf(F, q - 1e-9) <= u + 1e-12)


def test_sample_reproducible_and_leaves_rng_alone():
    F = make_rs(0.5)
    rng = np.random.default_rng(7)
    state = rng.bit_generator.state
    a, rng_after = sample(F, rng, 1000)
    assert rng.bit_generator.state == state
    b, _ = sample(F, np.random.default_rng(7), 1000)
    np.testing.assert_array_equal(a, b)
    c, _ = sample(F, rng_after, 1000)
    assert not np.array_equal(a, c)
    assert np.mean(a) == pytest.approx(0.5, abs=0.05)


def test_csv_round_trip(tmp_path):
    F = random_discrete(0.3, 6, np.random.default_rng(3))
    path = tmp_path / "f.csv"
    to_csv(F, path)
    G = from_csv(path, mu=0.3)
    assert G.same_as(F, tol=1e-15)
    with pytest.raises(ValueError):
        to_csv(make_rs(0.3), tmp_path / "g.csv")


def test_point_mass_and_full_info():
    assert mean(make_point_mass(0.3)) == pytest.approx(0.3)
    F = make_full_info(0.3)
    assert cdf(F, 0.0) == pytest.approx(0.7)
    assert cdf(F, 0.5) == pytest.approx(0.7)
