import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from refund_lab.adversary import (
    deterministic_guarantee,
    lower_hull,
    report_csv,
    report_rows,
    robust_price,
    worst_case,
    worst_case_oracle,
)
from refund_lab.core_math import MarketParams, best_guaranteed_profit
from refund_lab.distributions import mean
from refund_lab.policies import (
    LogUniformSegment,
    Offer,
    PricingPolicy,
    TieRule,
    deterministic,
    generous_refund,
    profile,
    robust_random_pricing,
    robust_refund_policy,
)

HIGH = MarketParams(0.75, 0.8)


def _random_policy(rng):
    parts = []
    for _ in range(rng.integers(1, 4)):
        kind = rng.integers(0, 3)
        if kind == 0:
            parts.append(Offer(float(rng.uniform(0.05, 0.95))))
        elif kind == 1:
            p = float(rng.uniform(0.5, 0.95))
            parts.append(Offer(p, float(rng.uniform(0, p * 0.9))))
        else:
            a = float(rng.uniform(0.05, 0.6))
            parts.append(LogUniformSegment(a, float(rng.uniform(a + 0.05, 1.0))))
    w = rng.dirichlet(np.ones(len(parts)))
    w[-1] = 1.0 - w[:-1].sum()
    return PricingPolicy(tuple(zip(w.tolist(), parts)))


@pytest.mark.parametrize("seed", range(20))
def test_hull_matches_pair_search(seed):
    rng = np.random.default_rng(seed)
    pol = _random_policy(rng)
    mu = float(rng.uniform(0.05, 0.95))
    p = MarketParams(mu, float(rng.uniform(0.1, 0.9)))
    g = profile(pol, p, TieRule.ADVERSARIAL)
    res = worst_case(g, mu, 2001)
    assert res.value == pytest.approx(worst_case_oracle(g, mu, 2001), abs=1e-12)
    assert mean(res.witness) == pytest.approx(mu, abs=1e-12)


def test_lower_hull_of_concave_points_is_endpoints():
    q = np.linspace(0, 1, 11)
    hx, hy = lower_hull(q, np.sqrt(q))
    assert hx.tolist() == [0.0, 1.0]


@pytest.mark.parametrize("mu,gamma", [(0.75, 0.8), (0.75, 0.25), (0.3, 0.9), (0.5, 1.0), (0.9, 0.95)])
def test_rrp_guarantee_is_v_star(mu, gamma):
    p = MarketParams(mu, gamma)
    v = best_guaranteed_profit(p).v_star
    res = worst_case(profile(robust_refund_policy(p), p), mu)
    assert res.value == pytest.approx(v, abs=1e-12)


@pytest.mark.parametrize("mu", [0.25, 0.5, 0.75])
def test_random_pricing_guarantee_is_v1(mu):
    v1 = best_guaranteed_profit(MarketParams(mu, 1.0)).v_star
    res = worst_case(profile(robust_random_pricing(mu), HIGH), mu)
    assert res.value == pytest.approx(v1, abs=1e-12)


def test_generous_guarantee_zero_above_threshold():
    res = worst_case(profile(generous_refund(), HIGH), 0.75)
    assert res.value == pytest.approx(0.0, abs=1e-15)
    low = MarketParams(0.75, 0.25)
    assert worst_case(profile(generous_refund(), low), 0.75).value == pytest.approx(2 / 3)


@settings(max_examples=50)
@given(st.floats(0.05, 0.95), st.floats(0.01, 0.99))
def test_deterministic_guarantee(mu, frac):
    price = frac * mu
    g = profile(deterministic(price), HIGH)
    res = worst_case(g, mu, 2001)
    assert res.value == pytest.approx(price * (mu - price) / (1 - price), abs=1e-12)
    assert deterministic_guarantee(price, mu) == pytest.approx(res.value, abs=1e-12)


def test_deterministic_guarantee_above_mean_is_zero():
    assert deterministic_guarantee(0.8, 0.5) == 0.0
    res = worst_case(profile(deterministic(0.8), HIGH), 0.5)
    assert res.value == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("mu", [0.1, 0.5, 0.75, 0.9])
def test_robust_price(mu):
    rp = robust_price(mu)
    p = 1 - math.sqrt(1 - mu)
    assert rp.price == pytest.approx(p)
    assert rp.guarantee == pytest.approx(p * p)
    assert rp.envelope_guarantee == pytest.approx(p * p, abs=1e-12)
    assert abs(rp.grid_price - p) <= 1e-3


def test_robust_price_at_three_quarters():
    rp = robust_price(0.75)
    assert rp.price == pytest.approx(0.5)
    assert rp.guarantee == pytest.approx(0.25)


def test_report_round():
    p = MarketParams(0.75, 0.8)
    res = worst_case(profile(robust_refund_policy(p), p), 0.75)
    text = report_csv([report_rows("rrp", 0.75, 0.8, res)])
    header, row = text.splitlines()
    assert header.startswith("policy,mu,gamma,value")
    assert row.split(",")[3] == f"{res.value:.12g}"


def test_grid_too_small():
    with pytest.raises(ValueError):
        worst_case(profile(deterministic(0.5), HIGH), 0.5, 2)
