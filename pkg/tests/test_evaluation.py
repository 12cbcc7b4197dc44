import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from refund_lab.core_math import MarketParams, best_guaranteed_profit
from refund_lab.distributions import (
    make_full_info,
    make_point_mass,
    make_rs,
    make_worst_case,
    random_discrete,
)
from refund_lab.evaluation import (
    buyer_payoff,
    monte_carlo,
    profit_closed_form,
    profit_generic,
    report_csv,
)
from refund_lab.policies import (
    NAMED_POLICIES,
    Offer,
    PricingPolicy,
    TieRule,
    deterministic,
    named_policy,
    robust_refund_policy,
)

HIGH = MarketParams(0.75, 0.8)
LOW = MarketParams(0.75, 0.25)


@settings(max_examples=60)
@given(st.floats(0.05, 0.95), st.floats(0.01, 0.99), st.integers(1, 8), st.integers(0, 2**31))
def test_closed_form_matches_generic(mu, gamma, n, seed):
    p = MarketParams(mu, gamma)
    F = random_discrete(mu, n, np.random.default_rng(seed))
    for name in NAMED_POLICIES:
        try:
            pol = named_policy(name, p)
        except ValueError:
            continue
        assert profit_closed_form(name, F, p) == pytest.approx(profit_generic(pol, F, p), abs=1e-9)


@pytest.mark.parametrize("params", [HIGH, LOW, MarketParams(0.3, 0.9)])
def test_rrp_earns_v_star_against_worst_case(params):
    v = best_guaranteed_profit(params).v_star
    F = make_worst_case(params)
    assert profit_generic(robust_refund_policy(params), F, params) == pytest.approx(v, abs=1e-12)


def test_deterministic_price_by_hand():
    # full information: only q = 1 buys at price 0.4
    F = make_full_info(0.3)
    assert profit_generic(deterministic(0.4), F, HIGH) == pytest.approx(0.3 * 0.4)
    assert buyer_payoff(deterministic(0.4), F, HIGH) == pytest.approx(0.3 * 0.6)
    # point mass at the price: the tie rule decides
    F = make_point_mass(0.4)
    assert profit_generic(deterministic(0.4), F, HIGH) == 0.0
    assert profit_generic(deterministic(0.4), F, HIGH, TieRule.FAVORABLE) == pytest.approx(0.4)


def test_buyer_and_seller_split_surplus_without_refunds():
    # no returns: profit + payoff = E[q * P(price < q)], checked by quadrature
    p = MarketParams(0.5, 1.0)
    F = make_rs(0.5)
    pol = named_policy("robust_random_pricing", p)
    v1 = best_guaranteed_profit(p).v_star
    ell = -math.log(v1)
    buy_prob = lambda q: math.log(q / v1) / ell
    ref = quad(lambda q: q * buy_prob(q) * v1 / q**2, v1, 1.0)[0] + v1 * 1.0
    total = profit_generic(pol, F, p) + buyer_payoff(pol, F, p)
    assert total == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("name", ["robust_refund_policy", "random_discounting",
                                  "generous_refund", "robust_random_pricing"])
def test_monte_carlo_within_four_se(name):
    F = make_worst_case(HIGH)
    pol = named_policy(name, HIGH)
    est, se = monte_carlo(pol, F, HIGH, 200_000, seed=11)
    assert abs(est - profit_generic(pol, F, HIGH)) <= 4 * se


def test_monte_carlo_refundable_offer():
    pol = PricingPolicy.single(Offer(0.9, 0.5))
    F = make_full_info(0.6)
    est, se = monte_carlo(pol, F, HIGH, 100_000, seed=3)
    assert abs(est - profit_generic(pol, F, HIGH)) <= 4 * se


def test_monte_carlo_deterministic_and_thread_independent(monkeypatch):
    F = make_rs(0.5)
    pol = robust_refund_policy(HIGH)
    monkeypatch.setenv("REFUND_LAB_THREADS", "1")
    a = monte_carlo(pol, F, HIGH, 50_000, seed=5)
    monkeypatch.setenv("REFUND_LAB_THREADS", "4")
    b = monte_carlo(pol, F, HIGH, 50_000, seed=5)
    assert a == b
    assert monte_carlo(pol, F, HIGH, 50_000, seed=6) != a


def test_monte_carlo_does_not_consume_seed_sequence():
    seq = np.random.SeedSequence(9)
    F = make_rs(0.5)
    pol = robust_refund_policy(HIGH)
    assert monte_carlo(pol, F, HIGH, 1000, seq) == monte_carlo(pol, F, HIGH, 1000, seq)
    assert seq.n_children_spawned == 0


def test_monte_carlo_rejects_empty_run():
    with pytest.raises(ValueError):
        monte_carlo(robust_refund_policy(HIGH), make_rs(0.75), HIGH, 0, seed=1)


def test_closed_form_guards():
    F = make_rs(0.75)
    with pytest.raises(ValueError):
        profit_closed_form("random_discounting", F, LOW)
    with pytest.raises(ValueError):
        profit_closed_form("nope", F, HIGH)


def test_report_csv_format():
    text = report_csv([("rrp", "F_w", "generic", 1 / 3, None), ("rrp", "F_w", "monte_carlo", 0.3, 0.001)])
    lines = text.splitlines()
    assert lines[0] == "policy,distribution,route,value,std_error"
    assert lines[1] == "rrp,F_w,generic,0.333333333333,"
    assert lines[2].endswith(",0.3,0.001")
