import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import lambertw

from refund_lab.core_math import (
    HIGH,
    LOW,
    MarketParams,
    best_guaranteed_profit,
    gamma_bar,
    lambert_w_minus1,
    rescale_market,
    solve_v_star_bisection,
    worst_case_cdf_integral,
)

unit = st.floats(0.001, 0.999)


@pytest.mark.parametrize("x", [-0.3, -0.18394, -0.1, -1e-3, -1e-12, -1e-200])
def test_lambert_matches_scipy(x):
    ref = lambertw(x, -1).real
    assert lambert_w_minus1(x) == pytest.approx(ref, rel=1e-12)


@pytest.mark.parametrize("d", [1e-16, 1e-14, 1e-12, 1e-10, 1e-8, 1e-6, 1e-5, 3e-5, 1e-4])
def test_lambert_near_branch_point(d):
    # double-precision x, exact reference from 50-digit arithmetic
    x = -1 / math.e + d
    mpmath.mp.dps = 50
    ref = float(mpmath.lambertw(mpmath.mpf(x), -1))
    assert lambert_w_minus1(x) == pytest.approx(ref, rel=1e-12)


@given(st.floats(-1 / math.e, -1e-300, exclude_min=True))
def test_lambert_inverts_w_exp_w(x):
    w = lambert_w_minus1(x)
    assert w <= -1.0
    assert w * math.exp(w) == pytest.approx(x, rel=1e-9, abs=1e-300)


def test_lambert_branch_point_and_domain():
    assert lambert_w_minus1(-1 / math.e) == -1.0
    assert lambert_w_minus1(-1 / math.e - 1e-18) == -1.0
    with pytest.raises(ValueError):
        lambert_w_minus1(0.0)
    with pytest.raises(ValueError):
        lambert_w_minus1(-0.5)


@pytest.mark.parametrize("mu,gamma,v,beta", [
    (0.75, 0.25, 2 / 3, 1.0),
    (0.75, 0.5, 0.5, 1.0),
])
def test_low_cost_examples(mu, gamma, v, beta):
    s = best_guaranteed_profit(MarketParams(mu, gamma))
    assert s.v_star == pytest.approx(v, abs=1e-12)
    assert s.beta_star == pytest.approx(beta, abs=1e-12)
    assert s.branch == LOW


def test_high_cost_example():
    s = best_guaranteed_profit(MarketParams(0.75, 0.8))
    assert s.v_star == pytest.approx(0.392, abs=5e-4)
    assert s.beta_star == pytest.approx(0.219, abs=5e-4)
    assert s.branch == HIGH
    assert s.discount_interval == (s.v_star, 0.8)


@settings(max_examples=200)
@given(unit, st.floats(0.0, 1.0))
def test_v_star_solves_defining_equation(mu, gamma):
    p = MarketParams(mu, gamma)
    s = best_guaranteed_profit(p)
    v = s.v_star
    assert 0.0 < v <= mu + 1e-15
    if gamma <= gamma_bar(mu):
        assert v == pytest.approx((mu - gamma) / (1 - gamma), abs=1e-12)
    else:
        assert v * (2 - gamma + math.log(gamma) - math.log(v)) == pytest.approx(mu, rel=1e-11)
        assert v <= gamma
    assert v == pytest.approx(solve_v_star_bisection(p), rel=1e-9, abs=1e-12)
    assert 0.0 <= s.beta_star <= 1.0
    if gamma < 1.0:
        assert s.beta_star > 0.0
    else:
        assert s.beta_star == 0.0


@given(unit, st.floats(0.01, 0.99))
def test_worst_case_integral_is_one_minus_mu(mu, gamma):
    v = best_guaranteed_profit(MarketParams(mu, gamma)).v_star
    assert worst_case_cdf_integral(v, gamma) == pytest.approx(1 - mu, abs=1e-10)


def test_endpoints():
    for mu in np.linspace(0.05, 0.95, 19):
        assert best_guaranteed_profit(MarketParams(mu, 0.0)).v_star == pytest.approx(mu, abs=1e-15)
        gb = gamma_bar(mu)
        assert best_guaranteed_profit(MarketParams(mu, gb)).v_star == pytest.approx(gb, abs=1e-12)
        v1 = best_guaranteed_profit(MarketParams(mu, 1.0)).v_star
        assert v1 * (1 - math.log(v1)) == pytest.approx(mu, rel=1e-12)


def test_v_star_strictly_decreasing_in_gamma():
    vs = [best_guaranteed_profit(MarketParams(0.6, g)).v_star for g in np.linspace(0, 1, 201)]
    assert np.all(np.diff(vs) < 0)


def test_beta_continuous_at_threshold():
    mu = 0.6
    gb = gamma_bar(mu)
    below = best_guaranteed_profit(MarketParams(mu, gb)).beta_star
    above = best_guaranteed_profit(MarketParams(mu, gb + 1e-9)).beta_star
    assert below == 1.0
    assert above == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("mu,gamma", [(0.0, 0.5), (1.0, 0.5), (0.5, -0.1), (0.5, 1.1), (math.nan, 0.5)])
def test_invalid_params(mu, gamma):
    with pytest.raises(ValueError):
        MarketParams(mu, gamma)


def test_cost_normalization():
    p = MarketParams.from_cost(0.5, 1.0)
    assert p.gamma == pytest.approx(0.5)
    assert p.c == pytest.approx(1.0)
    assert MarketParams(0.5, 1.0).c == math.inf


def test_rescale_market():
    gt, signal, scale = rescale_market(2.0, 1.0)
    assert gt == pytest.approx(2 / 3)
    assert signal == pytest.approx(1 / 3)
    assert scale == 2.0
    # unit match value reduces to the usual normalization c/(c+1)
    assert rescale_market(1.0, 3.0)[1] == pytest.approx(0.75)
    assert rescale_market(1.5, math.inf) == (1.5, 1.0, 1.5)
    with pytest.raises(ValueError):
        rescale_market(0.0, 1.0)
