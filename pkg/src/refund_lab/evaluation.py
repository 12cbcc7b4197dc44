"""Expected seller profit and buyer payoff of a policy against a distribution.

Three routes are kept apart on purpose: closed forms written in terms of
integrals of the CDF, exact integration of the per-signal profile, and a
plain Monte Carlo simulation of the selling game.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .core_math import MarketParams, best_guaranteed_profit
from .distributions import SignalDistribution, integral_cdf, quantile
from .policies import (
    LogUniformSegment,
    PricingPolicy,
    TieRule,
    _buy_coeffs,
    buyer_profile,
    marginal_signal,
    profile,
)


def profit_closed_form(policy_kind: str, F: SignalDistribution, params: MarketParams) -> float:
    """Profit of a named policy written through integrals of ``F``."""
    mu, gamma = params.mu, params.gamma
    if policy_kind == "robust_random_pricing":
        v1 = best_guaranteed_profit(MarketParams(mu, 1.0)).v_star
        return v1 + integral_cdf(F, 0.0, v1) / (-math.log(v1))
    if policy_kind == "generous_refund":
        if gamma >= 1.0:
            raise ValueError("generous refund closed form needs gamma < 1")
        return 1.0 - integral_cdf(F, gamma, 1.0) / (1.0 - gamma)
    sol = best_guaranteed_profit(params)
    v = sol.v_star
    if policy_kind == "random_discounting":
        if sol.is_low_cost:
            raise ValueError("random discounting is only defined when gamma > gamma_bar")
        return (gamma - v - integral_cdf(F, v, gamma)) / math.log(gamma / v)
    if policy_kind == "robust_refund_policy":
        if sol.is_low_cost:
            return v + integral_cdf(F, 0.0, gamma) / (1.0 - gamma)
        return v + integral_cdf(F, 0.0, v) / (1.0 - gamma + math.log(gamma / v))
    raise ValueError(f"no closed form for policy {policy_kind!r}")


def profit_generic(policy: PricingPolicy, F: SignalDistribution, params: MarketParams,
                   tie: TieRule = TieRule.ADVERSARIAL) -> float:
    return profile(policy, params, tie).expect(F)


def buyer_payoff(policy: PricingPolicy, F: SignalDistribution, params: MarketParams,
                 tie: TieRule = TieRule.ADVERSARIAL) -> float:
    return buyer_profile(policy, params, tie).expect(F)


# -- Monte Carlo ----------------------------------------------------------


def _simulate(policy: PricingPolicy, F: SignalDistribution, params: MarketParams,
              tie: TieRule, n: int, rng: np.random.Generator) -> tuple[float, float]:
    """Sum and sum of squares of realized seller profit over ``n`` rounds."""
    weights = np.array([w for w, _ in policy.components])
    which = rng.choice(len(weights), size=n, p=weights / weights.sum())
    u_price = rng.random(n)
    q = quantile(F, rng.random(n))
    fits = rng.random(n) < q
    profit = np.zeros(n)
    gamma = params.gamma
    for i, (_, e) in enumerate(policy.components):
        sel = which == i
        if not np.any(sel):
            continue
        qs, vs = q[sel], fits[sel]
        if isinstance(e, LogUniformSegment):
            price = e.a * (e.b / e.a) ** u_price[sel]
            profit[sel] = np.where(qs > price, price, 0.0)
            continue
        if e.generous:
            if gamma >= 1.0:
                raise ValueError("generous refund cannot be simulated at gamma = 1")
            buys = qs >= gamma
            keep_value = 1.0
            return_value = -params.c
        else:
            qbar = marginal_signal(e, gamma)
            c0, c1 = _buy_coeffs(e, params)
            at_tie = c0 + c1 * qbar
            tie_buys = at_tie < 0.0 if tie is TieRule.ADVERSARIAL else at_tie > 0.0
            buys = (qs > qbar) | ((qs == qbar) & tie_buys)
            keep_value = e.p
            # without a refund nobody returns, whatever v turns out to be
            return_value = e.p - e.r - params.c if e.refundable else e.p
        profit[sel] = np.where(buys, np.where(vs, keep_value, return_value), 0.0)
    return float(profit.sum()), float(np.square(profit).sum())


def _worker_count() -> int:
    env = os.environ.get("REFUND_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


def monte_carlo(policy: PricingPolicy, F: SignalDistribution, params: MarketParams,
                n: int, seed, tie: TieRule = TieRule.ADVERSARIAL,
                n_streams: int = 8) -> tuple[float, float]:
    """Simulate ``n`` independent rounds; return (mean profit, standard error).

    ``seed`` is an int or a ``numpy.random.SeedSequence``.  The work is split
    into ``n_streams`` independent child streams whose results are merged in
    stream order, so the estimate does not depend on how many threads ran.
    """
    if n < 1:
        raise ValueError("need at least one round")
    if isinstance(seed, np.random.SeedSequence):
        # fresh copy: spawning mutates the sequence it is called on
        base = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    else:
        base = np.random.SeedSequence(seed)
    children = base.spawn(n_streams)
    sizes = [n // n_streams + (1 if i < n % n_streams else 0) for i in range(n_streams)]

    def run(i):
        if sizes[i] == 0:
            return 0.0, 0.0
        return _simulate(policy, F, params, tie, sizes[i], np.random.default_rng(children[i]))

    with ThreadPoolExecutor(max_workers=min(_worker_count(), n_streams)) as pool:
        parts = list(pool.map(run, range(n_streams)))
    s = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    est = s / n
    if n == 1:
        return est, math.inf
    var = max(0.0, (s2 - n * est * est) / (n - 1))
    return est, math.sqrt(var / n)


# -- reports --------------------------------------------------------------

REPORT_COLUMNS = ("policy", "distribution", "route", "value", "std_error")


def fmt(x: float) -> str:
    return f"{x:.12g}"


def report_csv(rows) -> str:
    """Render (policy, distribution, route, value, std_error) rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for policy_name, dist_name, route, value, se in rows:
        w.writerow([policy_name, dist_name, route, fmt(value), "" if se is None else fmt(se)])
    return buf.getvalue()
