"""Scalar closed forms for the robust refund problem.

Everything here is a pure function of floats.  The best guaranteed profit
``v_star`` has two computation routes that are kept independent of each
other: the Lambert-W closed form used by :func:`best_guaranteed_profit` and
the bracketing root-finder :func:`solve_v_star_bisection`, which only knows
how to integrate the worst-case CDF.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

INV_E = math.exp(-1.0)
INV_E_LO = -1.2428753672788363e-17  # 1/e - INV_E, so x + 1/e is exact near -1/e
BRANCH_SERIES_P = 1e-2

LOW = "low"
HIGH = "high"


@dataclass(frozen=True)
class MarketParams:
    """Prior fit probability ``mu`` and normalized restocking cost ``gamma``."""

    mu: float
    gamma: float

    def __post_init__(self):
        mu, gamma = float(self.mu), float(self.gamma)
        if not (0.0 < mu < 1.0):
            raise ValueError(f"mu must lie in (0, 1), got {self.mu!r}")
        if not (0.0 <= gamma <= 1.0):
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma!r}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "gamma", gamma)

    @property
    def c(self) -> float:
        """Raw restocking cost; infinite when ``gamma == 1``."""
        if self.gamma >= 1.0:
            return math.inf
        return self.gamma / (1.0 - self.gamma)

    @classmethod
    def from_cost(cls, mu: float, c: float) -> "MarketParams":
        if c < 0:
            raise ValueError(f"restocking cost must be nonnegative, got {c!r}")
        if math.isinf(c):
            return cls(mu, 1.0)
        return cls(mu, c / (c + 1.0))


@dataclass(frozen=True)
class RobustSolution:
    v_star: float
    gamma_bar: float
    beta_star: float
    branch: str
    params: MarketParams = field(repr=False)

    @property
    def is_low_cost(self) -> bool:
        return self.branch == LOW

    @property
    def discount_interval(self) -> tuple[float, float] | None:
        """Support of random discounting, or None on the low-cost branch."""
        if self.is_low_cost:
            return None
        return (self.v_star, self.params.gamma)


def lambert_w_minus1(x: float) -> float:
    """Lower real branch of Lambert W on ``[-1/e, 0)``.

    Next to the branch point the series in ``p = -sqrt(2(ex + 1))`` is used,
    with ``x + 1/e`` formed in two pieces to avoid cancellation.  Elsewhere
    a bracket on ``(-inf, -1]`` is grown until it contains the root, a few
    bisection steps tighten it, and Halley iterations finish the job.  Halley
    steps that leave the bracket are replaced by bisection.
    """
    x = float(x)
    if not (-INV_E - 1e-17 <= x < 0.0):
        raise ValueError(f"W_-1 is defined on [-1/e, 0), got {x!r}")
    offset = (x + INV_E) + INV_E_LO
    if offset <= 0.0:
        return -1.0
    p = -math.sqrt(2.0 * math.e * offset)
    if p > -BRANCH_SERIES_P:
        return -1.0 + p * (1.0 + p * (-1.0 / 3 + p * (11.0 / 72 + p * (
            -43.0 / 540 + p * (769.0 / 17280 + p * (-221.0 / 8505))))))

    def f(w):
        return w * math.exp(w) - x

    # f is decreasing on (-inf, -1]; f(-1) <= 0 and f -> -x > 0 as w -> -inf
    hi = -1.0
    lo = -2.0
    while f(lo) <= 0.0:
        hi = lo
        lo *= 2.0
    for _ in range(8):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid

    w = 0.5 * (lo + hi)
    for _ in range(100):
        ew = math.exp(w)
        fw = w * ew - x
        if fw == 0.0:
            return w
        if fw > 0.0:
            lo = w
        else:
            hi = w
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * fw / (2.0 * wp1)
        step = fw / denom if denom != 0.0 else math.inf
        w_new = w - step
        if not (lo < w_new < hi):
            w_new = 0.5 * (lo + hi)
        if abs(w_new - w) <= 4e-16 * abs(w):
            return w_new
        w = w_new
    return w


def gamma_bar(mu: float) -> float:
    """Cost threshold ``1 - sqrt(1 - mu)`` separating the two regimes."""
    if not (0.0 < mu < 1.0):
        raise ValueError(f"mu must lie in (0, 1), got {mu!r}")
    return 1.0 - math.sqrt(1.0 - mu)


def beta_star(gamma: float, v_star: float, gbar: float) -> float:
    """Weight on the generous refund in the robust refund policy."""
    if gamma <= gbar:
        return 1.0
    return (1.0 - gamma) / (1.0 - gamma + math.log(gamma) - math.log(v_star))


def best_guaranteed_profit(params: MarketParams) -> RobustSolution:
    mu, gamma = params.mu, params.gamma
    gbar = gamma_bar(mu)
    if gamma == 0.0:
        return RobustSolution(mu, gbar, 1.0, LOW, params)
    if gamma <= gbar:
        v = (mu - gamma) / (1.0 - gamma)
        return RobustSolution(v, gbar, 1.0, LOW, params)
    # V solves V * (2 - gamma + log(gamma) - log(V)) = mu
    arg = -(mu / gamma) * math.exp(gamma - 2.0)
    v = -mu / lambert_w_minus1(arg)
    return RobustSolution(v, gbar, beta_star(gamma, v, gbar), HIGH, params)


def worst_case_cdf_integral(v: float, gamma: float) -> float:
    """Area under the worst-case CDF built from a candidate level ``v``.

    Integrates the piecewise CDF (zero, then ``1 - v/q`` up to ``gamma``,
    then flat at ``1 - min(v, gamma)``) directly, without using either
    branch formula.
    """
    lo = v
    hi = max(v, gamma)
    area = 0.0
    if hi > lo:
        area += (hi - lo) - v * math.log(hi / lo)
    area += (1.0 - min(v, gamma)) * (1.0 - hi)
    return area


def solve_v_star_bisection(params: MarketParams, tol: float = 1e-15) -> float:
    """Oracle route: bisect ``worst_case_cdf_integral(v) = 1 - mu`` on (0, 1).

    The integral is strictly decreasing in ``v``, so plain bisection on the
    full unit interval is safe on both branches.
    """
    target = 1.0 - params.mu
    gamma = params.gamma
    lo, hi = 1e-300, 1.0
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if worst_case_cdf_integral(mid, gamma) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rescale_market(v_bar: float, c: float) -> tuple[float, float, float]:
    """Map a match value ``v_bar`` and raw cost ``c`` onto the unit problem.

    Returns ``(gamma_tilde, marginal_signal, scale)``.  Solve the normalized
    problem at ``gamma = marginal_signal`` and multiply prices and profits by
    ``scale``.
    """
    if not (v_bar > 0.0):
        raise ValueError(f"match value must be positive, got {v_bar!r}")
    if c < 0.0:
        raise ValueError(f"restocking cost must be nonnegative, got {c!r}")
    if math.isinf(c):
        return v_bar, 1.0, v_bar
    gamma_tilde = c * v_bar / (v_bar + c)
    return gamma_tilde, gamma_tilde / v_bar, v_bar
