"""Robust pricing with refunds: guarantees, worst cases and optimal mechanisms."""

from .core_math import MarketParams, RobustSolution, best_guaranteed_profit, gamma_bar, lambert_w_minus1
from .distributions import SignalDistribution, make_rs, make_worst_case
from .policies import PricingPolicy, TieRule, named_policy, profile, robust_refund_policy

__all__ = [
    "MarketParams",
    "RobustSolution",
    "best_guaranteed_profit",
    "gamma_bar",
    "lambert_w_minus1",
    "SignalDistribution",
    "make_rs",
    "make_worst_case",
    "PricingPolicy",
    "TieRule",
    "named_policy",
    "profile",
    "robust_refund_policy",
]
