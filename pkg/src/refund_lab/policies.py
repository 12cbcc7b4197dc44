"""Offers, pricing policies and the per-signal payoffs they induce.

A pricing policy is a finite mixture whose components are either single
price/refund offers or non-refundable prices drawn log-uniformly from an
interval.  For a fixed policy the seller's expected profit at signal ``q``
is piecewise affine in ``q``; :class:`PerSignalProfile` stores it with
explicit values at the breakpoints so ties at a posted price are exact.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core_math import MarketParams, best_guaranteed_profit
from .distributions import SignalDistribution

WEIGHT_TOL = 1e-12


class TieRule(enum.Enum):
    """How a buyer sitting exactly at the marginal signal behaves.

    ADVERSARIAL picks whichever action is worse for the seller; FAVORABLE
    the one that is better.  The generous refund ignores this and always
    sells at ``q >= gamma`` (profit there is zero either way).
    """

    ADVERSARIAL = "adversarial"
    FAVORABLE = "favorable"


@dataclass(frozen=True)
class Offer:
    p: float
    r: float = 0.0
    generous: bool = False

    def __post_init__(self):
        if self.generous:
            if self.p != 1.0 or self.r != 1.0:
                raise ValueError("the generous refund is the offer (1, 1)")
            return
        if not (0.0 <= self.r <= self.p <= 1.0):
            raise ValueError(f"need 0 <= r <= p <= 1, got p={self.p}, r={self.r}")
        if self.r >= 1.0:
            raise ValueError("offer (1, 1) is only meaningful as the generous refund")

    @property
    def refundable(self) -> bool:
        return self.r > 0.0


GENEROUS = Offer(1.0, 1.0, generous=True)


@dataclass(frozen=True)
class LogUniformSegment:
    """Non-refundable prices with CDF ``log(p/a) / log(b/a)`` on ``[a, b]``."""

    a: float
    b: float

    def __post_init__(self):
        if not (0.0 < self.a < self.b <= 1.0):
            raise ValueError(f"need 0 < a < b <= 1, got a={self.a}, b={self.b}")

    @property
    def log_width(self) -> float:
        return math.log(self.b / self.a)

    def price_cdf(self, p):
        p = np.clip(p, self.a, self.b)
        return np.log(p / self.a) / self.log_width


Element = Union[Offer, LogUniformSegment]


@dataclass(frozen=True)
class PricingPolicy:
    components: tuple[tuple[float, Element], ...]

    def __post_init__(self):
        comps = tuple((float(w), e) for w, e in self.components)
        if not comps:
            raise ValueError("a pricing policy needs at least one component")
        for w, e in comps:
            if not (0.0 < w <= 1.0):
                raise ValueError(f"component weight {w} outside (0, 1]")
            if not isinstance(e, (Offer, LogUniformSegment)):
                raise TypeError(f"unknown policy element {e!r}")
        total = sum(w for w, _ in comps)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {total!r}, expected 1")
        object.__setattr__(self, "components", comps)

    @classmethod
    def single(cls, element: Element) -> "PricingPolicy":
        return cls(((1.0, element),))

    @classmethod
    def mixture(cls, parts: Sequence[tuple[float, Element]]) -> "PricingPolicy":
        """Build from weights, dropping zero-weight parts."""
        return cls(tuple((w, e) for w, e in parts if w > 0.0))


# -- scalar buyer/seller logic ---------------------------------------------


def marginal_signal(offer: Offer, gamma: float) -> float:
    """Signal at which the buyer is indifferent about buying."""
    if offer.generous:
        return gamma
    return (offer.p - offer.r) / (1.0 - offer.r)


def refund_for_price(p: float, gamma: float) -> float:
    """Refund that puts the marginal signal at ``gamma`` for price ``p``."""
    if gamma >= 1.0:
        raise ValueError("no finite refund schedule when gamma = 1")
    if p < gamma or p > 1.0:
        raise ValueError(f"price must lie in [gamma, 1] = [{gamma}, 1], got {p}")
    return (p - gamma) / (1.0 - gamma)


def _buy_coeffs(offer: Offer, params: MarketParams) -> tuple[float, float]:
    """Intercept and slope in ``q`` of the seller's profit when a sale happens."""
    if not offer.refundable:
        return offer.p, 0.0
    c = params.c
    if math.isinf(c):
        raise ValueError("refundable offers need gamma < 1 (finite restocking cost)")
    return offer.p - c - offer.r, c + offer.r


def _tie_profit(buy_value: float, tie: TieRule) -> float:
    if tie is TieRule.ADVERSARIAL:
        return min(0.0, buy_value)
    return max(0.0, buy_value)


def per_signal_profit(offer: Offer, q: float, params: MarketParams,
                      tie: TieRule = TieRule.ADVERSARIAL) -> float:
    """Seller's expected profit from ``offer`` against a buyer with signal ``q``."""
    gamma = params.gamma
    if offer.generous:
        if q < gamma:
            return 0.0
        if gamma >= 1.0:
            return 1.0
        return (q - gamma) / (1.0 - gamma)
    qbar = marginal_signal(offer, gamma)
    if q < qbar:
        return 0.0
    c0, c1 = _buy_coeffs(offer, params)
    value = c0 + c1 * q
    if q == qbar:
        return _tie_profit(value, tie)
    return value


def per_signal_buyer_payoff(offer: Offer, q: float,
                            tie: TieRule = TieRule.ADVERSARIAL) -> float:
    """Buyer's expected payoff; zero at the marginal signal whatever the buyer does."""
    if offer.generous:
        return 0.0
    qbar = marginal_signal(offer, 0.0)
    if q <= qbar:
        return 0.0
    if not offer.refundable:
        return q - offer.p
    return q * (1.0 - offer.p) + (1.0 - q) * (offer.r - offer.p)


# -- profiles -------------------------------------------------------------


def _qlogq(q):
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(q > 0.0, q * np.log(np.where(q > 0.0, q, 1.0)), 0.0)


class PerSignalProfile:
    """Piecewise function of the signal with explicit breakpoint values.

    On each open interval ``(xs[i], xs[i+1])`` the value is
    ``c0 + c1*q + c2*q*log(q)``; seller profiles always have ``c2 == 0``.
    ``values[i]`` is the value *at* ``xs[i]``, which can differ from both
    one-sided limits when a tie sits there.
    """

    def __init__(self, xs, coefs, values):
        xs = np.asarray(xs, dtype=float)
        coefs = np.asarray(coefs, dtype=float).reshape(-1, 3)
        values = np.asarray(values, dtype=float)
        if xs[0] != 0.0 or xs[-1] != 1.0 or np.any(np.diff(xs) <= 0.0):
            raise ValueError("breakpoints must increase strictly from 0 to 1")
        if coefs.shape[0] != xs.size - 1 or values.size != xs.size:
            raise ValueError("profile arrays have inconsistent sizes")
        if not (np.all(np.isfinite(coefs)) and np.all(np.isfinite(values))):
            raise ValueError("profile coefficients must be finite")
        self.xs = xs
        self.coefs = coefs
        self.values = values

    @property
    def is_affine(self) -> bool:
        return bool(np.all(self.coefs[:, 2] == 0.0))

    def _piece(self, i, q):
        c = self.coefs[i]
        return c[..., 0] + c[..., 1] * q + c[..., 2] * _qlogq(q)

    def __call__(self, q):
        qa = np.asarray(q, dtype=float)
        idx = np.clip(np.searchsorted(self.xs, qa, side="right") - 1, 0, self.coefs.shape[0] - 1)
        out = self._piece(idx, qa)
        hit = np.searchsorted(self.xs, qa, side="left")
        hit = np.clip(hit, 0, self.xs.size - 1)
        on_bp = self.xs[hit] == qa
        out = np.where(on_bp, self.values[hit], out)
        return float(out) if np.ndim(out) == 0 else out

    def left_limits(self) -> np.ndarray:
        """Limit from the left at each breakpoint (the point value at 0)."""
        out = self.values.copy()
        out[1:] = self._piece(np.arange(self.coefs.shape[0]), self.xs[1:])
        return out

    def right_limits(self) -> np.ndarray:
        """Limit from the right at each breakpoint (the point value at 1)."""
        out = self.values.copy()
        out[:-1] = self._piece(np.arange(self.coefs.shape[0]), self.xs[:-1])
        return out

    def expect(self, F: SignalDistribution) -> float:
        """Exact expectation under ``F``."""
        total = float(np.dot(F.atoms_m, self(F.atoms_q))) if F.atoms_q.size else 0.0
        for d in F.densities:
            for i in range(self.coefs.shape[0]):
                lo, hi = max(d.a, self.xs[i]), min(d.b, self.xs[i + 1])
                if hi <= lo:
                    continue
                c0, c1, c2 = self.coefs[i]
                la, lb = math.log(lo), math.log(hi)
                total += d.k * (c0 * (1.0 / lo - 1.0 / hi) + c1 * (lb - la)
                                + c2 * 0.5 * (lb * lb - la * la))
        return total

    def scaled(self, w: float) -> "PerSignalProfile":
        return PerSignalProfile(self.xs, w * self.coefs, w * self.values)

    @staticmethod
    def combine(parts: Sequence[tuple[float, "PerSignalProfile"]]) -> "PerSignalProfile":
        xs = np.unique(np.concatenate([p.xs for _, p in parts]))
        mids = 0.5 * (xs[:-1] + xs[1:])
        coefs = np.zeros((mids.size, 3))
        values = np.zeros(xs.size)
        for w, p in parts:
            idx = np.searchsorted(p.xs, mids, side="right") - 1
            coefs += w * p.coefs[idx]
            values += w * p(xs)
        return PerSignalProfile(xs, coefs, values)

    @classmethod
    def step(cls, cuts: Sequence[float], coefs, point_values) -> "PerSignalProfile":
        """Helper: breakpoints ``[0, *cuts, 1]`` with duplicates merged."""
        xs = [0.0, *cuts, 1.0]
        keep = [0] + [i for i in range(1, len(xs)) if xs[i] > xs[i - 1]]
        # a zero-length interval is dropped along with its coefficients
        pieces = [coefs[i - 1] for i in keep[1:]]
        vals = [point_values[i] for i in keep]
        return cls([xs[i] for i in keep], pieces, vals)


def _offer_profile(offer: Offer, params: MarketParams, tie: TieRule) -> PerSignalProfile:
    gamma = params.gamma
    zero = (0.0, 0.0, 0.0)
    if offer.generous:
        if gamma <= 0.0:
            return PerSignalProfile([0.0, 1.0], [(0.0, 1.0, 0.0)], [0.0, 1.0])
        if gamma >= 1.0:
            return PerSignalProfile([0.0, 1.0], [zero], [0.0, 1.0])
        buy = (-gamma / (1.0 - gamma), 1.0 / (1.0 - gamma), 0.0)
        return PerSignalProfile([0.0, gamma, 1.0], [zero, buy], [0.0, 0.0, 1.0])
    qbar = marginal_signal(offer, gamma)
    c0, c1 = _buy_coeffs(offer, params)
    buy = (c0, c1, 0.0)
    tie_value = _tie_profit(c0 + c1 * qbar, tie)
    if qbar <= 0.0:
        return PerSignalProfile([0.0, 1.0], [buy], [tie_value, c0 + c1])
    if qbar >= 1.0:
        return PerSignalProfile([0.0, 1.0], [zero], [0.0, tie_value])
    return PerSignalProfile([0.0, qbar, 1.0], [zero, buy], [0.0, tie_value, c0 + c1])


def _segment_profile(seg: LogUniformSegment) -> PerSignalProfile:
    a, b, ell = seg.a, seg.b, seg.log_width
    zero = (0.0, 0.0, 0.0)
    flat = (b - a) / ell
    return PerSignalProfile.step(
        [a, b],
        [zero, (-a / ell, 1.0 / ell, 0.0), (flat, 0.0, 0.0)],
        [0.0, 0.0, flat, flat],
    )


def _offer_buyer_profile(offer: Offer) -> PerSignalProfile:
    zero = (0.0, 0.0, 0.0)
    if offer.generous:
        return PerSignalProfile([0.0, 1.0], [zero], [0.0, 0.0])
    qbar = marginal_signal(offer, 0.0)
    if offer.refundable:
        buy = (offer.r - offer.p, 1.0 - offer.r, 0.0)
    else:
        buy = (-offer.p, 1.0, 0.0)
    top = buy[0] + buy[1] if qbar < 1.0 else 0.0
    if qbar <= 0.0:
        return PerSignalProfile([0.0, 1.0], [buy], [0.0, top])
    if qbar >= 1.0:
        return PerSignalProfile([0.0, 1.0], [zero], [0.0, 0.0])
    return PerSignalProfile([0.0, qbar, 1.0], [zero, buy], [0.0, 0.0, top])


def _segment_buyer_profile(seg: LogUniformSegment) -> PerSignalProfile:
    # E[(q - p)+] = (q*log(min(q,b)/a) - (min(q,b) - a)) / log(b/a)
    a, b, ell = seg.a, seg.b, seg.log_width
    zero = (0.0, 0.0, 0.0)
    mid = (a / ell, -(1.0 + math.log(a)) / ell, 1.0 / ell)
    top = (-(b - a) / ell, 1.0, 0.0)
    at_b = b - (b - a) / ell
    return PerSignalProfile.step(
        [a, b], [zero, mid, top], [0.0, 0.0, at_b, 1.0 - (b - a) / ell]
    )


def profile(policy: PricingPolicy, params: MarketParams,
            tie: TieRule = TieRule.ADVERSARIAL) -> PerSignalProfile:
    """Seller's expected profit as a function of the buyer's signal."""
    parts = []
    for w, e in policy.components:
        if isinstance(e, Offer):
            parts.append((w, _offer_profile(e, params, tie)))
        else:
            parts.append((w, _segment_profile(e)))
    return PerSignalProfile.combine(parts)


def buyer_profile(policy: PricingPolicy, params: MarketParams | None = None,
                  tie: TieRule = TieRule.ADVERSARIAL) -> PerSignalProfile:
    """Buyer's expected payoff as a function of the signal."""
    parts = []
    for w, e in policy.components:
        if isinstance(e, Offer):
            parts.append((w, _offer_buyer_profile(e)))
        else:
            parts.append((w, _segment_buyer_profile(e)))
    return PerSignalProfile.combine(parts)


def no_return_probability(policy: PricingPolicy, q, tie: TieRule = TieRule.ADVERSARIAL):
    """Probability that signal ``q`` ends up with the product and no return option."""
    qa = np.asarray(q, dtype=float)
    out = np.zeros_like(qa)
    for w, e in policy.components:
        if isinstance(e, LogUniformSegment):
            out = out + w * np.where(qa < e.a, 0.0, e.price_cdf(qa))
        elif not e.refundable and not e.generous:
            sells = qa > e.p if tie is TieRule.ADVERSARIAL else qa >= e.p
            out = out + w * sells
    return float(out) if np.ndim(out) == 0 else out


# -- named policies -------------------------------------------------------


def random_discounting(params: MarketParams) -> PricingPolicy:
    sol = best_guaranteed_profit(params)
    if sol.is_low_cost:
        raise ValueError(
            f"random discounting needs gamma > gamma_bar ({params.gamma} <= {sol.gamma_bar})"
        )
    return PricingPolicy.single(LogUniformSegment(sol.v_star, params.gamma))


def robust_random_pricing(mu: float) -> PricingPolicy:
    v1 = best_guaranteed_profit(MarketParams(mu, 1.0)).v_star
    return PricingPolicy.single(LogUniformSegment(v1, 1.0))


def generous_refund() -> PricingPolicy:
    return PricingPolicy.single(GENEROUS)


def robust_refund_policy(params: MarketParams) -> PricingPolicy:
    sol = best_guaranteed_profit(params)
    if sol.is_low_cost:
        return generous_refund()
    beta = sol.beta_star
    return PricingPolicy.mixture([
        (beta, GENEROUS),
        (1.0 - beta, LogUniformSegment(sol.v_star, params.gamma)),
    ])


def deterministic(p: float) -> PricingPolicy:
    return PricingPolicy.single(Offer(p, 0.0))


NAMED_POLICIES = ("robust_refund_policy", "robust_random_pricing", "generous_refund",
                  "random_discounting")


def named_policy(name: str, params: MarketParams) -> PricingPolicy:
    if name == "robust_refund_policy":
        return robust_refund_policy(params)
    if name == "robust_random_pricing":
        return robust_random_pricing(params.mu)
    if name == "generous_refund":
        return generous_refund()
    if name == "random_discounting":
        return random_discounting(params)
    raise ValueError(f"unknown policy {name!r}; known: {', '.join(NAMED_POLICIES)}")


# -- JSON -----------------------------------------------------------------


def policy_to_dict(policy: PricingPolicy) -> dict:
    comps = []
    for w, e in policy.components:
        if isinstance(e, Offer):
            d = {"weight": w, "kind": "offer", "p": e.p, "r": e.r}
            if e.generous:
                d["generous"] = True
        else:
            d = {"weight": w, "kind": "loguniform", "a": e.a, "b": e.b}
        comps.append(d)
    return {"components": comps}


def policy_from_dict(doc: dict) -> PricingPolicy:
    if set(doc) != {"components"}:
        raise ValueError("policy document must have exactly one key, 'components'")
    parts = []
    for c in doc["components"]:
        kind = c.get("kind")
        if kind == "offer":
            extra = set(c) - {"weight", "kind", "p", "r", "generous"}
            if extra:
                raise ValueError(f"unknown offer keys {sorted(extra)}")
            p, r = float(c["p"]), float(c.get("r", 0.0))
            generous = bool(c.get("generous", False)) or (p == 1.0 and r == 1.0)
            parts.append((float(c["weight"]), Offer(p, r, generous)))
        elif kind == "loguniform":
            extra = set(c) - {"weight", "kind", "a", "b"}
            if extra:
                raise ValueError(f"unknown segment keys {sorted(extra)}")
            parts.append((float(c["weight"]), LogUniformSegment(float(c["a"]), float(c["b"]))))
        else:
            raise ValueError(f"unknown component kind {kind!r}")
    return PricingPolicy(tuple(parts))


def policy_to_json(policy: PricingPolicy) -> str:
    return json.dumps(policy_to_dict(policy), indent=2, sort_keys=True)


def policy_from_json(text: str) -> PricingPolicy:
    return policy_from_dict(json.loads(text))
