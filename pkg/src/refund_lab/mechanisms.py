"""Optimal direct mechanisms with refunds against a known discrete distribution.

After the usual envelope argument the seller only chooses a nondecreasing
``alpha0`` (probability of handing over the product with no return option).
Signals at or above ``gamma`` receive the product with a full refund with
the remaining probability, and the buyer's rent is ``U(q) = int_0^q alpha0``.
Transfers are implied by that rent and never stored.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .core_math import MarketParams, best_guaranteed_profit
from .distributions import SignalDistribution, discretize, make_worst_case
from .evaluation import buyer_payoff, profit_generic
from .policies import Offer, PricingPolicy, TieRule

TIE_TOL = 1e-12


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class MechanismAllocation:
    grid: np.ndarray
    alpha0: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        a0 = np.asarray(self.alpha0, dtype=float)
        if grid.shape != a0.shape or grid.ndim != 1:
            raise ValueError("grid and alpha0 must be 1-d arrays of equal length")
        if np.any(np.diff(grid) <= 0.0):
            raise ValueError("grid must be strictly ascending")
        if np.any((a0 < 0.0) | (a0 > 1.0)):
            raise ValueError("alpha0 must lie in [0, 1]")
        if np.any(np.diff(a0) < 0.0):
            raise ValueError("alpha0 must be nondecreasing")
        if grid.size and grid[0] == 0.0 and a0[0] != 0.0:
            raise ValueError("alpha0(0) must be 0")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "alpha0", a0)

    def alpha_r(self, gamma: float) -> np.ndarray:
        return np.where(self.grid >= gamma, 1.0 - self.alpha0, 0.0)

    def rent(self) -> np.ndarray:
        """Buyer rent ``sum_{j<i} alpha0_j (q_{j+1} - q_j)`` at each grid point."""
        steps = self.alpha0[:-1] * np.diff(self.grid)
        return np.concatenate(([0.0], np.cumsum(steps)))

    @classmethod
    def threshold(cls, grid, t: float) -> "MechanismAllocation":
        grid = np.asarray(grid, dtype=float)
        return cls(grid, (grid >= t).astype(float))


def refund_sale_value(q, gamma: float) -> np.ndarray:
    """Seller's net from a sale with a full refund, ``(q - gamma)/(1 - gamma)``.

    Clipped at zero below ``gamma`` (no refund sale happens there) and equal
    to 1 at ``q == 1`` for every ``gamma``: a sure fit is never returned.
    """
    q = np.asarray(q, dtype=float)
    out = np.zeros_like(q)
    if gamma < 1.0:
        above = q > gamma
        out[above] = (q[above] - gamma) / (1.0 - gamma)
    out[q >= 1.0] = 1.0
    return out


def per_signal_mechanism_profit(alloc: MechanismAllocation, gamma: float,
                                q_index: int | None = None):
    """Seller profit at each grid signal (or at one index).

    ``q*alpha0 - U`` plus, from ``gamma`` up, the refund-sale term
    ``(q - gamma)/(1 - gamma) * (1 - alpha0)``.  At ``q == gamma`` that term
    has a zero coefficient.
    """
    q, a0 = alloc.grid, alloc.alpha0
    v = q * a0 - alloc.rent() + refund_sale_value(q, gamma) * (1.0 - a0)
    return v if q_index is None else float(v[q_index])


def expected_mechanism_profit(alloc: MechanismAllocation, F: SignalDistribution,
                              gamma: float) -> float:
    masses = _masses_on_grid(F, alloc.grid)
    return float(masses @ per_signal_mechanism_profit(alloc, gamma))


def expected_buyer_rent(alloc: MechanismAllocation, F: SignalDistribution) -> float:
    return float(_masses_on_grid(F, alloc.grid) @ alloc.rent())


def _masses_on_grid(F: SignalDistribution, grid: np.ndarray) -> np.ndarray:
    if not F.is_discrete:
        raise GridMismatchError("distribution must be discrete; discretize it first")
    idx = np.searchsorted(grid, F.atoms_q)
    ok = (idx < grid.size) & (grid[np.minimum(idx, grid.size - 1)] == F.atoms_q)
    if not np.all(ok):
        raise GridMismatchError("distribution has atoms off the allocation grid")
    out = np.zeros(grid.size)
    np.add.at(out, idx, F.atoms_m)
    return out


@dataclass(frozen=True)
class MechanismResult:
    alloc: MechanismAllocation
    value: float
    buyer_payoff: float
    threshold: float
    candidates: np.ndarray = field(repr=False)


def optimal_mechanism(F: SignalDistribution, params: MarketParams,
                      grid=None) -> MechanismResult:
    """Best monotone ``alpha0`` by an exact scan over threshold allocations.

    The objective is linear in ``alpha0`` and the monotone box has threshold
    indicators as its vertices, so one of the ``n + 1`` thresholds is
    optimal.  Among thresholds within ``TIE_TOL`` of the best value the one
    leaving the buyer the most rent is chosen.
    """
    grid = F.atoms_q if grid is None else np.asarray(grid, dtype=float)
    m = _masses_on_grid(F, grid)
    q = grid
    gamma = params.gamma
    refund = refund_sale_value(q, gamma)
    below_refund = np.concatenate(([0.0], np.cumsum(m * refund)))
    tail_mass = np.concatenate((np.cumsum((m)[::-1])[::-1], [0.0]))
    tail_first = np.concatenate((np.cumsum((m * q)[::-1])[::-1], [0.0]))
    # threshold at index k: types k.. pay q_k; types below get the refund offer
    posted = np.concatenate((q, [0.0])) * tail_mass
    values = below_refund + posted
    if q.size and q[0] == 0.0:
        # alpha0(0) must stay 0, so the threshold cannot sit at the zero signal
        values[0] = -np.inf
    rents = tail_first - np.concatenate((q, [0.0])) * tail_mass
    best = values.max()
    ties = np.flatnonzero(values >= best - TIE_TOL)
    k = int(ties[np.argmax(rents[ties])])
    t = float(q[k]) if k < q.size else np.inf
    alloc = MechanismAllocation.threshold(q, t)
    return MechanismResult(alloc, float(values[k]), float(rents[k]), t, values)


def discretized_worst_case(params: MarketParams, n: int = 2001) -> SignalDistribution:
    return discretize(make_worst_case(params), n)


@dataclass(frozen=True)
class IndeterminacyReport:
    v_star: float
    values: dict
    spread: float
    max_error: float


def verify_indeterminacy(params: MarketParams, grid_n: int = 2001,
                         seed: int = 0, n_random: int = 5) -> IndeterminacyReport:
    """Evaluate a battery of monotone ``alpha0`` against the worst case.

    In the continuum every feasible ``alpha0`` earns exactly ``V*`` there; on
    the grid the spread shows the discretization error.
    """
    sol = best_guaranteed_profit(params)
    F = discretized_worst_case(params, grid_n)
    grid = F.atoms_q
    gamma = params.gamma
    battery = {
        "alpha0=0": np.zeros_like(grid),
        "alpha0=1[q>=gamma]": (grid >= gamma).astype(float),
        "alpha0=1[q>=V*]": (grid >= sol.v_star).astype(float),
        "alpha0=1": np.ones_like(grid),
    }
    rng = np.random.default_rng(seed)
    for i in range(n_random):
        battery[f"random_{i}"] = np.sort(rng.random(grid.size))
    values = {
        name: expected_mechanism_profit(MechanismAllocation(grid, a0), F, gamma)
        for name, a0 in battery.items()
    }
    vals = np.array(list(values.values()))
    return IndeterminacyReport(sol.v_star, values, float(vals.max() - vals.min()),
                               float(np.abs(vals - sol.v_star).max()))


@dataclass(frozen=True)
class BuyerOptimalReport:
    v_star: float
    target_payoff: float
    posted_price_profit: float
    posted_price_buyer_payoff: float
    seller_values: np.ndarray
    buyer_payoffs: np.ndarray

    def ok(self, tol: float = 1e-3) -> bool:
        return bool(
            abs(self.posted_price_profit - self.v_star) <= 1e-9
            and abs(self.posted_price_buyer_payoff - self.target_payoff) <= 1e-9
            and np.all(self.seller_values >= self.v_star - tol)
            and np.all(self.buyer_payoffs <= self.target_payoff + tol)
        )


def buyer_optimal_check(params: MarketParams, battery, grid_n: int = 2001) -> BuyerOptimalReport:
    """Seller best responses to each distribution, and the worst case's posted price.

    The posted price ``(V*, 0)`` is evaluated with the favorable tie rule:
    the buyer is the one recommending the seller's response, so indifferent
    types buy.
    """
    sol = best_guaranteed_profit(params)
    Fw = make_worst_case(params)
    posted = PricingPolicy.single(Offer(sol.v_star, 0.0))
    pp_profit = profit_generic(posted, Fw, params, TieRule.FAVORABLE)
    pp_buyer = buyer_payoff(posted, Fw, params, TieRule.FAVORABLE)
    sellers, buyers = [], []
    for F in battery:
        res = optimal_mechanism(discretize(F, grid_n), params)
        sellers.append(res.value)
        buyers.append(res.buyer_payoff)
    return BuyerOptimalReport(sol.v_star, params.mu - sol.v_star, pp_profit, pp_buyer,
                              np.array(sellers), np.array(buyers))


def allocation_csv(alloc: MechanismAllocation, gamma: float) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "alpha0", "alpha_r"])
    for q, a0, ar in zip(alloc.grid, alloc.alpha0, alloc.alpha_r(gamma)):
        w.writerow([f"{q:.12g}", f"{a0:.12g}", f"{ar:.12g}"])
    return buf.getvalue()
