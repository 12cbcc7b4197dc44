"""Nature's side: the cheapest mean-``mu`` distribution for a fixed policy.

Minimizing ``E_F[g(q)]`` over distributions with mean ``mu`` gives the lower
convex envelope of ``g`` evaluated at ``mu``, attained by at most two atoms.
The envelope is computed with a monotone-chain lower hull over a grid that
contains every profile breakpoint; at a breakpoint the point value and both
one-sided limits are all offered to the hull, so a discontinuity is always
approached from its cheaper side.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .distributions import SignalDistribution
from .policies import PerSignalProfile, deterministic, profile
from .core_math import MarketParams

DEFAULT_GRID_N = 10001


@dataclass(frozen=True)
class EnvelopeResult:
    value: float
    witness: SignalDistribution
    active_segment: tuple[tuple[float, float], tuple[float, float]]

    @property
    def witness_atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.witness.atoms_q.tolist(), self.witness.atoms_m.tolist()))


def envelope_points(g: PerSignalProfile, grid_n: int = DEFAULT_GRID_N):
    """Candidate (q, value) points: a uniform grid plus split breakpoints.

    At equal ``q`` only the smallest value matters for a lower hull, so the
    returned arrays hold one point per distinct ``q``.
    """
    if grid_n < 3:
        raise ValueError("grid needs at least 3 points")
    grid = np.linspace(0.0, 1.0, grid_n)
    inner = grid[~np.isin(grid, g.xs)]
    q = np.concatenate((inner, g.xs))
    y = np.concatenate((
        np.asarray(g(inner), dtype=float).reshape(-1),
        np.minimum(g.values, np.minimum(g.left_limits(), g.right_limits())),
    ))
    order = np.argsort(q, kind="stable")
    return q[order], y[order]


def lower_hull(q: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vertices of the lower convex hull of points sorted by ``q``."""
    hx: list[float] = []
    hy: list[float] = []
    for x, v in zip(q.tolist(), y.tolist()):
        while len(hx) >= 2:
            x1, y1, x2, y2 = hx[-2], hy[-2], hx[-1], hy[-1]
            # drop the middle point unless it lies strictly below the chord
            if (x2 - x1) * (v - y1) - (y2 - y1) * (x - x1) <= 0.0:
                hx.pop()
                hy.pop()
            else:
                break
        hx.append(x)
        hy.append(v)
    return np.array(hx), np.array(hy)


def worst_case(g: PerSignalProfile, mu: float, grid_n: int = DEFAULT_GRID_N) -> EnvelopeResult:
    """Lower convex envelope of ``g`` at ``mu`` with a two-atom witness.

    When the envelope value comes from a one-sided limit at a jump, the
    witness atom sits on the jump itself and only approximates the infimum.
    """
    q, y = envelope_points(g, grid_n)
    hx, hy = lower_hull(q, y)
    j = int(np.searchsorted(hx, mu, side="left"))
    if j < hx.size and hx[j] == mu:
        value = float(hy[j])
        witness = SignalDistribution([mu], [1.0])
        return EnvelopeResult(value, witness, ((mu, value), (mu, value)))
    if j == 0 or j == hx.size:
        raise ValueError(f"mu={mu} lies outside the grid")
    x1, x2 = hx[j - 1], hx[j]
    y1, y2 = hy[j - 1], hy[j]
    w2 = (mu - x1) / (x2 - x1)
    w1 = 1.0 - w2
    value = float(w1 * y1 + w2 * y2)
    witness = SignalDistribution([x1, x2], [w1, w2])
    return EnvelopeResult(value, witness, ((float(x1), float(y1)), (float(x2), float(y2))))


def worst_case_oracle(g: PerSignalProfile, mu: float, grid_n: int = DEFAULT_GRID_N,
                      chunk: int = 512) -> float:
    """Brute force over every mean-``mu`` pair of grid points.

    Uses the same candidate points as :func:`worst_case` but no hull.
    """
    q, y = envelope_points(g, grid_n)
    if mu < q[0] or mu > q[-1]:
        raise ValueError(f"mu={mu} outside [{q[0]}, {q[-1]}]: no feasible pair")
    best = math.inf
    exact = q == mu
    if np.any(exact):
        best = float(y[exact].min())
    left = q < mu
    right = q > mu
    ql, yl = q[left], y[left]
    qr, yr = q[right], y[right]
    for s in range(0, ql.size, chunk):
        a, ya = ql[s:s + chunk, None], yl[s:s + chunk, None]
        w_right = (mu - a) / (qr[None, :] - a)
        vals = (1.0 - w_right) * ya + w_right * yr[None, :]
        if vals.size:
            best = min(best, float(vals.min()))
    return best


# -- deterministic prices -------------------------------------------------


def deterministic_guarantee(p: float, mu: float) -> float:
    """Closed-form guarantee of the posted price ``p`` with no refund."""
    if p >= mu or p <= 0.0:
        return 0.0
    return p * (mu - p) / (1.0 - p)


@dataclass(frozen=True)
class RobustPrice:
    price: float
    guarantee: float
    envelope_guarantee: float
    grid_price: float
    grid_guarantee: float


def robust_price(mu: float, grid_step: float = 1e-4, grid_n: int = DEFAULT_GRID_N) -> RobustPrice:
    """Best single non-refundable price and what it guarantees.

    ``envelope_guarantee`` is the adversary's value for that price;
    ``grid_price`` is the argmax of the closed-form guarantee over a price
    grid of the given spacing.
    """
    if not (0.0 < mu < 1.0):
        raise ValueError(f"mu must lie in (0, 1), got {mu!r}")
    price = 1.0 - math.sqrt(1.0 - mu)
    g = profile(deterministic(price), MarketParams(mu, 1.0))
    env = worst_case(g, mu, grid_n).value
    ps = np.arange(grid_step, 1.0, grid_step)
    vals = np.where(ps < mu, ps * (mu - ps) / (1.0 - ps), 0.0)
    k = int(np.argmax(vals))
    return RobustPrice(price, price * price, env, float(ps[k]), float(vals[k]))


# -- reports --------------------------------------------------------------

REPORT_COLUMNS = ("policy", "mu", "gamma", "value", "witness_q1", "witness_mass1",
                  "witness_q2", "witness_mass2")


def report_rows(name: str, mu: float, gamma: float, res: EnvelopeResult) -> list:
    atoms = res.witness_atoms
    if len(atoms) == 1:
        atoms = atoms + [(atoms[0][0], 0.0)]
    (q1, m1), (q2, m2) = atoms
    return [name, mu, gamma, res.value, q1, m1, q2, m2]


def report_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in rows:
        w.writerow([r[0]] + [f"{x:.12g}" for x in r[1:]])
    return buf.getvalue()
