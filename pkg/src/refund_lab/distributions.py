"""Mean-constrained signal distributions on [0, 1].

A distribution is a set of atoms plus zero or more densities of the form
``k / q**2`` on ``[a, b)``.  That family is closed under everything the
worst-case constructions need, and integrals of the CDF have closed forms
piece by piece.  General shapes enter as discrete grids.
"""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core_math import MarketParams, best_guaranteed_profit

MASS_TOL = 1e-12
MEAN_TOL = 1e-10


class MeanMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Atom:
    q: float
    mass: float


@dataclass(frozen=True)
class ParetoDensity:
    """Density ``k / q**2`` on ``[a, b)``."""

    a: float
    b: float
    k: float

    def __post_init__(self):
        if not (0.0 < self.a < self.b <= 1.0):
            raise ValueError(f"density interval must satisfy 0 < a < b <= 1, got [{self.a}, {self.b})")
        if not (self.k > 0.0):
            raise ValueError(f"density scale must be positive, got {self.k}")

    @property
    def mass(self) -> float:
        return self.k * (1.0 / self.a - 1.0 / self.b)

    @property
    def first_moment(self) -> float:
        return self.k * math.log(self.b / self.a)

    def cdf(self, q):
        q = np.clip(q, self.a, self.b)
        return self.k * (1.0 / self.a - 1.0 / q)

    def cdf_integral(self, lo: float, hi: float) -> float:
        """Integral over ``[lo, hi]`` of this piece's contribution to the CDF."""
        total = 0.0
        x0, x1 = max(lo, self.a), min(hi, self.b)
        if x1 > x0:
            total += self.k / self.a * (x1 - x0) - self.k * math.log(x1 / x0)
        x0 = max(lo, self.b)
        if hi > x0:
            total += self.mass * (hi - x0)
        return total

    def quantile(self, u):
        """Inverse of the piece's own CDF, ``u`` in ``[0, mass]``."""
        return 1.0 / (1.0 / self.a - np.asarray(u) / self.k)


class SignalDistribution:
    """Atoms plus ``k/q**2`` densities.  Immutable once built."""

    def __init__(self, atoms_q: Sequence[float], atoms_m: Sequence[float],
                 densities: Iterable[ParetoDensity] = ()):
        q = np.asarray(atoms_q, dtype=float).ravel()
        m = np.asarray(atoms_m, dtype=float).ravel()
        if q.shape != m.shape:
            raise ValueError("atom locations and masses differ in length")
        if np.any(m < 0.0):
            raise ValueError("atom masses must be nonnegative")
        if np.any((q < 0.0) | (q > 1.0)):
            raise ValueError("atom locations must lie in [0, 1]")
        keep = m > 0.0
        q, m = q[keep], m[keep]
        order = np.argsort(q, kind="stable")
        q, m = q[order], m[order]
        if q.size > 1 and np.any(np.diff(q) == 0.0):
            uq, inv = np.unique(q, return_inverse=True)
            m = np.bincount(inv, weights=m)
            q = uq
        dens = tuple(sorted(densities, key=lambda d: d.a))
        for d0, d1 in zip(dens, dens[1:]):
            if d1.a < d0.b:
                raise ValueError("density pieces overlap")
        total = float(m.sum()) + sum(d.mass for d in dens)
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"total mass is {total!r}, expected 1")
        q.setflags(write=False)
        m.setflags(write=False)
        self._q = q
        self._m = m
        self._densities = dens

    @property
    def atoms_q(self) -> np.ndarray:
        return self._q

    @property
    def atoms_m(self) -> np.ndarray:
        return self._m

    @property
    def densities(self) -> tuple[ParetoDensity, ...]:
        return self._densities

    @property
    def is_discrete(self) -> bool:
        return not self._densities

    @property
    def pieces(self) -> list:
        """Atoms and densities ordered by location."""
        items = [Atom(float(q), float(m)) for q, m in zip(self._q, self._m)]
        items.extend(self._densities)
        return sorted(items, key=lambda p: p.q if isinstance(p, Atom) else p.a)

    def __repr__(self):
        return (f"SignalDistribution(atoms={len(self._q)}, densities={len(self._densities)}, "
                f"mean={mean(self):.6g})")

    def same_as(self, other: "SignalDistribution", tol: float = 1e-12) -> bool:
        """Piecewise equality up to ``tol``."""
        if self._q.shape != other._q.shape or len(self._densities) != len(other._densities):
            return False
        if not (np.allclose(self._q, other._q, rtol=0, atol=tol)
                and np.allclose(self._m, other._m, rtol=0, atol=tol)):
            return False
        for d0, d1 in zip(self._densities, other._densities):
            if max(abs(d0.a - d1.a), abs(d0.b - d1.b), abs(d0.k - d1.k)) > tol:
                return False
        return True


# -- constructors ---------------------------------------------------------


def make_worst_case(params: MarketParams) -> SignalDistribution:
    """The worst-case distribution for restocking cost ``params.gamma``.

    Low-cost regime: atoms at ``V*`` (mass ``1 - gamma``) and 1 (mass
    ``gamma``).  High-cost regime: density ``V*/q**2`` on ``[V*, gamma)``,
    an atom of mass ``V*/gamma - V*`` at ``gamma`` and one of mass ``V*``
    at 1.
    """
    sol = best_guaranteed_profit(params)
    v, gamma = sol.v_star, params.gamma
    if sol.is_low_cost:
        return SignalDistribution([v, 1.0], [1.0 - gamma, gamma])
    return SignalDistribution(
        [gamma, 1.0], [v / gamma - v, v], [ParetoDensity(v, gamma, v)]
    )


def make_rs(mu: float) -> SignalDistribution:
    """Worst case at ``gamma = 1``: density ``V1/q**2`` on ``[V1, 1)``, atom ``V1`` at 1."""
    return make_worst_case(MarketParams(mu, 1.0))


def make_point_mass(mu: float) -> SignalDistribution:
    return SignalDistribution([mu], [1.0])


def make_full_info(mu: float) -> SignalDistribution:
    return SignalDistribution([0.0, 1.0], [1.0 - mu, mu])


def make_discrete(locations: Sequence[float], masses: Sequence[float],
                  mu: float | None = None) -> SignalDistribution:
    """Discrete distribution; with ``mu`` given, the mean is checked to 1e-10."""
    loc = np.asarray(locations, dtype=float)
    if loc.size > 1 and np.any(np.diff(loc) < 0.0):
        raise ValueError("locations must be ascending")
    dist = SignalDistribution(loc, masses)
    if mu is not None and abs(mean(dist) - mu) > MEAN_TOL:
        raise MeanMismatchError(f"mean {mean(dist)!r} differs from mu={mu!r}")
    return dist


def random_discrete(mu: float, n_atoms: int, rng: np.random.Generator) -> SignalDistribution:
    """Random member of the mean-``mu`` family with up to ``n_atoms + 1`` atoms.

    Draws random locations and Dirichlet weights, then mixes in an atom at 0
    or 1 to move the mean onto ``mu`` exactly.
    """
    q = np.sort(rng.uniform(0.0, 1.0, n_atoms))
    w = rng.dirichlet(np.ones(n_atoms))
    m = float(q @ w)
    if m > mu:
        lam = mu / m
        q = np.concatenate(([0.0], q))
        w = np.concatenate(([1.0 - lam], lam * w))
    else:
        lam = (1.0 - mu) / (1.0 - m)
        q = np.concatenate((q, [1.0]))
        w = np.concatenate((lam * w, [1.0 - lam]))
    w = w / w.sum()
    return make_discrete(q, w, mu)


# -- functionals ----------------------------------------------------------


def cdf(F: SignalDistribution, q):
    """Right-continuous CDF; accepts scalars or arrays."""
    qa = np.asarray(q, dtype=float)
    idx = np.searchsorted(F.atoms_q, qa, side="right")
    cum = np.concatenate(([0.0], np.cumsum(F.atoms_m)))
    out = cum[idx]
    for d in F.densities:
        out = out + np.where(qa < d.a, 0.0, d.cdf(qa))
    out = np.minimum(out, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def integral_cdf(F: SignalDistribution, a: float, b: float) -> float:
    """Closed-form ``int_a^b F(q) dq``."""
    if not (0.0 <= a <= b <= 1.0):
        raise ValueError(f"need 0 <= a <= b <= 1, got a={a!r}, b={b!r}")
    start = np.maximum(F.atoms_q, a)
    total = float(np.sum(F.atoms_m * np.maximum(0.0, b - start)))
    for d in F.densities:
        total += d.cdf_integral(a, b)
    return total


def mean(F: SignalDistribution) -> float:
    return float(F.atoms_q @ F.atoms_m) + sum(d.first_moment for d in F.densities)


def total_mass(F: SignalDistribution) -> float:
    return float(F.atoms_m.sum()) + sum(d.mass for d in F.densities)


def _copy_rng(rng: np.random.Generator) -> np.random.Generator:
    return np.random.Generator(copy.deepcopy(rng.bit_generator))


def quantile(F: SignalDistribution, u):
    """Generalized inverse ``inf{q : F(q) >= u}`` for ``u`` in ``[0, 1)``."""
    u = np.asarray(u, dtype=float)
    pieces = F.pieces
    ends = np.cumsum([p.mass for p in pieces])
    ends[-1] = max(ends[-1], 1.0)
    idx = np.minimum(np.searchsorted(ends, u, side="right"), len(pieces) - 1)
    out = np.empty_like(u)
    starts = np.concatenate(([0.0], ends[:-1]))
    for i, p in enumerate(pieces):
        sel = idx == i
        if not np.any(sel):
            continue
        if isinstance(p, Atom):
            out[sel] = p.q
        else:
            local = np.clip(u[sel] - starts[i], 0.0, p.mass)
            out[sel] = np.clip(p.quantile(local), p.a, p.b)
    return out


def sample(F: SignalDistribution, rng: np.random.Generator, n: int):
    """Draw ``n`` signals by quantile inversion.

    The generator passed in is not touched; the advanced generator is
    returned alongside the draws.
    """
    rng = _copy_rng(rng)
    draws = quantile(F, rng.random(n))
    return draws, rng


def discretize(F: SignalDistribution, n: int = 2001) -> SignalDistribution:
    """Mass- and mean-preserving discrete approximation with about ``n`` atoms.

    Existing atoms are kept where they are.  Each density is cut into
    geometrically spaced cells and every cell's mass is placed at its
    conditional mean, so the overall mean is unchanged.
    """
    if F.is_discrete:
        return F
    n_cells = max(n - len(F.atoms_q), len(F.densities))
    logs = [math.log(d.b / d.a) for d in F.densities]
    qs = [F.atoms_q]
    ms = [F.atoms_m]
    for d, ell in zip(F.densities, logs):
        k = max(1, int(round(n_cells * ell / sum(logs))))
        edges = d.a * np.exp(np.linspace(0.0, ell, k + 1))
        edges[-1] = d.b
        lo, hi = edges[:-1], edges[1:]
        mass = d.k * (1.0 / lo - 1.0 / hi)
        moment = d.k * np.log(hi / lo)
        qs.append(moment / mass)
        ms.append(mass)
    q = np.concatenate(qs)
    m = np.concatenate(ms)
    m = m / m.sum()
    return SignalDistribution(q, m)


# -- CSV ------------------------------------------------------------------


def to_csv(F: SignalDistribution, path) -> None:
    if not F.is_discrete:
        raise ValueError("only discrete distributions serialize to CSV; discretize first")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["location", "mass"])
        for q, m in zip(F.atoms_q, F.atoms_m):
            w.writerow([f"{q:.17g}", f"{m:.17g}"])


def from_csv(path, mu: float | None = None) -> SignalDistribution:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"location", "mass"}:
        raise ValueError(f"{path}: expected columns 'location,mass'")
    return make_discrete([float(r["location"]) for r in rows],
                         [float(r["mass"]) for r in rows], mu)
