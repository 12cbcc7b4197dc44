"""Certification battery: one check per acceptance criterion.

Each check returns a :class:`CheckResult`; the CLI ``certify`` verb and the
acceptance tests both run these.  Tolerances and runtime limits are fixed
here and nowhere else.
"""

from __future__ import annotations

import itertools
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import adversary, figures
from .core_math import (
    MarketParams,
    best_guaranteed_profit,
    gamma_bar,
    solve_v_star_bisection,
)
from .distributions import (
    make_full_info,
    make_point_mass,
    make_rs,
    make_worst_case,
    random_discrete,
)
from .evaluation import monte_carlo, profit_closed_form, profit_generic
from .mechanisms import (
    MechanismAllocation,
    buyer_optimal_check,
    discretized_worst_case,
    expected_mechanism_profit,
    optimal_mechanism,
    verify_indeterminacy,
)
from .policies import (
    NAMED_POLICIES,
    TieRule,
    deterministic,
    named_policy,
    profile,
    robust_random_pricing,
    robust_refund_policy,
)

SEED = 20200414


@dataclass(frozen=True)
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    time_limit: float | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        limit = f" / {self.time_limit:g}s" if self.time_limit else ""
        return f"{status} [{self.number}] {self.name}: {self.detail} ({self.seconds:.1f}s{limit})"


def _timed(number, name, limit=None):
    def wrap(fn):
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            ok, detail = fn(*args, **kwargs)
            dt = time.perf_counter() - t0
            if limit is not None and dt > limit:
                ok = False
                detail += f"; runtime {dt:.1f}s exceeds {limit:g}s"
            return CheckResult(number, name, bool(ok), detail, dt, limit)
        run.number = number
        run.check_name = name
        return run
    return wrap


@_timed(1, "closed form vs root finder", limit=5.0)
def check_closed_form_agreement():
    axis = np.linspace(0.01, 0.99, 50)
    worst = 0.0
    for mu in axis:
        for g in axis:
            p = MarketParams(mu, g)
            worst = max(worst, abs(best_guaranteed_profit(p).v_star - solve_v_star_bisection(p)))
    at_zero = max(abs(best_guaranteed_profit(MarketParams(mu, 0.0)).v_star - mu) for mu in axis)
    at_bar = max(abs(best_guaranteed_profit(MarketParams(mu, gamma_bar(mu))).v_star - gamma_bar(mu))
                 for mu in axis)
    ok = worst <= 1e-9 and at_zero <= 1e-12 and at_bar <= 1e-12
    return ok, f"max|lambert-bisect|={worst:.2e}, V0 err={at_zero:.1e}, V(gbar) err={at_bar:.1e}"


@_timed(2, "minimax certificate", limit=30.0)
def check_minimax():
    mus = np.linspace(0.05, 0.95, 10)
    gammas = np.linspace(0.1, 1.0, 10)
    env_err = gen_err = 0.0
    for mu in mus:
        for g in gammas:
            p = MarketParams(mu, g)
            v = best_guaranteed_profit(p).v_star
            pol = robust_refund_policy(p)
            env = adversary.worst_case(profile(pol, p), mu, adversary.DEFAULT_GRID_N).value
            gen = profit_generic(pol, make_worst_case(p), p)
            env_err = max(env_err, abs(env - v))
            gen_err = max(gen_err, abs(gen - v))
    ok = env_err <= 1e-6 and gen_err <= 1e-9
    return ok, f"max|envelope-V*|={env_err:.2e}, max|V(RRP|Fw)-V*|={gen_err:.2e} over 100 cases"


DOMINANCE_CASES = ((0.75, 0.25), (0.75, 0.8), (0.5, 0.6), (0.3, 0.9), (0.9, 0.99))


@_timed(3, "strict dominance over random pricing")
def check_dominance(n_draws: int = 200):
    rng = np.random.default_rng(SEED)
    min_gap = math.inf
    for mu, g in DOMINANCE_CASES:
        p = MarketParams(mu, g)
        rrp, rp = profile(robust_refund_policy(p), p), profile(robust_random_pricing(mu), p)
        for _ in range(n_draws):
            F = random_discrete(mu, int(rng.integers(1, 9)), rng)
            min_gap = min(min_gap, rrp.expect(F) - rp.expect(F))
    v_gap = math.inf
    for mu in (0.1, 0.25, 0.5, 0.75, 0.9):
        v1 = best_guaranteed_profit(MarketParams(mu, 1.0)).v_star
        for g in figures.gamma_grid(0.01)[:-1]:
            v_gap = min(v_gap, best_guaranteed_profit(MarketParams(mu, g)).v_star - v1)
    ok = min_gap > 0.0 and v_gap > 0.0
    return ok, f"min V(RRP|F)-V(RP|F)={min_gap:.2e} over {n_draws * len(DOMINANCE_CASES)} F, min V*-V1*={v_gap:.2e}"


@_timed(4, "deterministic price worst case")
def check_deterministic_price():
    rng = np.random.default_rng(SEED + 4)
    worst = 0.0
    for _ in range(100):
        mu = float(rng.uniform(0.05, 0.95))
        price = float(rng.uniform(0.0, mu))
        g = profile(deterministic(price), MarketParams(mu, 0.5))
        env = adversary.worst_case(g, mu, adversary.DEFAULT_GRID_N).value
        worst = max(worst, abs(env - adversary.deterministic_guarantee(price, mu)))
    arg_err = gua_err = 0.0
    for mu in (0.1, 0.25, 0.5, 0.75, 0.9):
        rp = adversary.robust_price(mu)
        target = (1.0 - math.sqrt(1.0 - mu)) ** 2
        arg_err = max(arg_err, abs(rp.grid_price - rp.price))
        gua_err = max(gua_err, abs(rp.envelope_guarantee - target), abs(rp.grid_guarantee - target))
    ok = worst <= 1e-6 and arg_err <= 1e-3 and gua_err <= 1e-6
    return ok, (f"max|envelope-p(mu-p)/(1-p)|={worst:.2e}, argmax err={arg_err:.1e}, "
                f"guarantee err={gua_err:.1e}")


def _battery(mu: float, rng, n_random: int = 50):
    named = [("F_w(0.25)", make_worst_case(MarketParams(mu, 0.25))),
             ("F_w(0.8)", make_worst_case(MarketParams(mu, 0.8))),
             ("G_RS", make_rs(mu)),
             ("point_mass", make_point_mass(mu)),
             ("full_info", make_full_info(mu))]
    randoms = [(f"random_{i}", random_discrete(mu, int(rng.integers(1, 9)), rng))
               for i in range(n_random)]
    return named + randoms


@_timed(5, "random pricing against G_RS")
def check_random_pricing():
    rng = np.random.default_rng(SEED + 5)
    worst_sup = -math.inf
    worst_floor = math.inf
    prices = np.arange(1, 10001) / 10000
    for mu in (0.25, 0.5, 0.75):
        v1 = best_guaranteed_profit(MarketParams(mu, 1.0)).v_star
        G = make_rs(mu)
        p = MarketParams(mu, 1.0)
        sup = max(
            max(profit_generic(deterministic(float(x)), G, p, tie) for x in prices)
            for tie in (TieRule.ADVERSARIAL, TieRule.FAVORABLE)
        )
        worst_sup = max(worst_sup, sup - v1)
        rp = profile(robust_random_pricing(mu), p)
        for _, F in _battery(mu, rng):
            worst_floor = min(worst_floor, rp.expect(F) - v1)
    ok = worst_sup <= 1e-6 and worst_floor >= -1e-12
    return ok, f"max(sup_p V(p|G_RS)-V1*)={worst_sup:.2e}, min(V(RP|F)-V1*)={worst_floor:.2e}"


MECHANISM_CASES = ((0.75, 0.25), (0.75, 0.8), (0.5, 1.0), (0.3, 0.9), (0.9, 0.95))


def _exhaustive_best(F, params):
    grid = F.atoms_q
    n = grid.size
    best = -math.inf
    for bits in itertools.product((0.0, 1.0), repeat=n):
        a0 = np.array(bits)
        if np.any(np.diff(a0) < 0.0) or (grid[0] == 0.0 and a0[0] == 1.0):
            continue
        best = max(best, expected_mechanism_profit(MechanismAllocation(grid, a0), F, params.gamma))
    return best


@_timed(6, "optimal mechanism against the worst case", limit=60.0)
def check_mechanism():
    notes = []
    ok = True
    for mu, g in MECHANISM_CASES:
        p = MarketParams(mu, g)
        v = best_guaranteed_profit(p).v_star
        errs = {n: optimal_mechanism(discretized_worst_case(p, n), p).value - v for n in (251, 501, 2001)}
        rate_ok = all(
            errs[n] <= 2.0 * max(errs[251], 0.0) * 251 / n + 1e-12 for n in (501, 2001)
        )
        spread = verify_indeterminacy(p, 2001).spread
        ok &= abs(errs[2001]) <= 2e-3 and min(errs.values()) >= -1e-12 and rate_ok and spread <= 2e-3
        notes.append(f"({mu},{g}) err2001={errs[2001]:.1e} spread={spread:.1e}")
    rng = np.random.default_rng(SEED + 6)
    mismatch = 0.0
    excess = -math.inf
    for _ in range(200):
        mu = float(rng.uniform(0.05, 0.95))
        p = MarketParams(mu, float(rng.uniform(0.0, 1.0)))
        F = random_discrete(mu, int(rng.integers(1, 12)), rng)
        res = optimal_mechanism(F, p)
        mismatch = max(mismatch, abs(res.value - _exhaustive_best(F, p)))
        for _ in range(5):
            a0 = np.sort(rng.random(F.atoms_q.size))
            if F.atoms_q[0] == 0.0:
                a0[0] = 0.0
            val = expected_mechanism_profit(MechanismAllocation(F.atoms_q, a0), F, p.gamma)
            excess = max(excess, val - res.value)
    ok &= mismatch <= 1e-12 and excess <= 1e-12
    notes.append(f"scan vs exhaustive max diff={mismatch:.1e} on 200 instances")
    return ok, "; ".join(notes)


@_timed(7, "buyer-optimal information structure")
def check_buyer_optimal():
    rng = np.random.default_rng(SEED + 7)
    ok = True
    notes = []
    for mu, g in MECHANISM_CASES:
        p = MarketParams(mu, g)
        battery = [make_worst_case(p)] + [random_discrete(mu, int(rng.integers(1, 9)), rng)
                                          for _ in range(100)]
        rep = buyer_optimal_check(p, battery, 2001)
        ok &= rep.ok(1e-3)
        notes.append(f"({mu},{g}) min seller-V*={np.min(rep.seller_values) - rep.v_star:.1e}, "
                     f"max buyer-(mu-V*)={np.max(rep.buyer_payoffs) - rep.target_payoff:.1e}")
    return ok, "; ".join(notes)


THREE_ROUTE_CASES = ((0.75, 0.8), (0.75, 0.25))


@_timed(8, "three-route evaluation agreement", limit=60.0)
def check_three_routes(mc_n: int = 1_000_000):
    rng = np.random.default_rng(SEED + 8)
    cf_err = 0.0
    worst_z = 0.0
    count = 0
    for mu, g in THREE_ROUTE_CASES:
        p = MarketParams(mu, g)
        dists = [("F_w", make_worst_case(p)), ("G_RS", make_rs(mu)),
                 ("point_mass", make_point_mass(mu)), ("full_info", make_full_info(mu))]
        dists += [(f"random_{i}", random_discrete(mu, int(rng.integers(1, 9)), rng))
                  for i in range(50)]
        # the low-cost case only re-checks the named distributions by simulation
        mc_dists = dists if g > gamma_bar(mu) else dists[:4]
        for name in NAMED_POLICIES:
            try:
                pol = named_policy(name, p)
            except ValueError:
                continue
            g_prof = profile(pol, p)
            for dname, F in dists:
                gen = g_prof.expect(F)
                cf_err = max(cf_err, abs(profit_closed_form(name, F, p) - gen))
            for k, (dname, F) in enumerate(mc_dists):
                gen = g_prof.expect(F)
                est, se = monte_carlo(pol, F, p, mc_n, np.random.SeedSequence([SEED, k, count]))
                count += 1
                z = abs(est - gen) / se if se > 0 else (0.0 if abs(est - gen) <= 1e-12 else math.inf)
                worst_z = max(worst_z, z)
    ok = cf_err <= 1e-9 and worst_z <= 4.0
    return ok, f"max|closed-generic|={cf_err:.1e}, max MC z={worst_z:.2f} over {count} runs"


FIGURE_MU = 0.75
FIGURE_GAMMAS = (0.25, 0.8)


def figure_properties(out_dir, mu: float, gammas) -> tuple[bool, str]:
    ok = True
    notes = []
    for g in gammas:
        d = figures.read_csv(Path(out_dir) / figures.fig1_name(g))
        v = best_guaranteed_profit(MarketParams(mu, g)).v_star
        q, Fw, bound = d["q"], d["F_w"], d["pareto_bound"]
        above = bool(np.all(Fw >= bound - 1e-11))
        band = (q >= v) & (q < min(g, 1.0))
        equal = bool(np.all(np.abs(Fw[band] - bound[band]) <= 1e-11))
        ok &= above and equal
        notes.append(f"fig1 gamma={g:g}: above={above}, equal on {int(band.sum())} pts={equal}")
    d = figures.read_csv(Path(out_dir) / "fig2.csv")
    v = d["v_star"]
    decreasing = bool(np.all(np.diff(v) < 0.0))
    dominates = all(bool(np.all(v >= d[c] - 1e-11))
                    for c in ("v1_star", "robust_price_guarantee", "generous_refund_guarantee"))
    ok &= decreasing and dominates and abs(v[0] - mu) <= 1e-11 and abs(v[-1] - d["v1_star"][-1]) <= 1e-11
    notes.append(f"fig2: strictly decreasing={decreasing}, dominates={dominates}")
    return ok, "; ".join(notes)


@_timed(9, "figure reproduction")
def check_figures(fixture_dir=None):
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        files_a = figures.write_figures(FIGURE_MU, FIGURE_GAMMAS, a)
        figures.write_figures(FIGURE_MU, FIGURE_GAMMAS, b)
        same = all(f.read_bytes() == (Path(b) / f.name).read_bytes() for f in files_a)
        fixture_note = "no fixtures given"
        fixtures_ok = True
        if fixture_dir is not None:
            fixture_dir = Path(fixture_dir)
            fixtures_ok = all(
                (fixture_dir / f.name).is_file() and f.read_bytes() == (fixture_dir / f.name).read_bytes()
                for f in files_a
            )
            fixture_note = f"fixtures identical={fixtures_ok}"
        props_ok, props = figure_properties(a, FIGURE_MU, FIGURE_GAMMAS)
    ok = same and fixtures_ok and props_ok
    return ok, f"rerun identical={same}, {fixture_note}; {props}"


ALL_CHECKS = (
    check_closed_form_agreement,
    check_minimax,
    check_dominance,
    check_deterministic_price,
    check_random_pricing,
    check_mechanism,
    check_buyer_optimal,
    check_three_routes,
    check_figures,
)


def run_all(fixture_dir=None, echo=print) -> list[CheckResult]:
    results = []
    for check in ALL_CHECKS:
        res = check(fixture_dir) if check is check_figures else check()
        if echo is not None:
            echo(res.line())
        results.append(res)
    return results
