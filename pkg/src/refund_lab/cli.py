"""Command-line front end.

Every verb takes an optional JSON scenario file (``--config``); flags given
on the command line override the file.  ``mu``, ``gamma`` and ``c`` accept
lists, in which case the verb sweeps their product on a worker pool and
writes results in input order.

Exit codes: 0 success, 1 a tolerance check failed, 2 configuration error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import adversary, certify, figures
from .core_math import MarketParams, best_guaranteed_profit, rescale_market
from .distributions import (
    SignalDistribution,
    discretize,
    from_csv,
    make_discrete,
    make_full_info,
    make_point_mass,
    make_rs,
    make_worst_case,
    random_discrete,
)
from .evaluation import _worker_count, fmt, monte_carlo, profit_closed_form
from .mechanisms import allocation_csv, optimal_mechanism
from .policies import NAMED_POLICIES, TieRule, named_policy, policy_from_dict, profile

EXIT_CHECK = 1
EXIT_CONFIG = 2
EXIT_IO = 3

SCENARIO_KEYS = {"mu", "gamma", "c", "v_bar", "policy", "distribution", "grid_n", "seed",
                 "n_mc", "tie", "output"}
DISTRIBUTION_NAMES = ("worst_case", "rs", "point_mass", "full_info")


class ConfigError(ValueError):
    pass


def _as_list(x):
    if x is None:
        return None
    return list(x) if isinstance(x, (list, tuple)) else [x]


@dataclass
class Scenario:
    mus: list
    gammas: list
    scale: float = 1.0
    policies: list = field(default_factory=lambda: ["robust_refund_policy"])
    distributions: list = field(default_factory=lambda: ["worst_case"])
    grid_n: int | None = None
    seed: int | None = None
    n_mc: int = 0
    tie: TieRule = TieRule.ADVERSARIAL
    output: str | None = None

    def cases(self) -> list[MarketParams]:
        return [MarketParams(mu, g) for mu in self.mus for g in self.gammas]


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: scenario must be a JSON object")
    extra = set(doc) - SCENARIO_KEYS
    if extra:
        raise ConfigError(f"{path}: unknown scenario keys {sorted(extra)}")
    return doc


def build_scenario(args) -> Scenario:
    doc = load_config(getattr(args, "config", None))
    for key in SCENARIO_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            doc[key] = val
    if "mu" not in doc:
        raise ConfigError("mu is required")
    mus = [float(x) for x in _as_list(doc["mu"])]
    scale = 1.0
    if "c" in doc:
        if "gamma" in doc:
            raise ConfigError("give either gamma or c, not both")
        v_bar = float(doc.get("v_bar", 1.0))
        gammas = []
        for c in _as_list(doc["c"]):
            _, signal, scale = rescale_market(v_bar, float(c))
            gammas.append(signal)
    elif "v_bar" in doc:
        raise ConfigError("v_bar only applies together with c")
    else:
        gammas = [float(x) for x in _as_list(doc.get("gamma", 1.0))]
    tie = doc.get("tie", "adversarial")
    try:
        tie = TieRule(tie) if not isinstance(tie, TieRule) else tie
    except ValueError:
        raise ConfigError(f"unknown tie rule {tie!r}") from None
    sc = Scenario(
        mus, gammas, scale,
        policies=_as_list(doc.get("policy", "robust_refund_policy")),
        distributions=_as_list(doc.get("distribution", "worst_case")),
        grid_n=None if doc.get("grid_n") is None else int(doc["grid_n"]),
        seed=None if doc.get("seed") is None else int(doc["seed"]),
        n_mc=int(doc.get("n_mc", 0)),
        tie=tie,
        output=doc.get("output"),
    )
    sc.cases()  # validates every (mu, gamma)
    if sc.n_mc < 0:
        raise ConfigError("n_mc must be nonnegative")
    if sc.n_mc and sc.seed is None:
        raise ConfigError("Monte Carlo needs an explicit seed")
    return sc


def resolve_policy(item, params: MarketParams):
    """``(label, policy)`` from a policy name or a JSON policy document."""
    if isinstance(item, str):
        if item not in NAMED_POLICIES:
            raise ConfigError(f"unknown policy {item!r}; known: {', '.join(NAMED_POLICIES)}")
        return item, named_policy(item, params)
    if isinstance(item, dict):
        item = dict(item)
        label = item.pop("name", "custom")
        return str(label), policy_from_dict(item)
    raise ConfigError(f"bad policy item {item!r}")


def resolve_distribution(item, params: MarketParams) -> tuple[str, SignalDistribution]:
    mu = params.mu
    if isinstance(item, str):
        makers = {
            "worst_case": lambda: make_worst_case(params),
            "rs": lambda: make_rs(mu),
            "point_mass": lambda: make_point_mass(mu),
            "full_info": lambda: make_full_info(mu),
        }
        if item not in makers:
            raise ConfigError(f"unknown distribution {item!r}; known: {', '.join(DISTRIBUTION_NAMES)}")
        return item, makers[item]()
    if isinstance(item, dict) and len(item) == 1:
        (kind, body), = item.items()
        if kind == "csv":
            return f"csv:{body}", from_csv(body, mu)
        if kind == "discrete" and isinstance(body, dict) and set(body) == {"locations", "masses"}:
            return "discrete", make_discrete(body["locations"], body["masses"], mu)
        if kind == "random" and isinstance(body, dict) and set(body) == {"n_atoms", "seed"}:
            rng = np.random.default_rng(int(body["seed"]))
            return f"random_{body['seed']}", random_discrete(mu, int(body["n_atoms"]), rng)
    raise ConfigError(f"bad distribution item {item!r}")


def sweep(fn, items) -> list:
    """Map ``fn`` over ``items`` on a capped thread pool, keeping input order."""
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        return list(pool.map(fn, items))


def render_csv(columns, rows) -> str:
    lines = [",".join(columns)]
    for r in rows:
        lines.append(",".join(x if isinstance(x, str) else fmt(x) for x in r))
    return "\n".join(lines) + "\n"


def emit(text: str, output) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        with open(output, "w") as fh:
            fh.write(text)


# -- verbs ----------------------------------------------------------------

COMPUTE_COLUMNS = ("mu", "gamma", "c", "gamma_bar", "v_star", "beta_star", "branch",
                   "discount_lo", "discount_hi", "scale", "scaled_v_star")


def cmd_compute(sc: Scenario, args) -> int:
    def row(p):
        s = best_guaranteed_profit(p)
        lo, hi = s.discount_interval if s.discount_interval else (math.nan, math.nan)
        return (p.mu, p.gamma, p.c, s.gamma_bar, s.v_star, s.beta_star, s.branch,
                lo, hi, sc.scale, sc.scale * s.v_star)

    emit(render_csv(COMPUTE_COLUMNS, sweep(row, sc.cases())), sc.output)
    return 0


EVALUATE_COLUMNS = ("mu", "gamma", "policy", "distribution", "route", "value", "std_error")


def cmd_evaluate(sc: Scenario, args) -> int:
    def rows_for(item):
        k, p = item
        out = []
        for i, pitem in enumerate(sc.policies):
            label, pol = resolve_policy(pitem, p)
            g = profile(pol, p, sc.tie)
            for j, ditem in enumerate(sc.distributions):
                dname, F = resolve_distribution(ditem, p)
                generic = g.expect(F)
                if isinstance(pitem, str) and sc.tie is TieRule.ADVERSARIAL:
                    try:
                        closed = profit_closed_form(pitem, F, p)
                        out.append((p.mu, p.gamma, label, dname, "closed_form", closed, ""))
                    except ValueError:
                        pass
                out.append((p.mu, p.gamma, label, dname, "generic", generic, ""))
                if sc.n_mc:
                    seq = np.random.SeedSequence([sc.seed, k, i, j])
                    est, se = monte_carlo(pol, F, p, sc.n_mc, seq, sc.tie)
                    out.append((p.mu, p.gamma, label, dname, "monte_carlo", est, fmt(se)))
        return out

    rows = [r for block in sweep(rows_for, list(enumerate(sc.cases()))) for r in block]
    emit(render_csv(EVALUATE_COLUMNS, rows), sc.output)
    if args.check:
        return _check_routes(rows)
    return 0


def _check_routes(rows) -> int:
    failed = []
    groups: dict = {}
    for mu, g, pol, dist, route, val, se in rows:
        groups.setdefault((mu, g, pol, dist), {})[route] = (val, se)
    for key, routes in groups.items():
        gen = routes["generic"][0]
        if "closed_form" in routes and abs(routes["closed_form"][0] - gen) > 1e-9:
            failed.append(f"{key}: closed form {routes['closed_form'][0]} vs generic {gen}")
        if "monte_carlo" in routes:
            est, se = routes["monte_carlo"][0], float(routes["monte_carlo"][1])
            if abs(est - gen) > 4.0 * se + 1e-12:
                failed.append(f"{key}: Monte Carlo {est} off generic {gen} by more than 4 se")
    for msg in failed:
        print(f"check failed: {msg}", file=sys.stderr)
    return EXIT_CHECK if failed else 0


def cmd_adversary(sc: Scenario, args) -> int:
    grid_n = sc.grid_n or adversary.DEFAULT_GRID_N

    def rows_for(p):
        out, bad = [], []
        for pitem in sc.policies:
            label, pol = resolve_policy(pitem, p)
            g = profile(pol, p, sc.tie)
            res = adversary.worst_case(g, p.mu, grid_n)
            out.append(adversary.report_rows(label, p.mu, p.gamma, res))
            if args.check:
                ref = adversary.worst_case_oracle(g, p.mu, grid_n)
                if abs(ref - res.value) > 1e-9:
                    bad.append(f"{label} at ({p.mu}, {p.gamma}): hull {res.value} vs pairs {ref}")
        return out, bad

    results = sweep(rows_for, sc.cases())
    rows = [r for block, _ in results for r in block]
    emit(adversary.report_csv(rows), sc.output)
    failed = [m for _, bad in results for m in bad]
    for msg in failed:
        print(f"check failed: {msg}", file=sys.stderr)
    return EXIT_CHECK if failed else 0


MECHANISM_COLUMNS = ("mu", "gamma", "distribution", "grid_n", "value", "buyer_payoff",
                     "threshold", "v_star")


def cmd_mechanism(sc: Scenario, args) -> int:
    grid_n = sc.grid_n or 2001
    if args.alloc_out and (len(sc.cases()) != 1 or len(sc.distributions) != 1):
        raise ConfigError("--alloc-out needs a single (mu, gamma) and one distribution")

    def rows_for(p):
        v = best_guaranteed_profit(p).v_star
        out, bad, allocs = [], [], []
        for ditem in sc.distributions:
            dname, F = resolve_distribution(ditem, p)
            res = optimal_mechanism(discretize(F, grid_n), p)
            out.append((p.mu, p.gamma, dname, float(grid_n), res.value, res.buyer_payoff,
                        res.threshold, v))
            allocs.append(res.alloc)
            if args.check and dname == "worst_case" and abs(res.value - v) > 2e-3:
                bad.append(f"({p.mu}, {p.gamma}): mechanism {res.value} vs V* {v}")
        return out, bad, allocs

    results = sweep(rows_for, sc.cases())
    rows = [r for block, _, _ in results for r in block]
    emit(render_csv(MECHANISM_COLUMNS, rows), sc.output)
    if args.alloc_out:
        with open(args.alloc_out, "w") as fh:
            fh.write(allocation_csv(results[0][2][0], sc.gammas[0]))
    failed = [m for _, bad, _ in results for m in bad]
    for msg in failed:
        print(f"check failed: {msg}", file=sys.stderr)
    return EXIT_CHECK if failed else 0


def cmd_figures(args) -> int:
    doc = load_config(args.config)
    mu = args.mu if args.mu is not None else doc.get("mu", certify.FIGURE_MU)
    if isinstance(mu, list):
        if len(mu) != 1:
            raise ConfigError("figures take a single mu")
        mu = mu[0]
    gammas = args.gamma if args.gamma is not None else _as_list(doc.get("gamma", list(certify.FIGURE_GAMMAS)))
    for g in gammas:
        MarketParams(float(mu), float(g))
    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        written = figures.write_figures(float(mu), [float(g) for g in gammas], args.out_dir,
                                        args.fig2_step, pool.map)
    for path in written:
        print(path)
    return 0


def cmd_certify(args) -> int:
    results = certify.run_all(args.fixtures)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return EXIT_CHECK if failed else 0


# -- parser ---------------------------------------------------------------


def _scenario_flags(p: argparse.ArgumentParser, *, policy=False, dist=False,
                    grid=False, mc=False) -> None:
    p.add_argument("--config", help="JSON scenario file; flags override its values")
    p.add_argument("--mu", type=float, nargs="+", help="prior mean(s) of the signal")
    p.add_argument("--gamma", type=float, nargs="+", help="normalized restocking cost(s) in [0, 1]")
    p.add_argument("--c", type=float, nargs="+", help="raw restocking cost(s), used instead of --gamma")
    p.add_argument("--v-bar", dest="v_bar", type=float, help="match value paired with --c (default 1)")
    p.add_argument("--output", "-o", help="write CSV here instead of stdout")
    if policy:
        p.add_argument("--policy", nargs="+", help=f"policy names: {', '.join(NAMED_POLICIES)}")
        p.add_argument("--tie", choices=[t.value for t in TieRule],
                       help="who wins ties at the marginal signal (default adversarial)")
    if dist:
        p.add_argument("--distribution", nargs="+",
                       help=f"distribution names: {', '.join(DISTRIBUTION_NAMES)}")
    if grid:
        p.add_argument("--grid-n", dest="grid_n", type=int, help="grid size")
    if mc:
        p.add_argument("--n-mc", dest="n_mc", type=int, help="Monte Carlo rounds (0 disables)")
        p.add_argument("--seed", type=int, help="seed, required with --n-mc")
    if policy or dist:
        p.add_argument("--check", action="store_true",
                       help="exit 1 if a tolerance check fails")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refund-lab",
        description="Robust pricing with refunds: guarantees, evaluation, adversary, mechanisms.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("compute", help="best guarantee, cost threshold and mixing weight")
    _scenario_flags(p)
    p = sub.add_parser("evaluate", help="expected profit of policies against distributions")
    _scenario_flags(p, policy=True, dist=True, mc=True)
    p = sub.add_parser("adversary", help="worst-case distribution for each policy")
    _scenario_flags(p, policy=True, grid=True)
    p = sub.add_parser("mechanism", help="optimal direct mechanism against a distribution")
    _scenario_flags(p, dist=True, grid=True)
    p.add_argument("--alloc-out", help="write the optimal allocation (q, alpha0, alpha_r) here")

    p = sub.add_parser("figures", help="write fig1_<gamma>.csv and fig2.csv")
    p.add_argument("--config", help="JSON scenario file (mu, gamma)")
    p.add_argument("--mu", type=float, help=f"prior mean (default {certify.FIGURE_MU})")
    p.add_argument("--gamma", type=float, nargs="+", help="costs for fig1 (default 0.25 0.8)")
    p.add_argument("--out-dir", required=True, help="directory for the CSV files")
    p.add_argument("--fig2-step", type=float, default=0.01, help="gamma spacing in fig2")

    p = sub.add_parser("certify", help="run the full acceptance battery")
    p.add_argument("--fixtures", help="directory of reference figure CSVs to compare against")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.verb == "figures":
            return cmd_figures(args)
        if args.verb == "certify":
            return cmd_certify(args)
        sc = build_scenario(args)
        return {"compute": cmd_compute, "evaluate": cmd_evaluate,
                "adversary": cmd_adversary, "mechanism": cmd_mechanism}[args.verb](sc, args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
