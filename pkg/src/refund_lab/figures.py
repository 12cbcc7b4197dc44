"""Data behind the two figures: worst-case CDFs and guarantees across costs."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .core_math import MarketParams, best_guaranteed_profit
from .distributions import cdf, make_worst_case

FIG1_COLUMNS = ("q", "F_w", "pareto_bound")
FIG2_COLUMNS = ("gamma", "v_star", "v1_star", "robust_price_guarantee",
                "generous_refund_guarantee")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _render(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def q_grid(step: float = 1e-3) -> np.ndarray:
    n = int(round(1.0 / step))
    return np.arange(n + 1) / n


def fig1_rows(mu: float, gamma: float, step: float = 1e-3) -> list[tuple[float, float, float]]:
    """``(q, F_w(q), 1 - V*/q)`` on a uniform signal grid."""
    params = MarketParams(mu, gamma)
    v = best_guaranteed_profit(params).v_star
    F = make_worst_case(params)
    q = q_grid(step)
    Fq = cdf(F, q)
    with np.errstate(divide="ignore"):
        bound = 1.0 - v / q
    return list(zip(q.tolist(), Fq.tolist(), bound.tolist()))


def generous_guarantee(mu: float, gamma: float) -> float:
    """Guarantee of the generous refund alone: its profile is convex, so ``g(mu)``."""
    if gamma >= 1.0 or mu <= gamma:
        return 0.0
    return (mu - gamma) / (1.0 - gamma)


def fig2_row(mu: float, gamma: float) -> tuple[float, ...]:
    v = best_guaranteed_profit(MarketParams(mu, gamma)).v_star
    v1 = best_guaranteed_profit(MarketParams(mu, 1.0)).v_star
    p = 1.0 - math.sqrt(1.0 - mu)
    return (gamma, v, v1, p * p, generous_guarantee(mu, gamma))


def gamma_grid(step: float = 0.01) -> np.ndarray:
    n = int(round(1.0 / step))
    return np.arange(n + 1) / n


def fig1_name(gamma: float) -> str:
    return f"fig1_{gamma:g}.csv"


def fig1_csv(mu: float, gamma: float, step: float = 1e-3) -> str:
    return _render(FIG1_COLUMNS, fig1_rows(mu, gamma, step))


def fig2_csv(mu: float, gammas, map_fn=map) -> str:
    rows = list(map_fn(lambda g: fig2_row(mu, float(g)), gammas))
    return _render(FIG2_COLUMNS, rows)


def write_figures(mu: float, fig1_gammas, out_dir, fig2_step: float = 0.01,
                  map_fn=map) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for g in fig1_gammas:
        path = out / fig1_name(g)
        path.write_text(fig1_csv(mu, g))
        written.append(path)
    path = out / "fig2.csv"
    path.write_text(fig2_csv(mu, gamma_grid(fig2_step), map_fn))
    written.append(path)
    return written


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body])
    return {name: data[:, i] for i, name in enumerate(header)}
