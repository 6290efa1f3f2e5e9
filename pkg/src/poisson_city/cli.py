"""Command line front end: ``city <subcommand> [options]``.

Each run writes ``<out-dir>/<subcommand>.csv`` and ``<out-dir>/summary.json``.
Exit status is 0 when every reported metric is within tolerance, 2 when some
metric misses, and 1 on errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import acceptance as acc
from . import flow, growth, manhattan
from .acceptance import Metric, in_range, relative, within, within_se
from .experiments import cell_samples
from .lines import DiskWindow, sample_pattern
from .numerics import RngStream, ks_test, linear_fit, mean_and_se, mills_bounds, quad_value
from .routes import build_cell, lateral_limit_density, max_lateral_displacement, routes_to_csv, semi_perimeter_routes
from .svg import render_cell, render_scatter

CSV_COLUMNS = {
    "sample-lines": "kind,r,theta,y_minus,y_plus (one row per line)",
    "cell": "x,y,role with role in vertex, p_minus, p_plus, ray_back, ray_forward",
    "excess": "n,replicate,upper_excess,lower_excess",
    "lateral": "replicate,u,v",
    "growth": "n,mean_sigma,var_sigma,replicates (event path in growth_path.csv: t,theta,x,h)",
    "subordinator": "t,J,xi,eta for the first path (t = jump time)",
    "flow-center": "n,estimate,std_error,outer,inner,seed",
    "flow-limit": "n,estimate,std_error,outer,inner,seed (n is inf)",
    "manhattan": "n,protocol,total_flow,scaled",
    "checks": "name,value,target,tolerance,pass",
    "accept": "criterion,name,value,target,tolerance,pass",
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    subcommand: str
    n_values: list[float]
    replicates: int
    inner_samples: int
    seed: int
    out_dir: Path
    emit_svg: bool = False
    y_scale: float | str = 1.0
    threads: int = 1
    extra: dict = field(default_factory=dict)
    check: bool = True

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("--replicates must be at least 1")
        if not self.n_values:
            raise ConfigError("--n needs at least one value")
        if self.inner_samples < 1:
            raise ConfigError("--inner must be at least 1")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("--seed must be an unsigned 64-bit integer")


DEFAULTS = {
    "sample-lines": ([10.0], 1, 1),
    "cell": ([1000.0], 1, 1),
    "excess": ([float(n) for n in acc.EXCESS_NS], 1000, 1),
    "lateral": ([1000.0], 2000, 1),
    "growth": ([float(n) for n in acc.SIGMA_NS], 10_000, 1),
    "subordinator": ([8.0], 100_000, 1),
    "flow-center": ([1000.0], 200, 5000),
    "flow-limit": ([math.inf], 200, 5000),
    "manhattan": ([150.0], 1, 1),
    "checks": ([1.0], 1, 1),
    "accept": ([1.0], 1, 1),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="city", description="Poissonian city experiments")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name, cols in CSV_COLUMNS.items():
        s = sub.add_parser(name, help=f"CSV columns: {cols}", description=f"CSV columns: {cols}")
        s.add_argument("--n", type=float, nargs="+", help="separation / radius / horizon values")
        s.add_argument("--replicates", type=int, help="outer replicate count")
        s.add_argument("--inner", type=int, help="inner samples per replicate")
        s.add_argument("--seed", type=int, help="master seed (falls back to CITY_SEED)")
        s.add_argument("--out-dir", default="city_out")
        s.add_argument("--emit-svg", action="store_true")
        s.add_argument("--y-scale", default="1", help="vertical exaggeration, or 'auto' for sqrt(n)/4")
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--no-check", action="store_true", help="report metrics but always exit 0")
        if name == "manhattan":
            s.add_argument("--exact-rational", action="store_true", help="small-n oracle: exact rational quadruple sum")
            s.add_argument("--extreme-n", type=int, default=300)
        if name == "growth":
            s.add_argument("--initial", choices=["theta0_cosine", "theta0_pi"], default="theta0_cosine")
        if name == "flow-limit":
            s.add_argument("--h-max", type=float, default=6.0)
            s.add_argument("--y-bound", type=float, default=48.0)
        if name == "accept":
            s.add_argument("--only", type=int, nargs="+", help="run only these criteria")
    return p


def _config(ns: argparse.Namespace) -> ExperimentConfig:
    n_def, r_def, i_def = DEFAULTS[ns.subcommand]
    seed = ns.seed
    if seed is None:
        env = os.environ.get("CITY_SEED")
        seed = int(env) if env else acc.DEFAULT_SEED
    extra = {k: v for k, v in vars(ns).items() if k in ("exact_rational", "extreme_n", "initial", "h_max", "y_bound", "only")}
    y = ns.y_scale if ns.y_scale == "auto" else float(ns.y_scale)
    pick = lambda v, d: d if v is None else v
    return ExperimentConfig(ns.subcommand, pick(ns.n, n_def), pick(ns.replicates, r_def), pick(ns.inner, i_def), seed,
                            Path(ns.out_dir), ns.emit_svg, y, max(1, ns.threads), extra, not ns.no_check)


def _csv(rows, header) -> str:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(repr(float(x)) if isinstance(x, (float, np.floating)) else str(x) for x in r))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Subcommands: each returns (csv text, metrics, extra files)
# ---------------------------------------------------------------------------


def cmd_sample_lines(cfg):
    R = cfg.n_values[0]
    pat = sample_pattern(DiskWindow((0.0, 0.0), R), RngStream(cfg.seed, 0))
    mean = math.pi * R
    m = within("line count against pi R", len(pat), mean, 3.0 * math.sqrt(mean))
    return pat.to_csv(), [m], {}


def cmd_cell(cfg):
    n = cfg.n_values[0]
    stream = RngStream(cfg.seed, 0)
    cell = build_cell((0.0, 0.0), (n, 0.0), stream)
    routes = semi_perimeter_routes(cell)
    disp = max_lateral_displacement(cell)
    metrics = [Metric(f"{r.side} route excess is non-negative", r.excess, 0.0, math.inf, r.excess >= 0) for r in routes]
    files = {}
    if cfg.emit_svg:
        ys = math.sqrt(n) / 4.0 if cfg.y_scale == "auto" else float(cfg.y_scale)
        # the pattern is regenerated from the same stream for drawing
        from .lines import sample_annulus
        from .routes import WindowPolicy

        g = stream.generator()
        pol = WindowPolicy()
        pat = sample_pattern(DiskWindow((0.5 * n, 0.0), pol.initial_radius(n)), g)
        while pat.window.radius < cell.generating_window_radius:
            pat = sample_annulus(pat, 2.0 * pat.window.radius, g)
        files["cell.svg"] = render_cell(cell, routes, pat, disp, y_scale=ys)
    return routes_to_csv(cell, routes), metrics, files


def cmd_excess(cfg):
    rows, means = [], []
    base = RngStream(cfg.seed, 5)
    for n in cfg.n_values:
        a = cell_samples(n, cfg.replicates, base.child(int(n)), cfg.threads)
        means.append(float(a[:, :2].mean()))
        rows += [(n, k, float(a[k, 0]), float(a[k, 1])) for k in range(len(a))]
    metrics = []
    if len(cfg.n_values) >= 2:
        fit = linear_fit(np.log(cfg.n_values), means)
        metrics.append(relative("slope of mean route excess against log n", fit.slope, 4.0 / 3.0, 0.10))
    return _csv(rows, ["n", "replicate", "upper_excess", "lower_excess"]), metrics, {}


def cmd_lateral(cfg):
    n = cfg.n_values[0]
    a = cell_samples(n, cfg.replicates, RngStream(cfg.seed, 4), cfg.threads)
    u, v = a[:, 2], a[:, 3]
    metrics = []
    if len(u) >= 20:
        ks = ks_test(u, lambda x: np.clip(x, 0.0, 1.0))
        metrics.append(Metric("KS p-value of U_n against Uniform[0,1]", ks.p_value, 1.0, 0.99, ks.p_value > 0.01))
    band = (u > 0.45) & (u < 0.55)
    if band.any():
        metrics.append(relative("E[V_n^2 | 0.45 < U_n < 0.55]", float(np.mean(v[band] ** 2)), 2.0, 0.10))
    files = {"lateral.svg": render_scatter(u, v, "U_n", "V_n")} if cfg.emit_svg else {}
    rows = [(k, float(u[k]), float(v[k])) for k in range(len(u))]
    return _csv(rows, ["replicate", "u", "v"]), metrics, files


def cmd_growth(cfg):
    init = cfg.extra.get("initial", "theta0_cosine")
    base = RngStream(cfg.seed, 6)
    rows, means, vars_ = [], [], []
    for n in cfg.n_values:
        s = growth.sample_sigma(n, cfg.replicates, init, base.child(int(n)))
        m, v = float(s.mean()), float(s.var(ddof=1)) if len(s) > 1 else 0.0
        means.append(m)
        vars_.append(v)
        rows.append((n, m, v, cfg.replicates))
    metrics = []
    if len(cfg.n_values) >= 2:
        x = np.log(cfg.n_values)
        metrics.append(relative("slope of E[sigma(n)] against log n", linear_fit(x, means).slope, 2.0 / 3.0, 0.10))
        metrics.append(relative("slope of Var[sigma(n)] against log n", linear_fit(x, vars_).slope, 20.0 / 27.0, 0.20))
    path = growth.simulate_growth(max(cfg.n_values), init, base.child(0))
    return _csv(rows, ["n", "mean_sigma", "var_sigma", "replicates"]), metrics, {"growth_path.csv": path.to_csv()}


def cmd_subordinator(cfg):
    t = cfg.n_values[0]
    base = RngStream(cfg.seed, 7)
    path = growth.simulate_subordinators(base.child(0), t_max=t)
    g = base.child(1).generator()
    xi_t = acc._xi_at(g, t, cfg.replicates)
    metrics = []
    if cfg.replicates > 1:
        e = np.exp(-xi_t)
        em, ese = mean_and_se(e)
        metrics.append(within_se(f"Laplace exponent at q=1, t={t:g}", -math.log(em) / t, growth.laplace_exponent(1.0), ese / (em * t)))
        mm, mse = mean_and_se(xi_t - growth.MARTINGALE_DRIFT * t)
        metrics.append(within_se(f"mean of M_t at t={t:g}", mm, 0.0, mse))
    coupled = bool(np.all(path.eta_jumps <= path.xi_jumps))
    metrics.append(Metric("eta <= xi along the path", float(coupled), 1.0, 0.0, coupled))
    return path.to_csv(), metrics, {}


def cmd_flow_center(cfg):
    rows, metrics = [], []
    for i, n in enumerate(cfg.n_values):
        est = flow.simulate_center_flow(n, cfg.replicates, cfg.inner_samples, RngStream(cfg.seed, 11 + 1000 * i), cfg.threads)
        q = flow.mean_flow_quadrature(n) / n**3
        rows.append(est)
        metrics.append(within_se(f"nested MC T_n/n^3 against quadrature at n={n:g}", est.value, q, est.std_error))
    return flow.estimates_to_csv(rows), metrics, {}


def cmd_flow_limit(cfg):
    h, y = cfg.extra.get("h_max", 6.0), cfg.extra.get("y_bound", 48.0)
    est = flow.simulate_limit_flow(h, y, cfg.inner_samples, RngStream(cfg.seed, 12), cfg.replicates,
                                   bias_pairs=min(4000, 20 * cfg.inner_samples), threads=cfg.threads)
    metrics = [within("limit flow MC mean", est.value, 2.0, 3.0 * est.std_error + est.bias_bound)]
    if cfg.replicates > 2:
        _, p = flow.nondegeneracy_test(est)
        metrics.append(Metric("p-value, across-realization variance exceeds sampling noise", p, 0.0, 0.01, p < 0.01))
    return flow.estimates_to_csv([est]), metrics, {}


def _exact_quadrant_sum(n: int) -> Fraction:
    Q = manhattan.quarter_disk(n)
    total = Fraction(0)
    for u, v in Q:
        for x, y in Q:
            if u + v + x + y:
                total += manhattan.brute_force_prob(manhattan.QuadrantPair(int(u), int(v), int(x), int(y)))
    return total


def cmd_manhattan(cfg):
    rows, metrics = [], []
    for n in cfg.n_values:
        n = int(n)
        r = manhattan.uniform_protocol_flow(n)
        rows.append(r)
        if n >= 100:  # the 2 n^3 asymptote is meaningless for tiny grids
            metrics.append(in_range(f"opposing-quadrant sum / n^3 at n={n}", r.component / n**3, 1.8, 2.2))
        if cfg.extra.get("exact_rational"):
            if 4 * n > manhattan.BRUTE_FORCE_LIMIT:
                raise ConfigError("--exact-rational supports n <= 6")
            exact = _exact_quadrant_sum(n)
            metrics.append(within(f"float sum against exact rational sum at n={n}", r.component, float(exact), 1e-9 * float(exact)))
    ne = cfg.extra.get("extreme_n", 300)
    ex = manhattan.extreme_protocol_flow(ne)
    rows.append(ex)
    metrics.append(in_range(f"extreme protocol total / n^3 at n={ne}", ex.scaled, math.pi - 0.15, math.pi + 0.15))
    rep = manhattan.comparison_report()
    metrics.append(Metric("comparable uniform-protocol flow / n^3", rep.uniform_comparable_flow, 2.54648, 5e-6,
                          abs(rep.uniform_comparable_flow - 2.54648) < 5e-6))
    return manhattan.grid_results_csv(rows), metrics, {}


def quadrature_checks() -> list[Metric]:
    out = [
        within("limit mean by quadrature", flow.limit_mean_quadrature(), 2.0, 1e-4),
        within("lower-bound constant", flow.lower_bound_constant(), math.log(4.0) - 1.25, 1e-6),
        within("perpetuity multiplier density mass", growth.multiplier_mass(), 1.0, 1e-8),
        within("E[m] by quadrature against Beta closed form", growth.multiplier_mean(), growth.multiplier_mean("closed_form"), 1e-10),
        within("int_0^inf exp(-s) ds", quad_value(lambda s: math.exp(-s), 0.0, math.inf, rel_tol=1e-12, abs_tol=1e-12), 1.0, 1e-10),
        within("int_0^1 x^(-1/2) dx", quad_value(lambda x: x**-0.5, 0.0, 1.0, mapping="sqrt_left"), 2.0, 1e-10),
        within("mean |sin| + |cos| over a turn", manhattan.comparison_report().distance_factor_quadrature, 4.0 / math.pi, 1e-10),
        within("Mills ratio at 0", mills_bounds(0.0).exact, math.sqrt(math.pi / 2.0), 1e-10),
    ]
    for u in (0.1, 0.5, 0.9):
        mass = quad_value(lambda v: lateral_limit_density(u, v), 0.0, math.inf, rel_tol=1e-10)
        out.append(within(f"lateral density mass at u={u}", mass, 1.0, 1e-8))
    v2 = quad_value(lambda u: quad_value(lambda v: v * v * lateral_limit_density(u, v), 0.0, math.inf, rel_tol=1e-10), 1e-12, 1 - 1e-12, rel_tol=1e-8)
    out.append(within("second moment of the lateral limit", v2, 4.0 / 3.0, 1e-6))
    out.extend(acc.c14_mills())
    return out


def cmd_checks(cfg):
    ms = quadrature_checks()
    for m in ms:
        print(f"[{'pass' if m.passed else 'FAIL'}] {m.name}: {m.value:.12g} (target {m.target:.12g})")
    rows = [(m.name.replace(",", ";"), m.value, m.target, m.tolerance, m.passed) for m in ms]
    return _csv(rows, ["name", "value", "target", "tolerance", "pass"]), ms, {}


def cmd_accept(cfg):
    keys = cfg.extra.get("only") or sorted(acc.CRITERIA)
    rows, metrics = [], []
    for k in keys:
        kw = {"threads": cfg.threads} if k in (4, 5, 11, 12) else {}
        title, ms = acc.run_criterion(k, cfg.seed, **kw)
        print(acc.format_line(k, title, ms), flush=True)
        metrics += ms
        rows += [(k, m.name.replace(",", ";"), m.value, m.target, m.tolerance, m.passed) for m in ms]
    return _csv(rows, ["criterion", "name", "value", "target", "tolerance", "pass"]), metrics, {}


COMMANDS = {
    "sample-lines": cmd_sample_lines,
    "cell": cmd_cell,
    "excess": cmd_excess,
    "lateral": cmd_lateral,
    "growth": cmd_growth,
    "subordinator": cmd_subordinator,
    "flow-center": cmd_flow_center,
    "flow-limit": cmd_flow_limit,
    "manhattan": cmd_manhattan,
    "checks": cmd_checks,
    "accept": cmd_accept,
}


def execute(cfg: ExperimentConfig) -> int:
    text, metrics, files = COMMANDS[cfg.subcommand](cfg)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    (cfg.out_dir / f"{cfg.subcommand}.csv").write_text(text)
    for name, body in files.items():
        (cfg.out_dir / name).write_text(body)
    params = {
        "n_values": [repr(x) if not math.isfinite(x) else x for x in cfg.n_values],
        "replicates": cfg.replicates,
        "inner_samples": cfg.inner_samples,
        "threads": cfg.threads,
        **{k: v for k, v in cfg.extra.items() if v is not None},
    }
    summary = {
        "subcommand": cfg.subcommand,
        "params": params,
        "metrics": [m.as_dict() for m in metrics],
        "seed": cfg.seed,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    (cfg.out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return 0 if not cfg.check or all(m.passed for m in metrics) else 2


def run(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code == 0 else 1
    try:
        return execute(_config(ns))
    except (ConfigError, ValueError) as e:
        print(f"city: error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - any failure is an error exit
        print(f"city: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
