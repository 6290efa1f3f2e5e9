"""Acceptance criteria, each returning named metrics with targets and tolerances."""

from __future__ import annotations

import math
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import flow, growth, manhattan
from .experiments import cell_samples, hitting_counts, intersection_density, no_separator_frequency
from .geometry import Segment
from .numerics import RngStream, ks_test, linear_fit, mean_and_se, mills_bounds
from .routes import separation_probability

DEFAULT_SEED = 20100628


@dataclass(frozen=True)
class Metric:
    name: str
    value: float
    target: float
    tolerance: float
    passed: bool

    def as_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        for k in ("value", "target", "tolerance"):
            if isinstance(d[k], float) and not math.isfinite(d[k]):
                d[k] = repr(d[k])
        return d


def within(name, value, target, tol) -> Metric:
    return Metric(name, float(value), float(target), float(tol), bool(abs(value - target) <= tol))


def within_se(name, value, target, se, k=3.0) -> Metric:
    return within(name, value, target, k * se)


def relative(name, value, target, rel) -> Metric:
    return within(name, value, target, rel * abs(target))


def in_range(name, value, lo, hi) -> Metric:
    return Metric(name, float(value), 0.5 * (lo + hi), 0.5 * (hi - lo), bool(lo <= value <= hi))


def stream(seed: int, criterion: int) -> RngStream:
    return RngStream(seed, criterion)


# ---------------------------------------------------------------------------


def c01_hitting(seed=DEFAULT_SEED):
    c = hitting_counts(Segment((0.0, 0.0), (3.0, 4.0)), 10_000, stream(seed, 1))
    m, se = mean_and_se(c)
    return [within_se("mean lines crossing a length-5 segment", m, 5.0, se)]


def c02_intersections(seed=DEFAULT_SEED):
    d = intersection_density(10_000, stream(seed, 2))
    m, se = mean_and_se(d)
    return [within_se("intersection points per unit area", m, math.pi / 2.0, se)]


SEPARATION_GEOMETRIES = [
    # (p-, p+, viewpoint)
    ((1.0, 0.0), (0.0, 1.0), (0.0, 0.0)),
    ((2.0, 1.0), (3.0, -1.0), (0.0, 0.0)),
    ((-1.0, 2.0), (1.5, 2.0), (0.0, 0.0)),
    ((0.5, 0.5), (4.0, 0.0), (-1.0, -1.0)),
    ((-3.0, 1.0), (3.0, 1.0), (0.0, -0.5)),
]


def c03_separation(seed=DEFAULT_SEED):
    out = []
    base = stream(seed, 3)
    for i, (a, b, o) in enumerate(SEPARATION_GEOMETRIES):
        f = no_separator_frequency(a, b, o, 10_000, base.child(i))
        m, se = mean_and_se(f)
        out.append(within_se(f"no-separator frequency, geometry {i + 1}", m, separation_probability(a, b, o), se))
    return out


def c04_lateral(seed=DEFAULT_SEED, n=1000, samples=2000, threads=1):
    a = cell_samples(n, samples, stream(seed, 4), threads)
    u, v = a[:, 2], a[:, 3]
    ks = ks_test(u, lambda x: np.clip(x, 0.0, 1.0))
    band = (u > 0.45) & (u < 0.55)
    v2 = float(np.mean(v[band] ** 2))
    return [
        Metric("KS p-value of U_n against Uniform[0,1]", ks.p_value, 1.0, 0.99, ks.p_value > 0.01),
        relative("E[V_n^2 | 0.45 < U_n < 0.55]", v2, 2.0, 0.10),
    ]


EXCESS_NS = [128, 256, 512, 1024, 2048, 4096]


def c05_excess(seed=DEFAULT_SEED, reps=1000, threads=1):
    means = []
    base = stream(seed, 5)
    for n in EXCESS_NS:
        a = cell_samples(n, reps, base.child(n), threads)
        means.append(float(a[:, :2].mean()))
    fit = linear_fit(np.log(EXCESS_NS), means)
    return [relative("slope of mean route excess against log n", fit.slope, 4.0 / 3.0, 0.10)]


SIGMA_NS = [2**k for k in range(7, 14)]


def c06_growth(seed=DEFAULT_SEED, reps=10_000):
    base = stream(seed, 6)
    mean, var = [], []
    for n in SIGMA_NS:
        s = growth.sample_sigma(n, reps, "theta0_cosine", base.child(n))
        mean.append(float(s.mean()))
        var.append(float(s.var(ddof=1)))
    x = np.log(SIGMA_NS)
    return [
        relative("slope of E[sigma(n)] against log n", linear_fit(x, mean).slope, 2.0 / 3.0, 0.10),
        relative("slope of Var[sigma(n)] against log n", linear_fit(x, var).slope, 20.0 / 27.0, 0.20),
    ]


def c07_subordinator(seed=DEFAULT_SEED, reps=100_000):
    base = stream(seed, 7)
    g = base.child(0).generator()
    y = growth.xi_jump(g.exponential(1.0, reps))
    m, se = mean_and_se(y)
    v = float(y.var(ddof=1))
    c = y - y.mean()
    se_v = math.sqrt(max(float(np.mean(c**4)) - v * v, 0.0) / reps)
    out = [within_se("xi jump mean", m, 1.5, se), within_se("xi jump variance", v, 1.25, se_v)]

    t = 4.0
    g = base.child(1).generator()
    xi_t = _xi_at(g, t, reps)
    for q in (0.5, 1.0, 2.0):
        e = np.exp(-q * xi_t)
        em, ese = mean_and_se(e)
        phi = -math.log(em) / t
        out.append(within_se(f"Laplace exponent at q={q}", phi, growth.laplace_exponent(q), ese / (em * t)))

    t = 8.0
    xi_t = _xi_at(base.child(2).generator(), t, reps)
    M = xi_t - growth.MARTINGALE_DRIFT * t
    mm, mse = mean_and_se(M)
    qm, qse = mean_and_se(M * M - 0.625 * t)
    out.append(within_se("mean of M_t at t=8", mm, 0.0, mse))
    out.append(within_se("mean of M_t^2 - (5/8) t at t=8", qm, 0.0, qse))
    return out


def _xi_at(g, t, reps):
    counts = g.poisson(growth.JUMP_RATE * t, reps)
    J = g.exponential(1.0, int(counts.sum()))
    jumps = growth.xi_jump(J)
    owner = np.repeat(np.arange(reps), counts)
    return np.bincount(owner, weights=jumps, minlength=reps)


def c08_tau_representation(seed=DEFAULT_SEED, paths=2000):
    base = stream(seed, 8)
    worst = 0.0
    for k in range(paths):
        n = float(10 ** (k % 4))  # 1, 10, 100, 1000
        p = growth.simulate_subordinators(base.child(k), integral_target=n)
        tau, rep = growth.tau_representation(p, n)
        worst = max(worst, abs(tau - rep))
    return [Metric("max |tau(n) - representation| over paths", worst, 0.0, 1e-9, worst <= 1e-9)]


def c09_lamperti(seed=DEFAULT_SEED, reps=100_000):
    base = stream(seed, 9)
    out = []
    for n in (1, 2, 5):
        r = growth.lamperti_inverse_moment(n, reps, base.child(n))
        out.append(within_se(f"n E[exp(-2 xi_tau(n))] at n={n}", r.mc_estimate, r.formula, r.std_error))
    out.append(within("formula at n=1", growth.lamperti_inverse_moment_formula(1), 2.0 / 3.0, 1e-15))
    return out


def c10_perpetuity(seed=DEFAULT_SEED, reps=100_000):
    exact = growth.perpetuity()
    mc = growth.perpetuity(stream(seed, 10), reps)
    return [within_se("perpetuity mean", mc.value, exact.value, mc.std_error)]


def c11_centre_flow(seed=DEFAULT_SEED, n=1000, outer=200, inner=5000, threads=1):
    q = flow.mean_flow_quadrature(n) / n**3
    est = flow.simulate_center_flow(n, outer, inner, stream(seed, 11), threads)
    return [
        in_range("quadrature E[T_n]/n^3 at n=1000", q, 1.9, 2.1),
        within_se("nested MC T_n/n^3 against quadrature", est.value, q, est.std_error),
        relative("quadrature against the limit value 2", q, 2.0, 0.10),
        within("nested MC against the limit value 2", est.value, 2.0, 3.0 * est.std_error + 0.2),
    ]


def c12_limit_flow(seed=DEFAULT_SEED, realizations=200, pairs=5000, threads=1):
    quad = flow.limit_mean_quadrature()
    est = flow.simulate_limit_flow(6.0, 48.0, pairs, stream(seed, 12), realizations, threads=threads)
    ratio, p = flow.nondegeneracy_test(est)
    return [
        within("limit mean by quadrature", quad, 2.0, 1e-4),
        within("limit flow MC mean", est.value, 2.0, 3.0 * est.std_error + est.bias_bound),
        Metric("p-value, across-realization variance exceeds sampling noise", p, 0.0, 0.01, p < 0.01),
    ]


LOWER_BOUND_NS = [1e2, 1e3, 1e4, 1e5]


def c13_lower_bound(seed=DEFAULT_SEED):
    c = flow.lower_bound_constant()
    curve = flow.lower_bound_curve(LOWER_BOUND_NS)
    fit = linear_fit(np.log(LOWER_BOUND_NS), curve)
    return [
        within("lower-bound constant", c, math.log(4.0) - 1.25, 1e-6),
        relative("slope of the lower bound against log n", fit.slope, 0.1363, 0.05),
    ]


def c14_mills(seed=DEFAULT_SEED):
    worst = math.inf
    ok = True
    for i in range(101):
        b = mills_bounds(i / 10.0)
        ok &= b.lower < b.exact < b.upper
        worst = min(worst, b.exact - b.lower, b.upper - b.exact)
    return [Metric("smallest gap in lower < Mills ratio < upper on p = 0..10", worst, 0.0, 0.0, bool(ok))]


def c15_disk(seed=DEFAULT_SEED, pairs=1_000_000):
    m, se = flow.mc_mean_disk_distance(pairs, stream(seed, 15))
    exact_len = all(flow.disk_average_report(n).network_length == math.pi**2 * n * n / 2.0 for n in (1.0, 2.5, 10.0, 1000.0))
    return [
        within_se("mean distance in the unit disk", m, flow.MEAN_DISK_DISTANCE, se),
        Metric("network length equals pi^2 n^2 / 2", float(exact_len), 1.0, 0.0, exact_len),
    ]


def c16_manhattan_exact(seed=DEFAULT_SEED):
    bad = 0
    for u in range(6):
        for v in range(6):
            for x in range(6):
                for y in range(6):
                    if u + v + x + y == 0:
                        continue
                    pr = manhattan.QuadrantPair(u, v, x, y)
                    bad += manhattan.through_origin_prob(pr, exact=True) != manhattan.brute_force_prob(pr)
    return [Metric("mismatches between formula and path counting", bad, 0.0, 0.0, bad == 0)]


def _sig4(x):
    return float(f"{x:.4g}")


def c17_manhattan_asymptotic(seed=DEFAULT_SEED):
    s = manhattan.quadrant_sum(150) / 150**3
    ex = manhattan.extreme_protocol_flow(300).scaled
    rep = manhattan.comparison_report()
    return [
        in_range("opposing-quadrant sum / n^3 at n=150", s, 1.8, 2.2),
        in_range("extreme protocol total / n^3 at n=300", ex, math.pi - 0.15, math.pi + 0.15),
        Metric("comparable uniform-protocol flow / n^3 (4 s.f.)", rep.uniform_comparable_flow, 2.54648, 0.0,
               _sig4(rep.uniform_comparable_flow) == _sig4(2.54648)),
        Metric("uniform-protocol excess ratio (4 s.f.)", rep.uniform_excess_ratio, 1.2732, 0.0,
               _sig4(rep.uniform_excess_ratio) == 1.273),
    ]


DETERMINISM_RUNS = [
    ["sample-lines", "--n", "20"],
    ["cell", "--n", "200"],
    ["excess", "--n", "64", "128", "--replicates", "20"],
    ["lateral", "--n", "200", "--replicates", "30"],
    ["growth", "--n", "128", "--replicates", "200"],
    ["subordinator", "--n", "20", "--replicates", "200"],
    ["flow-center", "--n", "50", "--replicates", "4", "--inner", "300"],
    ["flow-limit", "--replicates", "4", "--inner", "300"],
]


def c18_determinism(seed=DEFAULT_SEED):
    from .cli import run

    out = []
    with tempfile.TemporaryDirectory() as tmp:
        for args in DETERMINISM_RUNS:
            blobs = []
            for rep in ("a", "b"):
                d = Path(tmp) / rep / args[0]
                run([*args, "--seed", str(seed), "--out-dir", str(d), "--no-check"])
                blobs.append((d / f"{args[0]}.csv").read_bytes())
            same = blobs[0] == blobs[1] and len(blobs[0]) > 0
            out.append(Metric(f"{args[0]} CSV identical on re-run", float(same), 1.0, 0.0, same))
    return out


CRITERIA: dict[int, tuple[str, Callable]] = {
    1: ("hitting calibration", c01_hitting),
    2: ("intersection intensity", c02_intersections),
    3: ("separation oracle", c03_separation),
    4: ("lateral displacement", c04_lateral),
    5: ("route excess", c05_excess),
    6: ("growth process", c06_growth),
    7: ("subordinator identities", c07_subordinator),
    8: ("tau representation", c08_tau_representation),
    9: ("Lamperti inverse moment", c09_lamperti),
    10: ("perpetuity", c10_perpetuity),
    11: ("centre flow mean", c11_centre_flow),
    12: ("limit flow", c12_limit_flow),
    13: ("lower bound", c13_lower_bound),
    14: ("Mills bracket", c14_mills),
    15: ("disk geometry", c15_disk),
    16: ("Manhattan exactness", c16_manhattan_exact),
    17: ("Manhattan asymptotics", c17_manhattan_asymptotic),
    18: ("determinism", c18_determinism),
}


def run_criterion(k: int, seed: int = DEFAULT_SEED, **kw) -> tuple[str, list[Metric]]:
    title, fn = CRITERIA[k]
    return title, fn(seed=seed, **kw)


def format_line(k: int, title: str, metrics: list[Metric]) -> str:
    ok = all(m.passed for m in metrics)
    detail = "; ".join(f"{m.name}={m.value:.6g} (target {m.target:.6g} +/- {m.tolerance:.3g}){'' if m.passed else ' FAIL'}" for m in metrics)
    return f"criterion {k:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
