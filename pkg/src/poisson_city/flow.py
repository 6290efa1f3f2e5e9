"""Traffic flow through the centre of a Poissonian city of radius n.

Finite-n flow is estimated two ways: a triple integral of the no-separator
probability and a nested Monte Carlo over line patterns and point pairs. The
scaling limit is carried by the improper strip process in intercept form.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special, stats

from .geometry import TOL
from .lines import DiskWindow, StripLines, sample_improper_strip, sample_pattern
from .numerics import QuadratureSpec, RngStream, as_generator, integrate, mean_and_se, parallel_map, quad_value

LIMIT_MEAN = 2.0


@dataclass(frozen=True)
class FlowEstimate:
    value: float
    std_error: float
    n: float
    outer_replicates: int
    inner_samples: int
    seed_record: tuple | None = None
    replicate_values: tuple[float, ...] = ()
    bias_bound: float = 0.0
    noise_variance: float = math.nan  # mean within-replicate sampling variance of a replicate value

    @property
    def replicate_variance(self) -> float:
        v = np.asarray(self.replicate_values)
        return float(v.var(ddof=1)) if v.size > 1 else math.nan


def estimates_to_csv(rows: list[FlowEstimate]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "estimate", "std_error", "outer", "inner", "seed"])
    for e in rows:
        seed = "" if e.seed_record is None else ":".join(str(s) for s in e.seed_record)
        w.writerow([repr(float(e.n)), repr(e.value), repr(e.std_error), e.outer_replicates, e.inner_samples, seed])
    return buf.getvalue()


def summary_json(op: str, params: dict, value: float, passed: bool) -> str:
    return json.dumps({"op": op, "params": params, "value": value, "tolerance_check": "pass" if passed else "fail"}, indent=2)


# ---------------------------------------------------------------------------
# Mean flow by quadrature
# ---------------------------------------------------------------------------


def _s3_moment(k: float) -> float:
    """int_0^1 s^3 exp(-k s) ds."""
    if k < 1e-3:
        # alternating series sum_j (-k)^j / (j! (j + 4))
        return 0.25 - k / 5.0 + k * k / 12.0 - k**3 / 42.0 + k**4 / 192.0
    return 6.0 * special.gammainc(4.0, k) / k**4


def _gap(rho: float, theta: float) -> float:
    """rho + 1 - sqrt(rho^2 + 1 + 2 rho cos theta), without cancellation."""
    return 4.0 * rho * math.sin(0.5 * theta) ** 2 / (rho + 1.0 + math.sqrt(rho * rho + 1.0 + 2.0 * rho * math.cos(theta)))


def mean_flow_quadrature(n: float, rel_tol: float = 1e-4) -> float:
    """E[T_n] = int_0^pi int_0^n int_0^n exp(-(r + s - |r e + s e'|)/2) r s dr ds theta dtheta.

    The integrand is symmetric in (r, s) and homogeneous, so with r = rho s and
    s = n sigma the sigma-integral is an incomplete gamma function; what is left
    is a 2-D adaptive integral over (theta, rho).
    """
    if n <= 0:
        return 0.0
    inner = QuadratureSpec(rel_tol=rel_tol * 1e-2, abs_tol=1e-14)
    outer = QuadratureSpec(rel_tol=rel_tol, abs_tol=1e-14)

    def over_rho(theta):
        f = lambda rho: rho * _s3_moment(0.5 * n * _gap(rho, theta))
        return integrate(f, 0.0, 1.0, inner).value

    # the mass sits at theta ~ n^(-1/2); split there so the rule sees the peak
    cut = min(math.pi, 8.0 / math.sqrt(n))
    g = lambda th: th * over_rho(th)
    total = integrate(g, 0.0, cut, outer).value + integrate(g, cut, math.pi, outer).value
    return 2.0 * n**4 * total


# ---------------------------------------------------------------------------
# Nested Monte Carlo for the centre flow
# ---------------------------------------------------------------------------


def uniform_in_disk(g: np.random.Generator, m: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(g.random(m))
    a = g.uniform(0.0, 2.0 * math.pi, m)
    return np.column_stack([r * np.cos(a), r * np.sin(a)])


def centre_indicator(r: np.ndarray, theta: np.ndarray, p_minus: np.ndarray, p_plus: np.ndarray, chunk: int = 512) -> np.ndarray:
    """For each pair: same side of the horizontal line through o, and no line separates o from the segment.

    ``r, theta`` are the unconditioned lines; the conditioned horizontal line
    through o never separates (it passes through o) and only enforces the
    same-side requirement.
    """
    same = np.sign(p_minus[:, 1]) == np.sign(p_plus[:, 1])
    same &= (np.abs(p_minus[:, 1]) > TOL) & (np.abs(p_plus[:, 1]) > TOL)
    out = np.zeros(len(p_minus), dtype=bool)
    idx = np.flatnonzero(same)
    if len(r) == 0:
        out[idx] = True
        return out
    nx, ny = -np.sin(theta), np.cos(theta)
    so = np.sign(-r)  # side of o
    for k in range(0, idx.size, chunk):
        j = idx[k : k + chunk]
        da = np.outer(p_minus[j, 0], nx) + np.outer(p_minus[j, 1], ny) - r
        db = np.outer(p_plus[j, 0], nx) + np.outer(p_plus[j, 1], ny) - r
        sep = (np.sign(da) == -so) & (np.sign(db) == -so)
        out[j] = ~sep.any(axis=1)
    return out


def _centre_replicate(n: float, inner: int, stream: RngStream) -> tuple[float, float]:
    g = stream.generator()
    pat = sample_pattern(DiskWindow((0.0, 0.0), n), g)
    pm = uniform_in_disk(g, inner, n)
    pp = uniform_in_disk(g, inner, n)
    swap = pm[:, 0] > pp[:, 0]  # label so that p-_1 < p+_1
    pm[swap], pp[swap] = pp[swap].copy(), pm[swap].copy()
    f = centre_indicator(pat.r, pat.theta, pm, pp).mean()
    return float(f), float(f * (1.0 - f) / inner)


def simulate_center_flow(n: float, outer: int, inner: int, rng: RngStream, threads: int = 1) -> FlowEstimate:
    """Nested MC estimate of T_n / n^3.

    Each outer replicate draws lines on ball(o, n); inner pairs are uniform in
    the disk. With the ordered-pair restriction (halving) and the even split
    between the two routes (halving again), T_n = (pi n^2)^2 / 4 * P(indicator).
    """
    if not (n > 0 and outer >= 1 and inner >= 1):
        raise ValueError("need n > 0 and positive replicate counts")
    scale = 0.25 * (math.pi * n * n) ** 2 / n**3
    res = parallel_map(lambda k: _centre_replicate(n, inner, rng.child(k)), range(outer), threads)
    vals = [scale * f for f, _ in res]
    noise = scale * scale * float(np.mean([v for _, v in res]))
    m, se = mean_and_se(vals)
    return FlowEstimate(m, se, n, outer, inner, rng.record, tuple(vals), noise_variance=noise)


# ---------------------------------------------------------------------------
# Scaling limit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LimitPair:
    a: float
    b: float
    u: float
    v: float

    def __post_init__(self):
        if not (0 < self.a <= 1 and 0 < self.u <= 1 and self.b > 0 and self.v > 0):
            raise ValueError("need a, u in (0, 1] and b, v > 0")

    @property
    def p(self):
        return (-self.a, self.b)

    @property
    def q(self):
        return (self.u, self.v)

    @property
    def crossing_height(self) -> float:
        """Height t at which segment pq meets the vertical axis."""
        return (self.b * self.u + self.a * self.v) / (self.a + self.u)


def limit_pair_probability(pair: LimitPair) -> float:
    """Probability that no line of the limit process separates o from segment pq."""
    t = pair.crossing_height
    return math.exp(-0.25 * t * t * (1.0 / pair.a + 1.0 / pair.u))


def separating_measure(pair: LimitPair) -> float:
    return 0.25 * pair.crossing_height**2 * (1.0 / pair.a + 1.0 / pair.u)


def limit_mean_quadrature(rel_tol: float = 1e-6) -> float:
    """int_0^1 int_0^1 int_0^inf (a + u)(1/a + 1/u) exp(-(t^2/4)(1/a + 1/u)) t dt da du."""
    spec = QuadratureSpec(rel_tol=rel_tol, abs_tol=1e-12)

    def over_t(a, u):
        c = 1.0 / a + 1.0 / u
        return integrate(lambda t: (a + u) * c * math.exp(-0.25 * t * t * c) * t, 0.0, math.inf, spec).value

    def over_a(u):
        return integrate(lambda a: over_t(a, u), 0.0, 1.0, spec).value

    return integrate(over_a, 0.0, 1.0, spec).value


def limit_mean_closed_form() -> float:
    """The t-integral equals 2(a + u), leaving int int 2(a + u) = 2."""
    return quad_value(lambda u: quad_value(lambda a: 2.0 * (a + u), 0.0, 1.0), 0.0, 1.0)


def _strip_indicator(strip: StripLines, p: np.ndarray, q: np.ndarray, chunk: int = 1024) -> np.ndarray:
    """No strip line separates o from segment pq, for point arrays p, q (heights > 0)."""
    out = np.ones(len(p), dtype=bool)
    if len(strip) == 0:
        return out
    ym, yp = strip.y_minus, strip.y_plus
    y0 = 0.5 * (ym + yp)
    for k in range(0, len(p), chunk):
        pk, qk = p[k : k + chunk], q[k : k + chunk]
        # line height at the x-coordinate of each point
        hp = 0.5 * (np.outer(1.0 - pk[:, 0], ym) + np.outer(1.0 + pk[:, 0], yp))
        hq = 0.5 * (np.outer(1.0 - qk[:, 0], ym) + np.outer(1.0 + qk[:, 0], yp))
        so = np.sign(-y0)  # o relative to the line (negative: o below)
        sp = np.sign(pk[:, 1][:, None] - hp)
        sq = np.sign(qk[:, 1][:, None] - hq)
        sep = (sp == -so) & (sq == -so) & (so != 0)
        out[k : k + chunk] = ~sep.any(axis=1)
    return out


def _half_fraction(strip: StripLines, g: np.random.Generator, h_max: float, pairs: int) -> float:
    s = strip.subset(strip.height(0.0) > 0)
    # p uniform on [-1, 0] x (0, h_max), q on [0, 1] x (0, h_max)
    p = np.column_stack([-g.random(pairs), h_max * g.random(pairs)])
    q = np.column_stack([g.random(pairs), h_max * g.random(pairs)])
    return float(_strip_indicator(s, p, q).mean())


def limit_flow_realization(h_max: float, y_bound: float, pairs: int, g: np.random.Generator) -> tuple[float, float]:
    """One realisation and its pair-sampling variance.

    The value averages the upper-half flow and the lower-half flow (reflected
    lines, fresh pairs) of a single strip sample; each half is h_max^2 times
    the fraction of unseparated pairs.
    """
    strip = sample_improper_strip(-y_bound, y_bound, g)
    f_up = _half_fraction(strip, g, h_max, pairs)
    f_down = _half_fraction(strip.reflected(), g, h_max, pairs)
    h4 = h_max**4
    noise = 0.25 * h4 * (f_up * (1 - f_up) + f_down * (1 - f_down)) / pairs
    return 0.5 * h_max * h_max * (f_up + f_down), noise


def simulate_limit_flow(h_max: float, y_bound: float, pairs: int, rng: RngStream, realizations: int = 200,
                        bias_pairs: int = 4000, threads: int = 1) -> FlowEstimate:
    """Monte Carlo of the limit centre flow on a truncated intercept box, with a bias certificate."""
    if not (h_max > 0 and y_bound > 0):
        raise ValueError("h_max and y_bound must be positive")
    res = parallel_map(lambda k: limit_flow_realization(h_max, y_bound, pairs, rng.child(k).generator()), range(realizations), threads)
    vals = [v for v, _ in res]
    m, se = mean_and_se(vals)
    bias = truncation_bias_bound(h_max, y_bound, bias_pairs, rng.child(2**32))
    noise = float(np.mean([e for _, e in res]))
    return FlowEstimate(m, se, math.inf, realizations, pairs, rng.record, tuple(vals), bias, noise)


def nondegeneracy_test(est: FlowEstimate) -> tuple[float, float]:
    """One-sided test that replicate values vary beyond their inner sampling noise.

    Under the null of a degenerate law, (R - 1) s^2 / noise is roughly
    chi-square with R - 1 degrees of freedom. Returns (ratio, p-value).
    """
    R = len(est.replicate_values)
    ratio = est.replicate_variance / est.noise_variance
    return ratio, float(stats.chi2.sf(ratio * (R - 1), R - 1))


def height_window_mass(h_max: float, rel_tol: float = 1e-6) -> float:
    """Integral of the pair probability over a, u in (0, 1) and b, v in (0, h_max).

    The v-integral is done in closed form: the exponent is k (b u + a v)^2 with
    k = 1/(4 a u (a + u)).
    """
    spec = QuadratureSpec(rel_tol=rel_tol, abs_tol=1e-12)

    def over_v(a, u, b):
        k = 1.0 / (4.0 * a * u * (a + u))
        rk = math.sqrt(k)
        lo, hi = b * u * rk, (b * u + a * h_max) * rk
        return 0.5 * math.sqrt(math.pi) / (a * rk) * (math.erf(hi) - math.erf(lo))

    def over_b(a, u):
        return integrate(lambda b: over_v(a, u, b), 0.0, h_max, spec).value

    def over_a(u):
        return integrate(lambda a: over_b(a, u), 0.0, 1.0, spec).value

    return integrate(over_a, 0.0, 1.0, spec).value


def _clip(poly: np.ndarray, a: np.ndarray, c: float) -> np.ndarray:
    """Clip polygon (k, 2) to {x : a . x <= c}."""
    if len(poly) == 0:
        return poly
    d = poly @ a - c
    out = []
    m = len(poly)
    for i in range(m):
        j = (i + 1) % m
        if d[i] <= 0:
            out.append(poly[i])
        if (d[i] < 0 < d[j]) or (d[j] < 0 < d[i]):
            t = d[i] / (d[i] - d[j])
            out.append(poly[i] + t * (poly[j] - poly[i]))
    return np.asarray(out)


def _area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


def separator_region(pair: LimitPair, box: float | None = None, big: float = 1e9) -> float:
    """Area in (y_minus, y_plus) of lines separating o from pq, optionally within [-box, box]^2."""
    B = big if box is None else box
    poly = np.array([[-B, -B], [B, -B], [B, B], [-B, B]], dtype=float)
    a, b, u, v = pair.a, pair.b, pair.u, pair.v
    poly = _clip(poly, np.array([-1.0, -1.0]), 0.0)  # height at 0 positive
    poly = _clip(poly, np.array([1.0 + a, 1.0 - a]), 2.0 * b)  # p above the line
    poly = _clip(poly, np.array([1.0 - u, 1.0 + u]), 2.0 * v)  # q above the line
    return _area(poly)


def truncation_bias_bound(h_max: float, y_bound: float, pairs: int, rng) -> float:
    """Certificate for the two truncations in :func:`simulate_limit_flow`.

    Capping heights at ``h_max`` loses ``2 - height_window_mass`` of the mean.
    Restricting intercepts to the box only drops separators: a pair whose
    separating measure is m_tot, of which m_in lies inside the box, is counted
    with probability exp(-m_in) instead of exp(-m_tot). That excess is averaged
    over pairs by Monte Carlo (+3 s.e.). The two errors push in opposite
    directions, so the bias is bounded by the larger.
    """
    deficit = LIMIT_MEAN - height_window_mass(h_max)
    g = as_generator(rng)
    gain = np.empty(pairs)
    for i in range(pairs):
        pr = LimitPair(1.0 - g.random(), h_max * (1.0 - g.random()), 1.0 - g.random(), h_max * (1.0 - g.random()))
        total = separating_measure(pr)
        inside = min(total, 0.25 * separator_region(pr, y_bound))
        gain[i] = math.exp(-inside) - math.exp(-total)
    m, se = mean_and_se(gain)
    return max(deficit, h_max * h_max * (m + 3.0 * se))


# ---------------------------------------------------------------------------
# Disk averages and the lower bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiskReport:
    network_length: float
    mean_distance: float
    flow_per_unit_length: float


MEAN_DISK_DISTANCE = 128.0 / (45.0 * math.pi)


def disk_average_report(n: float) -> DiskReport:
    """Mean network length, mean pair distance, and the implied mean flow per unit length."""
    if n <= 0:
        raise ValueError("n must be positive")
    length = math.pi**2 * n * n / 2.0
    dist = MEAN_DISK_DISTANCE * n
    flow = 0.5 * (math.pi * n * n) ** 2 * dist / length
    return DiskReport(length, dist, flow)


def mc_mean_disk_distance(pairs: int, rng, chunk: int = 250_000) -> tuple[float, float]:
    g = as_generator(rng)
    s = s2 = 0.0
    done = 0
    while done < pairs:
        m = min(chunk, pairs - done)
        d = np.linalg.norm(uniform_in_disk(g, m, 1.0) - uniform_in_disk(g, m, 1.0), axis=1)
        s += math.fsum(d)
        s2 += math.fsum(d * d)
        done += m
    mean = s / pairs
    var = (s2 - pairs * mean * mean) / (pairs - 1)
    return mean, math.sqrt(var / pairs)


def _escape_integral(x: float, u: float) -> float:
    """int_0^inf exp(-s - (sqrt(x^2 + s^2/u^2) - x)/2) ds."""

    def f(s):
        z2 = (s / u) ** 2
        return math.exp(-s - 0.5 * z2 / (math.sqrt(x * x + z2) + x))

    return integrate(f, 0.0, math.inf, QuadratureSpec(rel_tol=1e-8, abs_tol=1e-13)).value


def lower_bound_density(x: float) -> float:
    """int_0^{pi/2} (1 - escape(x, u))^2 u du; the x-integrand of the lower bound."""
    f = lambda u: (1.0 - _escape_integral(x, u)) ** 2 * u
    return integrate(f, 0.0, 0.5 * math.pi, QuadratureSpec(rel_tol=1e-6, abs_tol=1e-12)).value


def excess_lower_bound(n: float, start: float = 1.0, rel_tol: float = 1e-5) -> float:
    """int_start^n lower_bound_density(x) dx, integrated in log x."""
    if n <= 1:
        raise ValueError("n must exceed 1")
    spec = QuadratureSpec(rel_tol=rel_tol, abs_tol=1e-10)
    return integrate(lambda y: lower_bound_density(math.exp(y)) * math.exp(y), math.log(start), math.log(n), spec).value


def lower_bound_constant() -> float:
    def f(v):
        r = math.sqrt(v * v + 4.0)
        return ((r - v) / (r + 3.0 * v)) ** 2 * v

    return quad_value(f, 0.0, math.inf, rel_tol=1e-10, abs_tol=1e-13)


def lower_bound_curve(ns: list[float]) -> list[float]:
    """excess_lower_bound at increasing n, accumulated interval by interval."""
    out, acc, prev = [], 0.0, 1.0
    for n in ns:
        acc += excess_lower_bound(n, start=prev)
        out.append(acc)
        prev = n
    return out


def report_dict(r) -> dict:
    return asdict(r)
