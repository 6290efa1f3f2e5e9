"""Flow through the centre of a Manhattan (unit grid) city of radius n."""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats

from .numerics import DomainError, log_choose, log_factorial_table, quad_value

BRUTE_FORCE_LIMIT = 24


class TooLarge(ValueError):
    pass


@dataclass(frozen=True)
class QuadrantPair:
    """Source at -(u, v), destination at (x, y)."""

    u: int
    v: int
    x: int
    y: int

    def __post_init__(self):
        if min(self.u, self.v, self.x, self.y) < 0:
            raise ValueError("quadrant coordinates must be non-negative")

    @property
    def total(self) -> int:
        return self.u + self.v + self.x + self.y


def _check(pair: QuadrantPair):
    if pair.total < 1:
        raise DomainError("source and destination coincide")


def through_origin_prob(pair: QuadrantPair, exact: bool = False):
    """Chance that a uniformly chosen monotone lattice path passes through the origin.

    C(u+v, u) C(x+y, x) / C(u+v+x+y, u+x); log-gamma by default, a Fraction when ``exact``.
    """
    _check(pair)
    u, v, x, y = pair.u, pair.v, pair.x, pair.y
    if exact:
        return Fraction(math.comb(u + v, u) * math.comb(x + y, x), math.comb(pair.total, u + x))
    return math.exp(log_choose(u + v, u) + log_choose(x + y, x) - log_choose(pair.total, u + x))


def _path_counts(pair: QuadrantPair) -> tuple[int, int]:
    """(all paths, paths through the origin) by dynamic programming over the lattice."""
    W, H = pair.u + pair.x, pair.v + pair.y
    ox, oy = pair.u, pair.v  # origin in shifted coordinates
    # every[i][j]: paths to (i, j); avoid[i][j]: those that skip the origin
    every = [[0] * (H + 1) for _ in range(W + 1)]
    avoid = [[0] * (H + 1) for _ in range(W + 1)]
    every[0][0] = 1
    avoid[0][0] = 0 if (ox, oy) == (0, 0) else 1
    for i in range(W + 1):
        for j in range(H + 1):
            if i == 0 and j == 0:
                continue
            e = (every[i - 1][j] if i else 0) + (every[i][j - 1] if j else 0)
            a = (avoid[i - 1][j] if i else 0) + (avoid[i][j - 1] if j else 0)
            every[i][j] = e
            avoid[i][j] = 0 if (i, j) == (ox, oy) else a
    return every[W][H], every[W][H] - avoid[W][H]


def brute_force_prob(pair: QuadrantPair) -> Fraction:
    """Count monotone lattice paths visiting the origin; no binomial identities used."""
    _check(pair)
    if pair.total > BRUTE_FORCE_LIMIT:
        raise TooLarge(f"brute force limited to u+v+x+y <= {BRUTE_FORCE_LIMIT}")
    total, through = _path_counts(pair)
    return Fraction(through, total)


def enumerate_paths_prob(pair: QuadrantPair) -> Fraction:
    """Literal enumeration of every path as a step sequence (small cases only)."""
    _check(pair)
    if pair.total > 16:
        raise TooLarge("explicit enumeration limited to u+v+x+y <= 16")
    W, N = pair.u + pair.x, pair.total
    hits = count = 0
    for rights in itertools.combinations(range(N), W):
        count += 1
        i = j = 0
        rs = set(rights)
        visited = (pair.u, pair.v) == (0, 0)
        for step in range(N):
            if step in rs:
                i += 1
            else:
                j += 1
            if (i, j) == (pair.u, pair.v):
                visited = True
        hits += visited
    return Fraction(hits, count)


def binomial_ratio_prob(pair: QuadrantPair, p: float) -> float:
    """Same probability written with Binomial(., p) point masses; independent of p."""
    _check(pair)
    b = stats.binom
    lg = b.logpmf(pair.u, pair.u + pair.v, p) + b.logpmf(pair.x, pair.x + pair.y, p) - b.logpmf(pair.u + pair.x, pair.total, p)
    return float(np.exp(lg))


def stirling_prob(pair: QuadrantPair) -> float:
    u, v, x, y = pair.u, pair.v, pair.x, pair.y
    m = (u + v) * (x + y) * (u + x) * (v + y)
    if m == 0:
        raise DomainError("Stirling approximation needs all four marginals positive")
    N = pair.total
    return N**1.5 / math.sqrt(2.0 * math.pi * m) * math.exp(-N * (u * y - x * v) ** 2 / (2.0 * m))


# ---------------------------------------------------------------------------
# Flow totals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridFlowResult:
    n: int
    protocol: str
    total_flow: float  # through the origin
    scaled: float  # total_flow / n^3
    component: float  # one opposing-quadrant sum (uniform) or one axis contribution (extreme)

    @property
    def bond_flow(self) -> float:
        return 0.5 * self.total_flow


def quarter_disk(n: int) -> np.ndarray:
    """Lattice points (a, b) with a, b >= 0 and a^2 + b^2 <= n^2."""
    a = np.arange(n + 1)
    pts = [(i, j) for i in a for j in range(int(math.isqrt(n * n - i * i)) + 1)]
    return np.asarray(pts, dtype=np.int64).reshape(-1, 2)


def quadrant_sum(n: int, row_chunk: int = 64, prob=None) -> float:
    """Quadruple sum of the through-origin probability over two opposing quarter disks.

    Each source row is summed separately and the row sums are combined with
    math.fsum, so the result does not depend on the chunking.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    Q = quarter_disk(n)
    if prob is not None:
        # oracle path: explicit per-term evaluation (small n only)
        terms = []
        for u, v in Q:
            for x, y in Q:
                if u + v + x + y == 0:
                    continue
                terms.append(float(prob(QuadrantPair(int(u), int(v), int(x), int(y)))))
        return math.fsum(terms)
    lf = log_factorial_table(4 * n + 1)
    x, y = Q[:, 0], Q[:, 1]
    dest = lf[x + y] - lf[x] - lf[y]  # log C(x+y, x)
    rows = []
    for k in range(0, len(Q), row_chunk):
        src = Q[k : k + row_chunk]
        u, v = src[:, 0:1], src[:, 1:2]
        srcl = lf[u + v] - lf[u] - lf[v]
        N = u + v + x + y
        W = u + x
        logp = srcl + dest - (lf[N] - lf[W] - lf[N - W])
        vals = np.exp(logp)
        vals[N == 0] = 0.0  # the degenerate (0,0,0,0) term
        rows.extend(vals.sum(axis=1).tolist())
    return math.fsum(rows)


def uniform_protocol_flow(n: int, **kw) -> GridFlowResult:
    """Traffic split evenly over all geodesics; two opposing-quadrant pairs feed the origin."""
    if n < 1:
        raise ValueError("n must be at least 1")
    s = quadrant_sum(n, **kw)
    total = 2.0 * s
    return GridFlowResult(n, "uniform_geodesic", total, total / n**3, s)


def extreme_protocol_flow(n: int) -> GridFlowResult:
    """Traffic split over the two extreme geodesics: four axis-anchored contributions of n * #points."""
    if n < 1:
        raise ValueError("n must be at least 1")
    count = sum(int(math.isqrt(n * n - i * i)) for i in range(1, n + 1))  # (x, y) >= 1 in the disk
    one = 2.0 * count * 0.5 * n
    total = 4.0 * one
    return GridFlowResult(n, "extreme_geodesic", total, total / n**3, one)


def grid_results_csv(rows: list[GridFlowResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "protocol", "total_flow", "scaled"])
    for r in rows:
        w.writerow([r.n, r.protocol, repr(r.total_flow), repr(r.scaled)])
    return buf.getvalue()


@dataclass(frozen=True)
class ComparisonReport:
    grid_segment_length: float
    extreme_comparable_flow: float  # / n^3
    uniform_comparable_flow: float  # / n^3
    uniform_excess_ratio: float
    distance_factor: float
    distance_factor_quadrature: float


def comparison_report(n: float = 1.0) -> ComparisonReport:
    """Rescale the grid to the Poisson network length and compare centre flows (per n^3)."""
    if n <= 0:
        raise ValueError("n must be positive")
    seg = 4.0 / math.pi
    m = n / seg  # grid radius in segment units
    # bond flow pi/2 m^3, then restore total traffic from (pi m^2)^2 to (pi n^2)^2
    extreme = ((math.pi * n * n) ** 2 / (math.pi * m * m) ** 2) * (math.pi / 2.0) * m**3 / n**3
    uniform = seg * 2.0
    factor = quad_value(lambda t: abs(math.sin(t)) + abs(math.cos(t)), 0.0, 2.0 * math.pi, rel_tol=1e-12) / (2.0 * math.pi)
    return ComparisonReport(seg, extreme, uniform, uniform / 2.0, seg, factor)
