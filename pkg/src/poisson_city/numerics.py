"""Shared numerical kernel: quadrature, log-binomials, Mills ratio, KS, RNG streams."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy import integrate as _sp_integrate
from scipy import stats as _sp_stats


class QuadratureFailure(RuntimeError):
    """Raised when an adaptive rule cannot reach the requested tolerance."""


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a formula."""


# ---------------------------------------------------------------------------
# RNG streams
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by ``(master_seed, stream_index)``.

    Backed by the Philox counter generator: the 128-bit key is the pair of
    64-bit integers, so distinct indices give independent streams and the same
    pair always reproduces the same sequence.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not (0 <= self.master_seed <= _MASK64 and 0 <= self.stream_index <= _MASK64):
            raise ValueError("seed and stream index must be unsigned 64-bit integers")

    def generator(self) -> np.random.Generator:
        key = self.master_seed | (self.stream_index << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def child(self, k: int) -> "RngStream":
        """Derive the ``k``-th sub-stream; the derivation is a pure function of (seed, stream, k)."""
        ss = np.random.SeedSequence([self.master_seed, self.stream_index, int(k)])
        idx = int(ss.generate_state(1, dtype=np.uint64)[0])
        return RngStream(self.master_seed, idx)

    @property
    def record(self) -> tuple[int, int]:
        return (self.master_seed, self.stream_index)


def as_generator(rng) -> np.random.Generator:
    """Accept an RngStream, a Generator or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadratureSpec:
    rel_tol: float = 1e-6
    abs_tol: float = 1e-10
    max_depth: int = 200
    # "auto" maps infinite ranges by s = w/(1-w); "sqrt_left"/"sqrt_right" remove
    # an integrable inverse-square-root singularity at the named endpoint.
    mapping: str = "auto"

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.mapping not in ("auto", "sqrt_left", "sqrt_right"):
            raise ValueError(f"unknown mapping {self.mapping!r}")


@dataclass(frozen=True)
class QuadResult:
    value: float
    err_estimate: float


DEFAULT_SPEC = QuadratureSpec()


def _mapped(f, a, b, mapping):
    """Return (g, lo, hi) with the integral of g over [lo, hi] equal to that of f over [a, b]."""
    if mapping == "sqrt_left":
        if not math.isfinite(a) or not math.isfinite(b):
            raise DomainError("sqrt endpoint substitution needs a finite range")
        return (lambda w: 2.0 * w * f(a + w * w)), 0.0, math.sqrt(b - a)
    if mapping == "sqrt_right":
        if not math.isfinite(a) or not math.isfinite(b):
            raise DomainError("sqrt endpoint substitution needs a finite range")
        return (lambda w: 2.0 * w * f(b - w * w)), 0.0, math.sqrt(b - a)
    if math.isfinite(a) and math.isfinite(b):
        return f, a, b
    if math.isfinite(a) and b == math.inf:

        def g(w):
            if w >= 1.0:
                return 0.0
            d = 1.0 - w
            return f(a + w / d) / (d * d)

        return g, 0.0, 1.0
    if a == -math.inf and math.isfinite(b):

        def g(w):
            if w >= 1.0:
                return 0.0
            d = 1.0 - w
            return f(b - w / d) / (d * d)

        return g, 0.0, 1.0
    raise DomainError("integrate over the whole real line by splitting at a finite point")


def integrate(f: Callable[[float], float], a: float, b: float, spec: QuadratureSpec | None = None) -> QuadResult:
    """Adaptive Gauss-Kronrod quadrature of a scalar function.

    Infinite endpoints are mapped onto a finite interval (never truncated).
    Raises QuadratureFailure when the error estimate exceeds
    ``max(abs_tol, rel_tol * |value|)``.
    """
    spec = spec or DEFAULT_SPEC
    if a == b:
        return QuadResult(0.0, 0.0)
    if a > b:
        r = integrate(f, b, a, spec)
        return QuadResult(-r.value, r.err_estimate)
    g, lo, hi = _mapped(f, a, b, spec.mapping)
    value, err, *_ = _sp_integrate.quad(
        g, lo, hi, epsabs=spec.abs_tol, epsrel=spec.rel_tol, limit=spec.max_depth, full_output=1
    )
    if not math.isfinite(value) or err > max(spec.abs_tol, spec.rel_tol * abs(value)):
        raise QuadratureFailure(f"quadrature on [{a}, {b}] stalled: value={value!r} err={err:.3g}")
    return QuadResult(float(value), float(err))


def quad_value(f, a, b, rel_tol=1e-6, abs_tol=1e-10, mapping="auto", max_depth=200) -> float:
    """Shorthand returning only the value of :func:`integrate`."""
    return integrate(f, a, b, QuadratureSpec(rel_tol, abs_tol, max_depth, mapping)).value


# ---------------------------------------------------------------------------
# Combinatorics
# ---------------------------------------------------------------------------

_EXACT_LIMIT = 60


def log_choose(n: int, k: int) -> float:
    """log C(n, k); exact integer arithmetic for n <= 60, log-gamma beyond."""
    if not (0 <= k <= n):
        raise DomainError(f"log_choose needs 0 <= k <= n, got n={n}, k={k}")
    if n <= _EXACT_LIMIT:
        return math.log(math.comb(n, k))
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def log_factorial_table(m: int) -> np.ndarray:
    """Array of log(j!) for j = 0..m."""
    from scipy.special import gammaln

    return gammaln(np.arange(m + 1, dtype=float) + 1.0)


# ---------------------------------------------------------------------------
# Gaussian tail
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MillsBounds:
    upper: float
    lower: float
    exact: float


def sampford_upper(p: float) -> float:
    if p <= -1:
        raise DomainError("Sampford bound holds for p > -1")
    return 4.0 / (math.sqrt(p * p + 8.0) + 3.0 * p)


def birnbaum_lower(p: float) -> float:
    if p < 0:
        raise DomainError("Birnbaum bound is used for p >= 0")
    return 2.0 / (math.sqrt(p * p + 4.0) + p)


def mills_ratio(p: float) -> float:
    """exp(p^2/2) * int_p^inf exp(-s^2/2) ds, by quadrature.

    Written as int_0^inf exp(-p w - w^2/2) dw (shift s = p + w), which never
    forms exp(p^2/2) and stays finite for large p.
    """
    return quad_value(lambda w: math.exp(-p * w - 0.5 * w * w), 0.0, math.inf, rel_tol=1e-12, abs_tol=1e-14)


def mills_bounds(p: float) -> MillsBounds:
    return MillsBounds(upper=sampford_upper(p), lower=birnbaum_lower(p), exact=mills_ratio(p))


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float


def ks_test(samples, cdf: Callable) -> KSResult:
    """One-sample Kolmogorov-Smirnov test with the asymptotic p-value."""
    x = np.asarray(samples, dtype=float)
    if x.size < 20:
        raise ValueError("ks_test needs at least 20 samples")
    res = _sp_stats.kstest(x, cdf, method="asymp")
    return KSResult(float(res.statistic), float(res.pvalue))


def ks_statistic(samples, cdf: Callable) -> float:
    """Exact sup-distance between the empirical CDF and ``cdf`` (any sample size)."""
    x = np.sort(np.asarray(samples, dtype=float))
    m = x.size
    f = np.asarray(cdf(x), dtype=float)
    hi = np.arange(1, m + 1) / m - f
    lo = f - np.arange(0, m) / m
    return float(max(hi.max(), lo.max()))


def ks_2sample(a, b) -> KSResult:
    res = _sp_stats.ks_2samp(np.asarray(a, float), np.asarray(b, float))
    return KSResult(float(res.statistic), float(res.pvalue))


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float
    slope_se: float


def linear_fit(x: Iterable[float], y: Iterable[float]) -> LineFit:
    """Ordinary least squares y = slope * x + intercept."""
    res = _sp_stats.linregress(np.asarray(list(x), float), np.asarray(list(y), float))
    return LineFit(float(res.slope), float(res.intercept), float(res.stderr))


def mean_and_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), math.inf
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def compensated_sum(values: Iterable[float]) -> float:
    return math.fsum(values)


def parallel_map(fn, items, threads: int = 1) -> list:
    """Ordered map over ``items``; with threads > 1 the calls run in a thread pool.

    Results come back in input order, so aggregation never depends on scheduling.
    """
    items = list(items)
    if threads <= 1:
        return [fn(i) for i in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))
