"""Growth process of a semi-perimeter and the subordinators that control it.

The angle Theta of the boundary arc only jumps downwards. In excess time
``t = s - X_s`` jumps arrive at rate 1/2 and between jumps progress X and
height H grow linearly at rates cos(Theta)/(1 - cos(Theta)) and cot(Theta/2).
Everything here is event driven, so there is no discretisation error.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import special

from .numerics import DomainError, as_generator, quad_value

MAX_JUMPS = 10**6
JUMP_RATE = 0.5

Initial = Literal["theta0_pi", "theta0_cosine"]


class HorizonExceeded(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Angle dynamics
# ---------------------------------------------------------------------------


def theta_jump_size(theta, v):
    """Jump size for uniform variate ``v``: 1 - cos(d) = v (1 - cos(theta)), solved stably."""
    return 2.0 * np.arcsin(np.sqrt(v) * np.sin(0.5 * np.asarray(theta, dtype=float)))


def sample_theta_jump(theta_before: float, rng) -> float:
    """New angle after one jump from ``theta_before``."""
    if not (0.0 < theta_before <= math.pi):
        raise DomainError("angle must lie in (0, pi]")
    v = as_generator(rng).random()
    return float(theta_before - theta_jump_size(theta_before, v))


def jump_cdf(phi, theta: float):
    """P(jump <= phi) given the current angle theta."""
    phi = np.clip(phi, 0.0, theta)
    # (1 - cos phi) / (1 - cos theta) in half-angle form, accurate for small angles
    return (np.sin(0.5 * phi) / math.sin(0.5 * theta)) ** 2


def progress_rate(theta):
    """dX/dt = cos(theta) / (1 - cos(theta)), written with sin^2(theta/2) to keep precision."""
    theta = np.asarray(theta, dtype=float)
    with np.errstate(over="ignore", divide="ignore"):
        return np.cos(theta) / (2.0 * np.sin(0.5 * theta) ** 2)


def height_rate(theta):
    with np.errstate(over="ignore", divide="ignore"):
        return 1.0 / np.tan(0.5 * np.asarray(theta, dtype=float))


def initial_angle(initial: Initial, rng, size=None):
    g = as_generator(rng)
    if initial == "theta0_pi":
        return np.full(size, math.pi) if size is not None else math.pi
    if initial == "theta0_cosine":
        # density cos(theta) on (0, pi/2)
        return np.arcsin(g.random(size))
    raise ValueError(f"unknown initial condition {initial!r}")


@dataclass(frozen=True)
class GrowthState:
    theta: float
    x: float
    h: float
    t: float

    @property
    def s(self) -> float:
        return self.t + self.x


@dataclass(frozen=True)
class GrowthPath:
    events: tuple[GrowthState, ...]  # state just after each jump; events[0] is the start
    sigma: float | None
    n: float
    initial: str

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "theta", "x", "h"])
        for e in self.events:
            w.writerow([repr(e.t), repr(e.theta), repr(e.x), repr(e.h)])
        return buf.getvalue()


def simulate_growth(n: float, initial: Initial = "theta0_cosine", rng=0, max_jumps: int = MAX_JUMPS) -> GrowthPath:
    """Run the growth process until progress X first reaches ``n``."""
    if not n > 0:
        raise DomainError("n must be positive")
    g = as_generator(rng)
    theta = float(initial_angle(initial, g))
    t = x = h = 0.0
    events = [GrowthState(theta, x, h, t)]
    for _ in range(max_jumps):
        dt = g.exponential(1.0 / JUMP_RATE)
        a = float(progress_rate(theta))
        if a > 0 and (math.isinf(a) or x + a * dt >= n):
            tau = 0.0 if math.isinf(a) else (n - x) / a
            hb = float(height_rate(theta))
            sigma = t + tau
            events.append(GrowthState(theta, n, h + hb * tau if tau else h, sigma))
            return GrowthPath(tuple(events), sigma, n, initial)
        x += a * dt
        h += float(height_rate(theta)) * dt
        t += dt
        theta -= float(theta_jump_size(theta, g.random()))
        events.append(GrowthState(theta, x, h, t))
    raise HorizonExceeded(f"no passage of {n} within {max_jumps} jumps")


def sample_sigma(n: float, reps: int, initial: Initial = "theta0_cosine", rng=0, max_jumps: int = MAX_JUMPS) -> np.ndarray:
    """Independent first-passage times sigma(n), vectorised over replicates."""
    g = as_generator(rng)
    theta = np.asarray(initial_angle(initial, g, reps), dtype=float)
    x = np.zeros(reps)
    t = np.zeros(reps)
    sigma = np.full(reps, np.nan)
    live = np.arange(reps)
    for _ in range(max_jumps):
        if live.size == 0:
            return sigma
        dt = g.exponential(1.0 / JUMP_RATE, live.size)
        v = g.random(live.size)
        th = theta[live]
        a = progress_rate(th)
        with np.errstate(invalid="ignore", over="ignore"):
            hit = (a > 0) & (x[live] + a * dt >= n)
            tau = np.where(np.isinf(a), 0.0, (n - x[live]) / a)
        done = live[hit]
        sigma[done] = t[done] + tau[hit]
        keep = ~hit
        lk = live[keep]
        x[lk] += a[keep] * dt[keep]
        t[lk] += dt[keep]
        theta[lk] = th[keep] - theta_jump_size(th[keep], v[keep])
        live = lk
    raise HorizonExceeded(f"{live.size} replicates did not reach {n} within {max_jumps} jumps")


def jumps_in_excess_time(k: int, reps: int, initial: Initial, rng) -> tuple[np.ndarray, np.ndarray]:
    """(angle, excess time) after each of the first ``k`` jumps, simulated in excess time."""
    g = as_generator(rng)
    theta = np.asarray(initial_angle(initial, g, reps), dtype=float)
    th_out = np.empty((k, reps))
    t_out = np.empty((k, reps))
    t = np.zeros(reps)
    for j in range(k):
        t += g.exponential(1.0 / JUMP_RATE, reps)
        theta = theta - theta_jump_size(theta, g.random(reps))
        th_out[j], t_out[j] = theta, t
    return th_out, t_out


def jumps_in_arc_length(k: int, reps: int, initial: Initial, rng) -> tuple[np.ndarray, np.ndarray]:
    """Same record built in arc length s.

    Holding lengths are Exp(rate (1 - cos Theta)/2); X grows at rate cos Theta
    along them, so excess time advances by (1 - cos Theta) per unit length.
    """
    g = as_generator(rng)
    theta = np.asarray(initial_angle(initial, g, reps), dtype=float)
    th_out = np.empty((k, reps))
    t_out = np.empty((k, reps))
    t = np.zeros(reps)
    for j in range(k):
        one_minus_cos = 2.0 * np.sin(0.5 * theta) ** 2
        ds = g.exponential(1.0, reps) / (0.5 * one_minus_cos)
        t += ds * one_minus_cos
        theta = theta - theta_jump_size(theta, g.random(reps))
        th_out[j], t_out[j] = theta, t.copy()
    return th_out, t_out


# ---------------------------------------------------------------------------
# Initial segment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Moments:
    mean: float
    second: float


def initial_segment_moments() -> Moments:
    """Moments of T1 + T2 + T1 sec U, T1, T2 ~ Exp(mean 4), U with density (2/sqrt3) cos u on (0, pi/3)."""
    r3 = math.sqrt(3.0)
    mean = 8.0 * (1.0 + math.pi / (3.0 * r3))
    second = 32.0 * (3.0 + (2.0 / r3) * (math.pi + math.log(2.0 + r3)))
    return Moments(mean, second)


def sample_initial_segment(size: int, rng) -> np.ndarray:
    g = as_generator(rng)
    t1 = g.exponential(4.0, size)
    t2 = g.exponential(4.0, size)
    u = np.arcsin(0.5 * math.sqrt(3.0) * g.random(size))
    return t1 + t2 + t1 / np.cos(u)


# ---------------------------------------------------------------------------
# Subordinators
# ---------------------------------------------------------------------------


def _neg_log1mexp(x):
    # -log(1 - exp(-x)) for x > 0, stable at both ends
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(x < math.log(2.0), -np.log(-np.expm1(-x)), -np.log1p(-np.exp(-x)))


def xi_jump(J):
    """-log(1 - exp(-J/2)); distributed as the maximum of two unit exponentials."""
    return _neg_log1mexp(0.5 * np.asarray(J, dtype=float))


def eta_jump(J):
    return _neg_log1mexp((2.0 / math.pi) * np.asarray(J, dtype=float))


def laplace_exponent(q: float) -> float:
    """Phi(q) = -log E[exp(-q xi_t)] / t = q (3 + q) / (2 (1 + q) (2 + q))."""
    if q <= -1:
        raise DomainError("Laplace exponent defined for q > -1")
    return q * (3.0 + q) / (2.0 * (1.0 + q) * (2.0 + q))


MARTINGALE_DRIFT = 0.75  # Phi'(0)
XI_JUMP_SECOND_MOMENT = 3.5  # E[max(T', T'')^2]


@dataclass(frozen=True)
class SubordinatorPath:
    jump_times: np.ndarray
    marks: np.ndarray
    xi_jumps: np.ndarray
    eta_jumps: np.ndarray
    horizon: float
    _xi: np.ndarray = field(init=False, repr=False)
    _eta: np.ndarray = field(init=False, repr=False)
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        xi = np.concatenate([[0.0], np.cumsum(self.xi_jumps)])
        eta = np.concatenate([[0.0], np.cumsum(self.eta_jumps)])
        # integral of exp(2 xi) up to each jump time
        starts = np.concatenate([[0.0], self.jump_times])
        lengths = np.diff(starts)
        pieces = np.exp(2.0 * xi[:-1]) * lengths
        object.__setattr__(self, "_xi", xi)
        object.__setattr__(self, "_eta", eta)
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(pieces)]))

    def _index(self, t: float) -> int:
        if t > self.horizon:
            raise HorizonExceeded(f"time {t} beyond path horizon {self.horizon}")
        return int(np.searchsorted(self.jump_times, t, side="right"))

    def xi(self, t: float) -> float:
        return float(self._xi[self._index(t)])

    def eta(self, t: float) -> float:
        return float(self._eta[self._index(t)])

    def martingale(self, t: float) -> float:
        return self.xi(t) - MARTINGALE_DRIFT * t

    def integral(self, t: float) -> float:
        """int_0^t exp(2 xi_s) ds, exact."""
        k = self._index(t)
        last = self.jump_times[k - 1] if k else 0.0
        return float(self._cum[k] + math.exp(2.0 * self._xi[k]) * (t - last))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "J", "xi", "eta"])
        w.writerow([repr(0.0), "", repr(0.0), repr(0.0)])
        for i, (t, j) in enumerate(zip(self.jump_times, self.marks)):
            w.writerow([repr(float(t)), repr(float(j)), repr(float(self._xi[i + 1])), repr(float(self._eta[i + 1]))])
        return buf.getvalue()


def _jumps(g, m):
    J = g.exponential(1.0, m)
    return J, xi_jump(J), eta_jump(J)


def simulate_subordinators(rng, t_max: float | None = None, integral_target: float | None = None) -> SubordinatorPath:
    """Coupled subordinators with shared marks, up to ``t_max`` or until the exp(2 xi) integral reaches a target."""
    if (t_max is None) == (integral_target is None):
        raise ValueError("give exactly one of t_max or integral_target")
    g = as_generator(rng)
    if t_max is not None:
        if not t_max > 0:
            raise ValueError("horizon must be positive")
        m = g.poisson(JUMP_RATE * t_max)
        times = np.sort(g.uniform(0.0, t_max, m))
        J, xj, ej = _jumps(g, m)
        return SubordinatorPath(times, J, xj, ej, float(t_max))
    if not integral_target > 0:
        raise ValueError("integral target must be positive")
    times, marks = [], []
    t = acc = xi = 0.0
    while True:
        dt = g.exponential(1.0 / JUMP_RATE)
        acc += math.exp(2.0 * xi) * dt
        t += dt
        if acc >= integral_target:
            break
        J = g.exponential(1.0)
        times.append(t)
        marks.append(J)
        xi += float(xi_jump(J))
        if len(times) > MAX_JUMPS:
            raise HorizonExceeded("integral target not reached")
    J = np.asarray(marks)
    return SubordinatorPath(np.asarray(times), J, xi_jump(J), eta_jump(J), t)


def tau_first_passage(path: SubordinatorPath, n: float) -> float:
    """tau(n) = inf{t : int_0^t exp(2 xi_s) ds >= n}, solved exactly in the crossing interval."""
    cum = path._cum
    k = int(np.searchsorted(cum, n, side="left")) - 1
    k = max(k, 0)
    start = path.jump_times[k - 1] if k else 0.0
    tau = start + (n - cum[k]) * math.exp(-2.0 * path._xi[k])
    if tau > path.horizon:
        raise HorizonExceeded(f"integral of exp(2 xi) stays below {n} on this path")
    return float(tau)


def tau_representation(path: SubordinatorPath, n: float) -> tuple[float, float]:
    """Return (tau(n), (2/3)(log n - 2 M_tau + log(exp(2 xi_tau)/n))); the two agree identically."""
    tau = tau_first_passage(path, n)
    xi = path.xi(tau)
    m = xi - MARTINGALE_DRIFT * tau
    return tau, (2.0 / 3.0) * (math.log(n) - 2.0 * m + (2.0 * xi - math.log(n)))


def sample_tau(n: float, reps: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised (tau(n), xi_tau(n)) over independent replicates."""
    g = as_generator(rng)
    acc = np.zeros(reps)
    xi = np.zeros(reps)
    t = np.zeros(reps)
    tau = np.full(reps, np.nan)
    xi_tau = np.full(reps, np.nan)
    live = np.arange(reps)
    for _ in range(MAX_JUMPS):
        if live.size == 0:
            return tau, xi_tau
        dt = g.exponential(1.0 / JUMP_RATE, live.size)
        J = g.exponential(1.0, live.size)
        w = np.exp(2.0 * xi[live])
        hit = acc[live] + w * dt >= n
        d = live[hit]
        tau[d] = t[d] + (n - acc[d]) / w[hit]
        xi_tau[d] = xi[d]
        k = live[~hit]
        acc[k] += w[~hit] * dt[~hit]
        t[k] += dt[~hit]
        xi[k] += xi_jump(J[~hit])
        live = k
    raise HorizonExceeded("tau sampling did not terminate")


@dataclass(frozen=True)
class InverseMoment:
    formula: float
    mc_estimate: float
    std_error: float


def lamperti_inverse_moment_formula(n: float) -> float:
    return (2.0 / 3.0) * (1.0 + (n - 1.0) * math.exp(-0.5 * n))


def lamperti_inverse_moment(n: float, mc: int = 0, rng=0) -> InverseMoment:
    """n E[exp(-2 xi_tau(n))]: closed form plus an optional Monte Carlo estimate."""
    if n < 1:
        raise DomainError("n must be at least 1")
    f = lamperti_inverse_moment_formula(n)
    if mc <= 0:
        return InverseMoment(f, math.nan, math.nan)
    _, xi = sample_tau(n, mc, rng)
    vals = n * np.exp(-2.0 * xi)
    return InverseMoment(f, float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(mc)))


def printed_higher_moment(n: float, p: float) -> float:
    """Closed form offered in the literature for E[(n exp(-2 xi_tau(n)))^p]; kept for comparison only."""
    if p <= 0:
        raise DomainError("p must be positive")
    z = n**p / 2.0
    # int_0^z v^(p-1) e^(-v/2) dv = 2^p Gamma(p) P(p, z/2)
    inc = 2.0**p * special.gamma(p) * special.gammainc(p, z / 2.0)
    return 2.0 * p / (2.0 * p + 1.0) * (n**p * math.exp(-z) - z ** (1.0 - p) * inc)


def higher_moment_mc(n: float, p: float, reps: int, rng) -> tuple[float, float]:
    _, xi = sample_tau(n, reps, rng)
    vals = (n * np.exp(-2.0 * xi)) ** p
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(reps))


# ---------------------------------------------------------------------------
# Perpetuity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PerpetuityEstimate:
    value: float
    truncation_level: int
    tail_bound: float
    std_error: float = 0.0


def multiplier_density(x):
    """Density of m = (1 - exp(-2J/pi))^2 on (0, 1)."""
    x = np.asarray(x, dtype=float)
    a = math.pi / 2.0
    return (math.pi / 4.0) * (1.0 - np.sqrt(x)) ** (a - 1.0) / np.sqrt(x)


def multiplier_mean(by: Literal["quadrature", "closed_form"] = "quadrature") -> float:
    """E[m]. With x = w^2 the density becomes (pi/2)(1 - w)^(pi/2 - 1) on (0, 1), no singularity."""
    a = math.pi / 2.0
    if by == "closed_form":
        return 2.0 / ((a + 1.0) * (a + 2.0))
    return quad_value(lambda w: w * w * (math.pi / 2.0) * (1.0 - w) ** (a - 1.0), 0.0, 1.0, rel_tol=1e-12, abs_tol=1e-14)


def multiplier_mass() -> float:
    a = math.pi / 2.0
    return quad_value(lambda w: (math.pi / 2.0) * (1.0 - w) ** (a - 1.0), 0.0, 1.0, rel_tol=1e-12, abs_tol=1e-14)


def sample_multiplier(rng, size=None):
    J = as_generator(rng).exponential(1.0, size)
    return (-np.expm1(-(2.0 / math.pi) * J)) ** 2


def perpetuity(rng=None, samples: int = 1, cutoff: float = 1e-12) -> PerpetuityEstimate:
    """U = 1 + m1 + m1 m2 + ...; analytic mean 1/(1 - E[m]) when ``rng`` is None.

    The series is cut once the running product drops below ``cutoff``; the
    neglected tail is at most product * E[m]/(1 - E[m]) in mean, reported as
    ``tail_bound``.
    """
    em = multiplier_mean()
    if rng is None:
        return PerpetuityEstimate(1.0 / (1.0 - em), 0, 0.0)
    g = as_generator(rng)
    total = np.ones(samples)
    prod = np.ones(samples)
    live = np.ones(samples, dtype=bool)
    level = 0
    while live.any():
        level += 1
        prod[live] *= sample_multiplier(g, int(live.sum()))
        total[live] += prod[live]
        live &= prod >= cutoff
    tail = cutoff * em / (1.0 - em)
    se = float(total.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.inf
    return PerpetuityEstimate(float(total.mean()), level, tail, se)
