"""Poisson line process samplers and measure calculators.

Lines are stored as arrays ``(r, theta)`` with the convention of
:class:`poisson_city.geometry.Line`. The unit-intensity isotropic process has
intensity ``dr dtheta / 2``; the improper anisotropic limit process is carried
in intercept form ``(y_minus, y_plus)`` at ``x = -1`` and ``x = +1`` with
intensity ``dy_minus dy_plus / 4``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Literal

import numpy as np

from .geometry import Line, Point, Segment
from .numerics import as_generator


class UnsupportedBody(TypeError):
    pass


@dataclass(frozen=True)
class DiskWindow:
    center: Point
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", Point(*self.center))
        if not self.radius > 0:
            raise ValueError("window radius must be positive")


@dataclass(frozen=True)
class LinePattern:
    """A finite realisation of a line process in a disk window.

    ``r``/``theta`` hold the unconditioned Poisson lines; lines added by
    conditioning live in ``conditioned`` so callers can exclude them.
    """

    r: np.ndarray
    theta: np.ndarray
    window: DiskWindow
    conditioned: tuple[Line, ...] = ()
    model: str = "isotropic_unit"
    seed_record: tuple | None = None

    def __len__(self):
        return len(self.r)

    @property
    def lines(self) -> list[Line]:
        return [Line(float(r), float(t)) for r, t in zip(self.r, self.theta)]

    def all_lines(self) -> tuple[np.ndarray, np.ndarray]:
        """Arrays of unconditioned and conditioned lines together."""
        if not self.conditioned:
            return self.r, self.theta
        cr = np.array([ln.r for ln in self.conditioned])
        ct = np.array([ln.theta for ln in self.conditioned])
        return np.concatenate([self.r, cr]), np.concatenate([self.theta, ct])

    def with_lines(self, r, theta, window=None) -> "LinePattern":
        return replace(
            self,
            r=np.concatenate([self.r, r]),
            theta=np.concatenate([self.theta, theta]),
            window=window or self.window,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "r", "theta", "y_minus", "y_plus"])
        for r, t in zip(self.r, self.theta):
            w.writerow(["poisson", repr(float(r)), repr(float(t)), "", ""])
        for ln in self.conditioned:
            w.writerow(["conditioned", repr(ln.r), repr(ln.theta), "", ""])
        return buf.getvalue()


def hitting_measure(body) -> float:
    """Invariant measure of lines hitting a segment (its length) or a disk (pi R)."""
    if isinstance(body, Segment):
        return body.length
    if isinstance(body, DiskWindow):
        return math.pi * body.radius
    raise UnsupportedBody(f"no hitting measure for {type(body).__name__}")


def segment_length_measure(length: float) -> float:
    """Hitting measure of a segment given only its length (zero-length allowed)."""
    if length < 0:
        raise ValueError("negative length")
    return float(length)


def _rebase(d: np.ndarray, theta: np.ndarray, center: Point) -> np.ndarray:
    # signed distance to the window centre -> signed distance to the global origin
    return d + (-center.x * np.sin(theta) + center.y * np.cos(theta))


def sample_pattern(window: DiskWindow, rng) -> LinePattern:
    """Unit-intensity isotropic Poisson lines hitting ``window``."""
    g = as_generator(rng)
    m = g.poisson(math.pi * window.radius)
    theta = g.uniform(0.0, math.pi, m)
    d = g.uniform(-window.radius, window.radius, m)
    seed_record = getattr(rng, "record", None)
    return LinePattern(_rebase(d, theta, window.center), theta, window, seed_record=seed_record)


def sample_annulus(pattern: LinePattern, new_radius: float, rng) -> LinePattern:
    """Superpose the lines hitting a larger concentric disk but missing the current one.

    Keeps every existing line, so the enlarged pattern is coupled to the old one.
    """
    g = as_generator(rng)
    R0, R1 = pattern.window.radius, float(new_radius)
    if R1 <= R0:
        raise ValueError("annulus must enlarge the window")
    m = g.poisson(math.pi * (R1 - R0))
    theta = g.uniform(0.0, math.pi, m)
    mag = g.uniform(R0, R1, m)
    d = np.where(g.random(m) < 0.5, -mag, mag)
    window = DiskWindow(pattern.window.center, R1)
    return pattern.with_lines(_rebase(d, theta, window.center), theta, window)


def add_line_through(pattern: LinePattern, anchor, direction: float | Literal["uniform"] = 0.0, rng=None) -> LinePattern:
    """Condition the pattern on a line through ``anchor`` (Slivnyak: the rest is unchanged)."""
    if direction == "uniform":
        theta = as_generator(rng).uniform(0.0, math.pi)
    else:
        theta = float(direction)
    return replace(pattern, conditioned=pattern.conditioned + (Line.through(anchor, theta),))


def sample_pair_angle(rng, size=None):
    """Angle between two lines conditioned through a common point: density sin(a)/2 on (0, pi)."""
    g = as_generator(rng)
    return np.arccos(1.0 - 2.0 * g.random(size))


def add_line_pair_through(pattern: LinePattern, anchor, rng) -> LinePattern:
    """Condition on two lines through ``anchor``: uniform first direction, sine-weighted relative angle."""
    g = as_generator(rng)
    t1 = g.uniform(0.0, math.pi)
    alpha = float(sample_pair_angle(g))
    lines = (Line.through(anchor, t1), Line.through(anchor, t1 + alpha))
    return replace(pattern, conditioned=pattern.conditioned + lines)


# ---------------------------------------------------------------------------
# Improper anisotropic limit process
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StripLine:
    y_minus: float
    y_plus: float

    def height(self, x: float) -> float:
        return 0.5 * ((1.0 - x) * self.y_minus + (1.0 + x) * self.y_plus)


@dataclass(frozen=True)
class StripLines:
    """Vectorised collection of strip lines."""

    y_minus: np.ndarray
    y_plus: np.ndarray
    box: tuple[float, float] = field(default=(0.0, 0.0))

    def __len__(self):
        return len(self.y_minus)

    def __iter__(self) -> Iterator[StripLine]:
        for a, b in zip(self.y_minus, self.y_plus):
            yield StripLine(float(a), float(b))

    def height(self, x) -> np.ndarray:
        return 0.5 * ((1.0 - x) * self.y_minus + (1.0 + x) * self.y_plus)

    @property
    def slope(self) -> np.ndarray:
        return 0.5 * (self.y_plus - self.y_minus)

    @property
    def x_intercept(self) -> np.ndarray:
        """Where the line meets the x-axis (inf for flat lines)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            return -self.height(0.0) / self.slope

    def subset(self, mask) -> "StripLines":
        return StripLines(self.y_minus[mask], self.y_plus[mask], self.box)

    def reflected(self) -> "StripLines":
        return StripLines(-self.y_minus, -self.y_plus, (-self.box[1], -self.box[0]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "r", "theta", "y_minus", "y_plus"])
        for a, b in zip(self.y_minus, self.y_plus):
            w.writerow(["strip", "", "", repr(float(a)), repr(float(b))])
        return buf.getvalue()


def sample_improper_strip(y_min: float, y_max: float, rng) -> StripLines:
    """Lines of the improper process with both intercepts in [y_min, y_max]."""
    if y_max < y_min:
        raise ValueError("y_min must not exceed y_max")
    g = as_generator(rng)
    side = y_max - y_min
    m = g.poisson(0.25 * side * side) if side > 0 else 0
    ym = g.uniform(y_min, y_max, m)
    yp = g.uniform(y_min, y_max, m)
    return StripLines(ym, yp, (y_min, y_max))


def anisotropic_angle_density(phi):
    """Limit-process intensity per unit x-intercept, as a function of the scaled angle phi."""
    phi = np.asarray(phi, dtype=float)
    return 0.5 * np.abs(np.tan(phi)) / np.cos(phi) ** 2


def retention_probability(slope, n: float):
    """Thinning probability (1 + tan^2(phi)/n)^(-3/2) mapping the limit process to scale n."""
    return (1.0 + np.square(slope) / n) ** -1.5


def thin_to_isotropic(strip: StripLines, n: float, rng) -> StripLines:
    if n < 1:
        raise ValueError("thinning needs n >= 1")
    g = as_generator(rng)
    keep = g.random(len(strip)) < retention_probability(strip.slope, n)
    return strip.subset(keep)


def unscale_strip(strip: StripLines, n: float) -> tuple[np.ndarray, np.ndarray]:
    """Map strip lines to (r, theta) lines at scale n (x -> n x, y -> sqrt(n) y)."""
    k = strip.slope * math.sqrt(n) / n  # dy/dx in original units
    theta = np.mod(np.arctan(k), math.pi)
    y0 = strip.height(0.0) * math.sqrt(n)
    # line through (0, y0) with angle theta
    r = y0 * np.cos(theta)
    return r, theta
