"""Planar primitives: lines in (r, theta) form, side tests, clipping, cells."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

# Absolute collinearity tolerance in length units; valid for coordinates up to ~1e4.
TOL = 1e-12


class EmptyIntersection(ValueError):
    pass


class Point(NamedTuple):
    x: float
    y: float

    def __sub__(self, other):
        return Point(self.x - other.x, self.y - other.y)

    def __add__(self, other):
        return Point(self.x + other.x, self.y + other.y)

    def norm(self) -> float:
        return math.hypot(self.x, self.y)


def dist(a, b) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass(frozen=True)
class Line:
    """Undirected line {p : p . n(theta) = r} with n(theta) = (-sin theta, cos theta).

    ``theta`` is the angle the line makes with the x-axis, kept in [0, pi);
    ``r`` is the signed perpendicular distance from the origin.
    """

    r: float
    theta: float

    def __post_init__(self):
        r, th = float(self.r), float(self.theta) % (2 * math.pi)
        if th >= math.pi:
            th -= math.pi
            r = -r
        if th >= math.pi:  # float edge case of the reduction above
            th = 0.0
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "theta", th)

    @property
    def normal(self) -> tuple[float, float]:
        return (-math.sin(self.theta), math.cos(self.theta))

    @property
    def direction(self) -> tuple[float, float]:
        return (math.cos(self.theta), math.sin(self.theta))

    @property
    def point(self) -> Point:
        nx, ny = self.normal
        return Point(self.r * nx, self.r * ny)

    def signed_distance(self, p) -> float:
        nx, ny = self.normal
        return p[0] * nx + p[1] * ny - self.r

    @classmethod
    def through(cls, p, theta: float) -> "Line":
        return cls(-p[0] * math.sin(theta) + p[1] * math.cos(theta), theta)

    @classmethod
    def from_points(cls, a, b) -> "Line":
        if dist(a, b) == 0:
            raise ValueError("a line needs two distinct points")
        return cls.through(a, math.atan2(b[1] - a[1], b[0] - a[0]))


@dataclass(frozen=True)
class Segment:
    a: Point
    b: Point

    def __post_init__(self):
        object.__setattr__(self, "a", Point(*self.a))
        object.__setattr__(self, "b", Point(*self.b))
        if self.a == self.b:
            raise ValueError("degenerate segment")

    @property
    def midpoint(self) -> Point:
        return Point(0.5 * (self.a.x + self.b.x), 0.5 * (self.a.y + self.b.y))

    @property
    def length(self) -> float:
        return dist(self.a, self.b)


def side_of(line: Line, p) -> int:
    d = line.signed_distance(p)
    if abs(d) <= TOL:
        return 0
    return 1 if d > 0 else -1


def crosses(line: Line, s: Segment) -> bool:
    return side_of(line, s.a) * side_of(line, s.b) <= 0


def separates(line: Line, p, s: Segment) -> bool:
    """True iff ``line`` strictly separates the point ``p`` from the segment ``s``."""
    sp = side_of(line, p)
    if sp == 0:
        return False
    return side_of(line, s.a) == -sp and side_of(line, s.b) == -sp


# -- vectorised forms used by the samplers ----------------------------------


def signed_distances(r: np.ndarray, theta: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Matrix of signed distances, shape (len(pts), len(r))."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    nx, ny = -np.sin(theta), np.cos(theta)
    return np.outer(pts[:, 0], nx) + np.outer(pts[:, 1], ny) - r


def any_separator(r, theta, p, a, b) -> np.ndarray:
    """For point arrays p, a, b (shape (m, 2)), whether some line separates p_i from segment a_i b_i."""
    dp = signed_distances(r, theta, p)
    da = signed_distances(r, theta, a)
    db = signed_distances(r, theta, b)
    sep = (np.sign(da) == -np.sign(dp)) & (np.sign(db) == -np.sign(dp)) & (np.abs(dp) > TOL)
    sep &= (np.abs(da) > TOL) & (np.abs(db) > TOL)
    return sep.any(axis=1)


# ---------------------------------------------------------------------------
# Polygons
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvexPolygon:
    vertices: tuple[Point, ...]

    def __post_init__(self):
        vs = _dedupe([Point(*v) for v in self.vertices])
        if len(vs) < 3:
            raise ValueError("a convex polygon needs at least three distinct vertices")
        if _signed_area(vs) < 0:
            vs = vs[::-1]
        object.__setattr__(self, "vertices", tuple(vs))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.vertices, dtype=float)

    @classmethod
    def box(cls, xmin, ymin, xmax, ymax) -> "ConvexPolygon":
        return cls(((xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)))


def _dedupe(vs: list[Point], tol: float = 1e-10) -> list[Point]:
    out: list[Point] = []
    for v in vs:
        if not out or dist(out[-1], v) > tol:
            out.append(v)
    while len(out) > 1 and dist(out[0], out[-1]) <= tol:
        out.pop()
    return out


def _signed_area(vs: Sequence) -> float:
    s = 0.0
    n = len(vs)
    for i in range(n):
        x0, y0 = vs[i]
        x1, y1 = vs[(i + 1) % n]
        s += x0 * y1 - x1 * y0
    return 0.5 * s


def clip_halfplane(poly: ConvexPolygon, line: Line, keep) -> ConvexPolygon:
    """Intersect ``poly`` with the closed half-plane of ``line`` containing ``keep``."""
    sk = side_of(line, keep)
    if sk == 0:
        raise ValueError("keep point lies on the clipping line")
    vs = poly.vertices
    d = [sk * line.signed_distance(v) for v in vs]
    out: list[Point] = []
    n = len(vs)
    for i in range(n):
        p, q = vs[i], vs[(i + 1) % n]
        dp, dq = d[i], d[(i + 1) % n]
        if dp >= 0:
            out.append(p)
        if (dp > 0 and dq < 0) or (dp < 0 and dq > 0):
            t = dp / (dp - dq)
            out.append(Point(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)))
    out = _dedupe(out)
    if len(out) < 3 or abs(_signed_area(out)) <= TOL:
        raise EmptyIntersection("kept half-plane misses the polygon")
    return ConvexPolygon(tuple(out))


@dataclass(frozen=True)
class PolygonStats:
    perimeter: float
    area: float
    max_y_vertex: Point
    max_y_index: int


def polygon_stats(poly: ConvexPolygon) -> PolygonStats:
    vs = poly.vertices
    n = len(vs)
    perim = math.fsum(dist(vs[i], vs[(i + 1) % n]) for i in range(n))
    area = abs(_signed_area(vs))
    # Highest vertex; ties (within TOL) go to the smaller x.
    best = 0
    for i in range(1, n):
        dy = vs[i].y - vs[best].y
        if dy > TOL or (abs(dy) <= TOL and vs[i].x < vs[best].x):
            best = i
    return PolygonStats(perim, area, vs[best], best)


# ---------------------------------------------------------------------------
# Half-plane intersection by polar duality
# ---------------------------------------------------------------------------


def intersect_halfplanes(normals: np.ndarray, offsets: np.ndarray, interior) -> tuple[np.ndarray, np.ndarray]:
    """Intersection of half-planes {x : normals[i] . x <= offsets[i]}.

    ``interior`` must lie strictly inside every half-plane and the result must
    be bounded. Returns ``(vertices, edge_ids)`` with vertices in
    counter-clockwise order; edge k runs from vertex k to vertex k+1 and lies on
    half-plane ``edge_ids[k]``.
    """
    from scipy.spatial import ConvexHull

    normals = np.asarray(normals, dtype=float)
    c = np.asarray(interior, dtype=float)
    d = np.asarray(offsets, dtype=float) - normals @ c
    if np.any(d <= 0):
        raise ValueError("interior point is not strictly inside every half-plane")
    dual = normals / d[:, None]
    hull = ConvexHull(dual)
    ids = np.asarray(hull.vertices)  # counter-clockwise in the dual plane
    m = len(ids)
    nxt = np.roll(ids, -1)
    a1, a2 = normals[ids], normals[nxt]
    b1, b2 = d[ids], d[nxt]
    det = a1[:, 0] * a2[:, 1] - a1[:, 1] * a2[:, 0]
    vx = (b1 * a2[:, 1] - b2 * a1[:, 1]) / det
    vy = (a1[:, 0] * b2 - a2[:, 0] * b1) / det
    verts = np.column_stack([vx, vy]) + c
    # Vertex k is where half-planes ids[k] and ids[k+1] meet; edge on ids[k+1]
    # runs from vertex k to vertex k+1.
    edge_ids = np.roll(ids, -1)
    area2 = np.sum(verts[:, 0] * np.roll(verts[:, 1], -1) - np.roll(verts[:, 0], -1) * verts[:, 1])
    if area2 < 0:
        verts = verts[::-1]
        # reversing vertex order: edge from new k to k+1 is old edge (m-2-k) mod m
        edge_ids = np.roll(edge_ids[::-1], -1)
    assert len(verts) == m
    return verts, edge_ids
