"""Cells C(p-, p+), semi-perimeter routes and their lateral displacement."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .geometry import ConvexPolygon, Point, dist, intersect_halfplanes, signed_distances
from .lines import DiskWindow, LinePattern, sample_annulus, sample_pattern
from .numerics import DomainError, as_generator


class UnboundedAtMaxWindow(RuntimeError):
    pass


class DegenerateCell(RuntimeError):
    pass


@dataclass(frozen=True)
class WindowPolicy:
    max_doublings: int = 6
    min_radius: float = 0.0

    def initial_radius(self, d: float) -> float:
        return max(1.5 * d, 0.5 * d + 6.0 * math.sqrt(d * math.log(d + math.e)), self.min_radius)


@dataclass(frozen=True)
class Cell:
    polygon: ConvexPolygon
    p_minus: Point
    p_plus: Point
    generating_window_radius: float
    bounded: bool
    edge_lines: tuple[int, ...] = ()  # pattern line index per edge, -1 for the bounding box

    @property
    def separation(self) -> float:
        return dist(self.p_minus, self.p_plus)


@dataclass(frozen=True)
class Route:
    polyline: tuple[Point, ...]
    side: str
    length: float
    excess: float


@dataclass(frozen=True)
class LateralDisplacement:
    u: float
    v: float
    n: float


def cell_from_pattern(p_minus, p_plus, pattern: LinePattern, include_conditioned: bool = True) -> Cell:
    """Cell of the tessellation left after deleting every line that separates p- from p+.

    The window's bounding square closes the polygon; ``bounded`` is set only when
    every edge lies on a pattern line and the polygon sits inside the window
    disk (so lines missing the window cannot cut it).
    """
    pm, pp = Point(*p_minus), Point(*p_plus)
    if pm == pp:
        raise ValueError("p_minus and p_plus must differ")
    r, theta = pattern.all_lines() if include_conditioned else (pattern.r, pattern.theta)
    win = pattern.window
    ends = np.array([pm, pp], dtype=float)
    d = signed_distances(r, theta, ends) if len(r) else np.zeros((2, 0))
    keep = np.sign(d[0]) == np.sign(d[1])
    keep &= d[0] != 0
    idx = np.flatnonzero(keep)
    nx, ny = -np.sin(theta[idx]), np.cos(theta[idx])
    flip = np.where(d[0, idx] < 0, 1.0, -1.0)  # orient so that p- satisfies n.x <= r
    normals = np.column_stack([nx * flip, ny * flip])
    offsets = r[idx] * flip

    R, c = win.radius, win.center
    box_n = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    box_o = np.array([c.x + R, -(c.x - R), c.y + R, -(c.y - R)])
    # the square must contain the segment; widen if a caller-supplied window is too small
    reach = max(abs(pm.x - c.x), abs(pp.x - c.x), abs(pm.y - c.y), abs(pp.y - c.y))
    if reach >= R:
        box_o = box_o + (reach - R) + 1.0
    all_n = np.vstack([normals, box_n])
    all_o = np.concatenate([offsets, box_o])
    mid = 0.5 * (ends[0] + ends[1])
    verts, edge_ids = intersect_halfplanes(all_n, all_o, mid)

    nlines = len(idx)
    edge_lines = tuple(int(idx[e]) if e < nlines else -1 for e in edge_ids)
    inside = bool(np.all(np.hypot(verts[:, 0] - c.x, verts[:, 1] - c.y) < R))
    bounded = all(e >= 0 for e in edge_lines) and inside
    poly = ConvexPolygon(tuple(Point(float(x), float(y)) for x, y in verts))
    if len(poly.vertices) != len(edge_lines):
        # duplicate vertices merged; edge bookkeeping no longer aligned
        edge_lines = ()
    return Cell(poly, pm, pp, R, bounded, edge_lines)


def build_cell(p_minus, p_plus, rng, policy: WindowPolicy | None = None, pattern: LinePattern | None = None) -> Cell:
    """Sample lines around the segment and return its cell, enlarging the window as needed.

    The window is a disk at the midpoint; on failure its radius doubles and only
    lines hitting the new annulus are added, so earlier lines are kept.
    """
    policy = policy or WindowPolicy()
    pm, pp = Point(*p_minus), Point(*p_plus)
    g = as_generator(rng)
    if pattern is None:
        mid = Point(0.5 * (pm.x + pp.x), 0.5 * (pm.y + pp.y))
        pattern = sample_pattern(DiskWindow(mid, policy.initial_radius(dist(pm, pp))), g)
    for k in range(policy.max_doublings + 1):
        cell = cell_from_pattern(pm, pp, pattern)
        if cell.bounded:
            return cell
        if k < policy.max_doublings:
            pattern = sample_annulus(pattern, 2.0 * pattern.window.radius, g)
    raise UnboundedAtMaxWindow(f"cell still open after {policy.max_doublings} window doublings")


# ---------------------------------------------------------------------------
# Routes
# ---------------------------------------------------------------------------


def _local_frame(cell: Cell):
    pm, pp = cell.p_minus, cell.p_plus
    n = dist(pm, pp)
    ex, ey = (pp.x - pm.x) / n, (pp.y - pm.y) / n
    v = cell.polygon.as_array() - np.array([pm.x, pm.y])
    X = v[:, 0] * ex + v[:, 1] * ey
    Y = -v[:, 0] * ey + v[:, 1] * ex

    def to_global(x, y):
        return Point(pm.x + x * ex - y * ey, pm.y + x * ey + y * ex)

    return n, X, Y, to_global


def _arcs(X: np.ndarray, Y: np.ndarray, n: float):
    """Split the polygon at the axis; returns (B, F, upper, lower) in local coordinates.

    ``upper`` lists the strictly-upper vertices ordered from B towards F,
    ``lower`` the strictly-lower vertices from B towards F.
    """
    m = len(X)
    crossings = []  # (edge index k, point) where the boundary meets Y = 0 on edge k -> k+1
    for k in range(m):
        y0, y1 = Y[k], Y[(k + 1) % m]
        if y0 == 0.0:
            crossings.append((k, (float(X[k]), 0.0), "vertex"))
        elif (y0 < 0 < y1) or (y1 < 0 < y0):
            t = y0 / (y0 - y1)
            x = X[k] + t * (X[(k + 1) % m] - X[k])
            crossings.append((k, (float(x), 0.0), "edge"))
    if len(crossings) != 2:
        raise DegenerateCell(f"boundary meets the axis {len(crossings)} times")
    (ka, pa, _), (kb, pb, _) = crossings
    if pa[0] > pb[0]:
        (ka, pa), (kb, pb) = (kb, pb), (ka, pa)
    B, F = pa, pb
    if not (B[0] < 0.0 and F[0] > n):
        raise DegenerateCell("cell does not contain the segment")
    # CCW order: the upper run goes F -> B, the lower run B -> F
    upper = _run(X, Y, positive=True)[::-1]
    lower = _run(X, Y, positive=False)
    return B, F, upper, lower


def _run(X, Y, positive: bool):
    m = len(X)
    mask = (Y > 0) if positive else (Y < 0)
    if not mask.any():
        return []
    # start of the run: a masked vertex whose predecessor is unmasked
    start = next(i for i in range(m) if mask[i] and not mask[i - 1])
    out = []
    i = start
    while mask[i]:
        out.append((float(X[i]), float(Y[i])))
        i = (i + 1) % m
        if i == start:
            break
    return out


def _route(points, side, to_global, n) -> Route:
    length = math.fsum(math.hypot(points[i + 1][0] - points[i][0], points[i + 1][1] - points[i][1]) for i in range(len(points) - 1))
    poly = tuple(to_global(x, y) for x, y in points)
    return Route(poly, side, length, length - n)


def semi_perimeter_routes(cell: Cell) -> tuple[Route, Route]:
    """Upper and lower semi-perimeter routes from p- to p+.

    Each route backs away from p+ to the boundary point B, follows one side of
    the boundary to F on the forward ray, then runs back along the ray to p+.
    """
    if not cell.bounded:
        raise DegenerateCell("routes need a bounded cell")
    n, X, Y, to_global = _local_frame(cell)
    B, F, upper, lower = _arcs(X, Y, n)
    up = [(0.0, 0.0), B, *upper, F, (n, 0.0)]
    lo = [(0.0, 0.0), B, *lower, F, (n, 0.0)]
    return _route(up, "upper", to_global, n), _route(lo, "lower", to_global, n)


def max_lateral_displacement(cell: Cell) -> LateralDisplacement:
    """Highest vertex of the upper boundary arc, scaled to (x/n, y/sqrt(n))."""
    if not cell.bounded:
        raise DegenerateCell("displacement needs a bounded cell")
    n, X, Y, _ = _local_frame(cell)
    B, F, upper, _ = _arcs(X, Y, n)
    best = max(upper, key=lambda p: (p[1], -p[0]))
    return LateralDisplacement(best[0] / n, best[1] / math.sqrt(n), n)


def lateral_limit_density(u: float, v: float) -> float:
    """Joint limit density of (U, V): v^3/(8 u^2 (1-u)^2) * exp(-v^2/(4 u (1-u)))."""
    if not (0.0 < u < 1.0) or v < 0.0:
        raise DomainError("density defined for 0 < u < 1, v >= 0")
    w = u * (1.0 - u)
    return v**3 / (8.0 * w * w) * math.exp(-v * v / (4.0 * w))


def separation_probability(p_minus, p_plus, viewpoint) -> float:
    """Probability that no Poisson line separates ``viewpoint`` from segment p- p+."""
    r = dist(viewpoint, p_minus)
    s = dist(viewpoint, p_plus)
    rho = dist(p_minus, p_plus)
    if r == 0 or s == 0 or rho == 0:
        raise ValueError("viewpoint and endpoints must be distinct")
    return math.exp(-0.5 * (r + s - rho))


def routes_to_csv(cell: Cell, routes: tuple[Route, Route] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "role"])
    for v in cell.polygon.vertices:
        w.writerow([repr(v.x), repr(v.y), "vertex"])
    w.writerow([repr(cell.p_minus.x), repr(cell.p_minus.y), "p_minus"])
    w.writerow([repr(cell.p_plus.x), repr(cell.p_plus.y), "p_plus"])
    if routes is None and cell.bounded:
        routes = semi_perimeter_routes(cell)
    if routes:
        b, f = routes[0].polyline[1], routes[0].polyline[-2]
        w.writerow([repr(b.x), repr(b.y), "ray_back"])
        w.writerow([repr(f.x), repr(f.y), "ray_forward"])
    return buf.getvalue()
