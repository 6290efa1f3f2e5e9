"""Minimal SVG output: pattern lines, a cell, its two routes, and scatter plots."""

from __future__ import annotations

import math

import numpy as np

from .geometry import Point
from .lines import LinePattern
from .routes import Cell, LateralDisplacement, Route

ROUTE_COLOURS = {"upper": "#d62728", "lower": "#1f77b4"}


class _Canvas:
    def __init__(self, xmin, xmax, ymin, ymax, y_scale=1.0, width=900):
        self.xmin, self.xmax = xmin, xmax
        self.ymin, self.ymax = ymin * y_scale, ymax * y_scale
        self.ys = y_scale
        self.k = width / (xmax - xmin)
        self.w = width
        self.h = max(60.0, (self.ymax - self.ymin) * self.k)
        self.items: list[str] = []

    def xy(self, x, y):
        return (x - self.xmin) * self.k, self.h - (y * self.ys - self.ymin) * self.k

    def polyline(self, pts, stroke, width=1.0, closed=False):
        coords = " ".join("%.3f,%.3f" % self.xy(*p) for p in pts)
        tag = "polygon" if closed else "polyline"
        self.items.append(f'<{tag} points="{coords}" fill="none" stroke="{stroke}" stroke-width="{width}"/>')

    def dot(self, p, fill, r=3.0):
        x, y = self.xy(*p)
        self.items.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{r}" fill="{fill}"/>')

    def render(self) -> str:
        head = f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.w:.0f}" height="{self.h:.0f}" viewBox="0 0 {self.w:.0f} {self.h:.0f}">'
        return "\n".join([head, '<rect width="100%" height="100%" fill="white"/>', *self.items, "</svg>"]) + "\n"


def _clip_line_to_box(r, theta, xmin, xmax, ymin, ymax):
    # endpoints of the line where it crosses the box, or None
    nx, ny = -math.sin(theta), math.cos(theta)
    dx, dy = math.cos(theta), math.sin(theta)
    px, py = r * nx, r * ny
    lo, hi = -math.inf, math.inf
    for p, d, a, b in ((px, dx, xmin, xmax), (py, dy, ymin, ymax)):
        if abs(d) < 1e-15:
            if not (a <= p <= b):
                return None
            continue
        t0, t1 = sorted(((a - p) / d, (b - p) / d))
        lo, hi = max(lo, t0), min(hi, t1)
    if lo >= hi:
        return None
    return Point(px + lo * dx, py + lo * dy), Point(px + hi * dx, py + hi * dy)


def render_cell(cell: Cell, routes: tuple[Route, Route] | None = None, pattern: LinePattern | None = None,
                displacement: LateralDisplacement | None = None, y_scale: float = 1.0, margin: float = 0.15) -> str:
    """Lines in grey, the cell in black, routes in two colours, the highest vertex as a dot."""
    verts = cell.polygon.as_array()
    xmin, xmax = verts[:, 0].min(), verts[:, 0].max()
    ymin, ymax = verts[:, 1].min(), verts[:, 1].max()
    pad = margin * (xmax - xmin)
    xmin, xmax = xmin - pad, xmax + pad
    ypad = margin * (ymax - ymin)
    ymin, ymax = ymin - ypad, ymax + ypad
    cv = _Canvas(xmin, xmax, ymin, ymax, y_scale)
    if pattern is not None:
        r, th = pattern.all_lines()
        for ri, ti in zip(r, th):
            seg = _clip_line_to_box(float(ri), float(ti), xmin, xmax, ymin, ymax)
            if seg:
                cv.polyline(seg, "#bbbbbb", 0.6)
    cv.polyline(cell.polygon.vertices, "black", 1.4, closed=True)
    for rt in routes or ():
        cv.polyline(rt.polyline, ROUTE_COLOURS.get(rt.side, "green"), 2.0)
    cv.dot(cell.p_minus, "black")
    cv.dot(cell.p_plus, "black")
    if displacement is not None:
        n = displacement.n
        # displacement is in the local frame of the segment; map back
        pm, pp = cell.p_minus, cell.p_plus
        ex, ey = (pp.x - pm.x) / n, (pp.y - pm.y) / n
        lx, ly = displacement.u * n, displacement.v * math.sqrt(n)
        cv.dot((pm.x + lx * ex - ly * ey, pm.y + lx * ey + ly * ex), "#ff7f0e", 4.0)
    return cv.render()


def render_scatter(x, y, xlabel: str = "", ylabel: str = "") -> str:
    x, y = np.asarray(x, float), np.asarray(y, float)
    cv = _Canvas(float(x.min()), float(x.max()) + 1e-12, float(y.min()), float(y.max()) + 1e-12, 1.0, 600)
    for a, b in zip(x, y):
        cv.dot((a, b), "#1f77b4", 1.5)
    if xlabel or ylabel:
        cv.items.append(f'<text x="8" y="16" font-size="12">{ylabel} vs {xlabel}</text>')
    return cv.render()
