"""Monte Carlo drivers shared by the command line and the acceptance suite.

Every driver takes an RngStream and derives one child stream per replicate,
so results do not depend on the order or threading of replicates.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import Point, Segment, any_separator, signed_distances
from .lines import DiskWindow, sample_pattern
from .numerics import RngStream, parallel_map
from .routes import build_cell, max_lateral_displacement, semi_perimeter_routes


def hitting_counts(segment: Segment, reps: int, rng: RngStream) -> np.ndarray:
    """Number of sampled lines crossing ``segment`` in each of ``reps`` patterns."""
    win = DiskWindow(segment.midpoint, 0.5 * segment.length + 1.0)
    ends = np.array([segment.a, segment.b])
    out = np.empty(reps, dtype=np.int64)
    for k in range(reps):
        pat = sample_pattern(win, rng.child(k).generator())
        d = signed_distances(pat.r, pat.theta, ends)
        out[k] = int(np.count_nonzero(np.sign(d[0]) != np.sign(d[1])))
    return out


def intersection_density(reps: int, rng: RngStream, side: float = 1.0) -> np.ndarray:
    """Intersection points per unit area inside a square of the given side, one value per pattern."""
    half = 0.5 * side
    win = DiskWindow((0.0, 0.0), half * math.sqrt(2.0))
    out = np.empty(reps)
    for k in range(reps):
        pat = sample_pattern(win, rng.child(k).generator())
        r, th = pat.r, pat.theta
        i, j = np.triu_indices(len(r), 1)
        nxi, nyi = -np.sin(th[i]), np.cos(th[i])
        nxj, nyj = -np.sin(th[j]), np.cos(th[j])
        det = nxi * nyj - nyi * nxj
        with np.errstate(divide="ignore", invalid="ignore"):
            x = (r[i] * nyj - r[j] * nyi) / det
            y = (nxi * r[j] - nxj * r[i]) / det
        inside = (np.abs(x) <= half) & (np.abs(y) <= half)
        out[k] = np.count_nonzero(inside) / (side * side)
    return out


def no_separator_frequency(p_minus, p_plus, viewpoint, reps: int, rng: RngStream) -> np.ndarray:
    """Indicator, per pattern, that no line separates ``viewpoint`` from segment p- p+."""
    pts = np.array([p_minus, p_plus, viewpoint], dtype=float)
    c = pts.mean(axis=0)
    R = float(np.max(np.hypot(*(pts - c).T))) + 1.0
    win = DiskWindow(Point(*c), R)
    out = np.empty(reps, dtype=bool)
    a, b, p = pts[0:1], pts[1:2], pts[2:3]
    for k in range(reps):
        pat = sample_pattern(win, rng.child(k).generator())
        out[k] = not any_separator(pat.r, pat.theta, p, a, b)[0]
    return out


def _cell_sample(n: float, stream: RngStream):
    cell = build_cell((0.0, 0.0), (float(n), 0.0), stream)
    up, lo = semi_perimeter_routes(cell)
    disp = max_lateral_displacement(cell)
    return up.excess, lo.excess, disp.u, disp.v


def cell_samples(n: float, reps: int, rng: RngStream, threads: int = 1) -> np.ndarray:
    """Array (reps, 4) of upper excess, lower excess, U_n and V_n for p- = o, p+ = (n, 0)."""
    rows = parallel_map(lambda k: _cell_sample(n, rng.child(k)), range(reps), threads)
    return np.asarray(rows, dtype=float).reshape(-1, 4)
