import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poisson_city.experiments import cell_samples, no_separator_frequency
from poisson_city.geometry import Line, polygon_stats
from poisson_city.lines import DiskWindow, LinePattern
from poisson_city.numerics import DomainError, RngStream, mean_and_se, quad_value
from poisson_city.routes import (
    DegenerateCell,
    UnboundedAtMaxWindow,
    WindowPolicy,
    build_cell,
    cell_from_pattern,
    lateral_limit_density,
    max_lateral_displacement,
    routes_to_csv,
    semi_perimeter_routes,
    separation_probability,
)


def _pattern(lines, center, radius):
    r = np.array([ln.r for ln in lines])
    t = np.array([ln.theta for ln in lines])
    return LinePattern(r, t, DiskWindow(center, radius))


def _box_lines(x0, x1, y0, y1):
    return [Line.through((0, y1), 0.0), Line.through((0, y0), 0.0), Line.through((x0, 0), math.pi / 2), Line.through((x1, 0), math.pi / 2)]


def test_quadrilateral_fixture():
    lines = [Line.from_points((-1, -2), (-2, 2)), Line.from_points((-2, 2), (6, 3)), Line.from_points((6, 3), (7, -1)), Line.from_points((7, -1), (-1, -2))]
    cell = cell_from_pattern((0, 0), (5, 0), _pattern(lines, (2.5, 0), 20.0))
    assert cell.bounded
    assert len(cell.polygon.vertices) == 4
    got = sorted((round(v.x, 9), round(v.y, 9)) for v in cell.polygon.vertices)
    assert got == sorted([(-1.0, -2.0), (-2.0, 2.0), (6.0, 3.0), (7.0, -1.0)])


def test_separating_lines_are_dropped():
    lines = _box_lines(-1, 11, -1, 1) + [Line.through((5, 0), math.pi / 2)]
    cell = cell_from_pattern((0, 0), (10, 0), _pattern(lines, (5, 0), 20.0))
    assert polygon_stats(cell.polygon).area == pytest.approx(24.0)


@pytest.mark.parametrize("n", [1.0, 10.0, 100.0])
def test_square_fixture_routes(n):
    cell = cell_from_pattern((0, 0), (n, 0), _pattern(_box_lines(-1, n + 1, -1, 1), (n / 2, 0), n + 5))
    up, lo = semi_perimeter_routes(cell)
    # back 1, up 1, across n+2, down 1, back 1
    assert up.excess == pytest.approx(6.0)
    assert lo.excess == pytest.approx(6.0)
    assert up.polyline[0] == (0, 0) and up.polyline[-1] == (n, 0)
    d = max_lateral_displacement(cell)
    assert d.u == pytest.approx(-1 / n)
    assert d.v == pytest.approx(1 / math.sqrt(n))


def test_cell_outside_window_is_not_bounded():
    cell = cell_from_pattern((0, 0), (10, 0), _pattern(_box_lines(-1, 11, -1, 1), (5, 0), 3.0))
    assert not cell.bounded
    with pytest.raises(DegenerateCell):
        semi_perimeter_routes(cell)


def test_unbounded_after_max_doublings():
    empty = LinePattern(np.zeros(0), np.zeros(0), DiskWindow((5, 0), 6.0))
    with pytest.raises(UnboundedAtMaxWindow):
        build_cell((0, 0), (10, 0), RngStream(1, 1), WindowPolicy(max_doublings=0), pattern=empty)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.floats(1.0, 300.0))
def test_route_invariants(seed, n):
    cell = build_cell((0, 0), (n, 0), RngStream(seed, 2))
    assert cell.bounded
    for rt in semi_perimeter_routes(cell):
        assert rt.length >= n - 1e-9
        assert rt.excess >= -1e-9
        assert rt.polyline[0] == (0, 0) and rt.polyline[-1] == (n, 0)
    assert "ray_forward" in routes_to_csv(cell)
    # the segment lies inside the polygon
    v = cell.polygon.as_array()
    for p in ((0.0, 0.0), (n, 0.0), (n / 2, 0.0)):
        e = np.roll(v, -1, axis=0) - v
        cross = e[:, 0] * (p[1] - v[:, 1]) - e[:, 1] * (p[0] - v[:, 0])
        assert np.all(cross >= -1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(0, 2 * math.pi), st.floats(-50, 50), st.floats(-50, 50))
def test_excess_invariant_under_rigid_motion(seed, phi, tx, ty):
    n = 40.0
    cell = build_cell((0, 0), (n, 0), RngStream(seed, 3))
    base = [rt.excess for rt in semi_perimeter_routes(cell)]

    def move(p):
        return (p[0] * math.cos(phi) - p[1] * math.sin(phi) + tx, p[0] * math.sin(phi) + p[1] * math.cos(phi) + ty)

    lines = [Line.from_points(move(a), move(b)) for a, b in _edge_points(cell)]
    pm, pp = move((0, 0)), move((n, 0))
    moved = cell_from_pattern(pm, pp, _pattern(lines, move((n / 2, 0)), cell.generating_window_radius))
    got = [rt.excess for rt in semi_perimeter_routes(moved)]
    assert got == pytest.approx(base, abs=1e-6)


def _edge_points(cell):
    v = cell.polygon.vertices
    return [(v[k], v[(k + 1) % len(v)]) for k in range(len(v))]


def test_lateral_density_mass_and_moment():
    for u in (0.1, 0.5, 0.9):
        assert quad_value(lambda v: lateral_limit_density(u, v), 0, math.inf, rel_tol=1e-10) == pytest.approx(1.0, abs=1e-8)
        m2 = quad_value(lambda v: v * v * lateral_limit_density(u, v), 0, math.inf, rel_tol=1e-10)
        assert m2 == pytest.approx(8 * u * (1 - u), rel=1e-8)
    with pytest.raises(DomainError):
        lateral_limit_density(0.0, 1.0)


def test_separation_probability_examples():
    assert separation_probability((1, 0), (0, 1), (0, 0)) == pytest.approx(math.exp(-(2 - math.sqrt(2)) / 2))
    assert separation_probability((1, 0), (1, 0.0 + 1e-300), (0, 0)) == pytest.approx(math.exp(-1))
    with pytest.raises(ValueError):
        separation_probability((0, 0), (1, 0), (0, 0))


def test_separation_probability_mc(rng):
    f = no_separator_frequency((1, 0), (0, 1), (0, 0), 6000, rng)
    m, se = mean_and_se(f)
    assert abs(m - 0.74575) < 3 * se + 1e-5


@pytest.mark.slow
def test_lateral_displacement_rough_law():
    a = cell_samples(300.0, 300, RngStream(9, 9))
    u, v = a[:, 2], a[:, 3]
    assert 0.4 < u.mean() < 0.6
    assert np.all(v > 0)
    assert 0.9 < np.mean(v**2) < 1.8  # limit E[V^2] = 4/3
