import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poisson_city import flow
from poisson_city.flow import LimitPair
from poisson_city.lines import sample_improper_strip
from poisson_city.numerics import RngStream, linear_fit, quad_value

pos = st.floats(0.05, 1.0)
ht = st.floats(0.05, 5.0)


def test_pair_probability_examples():
    assert flow.limit_pair_probability(LimitPair(1, 1, 1, 1)) == pytest.approx(math.exp(-0.5))
    t, a, u = 1.7, 0.3, 0.8
    assert flow.limit_pair_probability(LimitPair(a, t, u, t)) == pytest.approx(math.exp(-(t * t / 4) * (1 / a + 1 / u)))
    with pytest.raises(ValueError):
        LimitPair(0.0, 1, 1, 1)


@given(pos, ht, pos, ht, st.floats(-3, 3))
def test_shear_keeps_crossing_height(a, b, u, v, lam):
    p = LimitPair(a, b, u, v)
    c = 0.1
    b2, v2 = b + lam * a * c, v - lam * u * c
    if b2 > 0 and v2 > 0:
        q = LimitPair(a, b2, u, v2)
        assert q.crossing_height == pytest.approx(p.crossing_height)
        assert flow.limit_pair_probability(q) == pytest.approx(flow.limit_pair_probability(p))


@settings(max_examples=60, deadline=None)
@given(pos, ht, pos, ht)
def test_separating_measure_is_quarter_area(a, b, u, v):
    pr = LimitPair(a, b, u, v)
    assert 0.25 * flow.separator_region(pr, big=1e4) == pytest.approx(flow.separating_measure(pr), rel=1e-6)
    assert flow.separator_region(pr, box=1.0) <= flow.separator_region(pr, box=2.0) + 1e-12


def test_pair_acceptance_matches_formula(rng):
    pairs = [LimitPair(0.5, 1.0, 0.5, 1.0), LimitPair(0.2, 0.5, 0.9, 1.5), LimitPair(1.0, 2.0, 0.3, 0.4),
             LimitPair(0.7, 0.2, 0.6, 0.3), LimitPair(0.1, 1.2, 0.1, 1.1)]
    P = np.array([pr.p for pr in pairs])
    Q = np.array([pr.q for pr in pairs])
    hits = np.zeros(len(pairs))
    reps = 4000
    for k in range(reps):
        s = sample_improper_strip(-12.0, 12.0, rng.child(k))
        hits += flow._strip_indicator(s, P, Q)
    for h, pr in zip(hits, pairs):
        p = flow.limit_pair_probability(pr)
        se = math.sqrt(p * (1 - p) / reps)
        assert abs(h / reps - p) < 3 * se + 1e-3


def test_limit_mean():
    assert flow.limit_mean_quadrature() == pytest.approx(2.0, abs=1e-4)
    assert flow.limit_mean_closed_form() == pytest.approx(2.0, abs=1e-10)
    # inner t-integral is 2(a + u)
    a, u = 0.3, 0.6
    c = 1 / a + 1 / u
    inner = quad_value(lambda t: (a + u) * c * math.exp(-t * t * c / 4) * t, 0, math.inf, rel_tol=1e-12)
    assert inner == pytest.approx(2 * (a + u))


def test_height_window_mass_increases_to_two():
    m = [flow.height_window_mass(h) for h in (1.0, 3.0, 6.0)]
    assert m[0] < m[1] < m[2] < 2.0
    assert 2.0 - m[2] < 0.05


def test_limit_flow_small(rng):
    est = flow.simulate_limit_flow(4.0, 32.0, 800, rng, realizations=30, bias_pairs=300)
    assert est.value > 0 and est.std_error >= 0 and est.bias_bound >= 0
    assert abs(est.value - 2.0) < 3 * est.std_error + est.bias_bound + 0.3
    assert math.isinf(est.n)
    ratio, p = flow.nondegeneracy_test(est)
    assert ratio > 0 and 0 <= p <= 1


def test_nondegeneracy_test_on_synthetic():
    g = np.random.default_rng(0)
    flat = flow.FlowEstimate(1.0, 0.0, 1.0, 100, 10, replicate_values=tuple(1 + 0.1 * g.standard_normal(100)), noise_variance=0.01)
    spread = flow.FlowEstimate(1.0, 0.0, 1.0, 100, 10, replicate_values=tuple(1 + 0.5 * g.standard_normal(100)), noise_variance=0.01)
    assert flow.nondegeneracy_test(flat)[1] > 0.01
    assert flow.nondegeneracy_test(spread)[1] < 1e-6


def test_s3_moment_series_and_gamma_agree():
    for k in (0.0, 1e-4, 9.99e-4, 1e-3, 0.5, 20.0):
        direct = quad_value(lambda s: s**3 * math.exp(-k * s), 0, 1, rel_tol=1e-12)
        assert flow._s3_moment(k) == pytest.approx(direct, rel=1e-10)


def test_gap_without_cancellation():
    for rho, th in ((0.5, 1e-8), (1.0, 2.0), (3.0, math.pi)):
        naive = rho + 1 - math.sqrt(rho * rho + 1 + 2 * rho * math.cos(th))
        assert flow._gap(rho, th) == pytest.approx(naive, rel=1e-6, abs=1e-15)


def test_mean_flow_quadrature_against_nested_mc():
    n = 40.0
    q = flow.mean_flow_quadrature(n) / n**3
    est = flow.simulate_center_flow(n, 60, 2000, RngStream(3, 3))
    assert abs(est.value - q) < 3 * est.std_error
    assert flow.mean_flow_quadrature(0.0) == 0.0


def test_mean_flow_quadrature_tends_to_two():
    v = [flow.mean_flow_quadrature(n) / n**3 for n in (100.0, 1000.0, 10_000.0)]
    assert abs(v[2] - 2) < abs(v[0] - 2)
    assert 1.9 <= v[1] <= 2.1


def test_centre_indicator_by_hand():
    # one vertical line x = 1 separates o from a segment entirely right of it
    r, th = np.array([-1.0]), np.array([math.pi / 2])
    pm = np.array([[2.0, 1.0], [-2.0, 1.0], [2.0, 1.0]])
    pp = np.array([[3.0, 2.0], [3.0, 2.0], [3.0, -2.0]])
    assert list(flow.centre_indicator(r, th, pm, pp)) == [False, True, False]


def test_flow_csv_and_json(rng):
    est = flow.simulate_center_flow(20.0, 3, 50, rng)
    text = flow.estimates_to_csv([est])
    assert text.splitlines()[0] == "n,estimate,std_error,outer,inner,seed"
    assert json.loads(flow.summary_json("centre", {"n": 20}, est.value, True))["tolerance_check"] == "pass"
    assert est.replicate_variance >= 0
    with pytest.raises(ValueError):
        flow.simulate_center_flow(20.0, 0, 10, rng)


def test_disk_report():
    r = flow.disk_average_report(1.0)
    assert r.network_length == math.pi**2 / 2
    assert r.mean_distance == pytest.approx(0.90541, abs=1e-5)
    assert flow.disk_average_report(3.0).flow_per_unit_length == pytest.approx(27 * r.flow_per_unit_length)


def test_disk_distance_mc(rng):
    m, se = flow.mc_mean_disk_distance(200_000, rng)
    assert abs(m - flow.MEAN_DISK_DISTANCE) < 3 * se


def test_lower_bound():
    assert flow.lower_bound_constant() == pytest.approx(math.log(4) - 1.25, abs=1e-6)
    c = flow.lower_bound_curve([10.0, 100.0, 1000.0])
    assert c[0] < c[1] < c[2]
    assert c[1] == pytest.approx(flow.excess_lower_bound(100.0), rel=1e-4)
    with pytest.raises(ValueError):
        flow.excess_lower_bound(1.0)


def test_lower_bound_density_tail():
    # x * density tends to the slope constant; the exact large-x limit is (pi - 2)/8
    xs = [1e3, 1e4, 1e5]
    vals = [x * flow.lower_bound_density(x) for x in xs]
    assert vals[-1] == pytest.approx((math.pi - 2) / 8, rel=0.02)
    assert linear_fit(np.log(xs), flow.lower_bound_curve(xs)).slope == pytest.approx((math.pi - 2) / 8, rel=0.03)
