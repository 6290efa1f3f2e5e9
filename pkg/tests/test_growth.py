import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poisson_city import growth
from poisson_city.numerics import DomainError, RngStream, ks_2sample, ks_test, linear_fit, mean_and_se, quad_value


def test_jump_by_hand():
    d = growth.theta_jump_size(math.pi / 2, 0.5)
    assert d == pytest.approx(math.pi / 3)
    assert math.pi / 2 - d == pytest.approx(math.pi / 6)


@given(st.floats(1e-6, math.pi), st.floats(0.0, 1.0))
def test_jump_never_overshoots(theta, v):
    d = float(growth.theta_jump_size(theta, v))
    assert 0.0 <= d <= theta + 1e-15
    # inverse of the CDF
    assert float(growth.jump_cdf(d, theta)) == pytest.approx(v, abs=1e-9)


def test_jump_distribution_from_pi(rng):
    g = rng.generator()
    d = np.array([math.pi - growth.sample_theta_jump(math.pi, g) for _ in range(3000)])
    assert ks_test(d, lambda x: (1 - np.cos(np.clip(x, 0, math.pi))) / 2).p_value > 0.001
    with pytest.raises(DomainError):
        growth.sample_theta_jump(0.0, g)


def test_rates_match_direct_forms():
    th = np.linspace(0.1, 3.0, 20)
    assert np.allclose(growth.progress_rate(th), np.cos(th) / (1 - np.cos(th)))
    assert np.allclose(growth.height_rate(th), np.sin(th) / (1 - np.cos(th)))


def test_reduced_start_density(rng):
    th = growth.initial_angle("theta0_cosine", rng.generator(), 5000)
    assert ks_test(th, lambda x: np.sin(np.clip(x, 0, math.pi / 2))).p_value > 0.001
    assert growth.initial_angle("theta0_pi", rng) == math.pi
    with pytest.raises(ValueError):
        growth.initial_angle("nope", rng)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(1.0, 200.0), st.sampled_from(["theta0_cosine", "theta0_pi"]))
def test_path_invariants(seed, n, init):
    p = growth.simulate_growth(n, init, RngStream(seed, 1))
    ev = p.events
    assert p.sigma == pytest.approx(ev[-1].t)
    assert ev[-1].x == pytest.approx(n)
    ts = [e.t for e in ev]
    assert all(a <= b for a, b in zip(ts, ts[1:]))
    th = [e.theta for e in ev]
    assert all(a >= b for a, b in zip(th, th[1:]))
    for e in ev:
        assert e.s == pytest.approx(e.t + e.x)
    assert p.to_csv().splitlines()[0] == "t,theta,x,h"


def test_path_horizon():
    with pytest.raises(growth.HorizonExceeded):
        growth.simulate_growth(1e6, "theta0_pi", RngStream(1, 1), max_jumps=3)
    with pytest.raises(DomainError):
        growth.simulate_growth(0.0)


def test_vectorised_sigma_matches_single_paths(rng):
    a = growth.sample_sigma(50.0, 3000, "theta0_cosine", rng.child(0))
    b = [growth.simulate_growth(50.0, "theta0_cosine", rng.child(k + 1)).sigma for k in range(600)]
    assert ks_2sample(a, b).p_value > 0.001


def test_excess_time_and_arc_length_agree(rng):
    th1, t1 = growth.jumps_in_excess_time(5, 4000, "theta0_pi", rng.child(0))
    th2, t2 = growth.jumps_in_arc_length(5, 4000, "theta0_pi", rng.child(1))
    for j in (0, 4):
        assert ks_2sample(th1[j], th2[j]).p_value > 0.001
        assert ks_2sample(t1[j], t2[j]).p_value > 0.001


def test_sigma_mean_slope_rough(rng):
    ns = [2**k for k in range(6, 11)]
    means = [growth.sample_sigma(n, 3000, "theta0_cosine", rng.child(n)).mean() for n in ns]
    assert linear_fit(np.log(ns), means).slope == pytest.approx(2 / 3, rel=0.2)


def test_initial_segment(rng):
    m = growth.initial_segment_moments()
    assert m.mean == pytest.approx(8 * (1 + math.pi / (3 * math.sqrt(3))))
    assert m.mean == pytest.approx(12.8368, abs=1e-4)
    x = growth.sample_initial_segment(400_000, rng)
    mm, se = mean_and_se(x)
    assert abs(mm - m.mean) < 3 * se
    assert abs(np.mean(x * x) - m.second) < 4 * np.std(x * x) / math.sqrt(len(x))


def test_xi_jump_moments(rng):
    y = growth.xi_jump(rng.generator().exponential(1.0, 200_000))
    m, se = mean_and_se(y)
    assert abs(m - 1.5) < 3 * se
    assert np.var(y) == pytest.approx(1.25, rel=0.03)
    assert np.mean(y * y) == pytest.approx(growth.XI_JUMP_SECOND_MOMENT, rel=0.03)
    # same law as the maximum of two unit exponentials
    e = rng.child(1).generator().exponential(1.0, (2, 5000)).max(axis=0)
    assert ks_2sample(y[:5000], e).p_value > 0.001


@given(st.floats(1e-300, 700.0))
def test_coupling(J):
    assert 0 < growth.eta_jump(J) <= growth.xi_jump(J)


def test_laplace_exponent():
    assert growth.laplace_exponent(1.0) == pytest.approx(1 / 3)
    h = 1e-6
    assert (growth.laplace_exponent(h) - growth.laplace_exponent(0.0)) / h == pytest.approx(growth.MARTINGALE_DRIFT, rel=1e-5)
    # Levy-Khintchine with the jump law: rate 1/2 times E[1 - exp(-q Y)]
    for q in (0.5, 1.0, 2.0):
        lk = 0.5 * quad_value(lambda J: math.exp(-J) * (1 - math.exp(-q * float(growth.xi_jump(J)))), 0, math.inf, rel_tol=1e-12)
        assert lk == pytest.approx(growth.laplace_exponent(q), rel=1e-9)


def test_martingale_variance_is_seven_quarters_t(rng):
    # Var M_t = rate * E[Y^2] * t = (1/2)(7/2) t
    t = 6.0
    p = growth.JUMP_RATE * t
    g = rng.generator()
    counts = g.poisson(p, 100_000)
    J = g.exponential(1.0, counts.sum())
    y = growth.xi_jump(J)
    xi = np.bincount(np.repeat(np.arange(len(counts)), counts), weights=y, minlength=len(counts))
    M = xi - growth.MARTINGALE_DRIFT * t
    v = float(np.var(M))
    assert v == pytest.approx(1.75 * t, rel=0.03)
    assert abs(v - 0.625 * t) > 0.5 * t


def test_subordinator_path(rng):
    p = growth.simulate_subordinators(rng, t_max=30.0)
    assert np.all(np.diff(p.jump_times) > 0)
    assert np.all(p.xi_jumps > 0) and np.all(p.eta_jumps <= p.xi_jumps)
    assert p.martingale(10.0) == pytest.approx(p.xi(10.0) - 7.5)
    # piecewise-constant integrand summed by hand
    t = 20.0
    knots = [0.0, *[float(x) for x in p.jump_times if x < t], t]
    by_hand = math.fsum(math.exp(2 * p.xi(a)) * (b - a) for a, b in zip(knots, knots[1:]))
    assert p.integral(t) == pytest.approx(by_hand, rel=1e-12)
    with pytest.raises(growth.HorizonExceeded):
        p.xi(31.0)
    assert p.to_csv().startswith("t,J,xi,eta\n")
    with pytest.raises(ValueError):
        growth.simulate_subordinators(rng)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(1.0, 1e4))
def test_tau_identities(seed, n):
    p = growth.simulate_subordinators(RngStream(seed, 8), integral_target=n)
    tau, rep = growth.tau_representation(p, n)
    assert abs(tau - rep) <= 1e-9 * max(1.0, abs(tau))
    assert tau <= n + 1e-9
    assert p.integral(tau) == pytest.approx(n, rel=1e-9)


def test_tau_mean_slope(rng):
    ns = [10.0, 100.0, 1000.0, 10_000.0]
    means = [growth.sample_tau(n, 4000, rng.child(int(n)))[0].mean() for n in ns]
    assert linear_fit(np.log(ns), means).slope == pytest.approx(2 / 3, rel=0.15)


def test_lamperti_inverse_moment(rng):
    assert growth.lamperti_inverse_moment_formula(1.0) == pytest.approx(2 / 3)
    r = growth.lamperti_inverse_moment(5.0, 40_000, rng)
    assert abs(r.mc_estimate - r.formula) < 3 * r.std_error
    with pytest.raises(DomainError):
        growth.lamperti_inverse_moment(0.5)


def test_printed_higher_moment_disagrees_with_simulation(rng):
    # at p = 1 the closed form goes negative while the simulated moment is near 0.88
    m, se = growth.higher_moment_mc(5.0, 1.0, 20_000, rng)
    assert growth.printed_higher_moment(5.0, 1.0) < 0 < m
    assert m == pytest.approx(growth.lamperti_inverse_moment_formula(5.0), abs=4 * se)


def test_multiplier():
    assert growth.multiplier_mass() == pytest.approx(1.0, abs=1e-10)
    assert growth.multiplier_mean() == pytest.approx(growth.multiplier_mean("closed_form"), abs=1e-12)
    assert growth.multiplier_mean() == pytest.approx(0.21787, abs=1e-5)
    assert quad_value(lambda x: float(growth.multiplier_density(x)), 0, 1, mapping="sqrt_left", rel_tol=1e-10) == pytest.approx(1.0, abs=1e-8)


def test_multiplier_sampler(rng):
    m = growth.sample_multiplier(rng.generator(), 5000)
    cdf = lambda x: np.clip(1 - (1 - np.sqrt(np.clip(x, 0, 1))) ** (math.pi / 2), 0, 1)
    assert ks_test(m, cdf).p_value > 0.001


def test_perpetuity(rng):
    exact = growth.perpetuity()
    assert exact.value == pytest.approx(1 / (1 - growth.multiplier_mean()))
    est = growth.perpetuity(rng, samples=50_000)
    assert est.value >= 1.0
    assert abs(est.value - exact.value) < 3 * est.std_error + est.tail_bound
