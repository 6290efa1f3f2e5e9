import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from poisson_city.numerics import (
    DomainError,
    QuadratureFailure,
    QuadratureSpec,
    RngStream,
    birnbaum_lower,
    integrate,
    ks_statistic,
    ks_test,
    linear_fit,
    log_choose,
    log_factorial_table,
    mean_and_se,
    mills_bounds,
    mills_ratio,
    parallel_map,
    quad_value,
    sampford_upper,
)


def test_quad_infinite_interval_is_mapped():
    assert quad_value(lambda s: math.exp(-s), 0.0, math.inf, rel_tol=1e-12) == pytest.approx(1.0, abs=1e-10)
    assert quad_value(lambda s: math.exp(s), -math.inf, 0.0, rel_tol=1e-12) == pytest.approx(1.0, abs=1e-10)


def test_quad_sqrt_endpoint():
    assert quad_value(lambda x: x**-0.5, 0.0, 1.0, mapping="sqrt_left") == pytest.approx(2.0, abs=1e-10)
    assert quad_value(lambda x: (1 - x) ** -0.5, 0.0, 1.0, mapping="sqrt_right") == pytest.approx(2.0, abs=1e-10)


def test_quad_reversed_and_empty():
    assert integrate(math.sin, 1.0, 1.0).value == 0.0
    assert quad_value(lambda x: x, 1.0, 0.0) == pytest.approx(-0.5)


def test_quad_failure_is_raised():
    with pytest.raises(QuadratureFailure):
        integrate(lambda x: math.sin(1 / x) / x**2, 1e-6, 1.0, QuadratureSpec(rel_tol=1e-14, abs_tol=1e-14, max_depth=5))


def test_quad_whole_line_refused():
    with pytest.raises(DomainError):
        quad_value(lambda x: math.exp(-x * x), -math.inf, math.inf)


def test_log_choose_big_integer_oracle():
    ref = math.log(math.comb(600, 300))  # math.log is exact-rounded on big integers
    assert abs(math.expm1(log_choose(600, 300) - ref)) < 1e-10


@given(st.integers(0, 200), st.data())
def test_log_choose_matches_comb(n, data):
    k = data.draw(st.integers(0, n))
    assert log_choose(n, k) == pytest.approx(math.log(math.comb(n, k)), abs=1e-9, rel=1e-12)


def test_log_choose_domain():
    with pytest.raises(DomainError):
        log_choose(3, 4)


def test_log_factorial_table():
    t = log_factorial_table(30)
    assert t[0] == 0.0
    assert np.allclose(t, [math.lgamma(j + 1) for j in range(31)])


def test_mills_examples():
    b = mills_bounds(0.0)
    assert b.exact == pytest.approx(math.sqrt(math.pi / 2), abs=1e-10)
    assert b.upper == pytest.approx(4 / math.sqrt(8))
    assert sampford_upper(10.0) / mills_ratio(10.0) == pytest.approx(1.0, rel=0.01)


@given(st.floats(0.0, 50.0))
def test_mills_bracket(p):
    b = mills_bounds(p)
    assert b.lower <= b.exact <= b.upper


def test_mills_large_p_stays_finite():
    assert mills_ratio(40.0) == pytest.approx(1 / 40.0, rel=1e-3)


def test_bound_domains():
    with pytest.raises(DomainError):
        sampford_upper(-2.0)
    with pytest.raises(DomainError):
        birnbaum_lower(-0.1)


def test_ks_statistic_by_hand():
    # empirical CDF of {0.1, 0.5, 0.6} against U[0,1]: gaps 1/3-0.1, 2/3-0.5, 1-0.6, 0.5-1/3
    d = ks_statistic([0.5, 0.1, 0.6], lambda x: x)
    assert d == pytest.approx(0.4)


def test_ks_test_minimum_sample():
    with pytest.raises(ValueError):
        ks_test(np.linspace(0, 1, 10), lambda x: x)


def test_ks_test_uniform(rng):
    x = rng.generator().random(2000)
    assert ks_test(x, lambda t: np.clip(t, 0, 1)).p_value > 0.001


def test_linear_fit_exact_line():
    f = linear_fit([0, 1, 2, 3], [1, 3, 5, 7])
    assert f.slope == pytest.approx(2.0)
    assert f.intercept == pytest.approx(1.0)


def test_mean_and_se():
    m, se = mean_and_se([1.0, 2.0, 3.0])
    assert m == 2.0 and se == pytest.approx(1 / math.sqrt(3))
    assert mean_and_se([4.0])[1] == math.inf


def test_rng_stream_reproducible_and_distinct():
    a = RngStream(7, 3).generator().random(5)
    b = RngStream(7, 3).generator().random(5)
    c = RngStream(7, 4).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RngStream(7, 3).child(2).record == RngStream(7, 3).child(2).record
    assert RngStream(7, 3).child(2).record != RngStream(7, 3).child(1).record


def test_rng_streams_uncorrelated():
    a = RngStream(1, 0).generator().random(20000)
    b = RngStream(1, 1).generator().random(20000)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.03


def test_parallel_map_preserves_order():
    assert parallel_map(lambda k: k * k, range(20), threads=4) == [k * k for k in range(20)]
