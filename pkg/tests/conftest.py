import pytest

from poisson_city.numerics import RngStream


@pytest.fixture
def rng():
    return RngStream(12345, 0)
