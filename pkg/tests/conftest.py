import math

import pytest

from waveequiv.expr import derivative_table


@pytest.fixture
def square():
    """m(u) = u^2 with exact derivatives."""
    return derivative_table(lambda z: z * z, lambda z: 2 * z, lambda z: 2.0, lambda z: 0.0)


@pytest.fixture
def identity_fn():
    return derivative_table(lambda z: z, lambda z: 1.0, lambda z: 0.0, lambda z: 0.0)


@pytest.fixture
def sin_fn():
    return derivative_table(math.sin, math.cos, lambda z: -math.sin(z), lambda z: -math.cos(z))
