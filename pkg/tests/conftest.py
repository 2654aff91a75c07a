import math
import random

import pytest

from abeluniv import Poly, PrecisionContext


@pytest.fixture
def ctx():
    return PrecisionContext(256)


@pytest.fixture
def rng():
    return random.Random(20240817)


def random_poly(rng, degree, ctx, scale=1.0):
    vals = [complex(rng.uniform(-scale, scale), rng.uniform(-scale, scale))
            for _ in range(degree + 1)]
    if vals[-1] == 0:
        vals[-1] = scale
    return Poly.from_values(vals, ctx)


def unit(theta):
    return complex(math.cos(theta), math.sin(theta))
