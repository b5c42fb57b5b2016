import math

import numpy as np
import pytest

from mimocap.errors import DimensionMismatchError
from mimocap.identities import (cauchy_binet_check, cauchy_binet_lhs, cauchy_binet_rhs,
                                random_polynomial_instance)

SHAPES = [(m, n) for n in range(1, 5) for m in range(1, min(n, 3) + 1)]


@pytest.mark.parametrize("m,n", SHAPES)
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_polynomial_instances(m, n, seed):
    f, g, c, h = random_polynomial_instance(m, n, np.random.default_rng(100 * m + 10 * n + seed))
    lhs, rhs, rel = cauchy_binet_check(f, g, c, h, nodes=8)
    assert rel < 1e-6, (lhs, rhs)


def test_square_case_on_half_line():
    # m = n = 2 with exponential weight: f = g = (1, r), h = exp(-r)
    f = [lambda r: 1.0, lambda r: r]
    h = lambda r: math.exp(-r)
    # Phi = [[1, 1], [1, 2]] (moments of Exp(1)), so 2! det Phi = 2
    assert cauchy_binet_rhs(f, f, None, h, domain=(0.0, 60.0)) == pytest.approx(2.0, rel=1e-12)
    assert cauchy_binet_lhs(f, f, None, h, domain=(0.0, 60.0), nodes=60) == pytest.approx(2.0, rel=1e-6)


def test_constant_rows_enter_determinant():
    # m = 1, n = 2: only the constant top row and one sampled row
    f = [lambda r: 1.0]
    g = [lambda r: 1.0, lambda r: r]
    c = [[0.0, 1.0]]
    # Phi = [[0, 1], [1, 1/2]] on [0, 1] -> det = -1
    assert cauchy_binet_rhs(f, g, c, lambda r: 1.0) == pytest.approx(-1.0, rel=1e-13)


def test_shape_checks():
    f = [lambda r: 1.0] * 3
    g = [lambda r: 1.0] * 2
    with pytest.raises(DimensionMismatchError):
        cauchy_binet_rhs(f, g, None, lambda r: 1.0)
    with pytest.raises(DimensionMismatchError):
        cauchy_binet_rhs(g[:1], g, np.zeros((2, 2)), lambda r: 1.0)
