import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kerrpulse.errors import BesselRangeError
from kerrpulse.special import bessel_j_scaled, complex_bessel_j, gamma, rgamma

# 50-digit reference for J_{1+i}(2), frozen from an arbitrary-precision series
J_1PI_2 = complex("0.874211097673325755849313176815-0.22246979247864997435197362056j")


def test_small_orders():
    assert complex_bessel_j(0, 0) == 1
    assert complex_bessel_j(0, 1).real == pytest.approx(0.7651976866, abs=1e-10)
    assert complex_bessel_j(1, 1).real == pytest.approx(0.4400505857, abs=1e-10)


def test_complex_order_fixture():
    assert abs(complex_bessel_j(1 + 1j, 2) - J_1PI_2) <= 1e-13


@given(st.floats(0.1, 8), st.floats(-4, 4))
def test_gamma_matches_real(x, y):
    z = complex(x, y)
    if y == 0:
        assert gamma(z).real == pytest.approx(math.gamma(x), rel=1e-12)
    # reflection across the real axis
    assert abs(gamma(z.conjugate()) - gamma(z).conjugate()) <= 1e-12 * abs(gamma(z))


def test_gamma_recurrence_and_poles():
    z = 0.3 - 2.1j
    assert abs(gamma(z + 1) - z * gamma(z)) <= 1e-12 * abs(gamma(z + 1))
    assert rgamma(0) == 0 and rgamma(-3) == 0


@given(st.floats(-3, 5), st.floats(-2, 2), st.floats(0, 20))
def test_scaled_series_recurrence(nr, ni, x):
    # J_{v-1}(z) + J_{v+1}(z) = 2 v / z J_v(z) in the scaled form
    nu = complex(nr, ni)
    if min(abs(nu + k - round((nu + k).real)) for k in (0, 1, 2)) < 1e-3:
        return
    z2 = complex(x, 0.0)
    lhs = bessel_j_scaled(nu - 1, z2) + (z2 / 4) * bessel_j_scaled(nu + 1, z2)
    rhs = nu * bessel_j_scaled(nu, z2)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs), abs(bessel_j_scaled(nu - 1, z2)))


def test_vectorized():
    z2 = np.array([0.0, 1.0, 4.0 + 1j])
    out = bessel_j_scaled(0.5 + 0.2j, z2)
    assert out.shape == (3,)
    for v, z in zip(out, z2):
        assert v == pytest.approx(bessel_j_scaled(0.5 + 0.2j, z))


def test_series_range():
    with pytest.raises(BesselRangeError):
        bessel_j_scaled(0.5, 1e6)
