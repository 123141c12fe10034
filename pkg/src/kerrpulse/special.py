"""Complex gamma (Lanczos) and complex-order Bessel functions of the first kind."""
from __future__ import annotations

import cmath
import math

import numpy as np

from .errors import BesselRangeError

# Lanczos approximation, g = 7, n = 9
_G = 7.0
_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)

MAX_TERMS = 500
SERIES_RTOL = 1e-16


def _is_nonpositive_integer(z: complex) -> bool:
    return z.imag == 0 and z.real <= 0 and z.real == math.floor(z.real)


def gamma(z: complex) -> complex:
    """Gamma function for complex ``z`` (relative accuracy ~1e-15)."""
    z = complex(z)
    if _is_nonpositive_integer(z):
        raise ZeroDivisionError(f"gamma has a pole at {z.real:g}")
    if z.imag == 0 and z.real < 171:
        return complex(math.gamma(z.real))
    if z.real < 0.5:
        return cmath.pi / (cmath.sin(cmath.pi * z) * gamma(1.0 - z))
    z -= 1.0
    x = _COEFFS[0]
    for i, c in enumerate(_COEFFS[1:], start=1):
        x += c / (z + i)
    t = z + _G + 0.5
    return _SQRT_2PI * cmath.exp((z + 0.5) * cmath.log(t) - t) * x


def rgamma(z: complex) -> complex:
    """``1 / gamma(z)``, zero at the poles."""
    z = complex(z)
    if _is_nonpositive_integer(z):
        return 0j
    return 1.0 / gamma(z)


def bessel_j_scaled(nu: complex, z2):
    """Entire part of ``J_nu``: ``sum_k (-z2/4)^k / (k! Gamma(nu + k + 1))``.

    With ``z2 = z**2`` this equals ``J_nu(z) / (z/2)**nu`` on any branch, so
    it carries no branch cut.  Vectorized over ``z2``.
    """
    nu = complex(nu)
    scalar = np.ndim(z2) == 0
    q = -np.asarray(z2, dtype=complex) / 4.0
    if _is_nonpositive_integer(nu + 1.0):
        # J_{-m} = (-1)^m J_m and (z/2)^{-m} J_m(z) = (z/2)^{-2m} (z/2)^m J_m
        raise BesselRangeError("negative integer orders are not supported by the scaled series")
    term = np.full(q.shape, rgamma(nu + 1.0), dtype=complex)
    total = term.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        total = _sum_series(nu, q, term, total, z2)
    return complex(total) if scalar else total


def _sum_series(nu, q, term, total, z2):
    for k in range(1, MAX_TERMS + 1):
        term = term * q / (k * (nu + k))
        total += term
        if not np.all(np.isfinite(total)):
            raise BesselRangeError(
                f"Bessel series overflowed (max |z|^2 = {float(np.max(np.abs(z2))):.3g})")
        if np.all(np.abs(term) <= SERIES_RTOL * np.abs(total)):
            break
    else:
        raise BesselRangeError(
            f"Bessel series did not converge in {MAX_TERMS} terms "
            f"(max |z|^2 = {float(np.max(np.abs(z2))):.3g})"
        )
    return total


def complex_bessel_j(nu: complex, z):
    """``J_nu(z)`` for complex order and argument, principal branch of ``(z/2)**nu``."""
    nu = complex(nu)
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=complex)
    series = bessel_j_scaled(nu, z * z)
    half = z / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        power = np.where(half == 0, 1.0 if nu == 0 else 0.0, np.power(half, nu))
    if nu.real < 0 and np.any(half == 0):
        raise BesselRangeError("J_nu(0) diverges for Re(nu) < 0")
    out = power * series
    return complex(out) if scalar else out
