import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, special

from kerrpulse.errors import DimensionMismatchError, UndefinedParameterError
from kerrpulse.hilbert import coherent_ket, density_from_ket, fock_ket, ket_from_amplitudes, thermal_density
from kerrpulse.model import ModelParams, PulseTrain
from kerrpulse.observe import (SteadyWignerParams, WignerGrid, fidelity, grid_axes, integrate_grid,
                               mean_excitation, negativity_volume, populations, steady_wigner_unnormalized,
                               wigner_analytic_steady, wigner_kernel, wigner_numeric)
from kerrpulse.special import complex_bessel_j

XS, YS = grid_axes(4.0, 201)
R2 = XS[:, None] ** 2 + YS[None, :] ** 2


def test_populations_and_mean():
    rho = density_from_ket(fock_ket(1, 6))
    np.testing.assert_array_equal(populations(rho), [0, 1, 0, 0, 0, 0])
    assert mean_excitation(density_from_ket(fock_ket(0, 6))) == 0
    assert mean_excitation(thermal_density(1.0, 80)) == pytest.approx(1.0, abs=1e-12)


def test_fidelity_examples():
    target = ket_from_amplitudes([1, -1], 5)
    assert fidelity(density_from_ket(target), target) == pytest.approx(1.0)
    assert fidelity(density_from_ket(fock_ket(0, 5)), target) == pytest.approx(0.5)
    with pytest.raises(DimensionMismatchError):
        fidelity(np.eye(3) / 3, fock_ket(0, 4))


@given(st.floats(0, 1), st.integers(0, 2**32 - 1))
def test_fidelity_linear_under_mixing(p, seed):
    rng = np.random.default_rng(seed)
    target = ket_from_amplitudes(rng.normal(size=4) + 1j * rng.normal(size=4), 6)
    r1 = density_from_ket(ket_from_amplitudes(rng.normal(size=6) + 0j))
    r2 = density_from_ket(ket_from_amplitudes(rng.normal(size=6) + 1j * rng.normal(size=6)))
    mixed = fidelity(p * r1 + (1 - p) * r2, target)
    assert mixed == pytest.approx(p * fidelity(r1, target) + (1 - p) * fidelity(r2, target), abs=1e-12)


def test_kernel_examples():
    assert wigner_kernel(0, 0, 0) == pytest.approx(2 / math.pi)
    assert wigner_kernel(1, 1, 0) == pytest.approx(-2 / math.pi)
    assert abs(wigner_kernel(1, 1, 0.5)) < 1e-15
    assert abs(wigner_kernel(1, 1, 0.5j * np.exp(0.3j))) < 1e-15


def test_vacuum_and_one_photon_closed_forms():
    w0 = wigner_numeric(density_from_ket(fock_ket(0, 10)), XS, YS)
    np.testing.assert_allclose(w0.values, 2 / math.pi * np.exp(-2 * R2), atol=1e-8, rtol=0)
    assert w0.norm_integral == pytest.approx(1.0, abs=1e-6)
    w1 = wigner_numeric(density_from_ket(fock_ket(1, 10)), XS, YS)
    np.testing.assert_allclose(w1.values, 2 / math.pi * (4 * R2 - 1) * np.exp(-2 * R2), atol=1e-8, rtol=0)
    # negative disk of radius 1/2
    inside = R2 < 0.24
    outside = R2 > 0.26
    assert np.all(w1.values[inside] < 0) and np.all(w1.values[outside] >= -1e-15)


def test_superposition_matches_hand_sum():
    psi = ket_from_amplitudes([1, -1], 4)
    w = wigner_numeric(density_from_ket(psi), XS, YS)
    a = XS[:, None] + 1j * YS[None, :]
    # rho = |psi><psi| with rho00 = rho11 = 1/2, rho01 = rho10 = -1/2
    by_hand = 0.5 * (wigner_kernel(0, 0, a) + wigner_kernel(1, 1, a)
                     - wigner_kernel(1, 0, a) - wigner_kernel(0, 1, a))
    np.testing.assert_allclose(w.values, by_hand.real, atol=1e-12)
    # fringe asymmetry: lobes sit on the x axis, not mirrored in x
    assert not np.allclose(w.values, w.values[::-1, :], atol=1e-3)
    np.testing.assert_allclose(w.values, w.values[:, ::-1], atol=1e-12)


def test_coherent_state_is_displaced_gaussian():
    beta = 0.7 - 0.4j
    w = wigner_numeric(density_from_ket(coherent_ket(beta, 40)), XS, YS)
    a = XS[:, None] + 1j * YS[None, :]
    np.testing.assert_allclose(w.values, 2 / math.pi * np.exp(-2 * np.abs(a - beta) ** 2), atol=1e-10)


def _random_density(seed, dim, scale=0.6):
    rng = np.random.default_rng(seed)
    g = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) * scale ** np.arange(dim)[:, None]
    rho = g @ g.conj().T
    return rho / np.trace(rho)


@given(st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1), st.floats(-3, 3))
def test_linear_and_real(s1, s2, c):
    xs, ys = grid_axes(3.0, 31)
    r1, r2 = _random_density(s1, 8), _random_density(s2, 8)
    w1 = wigner_numeric(r1, xs, ys).values
    w2 = wigner_numeric(r2, xs, ys).values
    combo = wigner_numeric(r1 + c * r2, xs, ys, check_tol=1e-6).values
    np.testing.assert_allclose(combo, w1 + c * w2, atol=1e-10)
    assert np.isrealobj(w1)


@given(st.integers(0, 2**32 - 1))
def test_integral_equals_trace(seed):
    rho = _random_density(seed, 8, scale=0.5)
    assert mean_excitation(rho) <= 5
    assert wigner_numeric(rho, XS, YS).norm_integral == pytest.approx(1.0, abs=0.01)


def _position_density(rho, x):
    dim = rho.shape[0]
    n = np.arange(dim)
    norm = (2 / math.pi) ** 0.25 / np.sqrt(2.0 ** n * special.factorial(n))
    psi = np.array([norm[k] * special.eval_hermite(k, math.sqrt(2) * x) * np.exp(-x ** 2) for k in n])
    return np.real(np.einsum("mx,mn,nx->x", psi, rho, psi))


@pytest.mark.parametrize("n", [0, 1])
def test_marginal_matches_hermite_oracle(n):
    rho = density_from_ket(fock_ket(n, 6))
    w = wigner_numeric(rho, XS, YS)
    marginal = np.trapezoid(w.values, YS, axis=1)
    l1 = np.trapezoid(np.abs(marginal - _position_density(rho, XS)), XS)
    assert l1 <= 0.02


def test_negativity_volume():
    assert negativity_volume(wigner_numeric(density_from_ket(fock_ket(0, 4)), XS, YS)) == pytest.approx(0, abs=1e-12)
    def f(r):
        return 2 / math.pi * abs(4 * r * r - 1) * math.exp(-2 * r * r) * 2 * math.pi * r

    oracle = integrate.quad(f, 0, 0.5)[0] + integrate.quad(f, 0.5, np.inf)[0] - 1
    assert oracle == pytest.approx(4 / math.sqrt(math.e) - 2, rel=1e-10)
    got = negativity_volume(wigner_numeric(density_from_ket(fock_ket(1, 4)), XS, YS))
    assert got == pytest.approx(oracle, abs=1e-3)


FIG2 = ModelParams(delta=-11, chi=15, omega=7, nmax=50)


def test_analytic_steady_positive():
    w = wigner_analytic_steady(FIG2, XS, YS)
    assert w.values.min() >= 0
    assert w.norm_integral == pytest.approx(1.0)
    assert negativity_volume(w) <= 1e-3


def test_analytic_steady_undriven_limit():
    w = wigner_analytic_steady(FIG2.replace(omega=1e-9), XS, YS)
    np.testing.assert_allclose(w.values, 2 / math.pi * np.exp(-2 * R2), atol=1e-7)


def test_analytic_needs_nonlinearity():
    with pytest.raises(UndefinedParameterError):
        SteadyWignerParams.from_model(FIG2.replace(chi=0))
    with pytest.raises(UndefinedParameterError):
        wigner_analytic_steady(FIG2.replace(drive=PulseTrain(width=0.4)))


def _printed_branch_form(alpha, sp):
    # principal branches applied to J_{lam-1}(sqrt(-8 a eps)) / conj(a)^((lam-1)/2)
    nu = sp.lam - 1
    w = np.sqrt(-8 * alpha * sp.eps + 0j)
    num = complex_bessel_j(nu, w)
    den = np.power(np.conj(alpha) + 0j, nu / 2)
    return np.exp(-2 * abs(alpha) ** 2) * abs(num / den) ** 2


@pytest.mark.parametrize("x", [-0.8, -0.3, 0.3, 0.8])
def test_entire_form_is_continuous_across_real_axis(x):
    sp = SteadyWignerParams.from_model(FIG2)
    above, below = complex(x, 1e-12), complex(x, -1e-12)
    a, b = steady_wigner_unnormalized(above, sp), steady_wigner_unnormalized(below, sp)
    assert abs(a - b) <= 1e-9 * abs(a)
    # the branch-by-branch reading of the printed form jumps somewhere on the real axis
    pa, pb = _printed_branch_form(above, sp), _printed_branch_form(below, sp)
    if x < 0:
        assert abs(pa - pb) > 1e-2 * abs(pa)


def test_wigner_grid_helpers():
    vals = np.ones((3, 3))
    g = WignerGrid(np.linspace(0, 1, 3), np.linspace(0, 2, 3), vals * 2, integrate_grid(np.linspace(0, 1, 3), np.linspace(0, 2, 3), vals * 2))
    assert g.norm_integral == pytest.approx(4.0)
    assert g.normalized().norm_integral == 1.0 and g.peak == 2.0
