"""Observables and phase-space functions of Fock-basis states.

Phase space uses ``alpha = x + i y`` with the normalization ``int W dx dy = 1``,
so the vacuum is ``(2/pi) exp(-2|alpha|^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, UndefinedParameterError, WignerConsistencyError
from .model import ModelParams
from .special import bessel_j_scaled

DEFAULT_EXTENT = 4.0
DEFAULT_POINTS = 201


def populations(rho) -> np.ndarray:
    return np.real(np.diagonal(np.asarray(rho))).copy()


def mean_excitation(rho) -> float:
    p = populations(rho)
    return float(np.dot(np.arange(len(p)), p))


def fidelity(rho, target) -> float:
    """``|<Psi|rho|Psi>|`` for a pure target state."""
    rho = np.asarray(rho)
    target = np.asarray(target, dtype=complex)
    if target.shape[0] != rho.shape[0]:
        raise DimensionMismatchError(
            f"target has {target.shape[0]} amplitudes, state basis is {rho.shape[0]}")
    return float(abs(np.vdot(target, rho @ target)))


def _laguerre(n: int, k: int, x):
    """Generalized Laguerre ``L_n^k(x)`` by the three-term recurrence in ``n``."""
    prev = np.ones_like(x)
    if n == 0:
        return prev
    cur = 1.0 + k - x
    for j in range(1, n):
        prev, cur = cur, ((2 * j + 1 + k - x) * cur - (j + k) * prev) / (j + 1)
    return cur


def wigner_kernel(m: int, n: int, alpha):
    """Phase-space kernel paired with ``rho[n, m]`` in ``W = sum rho_nm K_mn``.

    For ``m >= n``: ``(2/pi) (-1)^n sqrt(n!/m!) (2 alpha)^(m-n) exp(-2|alpha|^2) L_n^(m-n)(4|alpha|^2)``;
    ``K_nm = conj(K_mn)``.
    """
    if m < 0 or n < 0:
        raise ValueError("Fock indices must be non-negative")
    if m < n:
        return np.conj(wigner_kernel(n, m, alpha))
    alpha = np.asarray(alpha, dtype=complex)
    r2 = np.abs(alpha) ** 2
    k = m - n
    log_ratio = 0.5 * (math.lgamma(n + 1) - math.lgamma(m + 1))
    out = (2 / math.pi) * (-1) ** n * math.exp(log_ratio) * (2 * alpha) ** k
    out = out * np.exp(-2 * r2) * _laguerre(n, k, 4 * r2)
    return out[()] if out.ndim == 0 else out


@dataclass
class WignerGrid:
    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # values[i, j] = W(xs[i], ys[j])
    norm_integral: float

    @property
    def peak(self) -> float:
        return float(np.max(np.abs(self.values)))

    def normalized(self) -> "WignerGrid":
        return WignerGrid(self.xs, self.ys, self.values / self.norm_integral, 1.0)


def integrate_grid(xs, ys, values) -> float:
    """Trapezoidal double integral, y first then x (fixed order)."""
    return float(np.trapezoid(np.trapezoid(values, ys, axis=1), xs))


def grid_axes(extent: float = DEFAULT_EXTENT, points: int = DEFAULT_POINTS):
    axis = np.linspace(-extent, extent, points)
    return axis, axis.copy()


def _effective_dim(rho, floor=1e-24):
    diag = np.abs(np.diagonal(rho))
    keep = np.nonzero(diag > floor)[0]
    return int(keep[-1]) + 1 if len(keep) else 1


def wigner_numeric(rho, xs=None, ys=None, extent: float = DEFAULT_EXTENT,
                   points: int = DEFAULT_POINTS, check_tol: float = 1e-8) -> WignerGrid:
    """Wigner function of a Fock-basis density matrix on a rectangular grid.

    Rows/columns whose populations are below 1e-24 are dropped (their
    coherences are bounded by the populations).  Laguerre recurrences are
    shared across each diagonal ``m - n = k``.
    """
    rho = np.asarray(rho, dtype=complex)
    if xs is None or ys is None:
        gx, gy = grid_axes(extent, points)
        xs = gx if xs is None else xs
        ys = gy if ys is None else ys
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    alpha = xs[:, None] + 1j * ys[None, :]
    r2 = np.abs(alpha) ** 2
    x = 4 * r2
    dim = _effective_dim(rho)
    total = np.zeros(alpha.shape, dtype=complex)
    two_alpha = 2 * alpha
    power = np.ones_like(alpha)
    for k in range(dim):
        upper = np.diagonal(rho, offset=k)   # rho[n, n+k]
        lower = np.diagonal(rho, offset=-k)  # rho[n+k, n]
        if np.any(upper) or np.any(lower):
            s_up = np.zeros(alpha.shape, dtype=complex)
            s_lo = np.zeros(alpha.shape, dtype=complex)
            prev = np.ones_like(x)
            cur = None
            log_ratio = 0.0
            for n in range(dim - k):
                if n == 0:
                    lag = prev
                    log_ratio = -0.5 * math.lgamma(k + 1)
                elif n == 1:
                    cur = 1.0 + k - x
                    lag = cur
                else:
                    prev, cur = cur, ((2 * n - 1 + k - x) * cur - (n - 1 + k) * prev) / n
                    lag = cur
                if n > 0:
                    log_ratio += 0.5 * (math.log(n) - math.log(n + k))
                coef = (-1) ** n * math.exp(log_ratio)
                if upper[n] != 0:
                    s_up += (upper[n] * coef) * lag
                if k and lower[n] != 0:
                    s_lo += (lower[n] * coef) * lag
            total += s_up * power
            if k:
                total += s_lo * np.conj(power)
        power = power * two_alpha
    total *= (2 / math.pi) * np.exp(-2 * r2)
    residue = float(np.max(np.abs(total.imag))) if total.size else 0.0
    if residue > check_tol:
        raise WignerConsistencyError(
            f"Wigner function has imaginary residue {residue:.3e}; is rho Hermitian?")
    values = total.real
    return WignerGrid(xs, ys, values, integrate_grid(xs, ys, values))


@dataclass(frozen=True)
class SteadyWignerParams:
    """Parameters of the exact steady-state Wigner function.

    ``lam = (gamma/2 + i (delta + chi)) / (i chi)`` and ``eps = omega / chi``.
    The amplitude damping rate ``gamma/2`` and the normal-ordered detuning
    ``delta + chi`` come from rewriting ``chi n^2 = chi a^dag^2 a^2 + chi n``.
    """

    lam: complex
    eps: complex

    @classmethod
    def from_model(cls, p: ModelParams) -> "SteadyWignerParams":
        if p.chi == 0:
            raise UndefinedParameterError("the exact steady state needs chi != 0")
        if p.nbath != 0:
            raise UndefinedParameterError("the exact steady state assumes a zero-temperature bath")
        lam = (p.gamma / 2 + 1j * (p.delta + p.chi)) / (1j * p.chi)
        return cls(lam=complex(lam), eps=complex(p.omega / p.chi))


def steady_wigner_unnormalized(alpha, sp: SteadyWignerParams):
    """``exp(-2|a|^2) |J_{lam-1}(w) / (w/2)^(lam-1)|^2`` with ``w^2 = 8 eps conj(a)``."""
    alpha = np.asarray(alpha, dtype=complex)
    scaled = bessel_j_scaled(sp.lam - 1.0, 8.0 * sp.eps * np.conj(alpha))
    return np.exp(-2 * np.abs(alpha) ** 2) * np.abs(scaled) ** 2


def wigner_analytic_steady(p: ModelParams, xs=None, ys=None, extent: float = DEFAULT_EXTENT,
                           points: int = DEFAULT_POINTS) -> WignerGrid:
    """Exact steady-state Wigner function of the continuously driven oscillator.

    The normalization constant is fixed by trapezoidal quadrature on the grid.
    """
    if p.chi == 0:
        raise UndefinedParameterError("the exact steady state needs chi != 0")
    if not p.drive.continuous:
        raise UndefinedParameterError("the exact steady state needs a continuous-wave drive")
    if xs is None or ys is None:
        gx, gy = grid_axes(extent, points)
        xs = gx if xs is None else xs
        ys = gy if ys is None else ys
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    alpha = xs[:, None] + 1j * ys[None, :]
    raw = steady_wigner_unnormalized(alpha, SteadyWignerParams.from_model(p))
    norm = integrate_grid(xs, ys, raw)
    values = raw / norm
    return WignerGrid(xs, ys, values, integrate_grid(xs, ys, values))


def negativity_volume(grid: WignerGrid) -> float:
    """``int |W| - int W`` over the grid (twice the negative volume)."""
    return integrate_grid(grid.xs, grid.ys, np.abs(grid.values)) - grid.norm_integral
