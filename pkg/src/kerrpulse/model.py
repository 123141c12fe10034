"""Driven Kerr oscillator: pulse train, Hamiltonian, dissipators and level structure.

Units: hbar = 1, rates in units of the damping rate gamma, times in 1/gamma.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularParameterError
from .hilbert import build_annihilation, _check_dim

# Gaussian tails further than this many widths from a center are below 1e-15.
PULSE_HALO = 6.0


@dataclass(frozen=True)
class PulseTrain:
    """Envelope ``f(t) = sum_n exp(-(t - t0 - n tau)^2 / width^2)`` over ``count`` pulses.

    ``continuous=True`` gives the monochromatic drive ``f(t) = 1``.
    ``t0`` defaults to ``3 * width`` so the first pulse rises from ~0.
    """

    width: float = 1.0
    tau: float = 1.0
    count: int = 1
    t0: float | None = None
    continuous: bool = False

    def __post_init__(self):
        if self.continuous:
            return
        if not self.width > 0:
            raise ValueError(f"pulse width must be positive, got {self.width}")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"pulse count must be a positive integer, got {self.count}")
        if self.count > 1 and not self.tau > 0:
            raise ValueError(f"pulse period tau must be positive, got {self.tau}")
        if self.t0 is None:
            object.__setattr__(self, "t0", 3.0 * self.width)

    @classmethod
    def continuous_wave(cls) -> "PulseTrain":
        return cls(continuous=True)

    @property
    def centers(self) -> np.ndarray:
        if self.continuous:
            return np.empty(0)
        return self.t0 + self.tau * np.arange(self.count)

    def windows(self, halo: float = 4.0) -> list[tuple[float, float]]:
        """Intervals within ``halo`` widths of each pulse center, merged when they overlap."""
        out: list[tuple[float, float]] = []
        for c in self.centers:
            lo, hi = c - halo * self.width, c + halo * self.width
            if out and lo <= out[-1][1]:
                out[-1] = (out[-1][0], hi)
            else:
                out.append((lo, hi))
        return out


def pulse_envelope(t, train: PulseTrain):
    """Envelope value(s) at time(s) ``t``; scalar in, float out."""
    scalar = np.ndim(t) == 0
    if scalar and not train.continuous:
        t = float(t)
        return sum(math.exp(-(((t - c) / train.width) ** 2)) for c in train.centers.tolist())
    t = np.asarray(t, dtype=float)
    if train.continuous:
        out = np.ones_like(t)
    else:
        d = (t[..., None] - train.centers) / train.width
        out = np.exp(-(d * d)).sum(axis=-1)
    return float(out) if scalar else out


@dataclass(frozen=True)
class ModelParams:
    delta: float
    chi: float
    omega: complex
    gamma: float = 1.0
    nbath: float = 0.0
    drive: PulseTrain = field(default_factory=PulseTrain.continuous_wave)
    nmax: int = 30

    def __post_init__(self):
        object.__setattr__(self, "omega", complex(self.omega))
        if self.gamma < 0:
            raise ValueError(f"gamma must be non-negative, got {self.gamma}")
        if self.nbath < 0:
            raise ValueError(f"nbath must be non-negative, got {self.nbath}")
        _check_dim(self.nmax)
        for name in ("delta", "chi", "gamma", "nbath"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def replace(self, **changes) -> "ModelParams":
        from dataclasses import replace
        return replace(self, **changes)


def level_energies(p: ModelParams) -> np.ndarray:
    """Rotating-frame diagonal ``delta n + chi n^2`` for n = 0..nmax-1."""
    n = np.arange(p.nmax, dtype=float)
    return p.delta * n + p.chi * n * n


def drive_coupling(p: ModelParams) -> np.ndarray:
    """``Omega a^dag + Omega^* a`` (multiplied by f(t) in the Hamiltonian)."""
    a = build_annihilation(p.nmax)
    return p.omega * a.conj().T + np.conj(p.omega) * a


def build_hamiltonian(t: float, p: ModelParams) -> np.ndarray:
    h = drive_coupling(p) * pulse_envelope(t, p.drive)
    h[np.diag_indices(p.nmax)] += level_energies(p)
    return h


def build_lindblads(p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Damping ``sqrt((N+1) gamma) a`` and heating ``sqrt(N gamma) a^dag`` (zero when N = 0)."""
    a = build_annihilation(p.nmax)
    l1 = math.sqrt((p.nbath + 1.0) * p.gamma) * a
    l2 = math.sqrt(p.nbath * p.gamma) * a.conj().T
    return l1, l2


def dissipative_rates(p: ModelParams) -> np.ndarray:
    """Diagonal of ``sum_i L_i^dag L_i``; both dissipators are number-diagonal."""
    n = np.arange(p.nmax, dtype=float)
    # a a^dag on the truncated basis is diag(1, ..., nmax-1, 0)
    heat = np.append(n[1:], 0.0)
    return p.gamma * ((p.nbath + 1.0) * n + p.nbath * heat)


def bare_energy(n: int, p: ModelParams, omega0: float) -> float:
    """Undriven ladder ``omega0 n + chi n^2`` with the ground energy set to zero."""
    if n < 0:
        raise ValueError("level index must be non-negative")
    return omega0 * n + p.chi * n * n


def stark_shift(n: int, p: ModelParams, omega: float) -> float:
    """Second-order drive shift of level ``n`` at drive frequency ``omega``.

    ``|Omega|^2 (n / (omega + chi (2n - 1)) - (n + 1) / (omega + chi (2n + 1)))``
    """
    if n < 0:
        raise ValueError("level index must be non-negative")
    lower = omega + p.chi * (2 * n - 1)
    upper = omega + p.chi * (2 * n + 1)
    if upper == 0 or (n > 0 and lower == 0):
        raise SingularParameterError(f"vanishing denominator in the shift of level {n}")
    down = n / lower if n > 0 else 0.0
    return abs(p.omega) ** 2 * (down - (n + 1) / upper)


def resonance_offset(p: ModelParams) -> float:
    """Detuning of the drive from the 0 -> 1 transition, ``delta + chi``."""
    return p.delta + p.chi


def rabi_frequency(p: ModelParams) -> float:
    return math.hypot(abs(p.omega), resonance_offset(p))


@dataclass(frozen=True)
class RegimeReport:
    monostable: bool
    low_excitation: bool
    offset: float
    quantum_ratio: float


def regime_report(p: ModelParams) -> RegimeReport:
    if p.omega == 0:
        low = True
    else:
        low = abs(p.delta / abs(p.omega)) > 1
    return RegimeReport(
        monostable=p.chi * resonance_offset(p) >= 0,
        low_excitation=low,
        offset=resonance_offset(p),
        quantum_ratio=p.chi / p.gamma,
    )
