"""Quantum-state-diffusion trajectories and their ensemble average.

Each trajectory solves the normalized diffusive unraveling

    d psi = -i H psi dt + sum_i (<L_i^dag> L_i - L_i^dag L_i / 2 - |<L_i>|^2 / 2) psi dt
            + sum_i (L_i - <L_i>) psi dxi_i

with E[dxi_i dxi_j^*] = delta_ij dt.  The number-diagonal part
(``-i(delta n + chi n^2) - sum_i L_i^dag L_i / 2``) is applied exactly in two
half steps around an Euler-Maruyama step for the rest (Strang splitting), which
keeps the stiff Kerr frequencies of the truncated basis stable at dt ~ 1e-3.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from .errors import DimensionMismatchError, QsdStepError
from .evolve import _envelope
from .model import ModelParams, dissipative_rates, level_energies

NORM_FLOOR = 1e-6
BATCH_SIZE = 64
NOISE_CHUNK = 1024


@dataclass(frozen=True)
class QsdConfig:
    dt: float = 1e-3
    n_traj: int = 100
    seed: int = 0
    sample_dt: float = 0.05
    threads: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise ValueError("n_traj must be a positive integer")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        ratio = self.sample_dt / self.dt
        if not self.sample_dt > 0 or abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
            raise ValueError("sample_dt must be a positive integer multiple of dt")

    @property
    def steps_per_sample(self) -> int:
        return int(round(self.sample_dt / self.dt))


@dataclass
class QsdPath:
    times: np.ndarray
    states: np.ndarray  # (n_samples, nmax)


@dataclass
class EnsembleResult:
    times: np.ndarray
    mean_rho: np.ndarray   # (n_samples, nmax, nmax)
    stderr_pop: np.ndarray  # (n_samples, nmax)
    n_traj: int

    @property
    def populations(self) -> np.ndarray:
        return np.real(np.diagonal(self.mean_rho, axis1=1, axis2=2))


class _Kernel:
    """Per-model constants for the compiled stepper."""

    def __init__(self, p: ModelParams, dt: float):
        self.p = p
        rates = -1j * level_energies(p) - 0.5 * dissipative_rates(p)
        self.half = np.exp(rates * (dt / 2))
        self.sq = np.sqrt(np.arange(p.nmax, dtype=float))
        self.c_down = math.sqrt((p.nbath + 1.0) * p.gamma)
        self.c_up = math.sqrt(p.nbath * p.gamma)
        self.channels = 2 if p.nbath > 0 else 1
        self.omega = complex(p.omega)
        drive = p.drive
        self.centers = np.ascontiguousarray(drive.centers, dtype=float)
        self.width = float(drive.width)
        self.continuous = bool(drive.continuous)


@numba.njit(cache=True)
def _step_one(psi, f, dt, dxi, half, sq, c_down, c_up, omega, out, new):
    """Advance one state by dt with drive envelope ``f`` at the step midpoint.

    Writes the normalized result to ``out`` and returns the norm before normalization.
    """
    n = psi.shape[0]
    for k in range(n):
        out[k] = psi[k] * half[k]
    norm2 = 0.0
    l_down = 0j
    l_up = 0j
    for k in range(n):
        norm2 += out[k].real ** 2 + out[k].imag ** 2
        if k < n - 1:
            l_down += np.conj(out[k]) * sq[k + 1] * out[k + 1]
        if k > 0:
            l_up += np.conj(out[k]) * sq[k] * out[k - 1]
    l_down *= c_down / norm2
    l_up *= c_up / norm2
    w = -1j * f * omega
    wc = -1j * f * np.conj(omega)
    dxi_down = dxi[0]
    dxi_up = dxi[1] if dxi.shape[0] > 1 else 0j
    shrink = 0.5 * (l_down.real ** 2 + l_down.imag ** 2 + l_up.real ** 2 + l_up.imag ** 2)
    for k in range(n):
        x = out[k]
        down = c_down * sq[k + 1] * out[k + 1] if k < n - 1 else 0j
        up = c_up * sq[k] * out[k - 1] if k > 0 else 0j
        hdrive = 0j
        if k > 0:
            hdrive += w * sq[k] * out[k - 1]
        if k < n - 1:
            hdrive += wc * sq[k + 1] * out[k + 1]
        drift = hdrive + np.conj(l_down) * down + np.conj(l_up) * up - shrink * x
        noise = (down - l_down * x) * dxi_down + (up - l_up * x) * dxi_up
        new[k] = x + drift * dt + noise
    norm2 = 0.0
    for k in range(n):
        y = new[k] * half[k]
        out[k] = y
        norm2 += y.real ** 2 + y.imag ** 2
    norm = math.sqrt(norm2)
    if norm >= 1e-300:
        for k in range(n):
            out[k] /= norm
    return norm


@numba.njit(cache=True)
def _advance_batch(psi, t0, dt, nsteps, noise, half, sq, c_down, c_up, omega, centers, width,
                   continuous, floor):
    """Advance each row of ``psi`` by ``nsteps``; returns the first collapsing row or -1."""
    n = psi.shape[1]
    out = np.empty(n, dtype=np.complex128)
    new = np.empty(n, dtype=np.complex128)
    fs = np.empty(nsteps)
    for s in range(nsteps):
        fs[s] = _envelope(t0 + (s + 0.5) * dt, centers, width, continuous)
    for b in range(psi.shape[0]):
        cur = psi[b].copy()
        for s in range(nsteps):
            norm = _step_one(cur, fs[s], dt, noise[b, s], half, sq, c_down, c_up, omega, out, new)
            if not norm >= floor:
                return b
            cur, out = out, cur
        psi[b] = cur
    return -1


def qsd_step(psi, t: float, dt: float, noise, p: ModelParams) -> np.ndarray:
    """One renormalized QSD step; ``noise`` holds one complex increment per dissipator."""
    psi = np.ascontiguousarray(psi, dtype=complex)
    if psi.shape != (p.nmax,):
        raise DimensionMismatchError(f"state has shape {psi.shape}, model basis is {p.nmax}")
    kern = _Kernel(p, dt)
    noise = np.atleast_1d(np.asarray(noise, dtype=complex))
    if noise.shape[0] < kern.channels:
        raise ValueError(f"need {kern.channels} noise increments, got {noise.shape[0]}")
    out = np.empty_like(psi)
    f = _envelope(float(t) + 0.5 * dt, kern.centers, kern.width, kern.continuous)
    norm = _step_one(psi, f, float(dt), noise, kern.half, kern.sq, kern.c_down, kern.c_up,
                     kern.omega, out, np.empty_like(psi))
    if not norm >= NORM_FLOOR:
        raise QsdStepError(f"state norm collapsed to {norm:.2e} at t = {t:.6g}; reduce dt")
    return out


def _stream(seed: int, traj_index: int) -> np.random.Generator:
    """Counter-based stream that depends only on (seed, traj_index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(traj_index,))))


def _sample_grid(t_end, cfg: QsdConfig):
    n_samples = int(math.floor(t_end / cfg.sample_dt + 1e-9)) + 1
    times = np.arange(n_samples) * (cfg.steps_per_sample * cfg.dt)
    return times


def _run_batch(psi0, indices, times, p: ModelParams, cfg: QsdConfig, kern: _Kernel, sample_fn):
    """Integrate the trajectories ``indices``; ``sample_fn(i, psi_batch)`` sees every sample."""
    streams = [_stream(cfg.seed, i) for i in indices]
    psi = np.tile(psi0, (len(indices), 1))
    sample_fn(0, psi)
    sqrt_half_dt = math.sqrt(cfg.dt / 2)
    total = (len(times) - 1) * cfg.steps_per_sample
    step = 0
    noise = None
    noise_pos = NOISE_CHUNK
    next_sample = 1
    while step < total:
        if noise_pos == NOISE_CHUNK:
            # each stream is consumed in fixed-size chunks, independent of batching
            raw = np.stack([g.standard_normal((NOISE_CHUNK, kern.channels, 2)) for g in streams])
            noise = np.ascontiguousarray(sqrt_half_dt * (raw[..., 0] + 1j * raw[..., 1]))
            noise_pos = 0
        until_sample = next_sample * cfg.steps_per_sample - step
        n = min(until_sample, NOISE_CHUNK - noise_pos)
        t0 = step * cfg.dt
        bad = _advance_batch(psi, t0, cfg.dt, n, noise[:, noise_pos:noise_pos + n], kern.half,
                             kern.sq, kern.c_down, kern.c_up, kern.omega, kern.centers,
                             kern.width, kern.continuous, NORM_FLOOR)
        if bad >= 0:
            raise QsdStepError(
                f"trajectory {indices[bad]} collapsed between t = {t0:.6g} and "
                f"{t0 + n * cfg.dt:.6g}; reduce dt")
        step += n
        noise_pos += n
        if step == next_sample * cfg.steps_per_sample:
            sample_fn(next_sample, psi)
            next_sample += 1


def _check_psi0(psi0, p):
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (p.nmax,):
        raise DimensionMismatchError(f"psi0 has shape {psi0.shape}, model basis is {p.nmax}")
    return psi0 / np.linalg.norm(psi0)


def run_trajectory(psi0, t_end: float, p: ModelParams, cfg: QsdConfig, traj_index: int) -> QsdPath:
    """Sampled path of trajectory ``traj_index``; bit-identical for identical inputs."""
    if not 0 <= traj_index < cfg.n_traj:
        raise ValueError(f"traj_index {traj_index} outside ensemble of {cfg.n_traj}")
    psi0 = _check_psi0(psi0, p)
    times = _sample_grid(t_end, cfg)
    states = np.empty((len(times), p.nmax), dtype=complex)

    def keep(i, batch):
        states[i] = batch[0]

    _run_batch(psi0, [traj_index], times, p, cfg, _Kernel(p, cfg.dt), keep)
    return QsdPath(times, states)


def _pairwise_sum(x):
    """Sum over axis 0 by recursive halving in index order."""
    m = x.shape[0]
    if m <= 2:
        return x[0] + x[1] if m == 2 else x[0].copy()
    half = m // 2
    return _pairwise_sum(x[:half]) + _pairwise_sum(x[half:])


def average_ensemble(psi0, t_end: float, p: ModelParams, cfg: QsdConfig) -> EnsembleResult:
    """Ensemble-averaged density matrix of ``cfg.n_traj`` trajectories.

    Trajectories run in fixed batches of 64 (optionally on ``cfg.threads``
    threads); each batch is reduced pairwise and batch sums are added in
    batch order, so the result does not depend on the schedule.
    """
    psi0 = _check_psi0(psi0, p)
    times = _sample_grid(t_end, cfg)
    kern = _Kernel(p, cfg.dt)
    m = cfg.n_traj
    batches = [list(range(s, min(s + BATCH_SIZE, m))) for s in range(0, m, BATCH_SIZE)]
    shape = (len(times), p.nmax)

    def run(indices):
        rho_sum = np.empty((len(times), p.nmax, p.nmax), dtype=complex)
        pop_sum = np.empty(shape)
        pop_sq = np.empty(shape)

        def reduce(i, batch):
            rho_sum[i] = _pairwise_sum(batch[:, :, None] * batch.conj()[:, None, :])
            pops = batch.real ** 2 + batch.imag ** 2
            pop_sum[i] = _pairwise_sum(pops)
            pop_sq[i] = _pairwise_sum(pops * pops)

        _run_batch(psi0, indices, times, p, cfg, kern, reduce)
        return rho_sum, pop_sum, pop_sq

    if cfg.threads > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = pool.map(run, batches)
            total = _accumulate(parts)
    else:
        total = _accumulate(map(run, batches))
    rho_sum, pop_sum, pop_sq = total
    mean_rho = rho_sum / m
    if m > 1:
        var = np.maximum(pop_sq - pop_sum ** 2 / m, 0.0) / (m - 1)
        stderr = np.sqrt(var / m)
    else:
        stderr = np.zeros(shape)
    return EnsembleResult(times=times, mean_rho=mean_rho, stderr_pop=stderr, n_traj=m)


def _accumulate(parts):
    total = None
    for part in parts:
        total = part if total is None else tuple(a + b for a, b in zip(total, part))
    return total
