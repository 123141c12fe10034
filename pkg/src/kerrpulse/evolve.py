"""Master-equation integration for the pulsed Kerr oscillator.

The generator is split as ``d rho/dt = G * rho + N(t, rho)`` where ``G`` is the
elementwise (number-diagonal) part, ``G_nm = -i(E_n - E_m) - (d_n + d_m)/2``,
and ``N`` holds the drive commutator and the jump terms.  ``G`` carries the
stiff Kerr frequencies (up to ~chi nmax^2), so it is integrated exactly and the
Dormand-Prince 5(4) pair runs on the interaction-picture variable of each step.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ConvergenceError, DimensionMismatchError, IntegrityError, StiffnessError, TruncationWarning
from .hilbert import validate_density
from .model import ModelParams, dissipative_rates, level_energies, pulse_envelope

log = logging.getLogger(__name__)

MIN_STEP = 1e-12
TRUNCATION_LIMIT = 1e-8
RENORM_THRESHOLD = 1e-10
TRACE_FAIL = 1e-6
HERM_FAIL = 1e-8
POSITIVITY_FAIL = 1e-8

# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_A_MAT = np.zeros((7, 7))
for _i, _row in enumerate(_A):
    _A_MAT[_i, : len(_row)] = _row
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    dt_init: float = 1e-3
    dt_max: float = 0.1
    sample_dt: float = 0.01
    check_positivity: bool = True

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("integrator tolerances must be positive")
        if not self.dt_init > 0:
            raise ValueError("dt_init must be positive")
        if self.dt_max < self.dt_init:
            raise ValueError("dt_max must be >= dt_init")
        if not self.sample_dt > 0:
            raise ValueError("sample_dt must be positive")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    truncation_ok: bool = True
    max_top_population: float = 0.0
    steps: int = 0
    rejected: int = 0
    renormalizations: int = 0
    defects: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)


def lindblad_rhs(rho, t: float, p: ModelParams) -> np.ndarray:
    """Full master-equation right-hand side (reference form, not used for stepping)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (p.nmax, p.nmax):
        raise DimensionMismatchError(f"rho has shape {rho.shape}, model basis is {p.nmax}")
    gen = _Generator(p)
    return gen.diagonal * rho + gen.coupling(t, rho)


class _Generator:
    def __init__(self, p: ModelParams):
        self.p = p
        e = level_energies(p)
        d = dissipative_rates(p)
        # G_nm = g_n + conj(g_m), so exp(G s) is the rank-one outer(exp(g s), conj(exp(g s)))
        self.rates = -1j * e - 0.5 * d
        self.diagonal = self.rates[:, None] + np.conj(self.rates)[None, :]
        self.omega = p.omega
        self.damp = p.gamma * (p.nbath + 1.0)
        self.heat = p.gamma * p.nbath
        self.sq = np.sqrt(np.arange(p.nmax, dtype=float))

    def coupling(self, t, rho):
        """Drive commutator plus jump terms ``sum_i L_i rho L_i^dag``."""
        f = pulse_envelope(t, self.p.drive)
        w = -1j * f * complex(self.omega)
        return _coupling_kernel(rho, w, self.sq, self.damp, self.heat)


@numba.njit(cache=True)
def _coupling_kernel(rho, w, sq, damp, heat):
    # -i f [V, rho] with V = Omega a^dag + Omega^* a, plus damp a rho a^dag + heat a^dag rho a.
    # sq[k] = sqrt(k); w = -i f Omega, and -i f Omega^* = -conj(w)
    n = rho.shape[0]
    wc = -np.conj(w)
    out = np.empty_like(rho)
    for i in range(n):
        for j in range(n):
            acc = 0j
            if i > 0:
                acc += w * sq[i] * rho[i - 1, j]
            if j < n - 1:
                acc -= w * sq[j + 1] * rho[i, j + 1]
            if i < n - 1:
                acc += wc * sq[i + 1] * rho[i + 1, j]
                if j < n - 1:
                    acc += damp * sq[i + 1] * sq[j + 1] * rho[i + 1, j + 1]
            if j > 0:
                acc -= wc * sq[j] * rho[i, j - 1]
                if i > 0 and heat != 0.0:
                    acc += heat * sq[i] * sq[j] * rho[i - 1, j - 1]
            out[i, j] = acc
    return out


@numba.njit(cache=True)
def _envelope(t, centers, width, continuous):
    if continuous:
        return 1.0
    f = 0.0
    for c in centers:
        d = (t - c) / width
        f += math.exp(-d * d)
    return f


@numba.njit(cache=True)
def _dp5_attempt(rho0, n0, t, h, rates, sq, omega, damp, heat, centers, width, continuous,
                 rtol, atol):
    """One integrating-factor DP5(4) step; returns (rho(t+h), N(t+h, rho(t+h)), error norm)."""
    n = rho0.shape[0]
    k = np.empty((7, n, n), dtype=np.complex128)
    k[0] = n0
    rho_i = np.empty_like(rho0)
    n_i = n0
    for i in range(1, 7):
        c = _C[i]
        v = np.exp(rates * (c * h))
        for p in range(n):
            for q in range(n):
                u = rho0[p, q]
                for j in range(i):
                    a = _A_MAT[i, j]
                    if a != 0.0:
                        u += (h * a) * k[j, p, q]
                rho_i[p, q] = v[p] * np.conj(v[q]) * u
        f = _envelope(t + c * h, centers, width, continuous)
        n_i = _coupling_kernel(rho_i, -1j * f * omega, sq, damp, heat)
        vi = 1.0 / v
        for p in range(n):
            for q in range(n):
                k[i, p, q] = n_i[p, q] * vi[p] * np.conj(vi[q])
        if i < 6:
            rho_i = np.empty_like(rho0)
    # error estimate, mapped back to the lab frame with exp(G h)
    v = np.exp(rates * h)
    err = 0.0
    for p in range(n):
        for q in range(n):
            e = 0j
            for j in range(7):
                if _E[j] != 0.0:
                    e += _E[j] * k[j, p, q]
            e *= h * v[p] * np.conj(v[q])
            scale = atol + rtol * max(abs(rho0[p, q]), abs(rho_i[p, q]))
            r = abs(e) / scale
            if not r <= err:
                err = r
    return rho_i, n_i, err


class MasterStepper:
    """Adaptive integrating-factor DP5(4) stepper; one instance per integration."""

    def __init__(self, rho0, t0: float, p: ModelParams, cfg: IntegratorConfig):
        rho0 = np.array(rho0, dtype=complex)
        if rho0.shape != (p.nmax, p.nmax):
            raise DimensionMismatchError(f"rho0 has shape {rho0.shape}, model basis is {p.nmax}")
        self.p = p
        self.cfg = cfg
        self.gen = _Generator(p)
        self.t = float(t0)
        self.rho = rho0
        self.h = cfg.dt_init
        self.err_prev = 1e-4
        self.steps = 0
        self.rejected = 0
        self._n_now = None
        self._windows = p.drive.windows() if not p.drive.continuous else []
        self._clamp = p.drive.width / 10 if not p.drive.continuous else math.inf
        self._centers = np.ascontiguousarray(p.drive.centers, dtype=float)

    def _step_cap(self, t):
        cap = self.cfg.dt_max
        for lo, hi in self._windows:
            if lo <= t < hi:
                return min(cap, self._clamp)
            if lo > t:
                return min(cap, max(lo - t, self._clamp))
        return cap

    def _attempt(self, h):
        if self._n_now is None:
            self._n_now = self.gen.coupling(self.t, self.rho)
        gen, drive = self.gen, self.p.drive
        return _dp5_attempt(
            self.rho, self._n_now, self.t, h, gen.rates, gen.sq, complex(gen.omega),
            gen.damp, gen.heat, self._centers, drive.width, drive.continuous,
            self.cfg.rel_tol, self.cfg.abs_tol,
        )

    def advance(self, t_target: float):
        """Step until ``t_target`` is hit exactly."""
        safety, beta = 0.9, 0.04
        alpha = 0.2 - 0.75 * beta
        while self.t < t_target:
            if t_target - self.t <= 1e-13 * max(1.0, abs(t_target)):
                self.t = t_target
                break
            cap = self._step_cap(self.t)
            h_try = min(self.h, cap)
            remaining = t_target - self.t
            landing = h_try >= remaining
            clipped = landing and remaining < h_try
            h = remaining if landing else h_try
            rejected_here = False
            while True:
                if h < MIN_STEP:
                    raise StiffnessError(
                        f"step size {h:.3e} underflowed at t = {self.t:.6g}; "
                        "the problem is too stiff for the requested tolerances "
                        f"(rel_tol={self.cfg.rel_tol}, abs_tol={self.cfg.abs_tol})"
                    )
                rho_new, n_new, err = self._attempt(h)
                if np.isfinite(err) and err <= 1.0:
                    break
                self.rejected += 1
                rejected_here = True
                shrink = 0.2 if not np.isfinite(err) else max(0.2, safety * err ** -0.2)
                h *= shrink
                landing = clipped = False
            self.t = t_target if landing else self.t + h
            self.rho = rho_new
            self._n_now = n_new
            self.steps += 1
            err = max(err, 1e-10)
            fac = safety * err ** -alpha * self.err_prev ** beta
            fac = min(5.0, max(0.2, fac))
            if rejected_here:
                fac = min(1.0, fac)
            self.err_prev = err
            # a step shortened to land on a sample must not shrink the proposal
            self.h = max(self.h, h * fac) if clipped else h * fac

    def renormalize(self):
        self.rho = self.rho / np.trace(self.rho).real
        self._n_now = None


def _sample_times(t_end, sample_dt, t0=0.0):
    n = int(math.floor((t_end - t0) / sample_dt + 1e-9))
    times = t0 + sample_dt * np.arange(n + 1)
    if t_end - times[-1] > 1e-9 * max(1.0, t_end):
        times = np.append(times, t_end)
    return times


def _merge_times(grid, extra, t0, t_end):
    extra = [float(t) for t in extra if t0 <= t <= t_end]
    if not extra:
        return grid
    tol = 1e-9 * max(1.0, abs(t_end))
    keep = [t for t in extra if np.min(np.abs(grid - t)) > tol]
    if not keep:
        # snap grid points onto the requested instants
        grid = grid.copy()
        for t in extra:
            grid[np.argmin(np.abs(grid - t))] = t
        return grid
    return _merge_times(np.sort(np.concatenate([grid, keep])), extra, t0, t_end)


def _check_sample(stepper: MasterStepper, cfg: IntegratorConfig, counters: dict):
    rho = stepper.rho
    drift = abs(np.trace(rho) - 1.0)
    if drift > TRACE_FAIL:
        raise IntegrityError(f"trace drifted by {drift:.3e} at t = {stepper.t:.6g}")
    if drift > RENORM_THRESHOLD:
        log.info("renormalizing trace drift %.3e at t = %.6g", drift, stepper.t)
        stepper.renormalize()
        counters["renormalizations"] += 1
    report = validate_density(stepper.rho, tol=TRACE_FAIL, herm_tol=HERM_FAIL,
                              positivity_tol=POSITIVITY_FAIL,
                              check_positivity=cfg.check_positivity)
    if not report.ok:
        raise IntegrityError(f"invalid density matrix at t = {stepper.t:.6g}: {report}")
    counters["herm"] = max(counters["herm"], report.hermiticity_defect)
    counters["trace"] = max(counters["trace"], report.trace_defect)
    if report.min_eigenvalue is not None:
        counters["min_eig"] = min(counters["min_eig"], report.min_eigenvalue)
    top = float(np.real(np.diagonal(stepper.rho)[-2:]).sum())
    counters["top"] = max(counters["top"], top)


def integrate_master(rho0, t_end: float, p: ModelParams,
                     cfg: IntegratorConfig | None = None, t0: float = 0.0,
                     extra_times=()) -> Trajectory:
    """Integrate the master equation from ``t0`` to ``t_end``, sampling every ``cfg.sample_dt``.

    Sample states are checked for trace, Hermiticity and (optionally)
    positivity; a trace drift above 1e-10 is renormalized away and logged.
    A top-of-basis population above 1e-8 issues a ``TruncationWarning`` and
    marks the trajectory unreliable. ``extra_times`` are merged into the
    sample grid so that specific instants are hit exactly.
    """
    cfg = cfg or IntegratorConfig()
    if not t_end > t0:
        raise ValueError("t_end must be after the start time")
    stepper = MasterStepper(rho0, t0, p, cfg)
    times = _merge_times(_sample_times(t_end, cfg.sample_dt, t0), extra_times, t0, t_end)
    states = np.empty((len(times), p.nmax, p.nmax), dtype=complex)
    counters = {"renormalizations": 0, "herm": 0.0, "trace": 0.0, "min_eig": math.inf, "top": 0.0}
    for i, ts in enumerate(times):
        stepper.advance(ts)
        _check_sample(stepper, cfg, counters)
        states[i] = stepper.rho
    traj = Trajectory(
        times=times,
        states=states,
        truncation_ok=counters["top"] < TRUNCATION_LIMIT,
        max_top_population=counters["top"],
        steps=stepper.steps,
        rejected=stepper.rejected,
        renormalizations=counters["renormalizations"],
        defects={"hermiticity": counters["herm"], "trace": counters["trace"],
                 "min_eigenvalue": counters["min_eig"] if cfg.check_positivity else None},
    )
    if not traj.truncation_ok:
        warnings.warn(
            f"top two Fock levels reached population {traj.max_top_population:.2e} "
            f"(limit {TRUNCATION_LIMIT:g}); increase nmax", TruncationWarning, stacklevel=2)
    return traj


def steady_state(p: ModelParams, cfg: IntegratorConfig | None = None, rho0=None,
                 t_cap: float = 50.0, check_interval: float = 1.0, tol: float = 1e-8) -> np.ndarray:
    """Integrate a continuously driven model until ``rho`` stops changing.

    Convergence means ``max|rho(t + check_interval) - rho(t)| < tol``.
    """
    if not p.drive.continuous:
        raise ValueError("steady_state needs a continuous-wave drive")
    cfg = cfg or IntegratorConfig()
    if rho0 is None:
        rho0 = np.zeros((p.nmax, p.nmax), dtype=complex)
        rho0[0, 0] = 1.0
    stepper = MasterStepper(rho0, 0.0, p, cfg)
    counters = {"renormalizations": 0, "herm": 0.0, "trace": 0.0, "min_eig": math.inf, "top": 0.0}
    defect = math.inf
    prev = stepper.rho.copy()
    t = 0.0
    while t < t_cap - 1e-12:
        t = min(t + check_interval, t_cap)
        stepper.advance(t)
        _check_sample(stepper, cfg, counters)
        defect = float(np.max(np.abs(stepper.rho - prev)))
        if defect < tol:
            if counters["top"] >= TRUNCATION_LIMIT:
                warnings.warn(
                    f"top two Fock levels reached population {counters['top']:.2e}; increase nmax",
                    TruncationWarning, stacklevel=2)
            return stepper.rho
        prev = stepper.rho.copy()
    raise ConvergenceError(
        f"no steady state by t = {t_cap:g}: last change over {check_interval:g} was {defect:.3e}",
        defect=defect,
    )
