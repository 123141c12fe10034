"""Dense linear algebra on the truncated Fock basis.

Operators, density matrices and pure states are plain complex numpy arrays.
Index ``n`` of an array axis corresponds to the Fock state ``|n>``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidDimensionError


def _check_dim(dim):
    if int(dim) != dim or dim < 2:
        raise InvalidDimensionError(f"basis size must be an integer >= 2, got {dim!r}")
    return int(dim)


def build_annihilation(dim: int) -> np.ndarray:
    """Annihilation operator with ``a[n-1, n] = sqrt(n)``."""
    dim = _check_dim(dim)
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


def build_creation(dim: int) -> np.ndarray:
    return build_annihilation(dim).conj().T


def build_number(dim: int) -> np.ndarray:
    dim = _check_dim(dim)
    return np.diag(np.arange(dim, dtype=float)).astype(complex)


def fock_ket(n: int, dim: int) -> np.ndarray:
    dim = _check_dim(dim)
    if not 0 <= n < dim:
        raise InvalidDimensionError(f"Fock index {n} outside basis of size {dim}")
    psi = np.zeros(dim, dtype=complex)
    psi[n] = 1.0
    return psi


def ket_from_amplitudes(amplitudes, dim: int | None = None) -> np.ndarray:
    """Normalized state vector from (possibly unnormalized) amplitudes, zero-padded to ``dim``."""
    amps = np.asarray(amplitudes, dtype=complex).ravel()
    dim = _check_dim(len(amps) if dim is None else dim)
    if len(amps) > dim:
        raise DimensionMismatchError(f"{len(amps)} amplitudes do not fit a basis of size {dim}")
    norm = np.linalg.norm(amps)
    if norm == 0:
        raise ValueError("state amplitudes are all zero")
    psi = np.zeros(dim, dtype=complex)
    psi[: len(amps)] = amps / norm
    return psi


def coherent_ket(beta: complex, dim: int) -> np.ndarray:
    """Truncated coherent state, renormalized on the kept basis."""
    dim = _check_dim(dim)
    n = np.arange(dim)
    log_fact = np.cumsum(np.log(np.maximum(n, 1)))
    amps = np.exp(-0.5 * abs(beta) ** 2 - 0.5 * log_fact) * np.power(complex(beta), n)
    return amps / np.linalg.norm(amps)


def density_from_ket(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def thermal_density(nbar: float, dim: int) -> np.ndarray:
    """Thermal state with mean occupation ``nbar``, renormalized on the kept basis."""
    dim = _check_dim(dim)
    if nbar == 0:
        return density_from_ket(fock_ket(0, dim))
    weights = (nbar / (nbar + 1.0)) ** np.arange(dim)
    return np.diag(weights / weights.sum()).astype(complex)


def expectation(op, state) -> complex:
    """``Tr(op rho)`` for a square ``state`` or ``<psi|op|psi>`` for a vector."""
    op = np.asarray(op)
    state = np.asarray(state)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise DimensionMismatchError(f"operator must be square, got shape {op.shape}")
    if state.shape[0] != op.shape[0]:
        raise DimensionMismatchError(
            f"operator of size {op.shape[0]} applied to state of size {state.shape[0]}"
        )
    if state.ndim == 1:
        return complex(np.vdot(state, op @ state))
    if state.shape != op.shape:
        raise DimensionMismatchError(f"density matrix shape {state.shape} vs operator {op.shape}")
    # Tr(A B) = sum_ij A_ij B_ji
    return complex(np.sum(op * state.T))


@dataclass(frozen=True)
class DensityReport:
    hermiticity_defect: float
    trace_defect: float
    min_eigenvalue: float | None
    tol: float
    herm_tol: float
    positivity_tol: float

    @property
    def hermitian_ok(self) -> bool:
        return self.hermiticity_defect <= self.herm_tol

    @property
    def trace_ok(self) -> bool:
        return self.trace_defect <= self.tol

    @property
    def positive_ok(self) -> bool:
        return self.min_eigenvalue is None or self.min_eigenvalue >= -self.positivity_tol

    @property
    def ok(self) -> bool:
        return self.hermitian_ok and self.trace_ok and self.positive_ok


def validate_density(rho, tol: float = 1e-8, herm_tol: float = 1e-10,
                     positivity_tol: float | None = None,
                     check_positivity: bool = True) -> DensityReport:
    """Report Hermiticity, trace and positivity defects of ``rho``.

    ``tol`` bounds the trace defect; the positivity bound defaults to ``tol``.
    The eigenvalue check is a full Hermitian eigendecomposition, so callers on
    hot paths may switch it off.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionMismatchError(f"density matrix must be square, got shape {rho.shape}")
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    trace = float(abs(np.trace(rho) - 1.0))
    min_eig = None
    if check_positivity:
        min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    return DensityReport(
        hermiticity_defect=herm,
        trace_defect=trace,
        min_eigenvalue=min_eig,
        tol=tol,
        herm_tol=herm_tol,
        positivity_tol=tol if positivity_tol is None else positivity_tol,
    )


def lower(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Apply the annihilation operator along ``axis``: ``y[k] = sqrt(k+1) x[k+1]``.

    Along axis 1 of a matrix this computes ``x @ a^dag`` (``a`` is real).
    """
    x = np.moveaxis(np.asarray(x), axis, -1)
    out = np.zeros_like(x)
    out[..., :-1] = x[..., 1:] * np.sqrt(np.arange(1, x.shape[-1], dtype=float))
    return np.moveaxis(out, -1, axis)


def raise_(x: np.ndarray, axis: int = 0) -> np.ndarray:
    """Apply the creation operator along ``axis``: ``y[k] = sqrt(k) x[k-1]``.

    Along axis 1 of a matrix this computes ``x @ a``.
    """
    x = np.moveaxis(np.asarray(x), axis, -1)
    out = np.zeros_like(x)
    out[..., 1:] = x[..., :-1] * np.sqrt(np.arange(1, x.shape[-1], dtype=float))
    return np.moveaxis(out, -1, axis)
