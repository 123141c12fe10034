"""Pulsed dissipative Kerr oscillator: master equation, QSD trajectories, Wigner functions."""
from .errors import *  # noqa: F401,F403
from .hilbert import (build_annihilation, build_creation, build_number, coherent_ket, density_from_ket,
                      expectation, fock_ket, ket_from_amplitudes, thermal_density, validate_density)
from .model import (ModelParams, PulseTrain, bare_energy, build_hamiltonian, build_lindblads,
                    pulse_envelope, rabi_frequency, regime_report, stark_shift)
from .evolve import IntegratorConfig, Trajectory, integrate_master, lindblad_rhs, steady_state
from .qsd import EnsembleResult, QsdConfig, QsdPath, average_ensemble, qsd_step, run_trajectory
from .observe import (SteadyWignerParams, WignerGrid, fidelity, mean_excitation, negativity_volume,
                      populations, wigner_analytic_steady, wigner_kernel, wigner_numeric)

__version__ = "0.1.0"

from .config import ScenarioConfig, figure_preset, parse_config  # noqa: E402
