"""
Quantum state diffusion as a cross-check
========================================

Each stochastic trajectory is a pure state; averaging many of them must
reproduce the master-equation density matrix.  Runs are reproducible: a
trajectory depends only on (seed, index), whatever the batching or threads.
"""
import numpy as np

from kerrpulse import (IntegratorConfig, ModelParams, QsdConfig, average_ensemble, density_from_ket, fock_ket,
                       integrate_master, run_trajectory)

p = ModelParams(delta=-11.0, chi=15.0, omega=7.0, nmax=30)
psi0 = fock_ket(0, p.nmax)

# a single trajectory jumps around; its norm stays 1
path = run_trajectory(psi0, 2.0, p, QsdConfig(n_traj=1, seed=1, sample_dt=0.25), 0)
for t, psi in zip(path.times, path.states):
    print(f"t = {t:4.2f}   |c0|^2 = {abs(psi[0]) ** 2:.3f}   |c1|^2 = {abs(psi[1]) ** 2:.3f}")

cfg = QsdConfig(dt=1e-3, n_traj=300, seed=7, sample_dt=0.25)
ens = average_ensemble(psi0, 2.0, p, cfg)
me = integrate_master(density_from_ket(psi0), 2.0, p, IntegratorConfig(sample_dt=0.25))
p_me = np.real(np.diagonal(me.states, axis1=1, axis2=2))

print("\n   t    P1 (QSD)          P1 (master eq.)")
for i, t in enumerate(ens.times):
    print(f"{t:4.2f}   {ens.populations[i, 1]:.3f} +- {ens.stderr_pop[i, 1]:.3f}    {p_me[i, 1]:.3f}")

# the same seed on more threads gives bit-identical averages
again = average_ensemble(psi0, 2.0, p, QsdConfig(dt=1e-3, n_traj=300, seed=7, sample_dt=0.25, threads=2))
print("\nidentical with 2 threads:", np.array_equal(ens.mean_rho, again.mean_rho))
