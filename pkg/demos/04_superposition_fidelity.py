"""
Preparing (|0> - |1>)/sqrt(2) with short, frequent pulses
=========================================================

Shorter pulses, closer together and slightly off resonance, stop the
rotation halfway.  The fidelity with the target superposition is read off
half a pulse width before each pulse centre.
"""
import numpy as np

from kerrpulse import figure_preset, fidelity, integrate_master, density_from_ket, fock_ket, negativity_volume, wigner_numeric

cfg = figure_preset("fig5")
p = cfg.model
traj = integrate_master(density_from_ket(fock_ket(0, p.nmax)), cfg.t_end, p, cfg.integrator,
                        extra_times=list(cfg.measure_times) + [cfg.measure_time])

def state_at(t):
    return traj.states[np.argmin(np.abs(traj.times - t))]

for k, t in enumerate(cfg.measure_times, start=1):
    print(f"pulse {k}: t = {t:5.2f}   F = {fidelity(state_at(t), cfg.target):.3f}")

rho = state_at(cfg.measure_time)
pops = np.real(np.diag(rho))
grid = wigner_numeric(rho)
print(f"t = {cfg.measure_time:.2f}: P0 = {pops[0]:.3f}, P1 = {pops[1]:.3f}, "
      f"negativity = {negativity_volume(grid):.3f}")

# the interference between |0> and |1> skews the distribution along x
half = grid.values.shape[0] // 2
print("weight at x < 0 vs x > 0:", grid.values[:half].sum() / grid.values[half + 1:].sum())
