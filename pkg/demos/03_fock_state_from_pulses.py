"""
Producing the one-photon Fock state with a pulse train
======================================================

With the drive exactly resonant with the 0 -> 1 transition (delta + chi = 0)
each Gaussian pulse rotates the vacuum most of the way into |1>.  The
anharmonicity keeps |2> out of reach, and between pulses the state decays.
"""
import numpy as np

from kerrpulse import figure_preset, integrate_master, density_from_ket, fock_ket, negativity_volume, wigner_numeric

cfg = figure_preset("fig3")
p, train = cfg.model, cfg.model.drive
print(f"pulses of width {train.width} every {train.tau}, centred at", train.centers[:4])

traj = integrate_master(density_from_ket(fock_ket(0, p.nmax)), cfg.t_end, p, cfg.integrator,
                        extra_times=list(cfg.measure_times) + list(cfg.wigner.times))

def state_at(t):
    return traj.states[np.argmin(np.abs(traj.times - t))]

# populations just before each pulse centre
for t in cfg.measure_times:
    pops = np.real(np.diag(state_at(t)))
    print(f"t = {t:6.2f}   P0 = {pops[0]:.3f}   P1 = {pops[1]:.3f}   P2 = {pops[2]:.3f}")

# the Wigner function dips below zero around the origin, as for |1>
for t in cfg.wigner.times:
    grid = wigner_numeric(state_at(t))
    print(f"t = {t:6.2f}   W(0) = {grid.values[100, 100]:+.3f}   negativity = {negativity_volume(grid):.3f}")
