"""
Rabi oscillations of a driven Kerr oscillator
=============================================

A continuous drive slightly detuned from the 0 -> 1 transition moves
population back and forth between the two lowest levels while damping
pulls the system toward a steady state.
"""
import numpy as np

from kerrpulse import IntegratorConfig, ModelParams, density_from_ket, fock_ket, integrate_master, regime_report

# gamma = 1 sets the unit of time; delta + chi = 4 is the offset from resonance
p = ModelParams(delta=-11.0, chi=15.0, omega=7.0, nmax=50)
print(regime_report(p))

traj = integrate_master(density_from_ket(fock_ket(0, p.nmax)), 5.0, p, IntegratorConfig(sample_dt=0.001))
pops = np.real(np.diagonal(traj.states, axis1=1, axis2=2))

# the first few maxima of P1 and their spacing
p1 = pops[:, 1]
peaks = [i for i in range(1, len(p1) - 1) if p1[i] > p1[i - 1] and p1[i] >= p1[i + 1]]
for i in peaks[:5]:
    print(f"t = {traj.times[i]:.3f}   P0 = {pops[i, 0]:.3f}   P1 = {p1[i]:.3f}")
spacing = np.diff(traj.times[peaks[:5]]).mean()
print(f"oscillation angular frequency ~ {2 * np.pi / spacing:.2f}")

# by t = 5 the oscillation has decayed to the steady populations
print("P0, P1, P2 at t = 5:", np.round(pops[-1, :3], 4))
print("max population in the top two levels:", traj.max_top_population)
