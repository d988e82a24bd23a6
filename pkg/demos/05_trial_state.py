#!/usr/bin/env python3
"""The correlated trial state R T Omega for two particles in a box.

T = exp(B - B*) creates particle-hole pairs weighted by the scattering
solution phi; applied to the vacuum and rotated back by the particle-hole
map, it produces a correlated two-body state whose energy drops below the
Hartree-Fock value toward 8 pi a / L^3.  The scattering-equation
cancellation makes the combination T1 + T2 + Q4~^r nearly vanish exactly
when phi solves the Neumann problem.
"""

import numpy as np

from fermigas.fermi_gas import build_fermi_ball, build_regularized_kernels
from fermigas.fock import mode_set_from_cutoff
from fermigas.potential import periodize, square_well
from fermigas.scattering import (periodize_phi, solve_neumann,
                                 square_well_scattering_length)
from fermigas.trial import t_operator_residual, trial_state_energy

L = 8.0
V = square_well(1.0, 1.0)
Vper = periodize(V, L, pmax=0.5)
a = square_well_scattering_length(1.0, 1.0)
bu = build_fermi_ball(L, 1)
bd = build_fermi_ball(L, 1, "down")
nsol = solve_neumann(V, L / 2 * 0.99, mesh_size=2000, refine=True)
phi = periodize_phi(nsol, L, pmax=8.0)
kern = build_regularized_kernels(1 / L**3, beta=0.6, eps=1 / 3)

print("one up + one down particle, L = 8 R0")
print(f"reference scales: 8 pi a / L^3 = {8 * np.pi * a / L**3:.6f}, "
      f"Vhat(0)/L^3 = {Vper.vhat0 / L**3:.6f}\n")

print(f"{'cutoff':>7} {'E0 L^3':>10} {'E_trial L^3':>12} {'E_HF L^3':>10}")
Ks, E0s = [], []
for n2 in (1, 2, 3):
    modes = mode_set_from_cutoff(L, n2)
    res = trial_state_energy(modes, bu, bd, Vper, phi, kern, j_max=2)
    Ks.append(2 * np.pi / L * np.sqrt(n2))
    E0s.append(res.e0 * L**3)
    print(f"{n2:7d} {res.e0 * L**3:10.5f} {res.e_trial * L**3:12.5f} "
          f"{res.e_hf * L**3:10.5f}")

A = np.vstack([np.ones(len(Ks)), 1.0 / np.asarray(Ks)]).T
coef, *_ = np.linalg.lstsq(A, np.asarray(E0s), rcond=None)
print(f"\nE0 L^3 extrapolated in the mode cutoff: {coef[0]:.4f}")
print(f"  distance to 8 pi a   : {abs(coef[0] / (8 * np.pi * a) - 1):.3f}")
print(f"  distance to Vhat(0)  : {abs(coef[0] / Vper.vhat0 - 1):.3f}")
print("the interaction energy is governed by the scattering length.\n")

modes = mode_set_from_cutoff(L, 3)
print("scattering-equation cancellation <xi|(T1 + T2 + Q4~^r)|xi>, xi = T Omega:")
for scale in (1.0, 0.5):
    r = t_operator_residual(modes, bu, bd, Vper, nsol, phi, kern, scale=scale)
    label = "scattering phi" if scale == 1.0 else f"{scale} * phi"
    print(f"  {label:15s}: {r:+.3e}")
