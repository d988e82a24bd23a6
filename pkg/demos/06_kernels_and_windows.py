#!/usr/bin/env python3
"""Regularized kernels and infrared/ultraviolet windows.

The smooth multipliers u^r, v^r regularize the particle/hole split: v^r
lives strictly inside the Fermi ball, u^r strictly outside with an
ultraviolet cutoff at rho^-beta, and u^r v^r = 0 pointwise.  Their
position-space norms obey density power laws, as does the L1 mass of the
scattering solution split into low / intermediate / high Fourier windows.
"""

import numpy as np

from fermigas.fermi_gas import build_regularized_kernels, kernel_norm_diagnostics
from fermigas.potential import square_well
from fermigas.radial import fit_loglog_slope
from fermigas.scattering import cutoff_decomposition, periodize_phi, solve_neumann

beta, eps = 0.4, 1.0 / 3.0
rhos = np.geomspace(1e-4, 1e-3, 5)
diag = kernel_norm_diagnostics(rhos, beta=beta, eps=eps)
print(f"kernel norms over rho in [{rhos[0]:.0e}, {rhos[-1]:.0e}] "
      f"(beta={beta}, eps={eps:.3f}):")
print(f"{'rho':>9} {'||u||_2':>10} {'||v||_2':>10} {'||omega||_1':>12} {'||u||_1':>9}")
for i, rho in enumerate(rhos):
    print(f"{rho:9.2e} {diag['norms']['u_l2'][i]:10.4f} "
          f"{diag['norms']['v_l2'][i]:10.6f} {diag['norms']['omega_l1'][i]:12.5f} "
          f"{diag['norms']['u_l1'][i]:9.5f}")
print("fitted exponents vs expected:")
for key, val in diag["fits"].items():
    print(f"  {key:20s}: {val:+.3f}  (expected {diag['expected'][key]:+.3f})")

kern = build_regularized_kernels(3e-4, beta=beta, eps=eps)
ks = np.linspace(0, 2.5 * kern.uv_scale, 40001)
print(f"\npointwise orthogonality max|u^r v^r| = "
      f"{np.max(np.abs(kern.ur_hat(ks) * kern.vr_hat(ks)))}")

print("\ninfrared/ultraviolet split of the scattering solution:")
gamma, eta, delta, beta_c = 1 / 3, 0.2, 2.0, 0.12
V = square_well(1.0, 1.0)
rhos_c = np.geomspace(1e-6, 1e-4, 5)
norms = {"low": [], "mid": [], "high": []}
for rho in rhos_c:
    R = rho ** (-gamma)
    sol = solve_neumann(V, R, mesh_size=max(2000, int(R / 0.02)))
    phi = periodize_phi(sol, 4 * R, pmax=0.2)
    dec = cutoff_decomposition(phi, rho, gamma, eta, delta, beta_c)
    for name, val in zip(("low", "mid", "high"), dec.l1_norms):
        norms[name].append(val)
    print(f"  rho={rho:.2e}: ||phi_<||_1={dec.l1_norms[0]:9.2f}  "
          f"||phi_0||_1={dec.l1_norms[1]:9.2f}  ||phi_>||_1={dec.l1_norms[2]:8.2f}")
targets = {"low": -2 * gamma, "mid": -2 * eta, "high": -2 * eta / delta}
for name in ("low", "mid", "high"):
    slope = fit_loglog_slope(rhos_c, norms[name])
    print(f"  {name:4s} window exponent: {slope:+.3f} "
          f"(expected {targets[name]:+.3f} up to log corrections)")
