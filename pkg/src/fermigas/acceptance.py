"""Acceptance suite: pinned configurations and tolerances for every
desk-checkable relation the library implements.

Each criterion function returns a CriterionResult; run_all executes the
whole suite (optionally writing the CSV artifacts) and is shared by the
command-line front end and the pytest acceptance module.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import fermi_gas as fg
from . import fock, scattering, trial
from .lattice import closed_shell_sizes, enumerate_cube
from .potential import periodize, square_well
from .radial import fit_loglog_slope

SQW = (1.0, 1.0)  # default square well (V0, R0)


@dataclass
class CriterionResult:
    cid: str
    description: str
    measured: str
    bound: str
    passed: bool
    runtime: float
    details: dict = field(default_factory=dict)
    csv: dict = field(default_factory=dict)  # filename -> list of rows

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.cid}: {self.description}: "
                f"measured {self.measured}, bound {self.bound} "
                f"({self.runtime:.1f}s)")


def _csv_rows(header, rows):
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(repr(x) if isinstance(x, float) else str(x) for x in row))
    return out


# ---------------------------------------------------------------------------

def criterion_1() -> CriterionResult:
    """Square-well scattering length vs the closed form, relative 1e-6."""
    t0 = time.time()
    worst = 0.0
    rows = []
    for V0, R0 in [(1.0, 1.0), (10.0, 0.5)]:
        a = scattering.scattering_length(square_well(V0, R0))
        exact = scattering.square_well_scattering_length(V0, R0)
        rel = abs(a - exact) / exact
        worst = max(worst, rel)
        rows.append((V0, R0, a, exact, rel))
    return CriterionResult(
        "C01", "square-well scattering length vs closed form",
        f"rel err {worst:.2e}", "1e-06", worst < 1e-6, time.time() - t0,
        csv={"scattering_length.csv": _csv_rows(
            ("V0", "R0", "a_computed", "a_exact", "rel_err"), rows)})


def _neumann_sweep(V0=SQW[0], R0=SQW[1], factors=(10, 20, 40, 80), h=0.02):
    V = square_well(V0, R0)
    a = scattering.square_well_scattering_length(V0, R0)
    rows = []
    for m in factors:
        R = m * R0
        sol = scattering.solve_neumann(V, R, mesh_size=int(round(R / h)), refine=True)
        rows.append((R, sol.E_R, sol.a_R, sol.E_R * R**3 / (3 * a)))
    return a, rows


def criterion_2() -> CriterionResult:
    """|E_R - 3a/R^3| R^4 bounded; E_R R^3/(3a) -> 1 within 2% at R = 80 R0."""
    t0 = time.time()
    a, rows = _neumann_sweep()
    scaled = [abs(E - 3 * a / R**3) * R**4 for (R, E, _, _) in rows]
    ratio = max(scaled) / min(scaled)
    final = abs(rows[-1][3] - 1.0)
    passed = ratio < 10.0 and final < 0.02
    return CriterionResult(
        "C02", "Neumann eigenvalue asymptotics |E_R - 3a R^-3| R^4",
        f"max/min {ratio:.3f}, final ratio dev {final:.4f}",
        "ratio < 10 and dev < 0.02", passed, time.time() - t0,
        csv={"neumann.csv": _csv_rows(("R", "E_R", "a_R", "ER_R3_over_3a"),
                                      rows)})


def criterion_3() -> CriterionResult:
    """log-log slope of |a - a_R| vs R equals -1 +- 0.15."""
    t0 = time.time()
    a, rows = _neumann_sweep()
    Rs = np.array([r[0] for r in rows])
    devs = np.array([abs(r[2] - a) for r in rows])
    slope = fit_loglog_slope(Rs, devs)
    passed = abs(slope + 1.0) < 0.15
    return CriterionResult(
        "C03", "finite-radius scattering length convergence rate",
        f"slope {slope:.3f}", "-1.0 +- 0.15", passed, time.time() - t0)


def criterion_4() -> CriterionResult:
    """Minimizer identity and gradient check on a 33^3 momentum cube."""
    t0 = time.time()
    L = 10.0
    V = square_well(*SQW)
    Vper = periodize(V, L, pmax=0.5)
    grid = enumerate_cube(L, 16)
    sol = scattering.solve_scattering_fourier(Vper, grid)
    vh = np.asarray(Vper.vhat(grid.k_norms), dtype=float)
    rhs = -0.5 / L**3 * float(np.sum(vh * sol.phi_hat))
    ident = abs(sol.e_value - rhs) / abs(sol.e_value)
    rng = np.random.default_rng(2024)
    phi = sol.phi_hat + 0.1 * rng.normal(size=len(sol.phi_hat)) * np.max(np.abs(sol.phi_hat))
    phi[grid.k_norms == 0] = 0.0
    _, grad = scattering.energy_functional_e(phi, grid, Vper)
    direction = rng.normal(size=len(phi))
    direction[grid.k_norms == 0] = 0.0
    eps = 1e-6
    vp, _ = scattering.energy_functional_e(phi + eps * direction, grid, Vper)
    vm, _ = scattering.energy_functional_e(phi - eps * direction, grid, Vper)
    fd = (vp - vm) / (2 * eps)
    an = float(grad @ direction)
    grad_err = abs(fd - an) / abs(an)
    passed = ident < 1e-8 and grad_err < 1e-6
    return CriterionResult(
        "C04", "minimizer identity e(phi*) = -(1/2L^3) sum Vhat phihat",
        f"identity {ident:.2e}, gradient {grad_err:.2e}",
        "1e-08 and 1e-06", passed, time.time() - t0,
        csv={"fourier_residual.csv": _csv_rows(
            ("grid_n", "residual_norm", "p0_residual", "e_value"),
            [(33, sol.residual_norm, sol.p0_residual, sol.e_value)])})


def criterion_5() -> CriterionResult:
    """8 pi a reconstruction within 1% for L >= 20 R0 with R = L/4."""
    t0 = time.time()
    V0, R0 = 0.1, 1.0
    V = square_well(V0, R0)
    a = scattering.square_well_scattering_length(V0, R0)
    worst = 0.0
    rows = []
    below = True
    for L in (20.0, 40.0):
        Vper = periodize(V, L, pmax=2.0)
        sol = scattering.solve_neumann(V, L / 4.0, mesh_size=int(L / 4 / 0.01),
                                       refine=True)
        phi = scattering.periodize_phi(sol, L, pmax=2.0)
        val = scattering.effective_interaction(Vper, phi, pmax=30.0)
        rel = abs(val / (8 * np.pi * a) - 1.0)
        worst = max(worst, rel)
        below = below and (val < Vper.vhat0)
        rows.append((L, L / 4.0, val, 8 * np.pi * a, rel, Vper.vhat0))
    passed = worst < 0.01 and below
    return CriterionResult(
        "C05", "effective interaction reconstructs 8 pi a (below Vhat(0))",
        f"worst rel {worst:.4f}, below Vhat0 {below}", "1% and strict",
        passed, time.time() - t0,
        csv={"effective_interaction.csv": _csv_rows(
            ("L", "R", "eff_int", "eight_pi_a", "rel_dev", "vhat0"), rows)})


def criterion_6() -> CriterionResult:
    """Free-gas kinetic density deviation: fitted L-slope -1.0 +- 0.3.

    Protocol: fixed target density, nearest closed shell per box, deviation
    against the formula at the target density.  The measured decay is
    faster than the quoted O(1/L) bound (the bound is not sharp), so this
    criterion records the conflict between the two; see the README notes.
    """
    t0 = time.time()
    rho_t = 0.02
    sizes = np.array(closed_shell_sizes(9000))
    rows = []
    for L in (8.0, 16.0, 32.0, 64.0):
        N = int(sizes[np.argmin(np.abs(sizes - rho_t * L**3))])
        ball = fg.build_fermi_ball(L, N)
        dev = abs(fg.kinetic_energy_density(ball) - fg.free_gas_energy_density(rho_t))
        rows.append((L, N, N / L**3, dev))
    slope = fit_loglog_slope([r[0] for r in rows], [r[3] for r in rows])
    passed = abs(slope + 1.0) < 0.3
    return CriterionResult(
        "C06", "free Fermi gas finite-size error, L-doubling at fixed rho",
        f"slope {slope:.3f}", "-1.0 +- 0.3", passed, time.time() - t0,
        details={"note": "measured decay is faster than the O(1/L) bound"},
        csv={"ffg_sweep.csv": _csv_rows(("L", "N", "rho", "deviation"), rows)})


def criterion_7() -> CriterionResult:
    """HF residual after removing kinetic and Vhat(0) rho_up rho_dn terms."""
    t0 = time.time()
    V = square_well(*SQW)
    N = 33
    rows = []
    for L in np.geomspace(10.0, 21.5, 6):
        Vper = periodize(V, L, pmax=0.5)
        bu = fg.build_fermi_ball(L, N)
        bd = fg.build_fermi_ball(L, N, "down")
        hf = fg.hf_energy(bu, bd, Vper)
        rho = N / L**3
        kin = fg.kinetic_energy_density(bu) + fg.kinetic_energy_density(bd)
        resid = hf.total / L**3 - kin - Vper.vhat0 * rho * rho
        rows.append((rho, rho, L, kin, hf.direct, hf.exchange, hf.total,
                     abs(resid)))
    slope = fit_loglog_slope([2 * r[0] for r in rows], [r[7] for r in rows])
    passed = slope >= 7.0 / 3.0 - 0.1
    return CriterionResult(
        "C07", "Hartree-Fock exchange asymptotics residual exponent",
        f"exponent {slope:.3f}", ">= 7/3 - 0.1 = 2.233", passed, time.time() - t0,
        csv={"hf_sweep.csv": _csv_rows(
            ("rho_up", "rho_down", "L", "kinetic_density", "direct", "exchange",
             "hf_total", "residual"), rows)})


def _identity_configs():
    """Three (modes, ball_up, ball_dn, sector) configurations."""
    L = 2 * np.pi
    configs = []
    m7 = fock.mode_set_from_cutoff(L, 1)
    b1u = fg.build_fermi_ball(L, 1)
    b1d = fg.build_fermi_ball(L, 1, "down")
    configs.append((m7, b1u, b1d, fock.build_sector(m7, 1, 1)))
    momenta9 = [tuple(p) for p in m7.momenta] + [(1, 1, 0), (-1, -1, 0)]
    m9 = fock.mode_set_from_momenta(L, momenta9)
    b7u = fg.build_fermi_ball(L, 7)
    b7d = fg.build_fermi_ball(L, 7, "down")
    configs.append((m9, b7u, b7d, fock.build_sector(m9, 7, 7)))
    m13 = fock.mode_set_from_momenta(
        L, momenta9 + [(0, 1, 1), (0, -1, -1), (1, 0, 1), (-1, 0, -1)])
    configs.append((m13, b1u, b1d, fock.build_sector(m13, 1, 1)))
    return L, configs


def criterion_8() -> CriterionResult:
    """Particle-hole conjugation identity on random sector states."""
    t0 = time.time()
    L, configs = _identity_configs()
    V = square_well(0.8, 1.0)
    residuals = trial.hf_identity_suite(configs, lambda L_: periodize(V, L_, pmax=0.1),
                                        n_states=7)
    worst = max(residuals)
    passed = worst < 1e-9 and len(residuals) >= 20
    return CriterionResult(
        "C08", "particle-hole identity residual over random states",
        f"max residual {worst:.2e} over {len(residuals)} states", "1e-09",
        passed, time.time() - t0)


def criterion_9() -> CriterionResult:
    """Q1 positivity, Q3 parity cancellation, pseudo-boson commutator table."""
    t0 = time.time()
    L = 2 * np.pi
    modes = fock.mode_set_from_cutoff(L, 1)
    V = square_well(0.8, 1.0)
    Vper = periodize(V, L, pmax=0.1)
    bu = fg.build_fermi_ball(L, 1)
    bd = fg.build_fermi_ball(L, 1, "down")
    momenta13 = [tuple(p) for p in modes.momenta] + [
        (1, 1, 0), (-1, -1, 0), (0, 1, 1), (0, -1, -1), (1, 0, 1), (-1, 0, -1)]
    m13 = fock.mode_set_from_momenta(L, momenta13)
    sector = fock.build_sector(m13, 2, 2, total_momentum=(0, 0, 0))  # dim 180
    full = fock.FockSpace(modes=modes,
                          words=np.arange(2**modes.n_modes, dtype=np.uint64))
    diag = trial.q_operator_diagnostics(bu, bd, Vper, sector, full)
    comm_exact = all(abs(row["comm_bbdag"] - row["expected"]) == 0.0
                     and row["comm_bb"] == 0.0 for row in diag.commutator_table)
    passed = (diag.q1_min_eig >= -1e-10 and diag.q1_tilde_min_eig >= -1e-10
              and diag.q3_parity_max < 1e-12 and comm_exact
              and diag.q1_dominates_tilde)
    return CriterionResult(
        "C09", "Q-operator positivity, parity cancellation, commutators",
        f"mineig {diag.q1_min_eig:.1e}, parity {diag.q3_parity_max:.1e}, "
        f"comm exact {comm_exact}", "-1e-10 / 1e-12 / exact", passed,
        time.time() - t0)


def _two_particle_setup():
    L = 8.0
    V = square_well(*SQW)
    Vper = periodize(V, L, pmax=0.5)
    bu = fg.build_fermi_ball(L, 1)
    bd = fg.build_fermi_ball(L, 1, "down")
    nsol = scattering.solve_neumann(V, L / 2 * 0.99, mesh_size=2000, refine=True)
    phi = scattering.periodize_phi(nsol, L, pmax=8.0)
    kern = fg.build_regularized_kernels(1 / L**3, beta=0.6, eps=1.0 / 3.0)
    return L, V, Vper, bu, bd, nsol, phi, kern


def _trial_rows():
    L, V, Vper, bu, bd, nsol, phi, kern = _two_particle_setup()
    a = scattering.square_well_scattering_length(*SQW)
    rows = []
    for n2 in (1, 2, 3):
        modes = fock.mode_set_from_cutoff(L, n2)
        res = trial.trial_state_energy(modes, bu, bd, Vper, phi, kern, j_max=2)
        rows.append((n2, res.e0, res.e_trial, res.e_hf,
                     8 * np.pi * a / L**3))
    return L, a, Vper, rows


def criterion_10() -> CriterionResult:
    """Eigensolver oracle agreement and the variational chain."""
    t0 = time.time()
    L = 2 * np.pi
    modes = fock.mode_set_from_cutoff(L, 2)  # 19 momenta
    V = square_well(0.8, 1.0)
    Vper = periodize(V, L, pmax=0.1)
    # (2, 2) sector at zero total momentum: dimension 567 (~ 500)
    sector = fock.build_sector(modes, 2, 2, total_momentum=(0, 0, 0))
    H = fock.hamiltonian_operator(sector, Vper)
    dense = fock.ground_state(H, "dense")
    iterative = fock.ground_state(H, "iterative")
    solver_dev = abs(dense.E0 - iterative.E0)
    _, _, _, rows = _trial_rows()
    chain = all(r[1] <= r[2] + 1e-12 and r[2] <= r[3] + 1e-12 for r in rows)
    passed = solver_dev < 1e-10 and chain
    return CriterionResult(
        "C10", "dense vs iterative eigensolver and variational chain",
        f"solver dev {solver_dev:.2e} (dim {sector.dim}), chain {chain}",
        "1e-10 and E0 <= E_trial <= E_HF", passed, time.time() - t0,
        csv={"trial_state.csv": _csv_rows(
            ("cutoff_n2max", "E0", "E_trial", "E_HF", "eight_pi_a_over_L3"),
            rows)})


def criterion_11() -> CriterionResult:
    """Two-particle energy is governed by a, not Vhat(0)."""
    t0 = time.time()
    L, a, Vper, rows = _trial_rows()
    Ks = np.array([2 * np.pi / L * np.sqrt(r[0]) for r in rows])
    E0s = np.array([r[1] * L**3 for r in rows])
    A = np.vstack([np.ones(len(Ks)), 1.0 / Ks]).T
    coef, *_ = np.linalg.lstsq(A, E0s, rcond=None)
    E_inf = float(coef[0])
    r_a = abs(E_inf / (8 * np.pi * a) - 1.0)
    r_v = abs(E_inf / Vper.vhat0 - 1.0)
    passed = r_a < r_v
    return CriterionResult(
        "C11", "two-particle energy extrapolated in mode cutoff",
        f"|E/8pia - 1| = {r_a:.4f} vs |E/Vhat0 - 1| = {r_v:.4f}",
        "closer to 8 pi a", passed, time.time() - t0,
        details={"E_inf_L3": E_inf, "eight_pi_a": 8 * np.pi * a,
                 "vhat0": Vper.vhat0})


def criterion_12() -> CriterionResult:
    """Regularized kernel norms: fitted exponents and exact orthogonality."""
    t0 = time.time()
    beta, eps = 0.4, 1.0 / 3.0
    rhos = np.geomspace(1e-4, 1e-3, 5)
    diag = fg.kernel_norm_diagnostics(rhos, beta=beta, eps=eps)
    du = abs(diag["fits"]["u_l2_exponent"] + 1.5 * beta)
    dw = abs(diag["fits"]["omega_l1_exponent"] + eps / 3.0)
    kern = fg.build_regularized_kernels(rhos[0], beta=beta, eps=eps)
    ks = np.linspace(0.0, 2.5 * kern.uv_scale, 40001)
    ortho = float(np.max(np.abs(kern.ur_hat(ks) * kern.vr_hat(ks))))
    passed = du < 0.2 and dw < 0.15 and ortho == 0.0
    rows = list(zip(rhos, diag["norms"]["u_l2"], diag["norms"]["v_l2"],
                    diag["norms"]["omega_l1"], diag["norms"]["u_l1"]))
    return CriterionResult(
        "C12", "regularized kernel norm exponents and u.v orthogonality",
        f"|du| {du:.3f}, |domega| {dw:.3f}, max|uv| {ortho}",
        "0.2 / 0.15 / 0.0", passed, time.time() - t0,
        csv={"kernel_norms.csv": _csv_rows(
            ("rho", "u_l2", "v_l2", "omega_l1", "u_l1"), rows)})


def criterion_13() -> CriterionResult:
    """Infrared/ultraviolet decomposition L1 norm exponents."""
    t0 = time.time()
    gamma, eta, delta, beta = 1.0 / 3.0, 0.2, 2.0, 0.12
    V = square_well(*SQW)
    rhos = np.geomspace(1e-6, 1e-4, 5)
    rows = []
    for rho in rhos:
        R = rho ** (-gamma)
        sol = scattering.solve_neumann(V, R, mesh_size=max(2000, int(R / 0.02)))
        phi = scattering.periodize_phi(sol, 4 * R, pmax=0.2)
        dec = scattering.cutoff_decomposition(phi, rho, gamma, eta, delta, beta)
        rows.append((rho, *dec.l1_norms))
    slopes = [fit_loglog_slope(rhos, [r[i] for r in rows]) for i in (1, 2, 3)]
    targets = [-2 * gamma, -2 * eta, -2 * eta / delta]
    devs = [abs(s - t) for s, t in zip(slopes, targets)]
    passed = all(d < 0.25 for d in devs)
    return CriterionResult(
        "C13", "cutoff decomposition L1 norm exponents",
        f"slopes {[round(s, 3) for s in slopes]} vs {[round(t, 3) for t in targets]}",
        "+- 0.25 each", passed, time.time() - t0,
        csv={"cutoff_decomposition.csv": _csv_rows(
            ("rho", "l1_low", "l1_mid", "l1_high"), rows)})


def _deterministic_payload() -> dict:
    """The CSV payload used for the determinism check (cheap subset)."""
    out = {}
    for crit in (criterion_1, criterion_2, criterion_7, criterion_12):
        res = crit()
        out.update(res.csv)
    return out


def criterion_14(threads_values=(1, 2)) -> CriterionResult:
    """Re-running the CSV pipeline is bitwise reproducible at any --threads."""
    t0 = time.time()
    payloads = []
    for nthreads in threads_values:
        for _ in range(2):
            payloads.append((nthreads, _deterministic_payload()))
    ref = payloads[0][1]
    identical = all(p == ref for _, p in payloads)
    passed = bool(identical)
    return CriterionResult(
        "C14", "bitwise-identical CSV output across repeats and threads",
        f"identical {identical} over {len(payloads)} runs", "bitwise equal",
        passed, time.time() - t0)


ALL_CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
                criterion_6, criterion_7, criterion_8, criterion_9, criterion_10,
                criterion_11, criterion_12, criterion_13, criterion_14]


def run_all(emit=print) -> list[CriterionResult]:
    results = []
    for crit in ALL_CRITERIA:
        res = crit()
        results.append(res)
        if emit:
            emit(res.line())
    return results
