"""Command-line front end: experiment sweeps, CSV emission, and the
acceptance-suite driver.

Config files are flat ``section.key = value`` text; lists are comma
separated.  Exit codes: 0 success, 1 criterion failure, 2 usage/config
error.  Floating-point cells use full round-trip precision, and sweeps are
parallelized over a thread pool with a fixed reduction order, so outputs
are bitwise reproducible at any --threads value.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import acceptance
from . import fermi_gas as fg
from . import fock, scattering, trial
from .errors import AdmissibilityError, FermigasError
from .lattice import enumerate_cube
from .potential import load_tabulated, periodize, smooth_bump, square_well
from .radial import fit_loglog_slope

EXIT_OK, EXIT_CRITERION, EXIT_USAGE = 0, 1, 2


def parse_config(path: Path) -> dict[str, str]:
    cfg: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'section.key = value'")
        key, value = line.split("=", 1)
        cfg[key.strip()] = value.strip()
    return cfg


def cfg_float(cfg, key, default):
    return float(cfg.get(key, default))


def cfg_int(cfg, key, default):
    return int(cfg.get(key, default))


def cfg_list(cfg, key, default):
    raw = cfg.get(key, default)
    if isinstance(raw, str):
        return [float(tok) for tok in raw.split(",") if tok.strip()]
    return list(raw)


def build_potential(cfg):
    kind = cfg.get("potential.type", "square_well")
    if kind == "square_well":
        return square_well(cfg_float(cfg, "potential.V0", 1.0),
                           cfg_float(cfg, "potential.R0", 1.0))
    if kind == "smooth_bump":
        k = cfg.get("potential.k", "inf")
        korder = None if k == "inf" else int(k)
        return smooth_bump(cfg_float(cfg, "potential.V0", 1.0),
                           cfg_float(cfg, "potential.R0", 1.0), korder)
    if kind == "tabulated":
        return load_tabulated(cfg["potential.file"])
    raise ValueError(f"unknown potential.type {kind!r}")


def write_csv(out_dir: Path, name: str, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(x) if isinstance(x, float) else str(x)
                              for x in row))
    (out_dir / name).write_text("\n".join(lines) + "\n")


def write_gnuplot(out_dir: Path, name: str, csv_name: str, columns, title):
    using = ":".join(str(c) for c in columns)
    script = (f'set datafile separator ","\nset key autotitle columnhead\n'
              f'set logscale xy\nset title "{title}"\n'
              f'plot "{csv_name}" using {using} with linespoints\n')
    (out_dir / name).write_text(script)


def ordered_map(fn, items, threads: int):
    """Parallel map with results gathered in input order (deterministic)."""
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_scattering(cfg, out_dir: Path, threads: int, seed: int) -> int:
    V = build_potential(cfg)
    R0 = V.support_radius
    a, a_err = scattering.scattering_length(V, full_output=True)

    factors = cfg_list(cfg, "scattering.R_factors", "10,20,40,80")
    mesh_h = cfg_float(cfg, "scattering.mesh_h", 0.02) * R0

    def solve_one(m):
        R = m * R0
        sol = scattering.solve_neumann(V, R, mesh_size=int(round(R / mesh_h)),
                                       refine=True)
        ratio = sol.E_R * R**3 / (3 * a) if a > 0 else 0.0
        return (R, sol.E_R, sol.a_R, ratio)

    rows = ordered_map(solve_one, factors, threads)
    write_csv(out_dir, "neumann.csv", ("R", "E_R", "a_R", "ER_R3_over_3a"), rows)
    write_gnuplot(out_dir, "neumann.gp", "neumann.csv", (1, 2),
                  "Neumann eigenvalue vs ball radius")

    v0s = cfg_list(cfg, "born.V0_list", "0.01,0.02,0.05,0.1,0.2,0.3")
    born_rows = []
    for v0 in v0s:
        Vb = square_well(v0, R0)
        a1, a2 = scattering.born_series(Vb, 2)
        ab = scattering.scattering_length(Vb)
        born_rows.append((v0, a1, a2, ab))
    write_csv(out_dir, "born.csv", ("V0", "a1", "a2", "a"), born_rows)
    write_gnuplot(out_dir, "born.gp", "born.csv", (1, 4), "Born series vs exact")

    L = cfg_float(cfg, "fourier.L", 10.0)
    n = cfg_int(cfg, "fourier.grid_n", 8)
    Vper = periodize(V, L, pmax=0.5)
    sol = scattering.solve_scattering_fourier(Vper, enumerate_cube(L, n))
    write_csv(out_dir, "fourier_residual.csv",
              ("grid_n", "residual_norm", "p0_residual", "e_value"),
              [(2 * n + 1, sol.residual_norm, sol.p0_residual, sol.e_value)])
    print(f"scattering: a = {a!r} +- {a_err:.1e}; wrote neumann.csv, "
          f"born.csv, fourier_residual.csv to {out_dir}")
    return EXIT_OK


def cmd_hf_sweep(cfg, out_dir: Path, threads: int, seed: int) -> int:
    V = build_potential(cfg)
    N = cfg_int(cfg, "hf.N_per_spin", 33)
    Ls = cfg_list(cfg, "hf.L_list", "10,11.5,13.2,15.2,17.5,20.1")
    Ls = sorted(set(Ls))
    a = scattering.scattering_length(V)

    def one(L):
        Vper = periodize(V, L, pmax=0.5)
        bu = fg.build_fermi_ball(L, N)
        bd = fg.build_fermi_ball(L, N, "down")
        hf = fg.hf_energy(bu, bd, Vper)
        rho = N / L**3
        kin = fg.kinetic_energy_density(bu) + fg.kinetic_energy_density(bd)
        formula = fg.eval_energy_formula(rho, rho, a).value
        resid = hf.total / L**3 - kin - Vper.vhat0 * rho * rho
        return (rho, rho, L, kin, hf.direct, hf.exchange, hf.total,
                formula, abs(resid))

    rows = ordered_map(one, Ls, threads)
    slope = fit_loglog_slope([2 * r[0] for r in rows], [r[8] for r in rows])
    out_rows = [r[:8] + (slope,) for r in rows]
    write_csv(out_dir, "hf_sweep.csv",
              ("rho_up", "rho_down", "L", "kinetic", "direct", "exchange",
               "hf_total", "formula_total", "residual_exponent_fit"), out_rows)
    write_gnuplot(out_dir, "hf_sweep.gp", "hf_sweep.csv", (1, 9),
                  "HF residual exponent")
    print(f"hf-sweep: residual exponent fit {slope!r}; wrote hf_sweep.csv")
    return EXIT_OK


def cmd_ed(cfg, out_dir: Path, threads: int, seed: int) -> int:
    L = cfg_float(cfg, "ed.L", 8.0)
    V = build_potential(cfg)
    Vper = periodize(V, L, pmax=0.5)
    cutoffs = [int(x) for x in cfg_list(cfg, "ed.n2max_list", "1,2,3")]
    dim_cap = cfg_int(cfg, "ed.dim_cap", fock.DEFAULT_DIM_CAP)
    a = scattering.scattering_length(V)
    bu = fg.build_fermi_ball(L, 1)
    bd = fg.build_fermi_ball(L, 1, "down")
    nsol = scattering.solve_neumann(V, L / 2 * 0.99, mesh_size=2000, refine=True)
    phi = scattering.periodize_phi(nsol, L, pmax=8.0)
    kern = fg.build_regularized_kernels(1 / L**3, beta=0.6, eps=1.0 / 3.0)

    spec_rows, trial_rows = [], []
    report = []
    for n2 in cutoffs:
        modes = fock.mode_set_from_cutoff(L, n2)
        sector = fock.build_sector(modes, 1, 1, total_momentum=(0, 0, 0),
                                   dim_cap=dim_cap)
        H = fock.hamiltonian_operator(sector, Vper)
        gs = fock.ground_state(H)
        res = trial.trial_state_energy(modes, bu, bd, Vper, phi, kern, j_max=2)
        spec_rows.append((n2, sector.dim, gs.E0, gs.residual, gs.method,
                          H.dropped_terms))
        trial_rows.append((n2, res.e0, res.e_trial, res.e_hf,
                           8 * np.pi * a / L**3))
        report.append(f"cutoff n2max={n2}: dim={sector.dim} "
                      f"dropped_terms={H.dropped_terms}")

    # identity and Q diagnostics on a small reference configuration
    Lref = 2 * np.pi
    modes7 = fock.mode_set_from_cutoff(Lref, 1)
    Vref = periodize(square_well(0.8, 1.0), Lref, pmax=0.1)
    b1u = fg.build_fermi_ball(Lref, 1)
    b1d = fg.build_fermi_ball(Lref, 1, "down")
    sec = fock.build_sector(modes7, 1, 1)
    rng = np.random.default_rng(seed)
    cache: dict = {}
    residuals = []
    for _ in range(10):
        psi = rng.normal(size=sec.dim)
        psi /= np.linalg.norm(psi)
        residuals.append(fock.hf_identity_residual(
            modes7, b1u, b1d, Vref, psi, sec, _cache=cache))
    report.append(f"particle-hole identity: max residual {max(residuals)!r} "
                  f"over {len(residuals)} random states")
    full = fock.FockSpace(modes=modes7,
                          words=np.arange(2**modes7.n_modes, dtype=np.uint64))
    sec22 = fock.build_sector(modes7, 2, 2, total_momentum=(0, 0, 0))
    qd = trial.q_operator_diagnostics(b1u, b1d, Vref, sec22, full, seed=seed)
    report.append(f"Q1 min eigenvalue {qd.q1_min_eig!r}; "
                  f"Q1~ min eigenvalue {qd.q1_tilde_min_eig!r}")
    report.append(f"Q3 parity cancellation max |<psi,Q3 psi>| = {qd.q3_parity_max!r}")
    report.append(f"Q1 >= Q1~ on random vectors: {qd.q1_dominates_tilde}")
    for row in qd.commutator_table:
        report.append(f"pseudo-boson commutator p={row['p']}: "
                      f"[b,b+] = {row['comm_bbdag']!r} (expected {row['expected']}), "
                      f"[b,b] = {row['comm_bb']!r}")

    write_csv(out_dir, "spectrum.csv",
              ("cutoff_n2max", "dim", "E0", "residual", "method",
               "dropped_terms"), spec_rows)
    write_csv(out_dir, "trial_state.csv",
              ("cutoff_n2max", "E0", "E_trial", "E_HF", "eight_pi_a_over_L3"),
              trial_rows)
    (out_dir / "identity_report.txt").write_text("\n".join(report) + "\n")
    print(f"ed: wrote spectrum.csv, trial_state.csv, identity_report.txt to {out_dir}")
    return EXIT_OK


def cmd_kernels(cfg, out_dir: Path, threads: int, seed: int) -> int:
    beta = cfg_float(cfg, "kernels.beta", 0.4)
    eps = cfg_float(cfg, "kernels.eps", 1.0 / 3.0)
    rhos = np.asarray(cfg_list(cfg, "kernels.rho_list",
                               "1e-4,1.78e-4,3.16e-4,5.62e-4,1e-3"))
    diag = fg.kernel_norm_diagnostics(rhos, beta=beta, eps=eps)
    rows = list(zip(rhos, diag["norms"]["u_l2"], diag["norms"]["v_l2"],
                    diag["norms"]["omega_l1"], diag["norms"]["u_l1"]))
    write_csv(out_dir, "kernel_norms.csv",
              ("rho", "u_l2", "v_l2", "omega_l1", "u_l1"), rows)
    write_gnuplot(out_dir, "kernel_norms.gp", "kernel_norms.csv", (1, 2),
                  "regularized kernel norms")

    gamma = cfg_float(cfg, "cutoff.gamma", 1.0 / 3.0)
    eta = cfg_float(cfg, "cutoff.eta", 0.2)
    delta = cfg_float(cfg, "cutoff.delta", 2.0)
    beta_c = cfg_float(cfg, "cutoff.beta", 0.12)
    rhos_c = np.asarray(cfg_list(cfg, "cutoff.rho_list", "1e-6,1e-5,1e-4"))
    V = build_potential(cfg)

    def one(rho):
        R = rho ** (-gamma)
        sol = scattering.solve_neumann(V, R, mesh_size=max(2000, int(R / 0.02)))
        phi = scattering.periodize_phi(sol, 4 * R, pmax=0.2)
        dec = scattering.cutoff_decomposition(phi, rho, gamma, eta, delta, beta_c)
        return (rho, *dec.l1_norms)

    rows_c = ordered_map(one, list(rhos_c), threads)
    write_csv(out_dir, "cutoff_decomposition.csv",
              ("rho", "l1_low", "l1_mid", "l1_high"), rows_c)
    print("kernels: fitted exponents "
          + ", ".join(f"{k}={v!r}" for k, v in diag["fits"].items()))
    return EXIT_OK


def cmd_accept(cfg, out_dir: Path, threads: int, seed: int) -> int:
    results = acceptance.run_all(emit=print)
    lines = [r.line() for r in results]
    for res in results:
        for name, rows in res.csv.items():
            (out_dir / name).write_text("\n".join(rows) + "\n")
    n_fail = sum(1 for r in results if not r.passed)
    lines.append(f"summary: {len(results) - n_fail}/{len(results)} criteria passed")
    (out_dir / "accept_summary.txt").write_text("\n".join(lines) + "\n")
    print(lines[-1])
    return EXIT_OK if n_fail == 0 else EXIT_CRITERION


COMMANDS = {
    "scattering": cmd_scattering,
    "hf-sweep": cmd_hf_sweep,
    "ed": cmd_ed,
    "kernels": cmd_kernels,
    "accept": cmd_accept,
}


CSV_COLUMNS = """\
CSV outputs (full round-trip float precision, one header row each):
  scattering:
    neumann.csv           R, E_R, a_R, ER_R3_over_3a
    born.csv              V0, a1, a2, a
    fourier_residual.csv  grid_n, residual_norm, p0_residual, e_value
  hf-sweep:
    hf_sweep.csv          rho_up, rho_down, L, kinetic, direct, exchange,
                          hf_total, formula_total, residual_exponent_fit
  ed:
    spectrum.csv          cutoff_n2max, dim, E0, residual, method, dropped_terms
    trial_state.csv       cutoff_n2max, E0, E_trial, E_HF, eight_pi_a_over_L3
    identity_report.txt   operator-identity residuals and Q diagnostics
  kernels:
    kernel_norms.csv      rho, u_l2, v_l2, omega_l1, u_l1
    cutoff_decomposition.csv  rho, l1_low, l1_mid, l1_high
  accept:
    accept_summary.txt plus the criterion CSVs listed above.

Config files are flat 'section.key = value' lines ('#' comments); lists are
comma separated, e.g.  scattering.R_factors = 10,20,40
"""


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fermigas",
        description="Dilute Fermi gas energetics: scattering, Hartree-Fock, "
                    "and Fock-space exact diagonalization sweeps.",
        epilog=CSV_COLUMNS,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("command", choices=sorted(COMMANDS),
                        help="scattering | hf-sweep | ed | kernels | accept")
    parser.add_argument("--config", type=Path, default=None,
                        help="flat 'section.key = value' config file")
    parser.add_argument("--out", type=Path, default=Path("."),
                        help="output directory for CSV files")
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads for independent sweep points")
    parser.add_argument("--seed", type=int, default=2024,
                        help="seed for random test vectors")
    args = parser.parse_args(argv)

    cfg: dict[str, str] = {}
    if args.config is not None:
        if not args.config.exists():
            print(f"error: config file {args.config} not found", file=sys.stderr)
            return EXIT_USAGE
        try:
            cfg = parse_config(args.config)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, args.out, max(1, args.threads),
                                      args.seed)
    except AdmissibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FermigasError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
