"""Trial-state energetics and operator-identity diagnostics.

Combines the scattering solution (Neumann phi, regularized kernels) with the
Fock-space machinery: the correlated trial state R T Omega, the scattering
equation cancellation diagnostic, the Q-operator checks, and the spin-sector
orthogonality argument.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .fermi_gas import FermiBall, RegularizedKernels, hf_energy
from .fock import (FockSpace, ModeSet, Operator, b_monomials, build_sector,
                   correlation_structure_apply, ground_state,
                   hamiltonian_operator, operator_from_monomials, pair_tower,
                   particle_hole_map, q_operator, q4r_tilde_operator,
                   spin_operator, t1_operator, t2_operator)
from .potential import PeriodizedPotential
from .scattering import NeumannSolution, PeriodizedPhi


def embed(src: FockSpace, dst: FockSpace, vec: np.ndarray) -> np.ndarray:
    """Embed a vector from src into dst (src words must all appear in dst)."""
    pos = np.searchsorted(dst.words, src.words)
    if np.any(pos >= dst.dim) or np.any(dst.words[np.minimum(pos, dst.dim - 1)] != src.words):
        raise ParameterError("source space is not contained in destination space")
    out = np.zeros(dst.dim, dtype=vec.dtype)
    out[pos] = vec
    return out


@dataclass
class TrialStateResult:
    """Energy of psi = R T Omega on the truncated mode set."""

    e_trial: float
    e_hf: float
    e0: float
    norm_error: float
    tower_dim: int
    sector_dim: int


def correlated_tower_state(modes: ModeSet, ball_up: FermiBall, ball_dn: FermiBall,
                           phi: PeriodizedPhi, kernels: RegularizedKernels,
                           j_max: int = 3, lam: float = 1.0,
                           scale: float = 1.0):
    """(tower space, T_lambda Omega) in the transformed frame.

    scale multiplies the pair kernel phi (used for comparisons against
    rescaled scattering solutions).
    """
    monos = b_monomials(modes, phi, kernels, ball_up, ball_dn)
    tower = pair_tower(modes, ball_up, ball_dn, monos, j_max)
    B = operator_from_monomials(tower, monos, "B")
    if scale != 1.0:
        B = Operator(space=tower, matrix=(scale * B.matrix).tocsr(), name=B.name,
                     dropped_terms=B.dropped_terms)
    omega_vec = np.zeros(tower.dim)
    omega_vec[tower.index(0)] = 1.0
    psi = correlation_structure_apply(lam, B, omega_vec)
    return tower, B, psi


def trial_state_energy(modes: ModeSet, ball_up: FermiBall, ball_dn: FermiBall,
                       Vper: PeriodizedPotential, phi: PeriodizedPhi,
                       kernels: RegularizedKernels, j_max: int = 3,
                       compute_e0: bool = True,
                       e0_method: str = "auto") -> TrialStateResult:
    """<R T Omega, H R T Omega> on the truncated mode set.

    The expectation is exact on the truncated space (matrix elements of H
    within the image of the pair tower).  e0 is the ground state of H on the
    full (N_up, N_dn, P=0) sector for the variational comparison.
    """
    tower, _, psi = correlated_tower_state(modes, ball_up, ball_dn, phi, kernels, j_max)
    norm_err = abs(np.linalg.norm(psi) - 1.0)
    phm = particle_hole_map(modes, ball_up, ball_dn)
    rpsi, image = phm.apply(tower, psi)
    H_img = hamiltonian_operator(image, Vper)
    e_trial = float(np.real(np.vdot(rpsi, H_img.matrix @ rpsi)) / np.vdot(rpsi, rpsi).real)
    e_hf = hf_energy(ball_up, ball_dn, Vper).total
    e0 = np.nan
    sector_dim = 0
    if compute_e0:
        sector = build_sector(modes, ball_up.N, ball_dn.N, total_momentum=(0, 0, 0))
        sector_dim = sector.dim
        H = hamiltonian_operator(sector, Vper)
        e0 = ground_state(H, method=e0_method).E0
    return TrialStateResult(e_trial=e_trial, e_hf=e_hf, e0=float(e0),
                            norm_error=float(norm_err), tower_dim=tower.dim,
                            sector_dim=sector_dim)


def t_operator_residual(modes: ModeSet, ball_up: FermiBall, ball_dn: FermiBall,
                        Vper: PeriodizedPotential, neumann: NeumannSolution,
                        phi: PeriodizedPhi, kernels: RegularizedKernels,
                        scale: float = 1.0, j_max: int = 2) -> float:
    """<xi, (T1 + T2 + Q4~^r) xi> with xi = T Omega built from scale * phi.

    Qualitative diagnostic of the scattering-equation cancellation: the value
    shrinks when phi is the actual scattering solution (scale = 1).  The T1
    kernel for a rescaled phi is scale * 2 lap(phi) restricted to the ball,
    and T2 carries scale * phi.
    """
    tower, _, xi = correlated_tower_state(modes, ball_up, ball_dn, phi, kernels,
                                          j_max=j_max, scale=scale)
    t1 = t1_operator(tower, neumann, kernels, ball_up, ball_dn)
    t2 = t2_operator(tower, neumann, kernels, ball_up, ball_dn)
    q4r = q4r_tilde_operator(tower, Vper, kernels, ball_up, ball_dn)
    total = (scale * (t1.matrix + t2.matrix) + q4r.matrix)
    return float(np.real(np.vdot(xi, total @ xi)))


@dataclass
class QDiagnostics:
    q1_min_eig: float
    q1_tilde_min_eig: float
    q3_parity_max: float
    q1_dominates_tilde: bool
    commutator_table: list


def q_operator_diagnostics(ball_up: FermiBall, ball_dn: FermiBall,
                           Vper: PeriodizedPotential, sector: FockSpace,
                           parity_space: FockSpace, momenta_p=None,
                           seed: int = 2024) -> QDiagnostics:
    """Positivity of Q1/Q1~, the Q3 parity cancellation, Q1 >= Q1~, and the
    pseudo-boson commutator table against brute-force contraction counts.

    parity_space (typically the full Fock space of a small mode set) may use
    a different mode set than sector; the commutator table is evaluated there
    so operator and brute-force counts share one truncation.
    """
    from .fock import pair_count_in_set

    rng = np.random.default_rng(seed)
    q1 = q_operator(sector, ball_up, ball_dn, Vper, 1)
    q1t = q_operator(sector, ball_up, ball_dn, Vper, 1, tilde=True)
    min1 = _min_eig(q1)
    min1t = _min_eig(q1t)
    dominates = True
    diff = (q1.matrix - q1t.matrix).tocsr()
    for _ in range(8):
        v = rng.normal(size=sector.dim)
        if float(v @ (diff @ v)) < -1e-10 * float(v @ v):
            dominates = False

    # Q3 on states supported on particle numbers 4k (transformed frame).
    q3 = q_operator(parity_space, ball_up, ball_dn, Vper, 3)
    pops = np.array([bin(int(w)).count("1") for w in parity_space.words])
    sel = pops % 4 == 0
    parity_max = 0.0
    for _ in range(8):
        v = np.zeros(parity_space.dim)
        v[sel] = rng.normal(size=int(np.count_nonzero(sel)))
        v /= np.linalg.norm(v)
        parity_max = max(parity_max, abs(float(v @ (q3.matrix @ v))))

    # Commutator table on the transformed vacuum.
    table = []
    if momenta_p is None:
        momenta_p = [(1, 0, 0), (1, 1, 0), (2, 0, 0)]
    vac_space = parity_space
    vac = np.zeros(vac_space.dim)
    vac[vac_space.index(0)] = 1.0
    for p in momenta_p:
        from .fock import pseudo_boson_commutators

        c1, c2 = pseudo_boson_commutators(vac_space, p, p, 0, 0, ball_up, vac)
        expected = pair_count_in_set(vac_space.modes, ball_up, p)
        table.append({"p": tuple(p), "comm_bbdag": c1.real, "expected": expected,
                      "comm_bb": abs(c2)})
    return QDiagnostics(q1_min_eig=min1, q1_tilde_min_eig=min1t,
                        q3_parity_max=parity_max, q1_dominates_tilde=dominates,
                        commutator_table=table)


def _min_eig(op: Operator) -> float:
    import scipy.sparse.linalg as spla
    from scipy.linalg import eigh

    dim = op.space.dim
    if dim <= 1200:
        return float(eigh(op.matrix.toarray(), eigvals_only=True)[0])
    v0 = np.full(dim, 1.0) + 1e-3 * np.sin(np.arange(dim))
    v0 /= np.linalg.norm(v0)
    vals = spla.eigsh(op.matrix, k=1, which="SA", v0=v0, tol=0.0,
                      return_eigenvectors=False)
    return float(vals[0])


@dataclass
class SpinSectorReport:
    s_on_trial_state: float     # ||S T Omega||
    bs_commutator: float        # max ||[B, S] psi|| on random psi
    q4hat_overlap: float        # |<T Omega, Q4hat T Omega>|
    q4hat_spin_eigenvalue: float  # spin eigenvalue of Q4hat T Omega (should be +-4)


def spin_sector_orthogonality(modes: ModeSet, ball_up: FermiBall, ball_dn: FermiBall,
                              Vper: PeriodizedPotential, phi: PeriodizedPhi,
                              kernels: RegularizedKernels, j_max: int = 2,
                              seed: int = 2024) -> SpinSectorReport:
    """S T Omega = 0, [B, S] = 0, and <T Omega, Q4hat T Omega> = 0.

    Q4hat is the spin-aligned part of Q4; it moves states into spin sectors
    S = +-4, orthogonal to the S = 0 sector containing T Omega.
    """
    rng = np.random.default_rng(seed)
    tower, B, psi = correlated_tower_state(modes, ball_up, ball_dn, phi, kernels, j_max)
    S_tower = spin_operator(tower)
    s_norm = float(np.linalg.norm(S_tower.matrix @ psi))
    bs_max = 0.0
    BS = B.matrix @ S_tower.matrix - S_tower.matrix @ B.matrix
    for _ in range(6):
        v = rng.normal(size=tower.dim)
        v /= np.linalg.norm(v)
        bs_max = max(bs_max, float(np.linalg.norm(BS @ v)))

    # Q4hat moves states into spin sectors S = +-4; evaluate its action on
    # T Omega with the dictionary applier (no giant sector enumeration).
    from .fock import apply_monomials_dict, dagger_monomials, q_monomials

    monos, needs_hc = q_monomials(modes, ball_up, ball_dn, Vper, 4,
                                  aligned_only=True)
    psi_dict = {int(w): float(a) for w, a in zip(tower.words, psi)
                if abs(a) > 1e-16}
    fam = monos.as_python()
    if needs_hc:
        fam = fam + dagger_monomials(fam)
    image = apply_monomials_dict(fam, psi_dict)
    overlap = abs(sum(np.conj(psi_dict.get(w, 0.0)) * a for w, a in image.items()))
    nrm = np.sqrt(sum(abs(a) ** 2 for a in image.values()))
    spin_eig = np.nan
    if nrm > 1e-14:
        n_mom = modes.n_mom
        up_mask = (1 << n_mom) - 1
        acc = 0.0
        for w, a in image.items():
            sval = bin(w & up_mask).count("1") - bin(w >> n_mom).count("1")
            acc += (sval * abs(a)) ** 2
        spin_eig = float(np.sqrt(acc) / nrm)
    return SpinSectorReport(s_on_trial_state=s_norm, bs_commutator=bs_max,
                            q4hat_overlap=float(overlap), q4hat_spin_eigenvalue=spin_eig)


def hf_identity_suite(configs, Vper_factory, n_states: int = 8, seed: int = 2024):
    """Particle-hole identity residuals over several (mode set, ball) configurations.

    configs: iterable of (modes, ball_up, ball_dn, sector); Vper_factory maps
    a box length L to a periodized potential.  Returns the residual list.
    """
    from .fock import hf_identity_residual

    rng = np.random.default_rng(seed)
    residuals = []
    for modes, ball_up, ball_dn, sector in configs:
        Vper = Vper_factory(modes.L)
        cache: dict = {}
        for _ in range(n_states):
            psi = rng.normal(size=sector.dim)
            psi /= np.linalg.norm(psi)
            res = hf_identity_residual(modes, ball_up, ball_dn, Vper, psi,
                                       sector, _cache=cache)
            residuals.append(res)
    return residuals
