import numpy as np
import pytest

from fermigas.errors import ParameterError, ResourceLimitError
from fermigas.fermi_gas import build_fermi_ball, build_regularized_kernels, hf_energy
from fermigas.fock import (FockSpace, MonomialList, apply_monomials_dict,
                           antihermitian_exponential_apply, b_monomials,
                           build_sector, correlation_structure_apply,
                           fermi_sea_word, ground_state,
                           h0_operator, hamiltonian_operator, hf_identity_residual,
                           kinetic_operator, mode_set_from_cutoff,
                           mode_set_from_momenta, number_operator,
                           operator_from_monomials, pair_annihilator,
                           pair_count_in_set, pair_tower, particle_hole_map,
                           pseudo_boson_commutators, q_operator, x_operator)
from fermigas.potential import periodize, square_well, zero_potential

L = 2 * np.pi


@pytest.fixture(scope="module")
def modes7():
    return mode_set_from_cutoff(L, 1)


@pytest.fixture(scope="module")
def vper():
    return periodize(square_well(0.8, 1.0), L, pmax=0.1)


@pytest.fixture(scope="module")
def full7(modes7):
    return FockSpace(modes=modes7,
                     words=np.arange(2**modes7.n_modes, dtype=np.uint64))


class TestModeSet:
    def test_cutoff_counts(self, modes7):
        assert modes7.n_mom == 7
        assert modes7.n_modes == 14

    def test_negation_closure_enforced(self):
        with pytest.raises(ParameterError):
            mode_set_from_momenta(L, [(0, 0, 0), (1, 0, 0)])

    def test_duplicate_rejected(self):
        with pytest.raises(ParameterError):
            mode_set_from_momenta(L, [(0, 0, 0), (0, 0, 0)])

    def test_word_limit(self):
        with pytest.raises(ResourceLimitError):
            mode_set_from_cutoff(L, 9)


class TestSectors:
    def test_small_dims(self, modes7):
        assert build_sector(modes7, 1, 0).dim == 7
        assert build_sector(modes7, 1, 1).dim == 49
        # momentum-zero pairs: (k, -k) for each k plus (0, 0)
        assert build_sector(modes7, 1, 1, total_momentum=(0, 0, 0)).dim == 7

    def test_overfilled(self, modes7):
        with pytest.raises(ParameterError):
            build_sector(modes7, 8, 0)

    def test_dim_cap(self, modes7):
        with pytest.raises(ResourceLimitError):
            build_sector(modes7, 3, 3, dim_cap=100)

    def test_number_operator_counts(self, modes7):
        space = build_sector(modes7, 2, 1)
        nop = number_operator(space)
        vec = np.ones(space.dim)
        assert np.allclose(nop.apply(vec), 3.0 * vec)
        nup = number_operator(space, spin=0)
        assert np.allclose(nup.apply(vec), 2.0 * vec)


class TestCAR:
    def test_anticommutators_exact(self, full7):
        """a_i a_j + a_j a_i = 0 and a_i a+_j + a+_j a_i = delta_ij."""
        rng = np.random.default_rng(11)
        M = full7.modes.n_modes
        psi = rng.normal(size=full7.dim)
        for _ in range(12):
            i, j = rng.integers(0, M, size=2)
            mono = MonomialList()
            mono.add((int(i), int(j)), (0, 0), 1.0)
            mono.add((int(j), int(i)), (0, 0), 1.0)
            anti = operator_from_monomials(full7, mono, "aa")
            assert np.max(np.abs(anti.apply(psi))) < 1e-13
            mono2 = MonomialList()
            mono2.add((int(i), int(j)), (0, 1), 1.0)
            mono2.add((int(j), int(i)), (1, 0), 1.0)
            anti2 = operator_from_monomials(full7, mono2, "aadag")
            expected = psi if i == j else 0.0 * psi
            assert np.max(np.abs(anti2.apply(psi) - expected)) < 1e-13

    def test_dict_applier_agrees_with_matrix(self, full7):
        """The slow dictionary oracle and the numba path coincide."""
        rng = np.random.default_rng(13)
        M = full7.modes.n_modes
        mono = MonomialList()
        for _ in range(15):
            nops = rng.integers(1, 5)
            ops = tuple(int(x) for x in rng.integers(0, M, size=nops))
            dags = tuple(int(x) for x in rng.integers(0, 2, size=nops))
            mono.add(ops, dags, float(rng.normal()))
        op = operator_from_monomials(full7, mono, "random")
        word = int(rng.integers(0, full7.dim))
        vec = full7.basis_vector(word)
        out_fast = op.apply(vec)
        out_dict = apply_monomials_dict(mono.as_python(), {word: 1.0})
        recon = np.zeros(full7.dim)
        for w, amp in out_dict.items():
            recon[full7.index(w)] = amp
        assert np.allclose(out_fast, recon, atol=1e-14)


class TestHamiltonian:
    def test_kinetic_only_for_zero_potential(self, modes7):
        space = build_sector(modes7, 1, 1)
        per = periodize(zero_potential(), L, pmax=0.1)
        H = hamiltonian_operator(space, per)
        K = kinetic_operator(space)
        assert abs(H.matrix - K.matrix).max() == 0.0

    def test_hermitian_and_truncation_counted(self, modes7, vper):
        space = build_sector(modes7, 1, 1)
        H = hamiltonian_operator(space, vper)
        assert abs(H.matrix - H.matrix.T).max() == 0.0
        assert H.dropped_terms > 0

    def test_momentum_conservation(self, modes7, vper):
        space = build_sector(modes7, 1, 1)
        H = hamiltonian_operator(space, vper)
        mom = modes7.momenta
        # total momentum per basis word
        def word_momentum(w):
            tot = np.zeros(3, dtype=np.int64)
            for m in range(modes7.n_modes):
                if (int(w) >> m) & 1:
                    tot += mom[m % modes7.n_mom]
            return tuple(tot)

        P = [word_momentum(w) for w in space.words]
        coo = H.matrix.tocoo()
        for r, c in zip(coo.row, coo.col):
            assert P[r] == P[c]

    def test_ffg_expectation_equals_hf_energy(self, modes7, vper):
        bu = build_fermi_ball(L, 7)
        bd = build_fermi_ball(L, 7, "down")
        space = build_sector(modes7, 7, 7)
        H = hamiltonian_operator(space, vper)
        w = fermi_sea_word(modes7, bu, bd)
        i = space.index(w)
        assert np.isclose(H.matrix[i, i], hf_energy(bu, bd, vper).total,
                          rtol=1e-13)

    def test_interaction_bounded_below_by_kinetic(self, modes7, vper):
        space = build_sector(modes7, 2, 2)
        H = hamiltonian_operator(space, vper)
        K = kinetic_operator(space)
        rng = np.random.default_rng(17)
        for _ in range(6):
            psi = rng.normal(size=space.dim)
            psi /= np.linalg.norm(psi)
            assert psi @ (H.matrix @ psi) >= psi @ (K.matrix @ psi) - 1e-12


class TestGroundState:
    def test_free_gas_ground_state(self, modes7):
        per = periodize(zero_potential(), L, pmax=0.1)
        space = build_sector(modes7, 1, 1)
        gs = ground_state(hamiltonian_operator(space, per), "dense")
        assert abs(gs.E0) < 1e-14
        # both particles at k = 0
        zero_idx = int(np.nonzero(modes7.momenta.any(axis=1) == 0)[0][0])
        w = (1 << zero_idx) | (1 << (modes7.n_mom + zero_idx))
        assert abs(abs(gs.vector[space.index(w)]) - 1.0) < 1e-12

    def test_dense_vs_iterative(self, modes7, vper):
        space = build_sector(modes7, 2, 2)
        H = hamiltonian_operator(space, vper)
        d = ground_state(H, "dense")
        it = ground_state(H, "iterative")
        assert abs(d.E0 - it.E0) < 1e-10
        assert d.residual < 1e-8 * max(1.0, abs(d.E0))
        assert it.residual < 1e-8 * max(1.0, abs(it.E0))

    def test_variational_against_ffg(self, modes7, vper):
        bu = build_fermi_ball(L, 7)
        bd = build_fermi_ball(L, 7, "down")
        space = build_sector(modes7, 7, 7)
        gs = ground_state(hamiltonian_operator(space, vper), "dense")
        assert gs.E0 <= hf_energy(bu, bd, vper).total + 1e-12


class TestParticleHole:
    def test_vacuum_maps_to_fermi_sea(self, modes7):
        bu = build_fermi_ball(L, 7)
        bd = build_fermi_ball(L, 7, "down")
        phm = particle_hole_map(modes7, bu, bd)
        space = build_sector(modes7, 7, 7)
        # R* FFG = + vacuum with this ordering convention
        vec = space.basis_vector(fermi_sea_word(modes7, bu, bd))
        out, img = phm.apply_inverse(space, vec)
        assert np.isclose(np.abs(out).max(), 1.0)
        assert img.words[np.argmax(np.abs(out))] == 0

    def test_unitarity_and_inverse(self, modes7, full7):
        bu = build_fermi_ball(L, 7)
        bd = build_fermi_ball(L, 7, "down")
        phm = particle_hole_map(modes7, bu, bd)
        rng = np.random.default_rng(23)
        psi = rng.normal(size=full7.dim)
        out, img = phm.apply(full7, psi)
        assert np.isclose(np.linalg.norm(out), np.linalg.norm(psi))
        back, orig = phm.apply_inverse(img, out)
        pos = np.searchsorted(orig.words, full7.words)
        assert np.allclose(back[pos], psi)

    def test_conjugation_property(self, modes7, full7):
        """R* a_k R = a_k outside the ball, a+_k inside."""
        import scipy.sparse as sp

        from fermigas.fock import ball_membership

        bu = build_fermi_ball(L, 7)
        bd = build_fermi_ball(L, 7, "down")
        phm = particle_hole_map(modes7, bu, bd)
        words = full7.words
        signs = phm.sign(words)
        imgs = phm.map_words(words)
        R = sp.coo_matrix((signs.astype(float),
                           (imgs.astype(np.int64), np.arange(full7.dim))),
                          shape=(full7.dim,) * 2).tocsr()
        member = np.concatenate([ball_membership(modes7, bu),
                                 ball_membership(modes7, bd)])
        for m in (0, 3, 7, 12):
            mono = MonomialList()
            mono.add((m,), (0,), 1.0)
            am = operator_from_monomials(full7, mono, "a").matrix
            conj = R.T @ am @ R
            expect = am.T if member[m] else am
            assert abs(conj - expect).max() < 1e-14


class TestIdentity:
    def test_residuals_machine_precision(self, modes7, vper):
        bu = build_fermi_ball(L, 1)
        bd = build_fermi_ball(L, 1, "down")
        sec = build_sector(modes7, 1, 1)
        rng = np.random.default_rng(5)
        cache = {}
        for _ in range(5):
            psi = rng.normal(size=sec.dim)
            psi /= np.linalg.norm(psi)
            res = hf_identity_residual(modes7, bu, bd, vper, psi, sec,
                                       _cache=cache)
            assert res < 1e-12

    def test_zero_potential_reduces_to_kinetic_bookkeeping(self, modes7):
        per = periodize(zero_potential(), L, pmax=0.1)
        bu = build_fermi_ball(L, 7)
        bd = build_fermi_ball(L, 7, "down")
        sec = build_sector(modes7, 7, 7)
        rng = np.random.default_rng(6)
        cache = {}
        for _ in range(3):
            psi = rng.normal(size=sec.dim)
            psi /= np.linalg.norm(psi)
            assert hf_identity_residual(modes7, bu, bd, per, psi, sec,
                                        _cache=cache) < 1e-12

    def test_hermiticity_of_operator_zoo(self, modes7, vper, full7):
        bu = build_fermi_ball(L, 1)
        bd = build_fermi_ball(L, 1, "down")
        rng = np.random.default_rng(7)
        ops = [h0_operator(full7, bu, bd), x_operator(full7, bu, bd, vper)]
        for which in (1, 2, 3, 4):
            ops.append(q_operator(full7, bu, bd, vper, which))
        for op in ops:
            for _ in range(3):
                phi = rng.normal(size=full7.dim)
                psi = rng.normal(size=full7.dim)
                lhs = phi @ (op.matrix @ psi)
                rhs = psi @ (op.matrix @ phi)
                assert abs(lhs - rhs) < 1e-12 * max(1.0, abs(lhs))


class TestPseudoBosons:
    def test_bb_commutator_vanishes(self, modes7, full7):
        bu = build_fermi_ball(L, 1)
        rng = np.random.default_rng(9)
        psi = rng.normal(size=full7.dim)
        psi /= np.linalg.norm(psi)
        c1, c2 = pseudo_boson_commutators(full7, (1, 0, 0), (0, 1, 0), 0, 0,
                                          bu, psi)
        assert abs(c2) == 0.0

    def test_vacuum_counts(self, modes7, full7):
        bu = build_fermi_ball(L, 1)
        vac = full7.basis_vector(0)
        for p in ((1, 0, 0), (0, 0, 1)):
            c1, _ = pseudo_boson_commutators(full7, p, p, 0, 0, bu, vac)
            assert c1.real == pair_count_in_set(modes7, bu, p)
            assert c1.imag == 0.0

    def test_excited_pair_deviation_bounded(self, modes7, full7):
        """With m excited pairs the commutator deviates from the vacuum
        count by at most 2m."""
        bu = build_fermi_ball(L, 7)
        p = (1, 0, 0)
        expected = pair_count_in_set(modes7, bu, p)
        bop = pair_annihilator(full7, p, 0, bu)
        # one-pair states: b+ applied to the transformed vacuum
        vac = full7.basis_vector(0)
        one_pair = bop.matrix.T @ (bop.matrix.T @ vac)  # not normalized; any support works
        states = [vac]
        if np.linalg.norm(one_pair) > 0:
            states.append(one_pair / np.linalg.norm(one_pair))
        for m, psi in enumerate(states):
            c1, _ = pseudo_boson_commutators(full7, p, p, 0, 0, bu, psi)
            assert abs(c1.real - expected) <= 2 * (m + 1) + 1e-12


class TestCorrelationStructure:
    def _setup(self, j_max=2):
        from fermigas.scattering import periodize_phi, solve_neumann

        modes = mode_set_from_cutoff(8.0, 2)
        V = square_well(1.0, 1.0)
        bu = build_fermi_ball(8.0, 1)
        bd = build_fermi_ball(8.0, 1, "down")
        nsol = solve_neumann(V, 3.9, mesh_size=800)
        phi = periodize_phi(nsol, 8.0, pmax=4.0)
        kern = build_regularized_kernels(1 / 8.0**3, beta=0.6)
        monos = b_monomials(modes, phi, kern, bu, bd)
        tower = pair_tower(modes, bu, bd, monos, j_max)
        B = operator_from_monomials(tower, monos, "B")
        return tower, B

    def test_lambda_zero_is_identity(self):
        tower, B = self._setup()
        rng = np.random.default_rng(31)
        psi = rng.normal(size=tower.dim)
        assert np.allclose(correlation_structure_apply(0.0, B, psi), psi)

    def test_unitarity(self):
        tower, B = self._setup()
        vac = tower.basis_vector(0)
        out = correlation_structure_apply(1.0, B, vac)
        assert abs(np.linalg.norm(out) - 1.0) < 1e-10
        rng = np.random.default_rng(37)
        psi = rng.normal(size=tower.dim)
        psi /= np.linalg.norm(psi)
        fwd = correlation_structure_apply(1.0, B, psi)
        back = correlation_structure_apply(-1.0, B, fwd)
        assert np.linalg.norm(back - psi) < 1e-10

    def test_taylor_matches_dense_exponential(self):
        tower, B = self._setup()
        A = (B.matrix - B.matrix.T).tocsr()
        rng = np.random.default_rng(41)
        psi = rng.normal(size=tower.dim)
        dense = antihermitian_exponential_apply(A, psi, dense_cutoff=10**9)
        taylor = antihermitian_exponential_apply(A, psi, dense_cutoff=0)
        assert np.linalg.norm(dense - taylor) < 1e-11 * np.linalg.norm(psi)
