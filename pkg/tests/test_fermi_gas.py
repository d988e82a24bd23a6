import numpy as np
import pytest

from fermigas.errors import AdmissibilityError, ParameterError
from fermigas.fermi_gas import (build_fermi_ball,
                                build_regularized_kernels, eval_energy_formula,
                                free_gas_energy_density, hf_energy,
                                kernel_norm_diagnostics, kernel_norms,
                                kinetic_energy_density, omega_infinite_volume,
                                omega_kernel, shell_count)
from fermigas.potential import RadialPotential, periodize, square_well, zero_potential
from fermigas.radial import fit_loglog_slope

L = 2 * np.pi


def ball_overlap_potential(V0: float, R0: float) -> RadialPotential:
    """Autocorrelation of a ball indicator: Vhat = V0 |1hat_b|^2 >= 0."""
    b = R0 / 2.0

    def profile(r):
        r = np.asarray(r, dtype=float)
        out = np.where(r < 2 * b, (np.pi / 12.0) * (4 * b + r) * (2 * b - r) ** 2, 0.0)
        return V0 * out / ((np.pi / 12.0) * 4 * b * (2 * b) ** 2)

    return RadialPotential(profile, R0, "ball_overlap", smoothness=1)


class TestFermiBall:
    def test_single_particle(self):
        ball = build_fermi_ball(L, 1)
        assert ball.k_F == 0.0
        assert np.all(ball.momenta == 0)
        assert kinetic_energy_density(ball) == 0.0

    def test_first_shell(self):
        ball = build_fermi_ball(L, 7)
        assert np.isclose(ball.k_F, 1.0)
        assert np.isclose(kinetic_energy_density(ball), 6 / (2 * np.pi) ** 3)

    def test_not_closed_shell(self):
        with pytest.raises(AdmissibilityError) as err:
            build_fermi_ball(L, 8)
        assert "7" in str(err.value) and "19" in str(err.value)

    def test_kf_approaches_continuum(self):
        rho = 0.05
        ratios = []
        for Lbox in (10.0, 20.0, 40.0):
            from fermigas.lattice import closed_shell_sizes

            sizes = np.array(closed_shell_sizes(4000))
            N = int(sizes[np.argmin(np.abs(sizes - rho * Lbox**3))])
            ball = build_fermi_ball(Lbox, N)
            ratios.append(ball.k_F / (6 * np.pi**2 * ball.rho) ** (1 / 3))
        assert abs(ratios[-1] - 1.0) < abs(ratios[0] - 1.0) + 0.02
        assert abs(ratios[-1] - 1.0) < 0.05

    def test_projection_and_trace(self):
        ball = build_fermi_ball(L, 19)
        # omega multiplier is the ball indicator: idempotent with trace N
        assert len({tuple(p) for p in ball.momenta}) == ball.N
        n2 = np.einsum("ij,ij->i", ball.momenta, ball.momenta)
        assert np.all(n2 <= (ball.k_F * L / (2 * np.pi)) ** 2 + 1e-9)


class TestHartreeFock:
    def test_zero_potential(self):
        per = periodize(zero_potential(), L, pmax=0.1)
        bu, bd = build_fermi_ball(L, 7), build_fermi_ball(L, 7, "down")
        hf = hf_energy(bu, bd, per)
        assert hf.direct == 0.0
        assert hf.exchange == 0.0

    def test_single_pair_values(self):
        V = square_well(1.0, 1.0)
        per = periodize(V, L, pmax=0.1)
        bu, bd = build_fermi_ball(L, 1), build_fermi_ball(L, 1, "down")
        hf = hf_energy(bu, bd, per)
        assert np.isclose(hf.direct, 2 * per.vhat0 / L**3, rtol=1e-12)
        assert np.isclose(hf.exchange, -per.vhat0 / L**3, rtol=1e-12)
        assert np.isclose(hf.total, hf.kinetic + hf.direct + hf.exchange)

    def test_direct_positive_exchange_negative_for_positive_vhat(self):
        V = ball_overlap_potential(1.0, 1.0)
        per = periodize(V, 10.0, pmax=8.0)
        # verified positive transform on the sampled range
        assert np.all(per.coefficients >= -1e-12)
        bu, bd = build_fermi_ball(10.0, 19), build_fermi_ball(10.0, 19, "down")
        hf = hf_energy(bu, bd, per)
        assert hf.direct >= 0.0
        assert hf.exchange <= 0.0

    def test_fft_path_matches_direct(self):
        V = square_well(1.0, 1.0)
        per = periodize(V, 10.0, pmax=0.1)
        bu, bd = build_fermi_ball(10.0, 33), build_fermi_ball(10.0, 33, "down")
        d = hf_energy(bu, bd, per, exchange_method="direct")
        f = hf_energy(bu, bd, per, exchange_method="fft")
        assert abs(d.exchange - f.exchange) < 1e-10 * abs(d.exchange)

    def test_mismatched_boxes(self):
        per = periodize(square_well(1.0, 1.0), 10.0, pmax=0.1)
        with pytest.raises(ParameterError):
            hf_energy(build_fermi_ball(10.0, 7), build_fermi_ball(12.0, 7), per)


class TestOmegaKernel:
    def test_at_origin_equals_density(self):
        ball = build_fermi_ball(L, 19)
        assert np.isclose(omega_kernel(ball, [0.0, 0.0, 0.0]), ball.rho)

    def test_single_mode_constant(self):
        ball = build_fermi_ball(L, 1)
        rng = np.random.default_rng(2)
        for x in rng.uniform(-3, 3, size=(5, 3)):
            assert np.isclose(omega_kernel(ball, x), 1 / L**3)

    def test_large_box_matches_continuum(self):
        rho = 0.05
        from fermigas.lattice import closed_shell_sizes

        sizes = np.array(closed_shell_sizes(9000))
        Lbox = 40.0
        N = int(sizes[np.argmin(np.abs(sizes - rho * Lbox**3))])
        ball = build_fermi_ball(Lbox, N)
        for r in (1.0, 3.0, 6.0):
            lattice = omega_kernel(ball, [r, 0.0, 0.0])
            cont = omega_infinite_volume(ball.rho, r)
            assert abs(lattice - cont) < 0.05 * ball.rho


class TestRegularizedKernels:
    def setup_method(self):
        self.kern = build_regularized_kernels(3e-4, beta=0.4, eps=1 / 3)

    def test_supports(self):
        k = self.kern
        assert k.vr_hat(0.0) == 1.0
        assert k.vr_hat(k.k_F) == 0.0
        assert k.ur_hat(0.5 * k.k_F) == 0.0
        assert k.ur_hat(2.0 * k.k_F) == 1.0
        assert k.ur_hat(1.5 * k.uv_scale) == 1.0
        assert k.ur_hat(2.0 * k.uv_scale) == 0.0
        assert k.ur_hat(3.0 * k.uv_scale) == 0.0

    def test_orthogonality_exact(self):
        ks = np.linspace(0, 2.5 * self.kern.uv_scale, 30001)
        assert np.max(np.abs(self.kern.ur_hat(ks) * self.kern.vr_hat(ks))) == 0.0

    def test_decomposition_exact(self):
        ks = np.linspace(0, 2.5 * self.kern.uv_scale, 10001)
        lhs = self.kern.ur_hat(ks)
        rhs = self.kern.delta_r_hat(ks) - self.kern.nu_hat(ks)
        assert np.max(np.abs(lhs - rhs)) == 0.0
        assert np.allclose(self.kern.delta_uv_hat(ks),
                           1.0 - self.kern.delta_r_hat(ks))

    def test_parameter_guards(self):
        with pytest.raises(ParameterError):
            build_regularized_kernels(0.4, beta=0.4)  # k_F - 2 rho^alpha < 0
        with pytest.raises(ParameterError):
            build_regularized_kernels(1e-4, beta=-0.1)

    def test_v_l2_bounded_by_density(self):
        norms = kernel_norms(self.kern)
        assert norms["omega0"] <= self.kern.rho * (1 + 1e-9)
        assert np.isclose(norms["v_l2"] ** 2, norms["omega0"])

    def test_sweep_needs_a_decade(self):
        with pytest.raises(ParameterError):
            kernel_norm_diagnostics(np.array([1e-4, 2e-4, 3e-4, 5e-4]), beta=0.4)


class TestShellCount:
    def test_empty_window(self):
        assert shell_count(L, 1.5, 0.0) == 0

    def test_unit_shell(self):
        assert shell_count(L, 1.0, 0.0) == 6

    def test_origin(self):
        assert shell_count(L, 0.0, 0.0) == 1

    def test_linear_in_window_width(self):
        # count scales linearly with the window width at fixed mu = k_F^2;
        # the box must be large enough that shell granularity is resolved
        Lbox = 50.0
        mu = 1.0
        ws = np.array([0.1, 0.2, 0.4, 0.8])
        counts = np.array([shell_count(Lbox, mu, w) for w in ws])
        slope = fit_loglog_slope(ws, counts)
        assert abs(slope - 1.0) < 0.25


class TestEnergyFormula:
    def test_pure_kinetic_when_a_zero(self):
        res = eval_energy_formula(0.01, 0.02, 0.0)
        expect = free_gas_energy_density(0.01) + free_gas_energy_density(0.02)
        assert np.isclose(res.value, expect, rtol=1e-14)

    def test_single_species(self):
        res = eval_energy_formula(0.0, 0.03, 0.5)
        assert np.isclose(res.value, free_gas_energy_density(0.03), rtol=1e-14)

    def test_band_metadata(self):
        res = eval_energy_formula(0.01, 0.01, 0.1, C=2.0)
        assert res.xi1 == pytest.approx(2 / 9)
        assert res.xi2 == pytest.approx(1 / 9)
        rho = 0.02
        assert np.isclose(res.band_upper - res.value, 2.0 * rho ** (2 + 2 / 9))
        assert np.isclose(res.value - res.band_lower, 2.0 * rho ** (2 + 1 / 9))
        assert res.band_lower < res.value < res.band_upper

    def test_negative_density_rejected(self):
        with pytest.raises(ParameterError):
            eval_energy_formula(-0.01, 0.01, 0.1)
