import numpy as np
import pytest
from scipy import integrate

from fermigas.errors import GeometryError
from fermigas.potential import (fourier_transform_radial, load_tabulated,
                                periodize, smooth_bump, square_well, tabulated,
                                zero_potential)
from fermigas.radial import fit_loglog_slope


class TestProfiles:
    def test_square_well_values(self):
        V = square_well(2.0, 1.5)
        assert V(0.3) == 2.0
        assert V(1.5) == 2.0
        assert V(1.6) == 0.0

    def test_bump_smoothness_order(self):
        # k continuous derivatives at the edge: (1 - x^2)^(k+1)
        V = smooth_bump(1.0, 1.0, k=2)
        h = 1e-4
        r = 1.0 - np.arange(5) * h
        vals = V(r)
        # second derivative stays bounded approaching the edge
        d2 = np.diff(vals, 2) / h**2
        assert np.all(np.abs(d2) < 50)

    def test_nonnegative(self):
        for V in (square_well(1.0, 1.0), smooth_bump(2.0, 0.7), smooth_bump(1.0, 1.0, 3)):
            r = np.linspace(0, 2 * V.support_radius, 200)
            assert np.all(V(r) >= 0)


class TestRadialTransform:
    def test_square_well_p0(self):
        V0, R0 = 1.3, 0.8
        assert np.isclose(fourier_transform_radial(square_well(V0, R0), 0.0),
                          4 * np.pi * V0 * R0**3 / 3, rtol=1e-12)

    def test_square_well_closed_form_vs_quadrature(self):
        V0, R0 = 1.3, 0.8
        V = square_well(V0, R0)
        for p in (0.7, 2.0, 11.0):
            closed = 4 * np.pi * V0 * (np.sin(p * R0) - p * R0 * np.cos(p * R0)) / p**3
            assert np.isclose(fourier_transform_radial(V, p), closed, rtol=1e-12)
            quad_val, _ = integrate.quad(lambda r: r * V0, 0, R0, weight="sin", wvar=p)
            assert np.isclose(closed, 4 * np.pi / p * quad_val, rtol=1e-9)

    def test_zero_potential(self):
        V = zero_potential()
        assert fourier_transform_radial(V, 0.0) == 0.0
        assert np.all(fourier_transform_radial(V, np.array([0.5, 2.0])) == 0.0)

    def test_vectorized_path_matches_scalar(self):
        V = smooth_bump(1.0, 1.0)
        ps = np.linspace(0.0, 8.0, 100)
        vec = fourier_transform_radial(V, ps)
        scalars = [fourier_transform_radial(V, p) for p in ps[::17]]
        assert np.allclose(vec[::17], scalars, rtol=1e-8, atol=1e-12)

    def test_smoothness_decay_fit(self):
        # order-k bump: log|Vhat| vs log p slope <= -(k-1) over the resolved range
        k = 3
        V = smooth_bump(1.0, 1.0, k=k)
        ps = np.geomspace(8.0, 60.0, 12)
        vals = np.abs(fourier_transform_radial(V, ps))
        slope = fit_loglog_slope(ps, vals)
        assert slope <= -(k - 1)


class TestPeriodization:
    def test_geometry_error(self):
        with pytest.raises(GeometryError):
            periodize(square_well(1.0, 1.0), 1.9, pmax=1.0)

    def test_p0_coefficient_is_integral(self):
        V = square_well(1.0, 1.0)
        per = periodize(V, 8.0, pmax=2.0)
        assert np.isclose(per.vhat0, 4 * np.pi / 3, rtol=1e-12)

    def test_zero_potential_all_zero(self):
        per = periodize(zero_potential(), 8.0, pmax=3.0)
        assert np.all(per.coefficients == 0.0)

    def test_position_evaluation_within_truncation_tolerance(self):
        V = smooth_bump(1.0, 1.0, k=6)
        per = periodize(V, 6.0, pmax=20.0)
        tol = 5 * per.tail_estimate() / per.L**3 + 1e-10
        assert abs(per.eval_fourier([0, 0, 0]) - V(0.0)) < tol
        x = np.array([0.4, 0.1, -0.2])
        assert abs(per.eval_fourier(x) - per.eval_exact(x)) < tol

    def test_parseval(self):
        V = smooth_bump(1.0, 1.0, k=6)
        per = periodize(V, 6.0, pmax=20.0)
        lhs = np.sum(per.coefficients**2) / per.L**3
        r = np.linspace(0, 1.0, 2001)
        rhs = integrate.simpson(4 * np.pi * r**2 * V(r) ** 2, x=r)
        assert np.isclose(lhs, rhs, rtol=1e-6)

    def test_positivity_on_grid(self):
        V = smooth_bump(1.0, 1.0, k=6)
        per = periodize(V, 6.0, pmax=20.0)
        tol = 5 * per.tail_estimate() / per.L**3 + 1e-10
        rng = np.random.default_rng(3)
        for x in rng.uniform(0, 6.0, size=(25, 3)):
            assert per.eval_fourier(x) >= -tol

    def test_tail_estimate_against_exact_shell_sum(self):
        from fermigas.lattice import TWO_PI, shell_multiplicities

        L, pmax = 6.0, 20.0
        V = smooth_bump(1.0, 1.0, k=6)
        bump = periodize(V, L, pmax=pmax)
        estimate = bump.tail_estimate()
        n2max = int((5 * pmax * L / TWO_PI) ** 2)
        mult = shell_multiplicities(n2max)
        p = TWO_PI / L * np.sqrt(np.arange(n2max + 1, dtype=float))
        vh = np.abs(fourier_transform_radial(V, p))
        actual = np.sum((mult * vh)[p > pmax])
        assert 0.25 * actual <= estimate <= 10 * actual
        well = periodize(square_well(1.0, 1.0), 6.0, pmax=14.0)
        assert well.tail_estimate() == np.inf  # discontinuous profile


class TestTabulated:
    def test_roundtrip_through_file(self, tmp_path):
        r = np.linspace(0, 1.0, 60)
        vals = np.where(r <= 1.0, 1.0 - r**2, 0.0)
        path = tmp_path / "profile.dat"
        np.savetxt(path, np.column_stack([r, vals]))
        V = load_tabulated(path)
        assert V.support_radius == 1.0
        rs = np.linspace(0, 0.95, 20)
        assert np.allclose(V(rs), 1 - rs**2, atol=1e-3)

    def test_transform_close_to_analytic(self):
        r = np.linspace(0, 1.0, 400)
        V = tabulated(r, 1.0 - r**2)
        exact = smooth_bump(1.0, 1.0, k=0)  # same (1 - r^2) profile
        for p in (0.0, 1.0, 3.0):
            assert np.isclose(fourier_transform_radial(V, p),
                              fourier_transform_radial(exact, p),
                              rtol=2e-5, atol=1e-8)

    def test_rejects_negative(self):
        r = np.linspace(0, 1, 10)
        with pytest.raises(ValueError):
            tabulated(r, np.linspace(-0.1, 1, 10))
