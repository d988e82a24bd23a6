import numpy as np
import pytest

from fermigas.errors import ResourceLimitError
from fermigas.lattice import (CHI_DERIVATIVE_BOUND, chi, chi_c, closed_shell_sizes,
                              enumerate_momenta, shell_multiplicities,
                              shell_structure)

TWO_PI = 2 * np.pi


def brute_force_count(L, kmax):
    nmax = int(np.ceil(kmax * L / TWO_PI)) + 1
    count = 0
    for nx in range(-nmax, nmax + 1):
        for ny in range(-nmax, nmax + 1):
            for nz in range(-nmax, nmax + 1):
                if (TWO_PI / L) ** 2 * (nx**2 + ny**2 + nz**2) <= kmax**2 * (1 + 1e-12):
                    count += 1
    return count


class TestEnumeration:
    def test_origin_only(self):
        lat = enumerate_momenta(TWO_PI, 0.0)
        assert len(lat) == 1
        assert np.all(lat.points[0] == 0)

    @pytest.mark.parametrize("kmax,expected", [(1.0, 7), (np.sqrt(2), 19)])
    def test_small_counts(self, kmax, expected):
        assert len(enumerate_momenta(TWO_PI, kmax)) == expected

    @pytest.mark.parametrize("L,kmax", [(TWO_PI, 2.3), (5.0, 4.1), (9.7, 3.0)])
    def test_matches_brute_force(self, L, kmax):
        assert len(enumerate_momenta(L, kmax)) == brute_force_count(L, kmax)

    def test_count_invariant_under_small_kmax_shift(self):
        lat = enumerate_momenta(TWO_PI, 1.0)
        assert len(enumerate_momenta(TWO_PI, 1.0 + 1e-9)) == len(lat)

    def test_closed_under_negation_and_unique(self):
        lat = enumerate_momenta(5.0, 3.0)
        pts = {tuple(p) for p in lat.points}
        assert len(pts) == len(lat)
        assert all(tuple(-np.asarray(p)) in pts for p in pts)

    def test_sorted_by_norm_then_lex(self):
        lat = enumerate_momenta(TWO_PI, 2.0)
        n2 = np.einsum("ij,ij->i", lat.points, lat.points)
        assert np.all(np.diff(n2) >= 0)
        for i in range(len(lat) - 1):
            if n2[i] == n2[i + 1]:
                assert tuple(lat.points[i]) < tuple(lat.points[i + 1])

    def test_point_limit(self):
        with pytest.raises(ResourceLimitError):
            enumerate_momenta(2000.0, 10.0, point_limit=1000)


class TestShells:
    def test_first_five(self):
        assert closed_shell_sizes(33) == [1, 7, 19, 27, 33]

    def test_eight_absent(self):
        assert 8 not in closed_shell_sizes(100)

    def test_strictly_increasing(self):
        sizes = closed_shell_sizes(2000)
        assert all(b > a for a, b in zip(sizes, sizes[1:]))

    def test_consistent_with_enumeration(self):
        # every closed-shell size is an achievable lattice ball count
        values, cum = shell_structure(300)
        for v, c in zip(values, cum):
            assert len(enumerate_momenta(TWO_PI, np.sqrt(v) + 1e-9)) == c

    def test_multiplicities_match_structure(self):
        values, cum = shell_structure(200)
        mult = shell_multiplicities(int(values[-1]))
        counts = np.diff(np.concatenate([[0], cum]))
        for v, c in zip(values.astype(int), counts):
            assert mult[v] == c
        # non-representable radii carry zero
        assert mult[7] == 0


class TestSmoothCutoff:
    def test_plateaus(self):
        assert chi(0.5) == 1.0
        assert chi(1.0) == 1.0
        assert chi(2.0) == 0.0
        assert chi(3.0) == 0.0
        assert chi(-1.0) == 1.0

    def test_interior_and_monotone(self):
        assert 0.0 < chi(1.5) < 1.0
        assert chi(1.4) >= chi(1.6)
        t = np.linspace(0.0, 3.0, 1201)
        vals = chi(t)
        assert np.all(np.diff(vals) <= 1e-14)

    def test_derivative_bounded(self):
        t = np.linspace(0.9, 2.1, 4001)
        dchi = np.gradient(chi(t), t)
        assert np.max(np.abs(dchi)) < CHI_DERIVATIVE_BOUND

    def test_smooth_at_edges(self):
        # C-infinity profile: one-sided derivatives vanish at t = 1 and 2
        h = 1e-4
        assert abs(chi(1 + h) - chi(1)) / h < 1e-3
        assert abs(chi(2) - chi(2 - h)) / h < 1e-3

    def test_complement(self):
        t = np.linspace(0, 3, 50)
        assert np.allclose(chi(t) + chi_c(t), 1.0)
