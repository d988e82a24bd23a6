"""Radial, compactly supported interaction potentials and their periodization.

Profiles are nonnegative and vanish beyond a support radius R0.  Units:
hbar = 1, particle mass 1/2, so the kinetic term is |k|^2 and the pair
energy scale is set directly by V.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import AccuracyError, GeometryError
from .lattice import MomentumLattice, TWO_PI, enumerate_momenta

QUAD_RELTOL = 1e-10


@dataclass(frozen=True)
class RadialPotential:
    """Radial potential r -> V(r), zero for r > support_radius."""

    profile: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    name: str = "custom"
    # Smoothness order at the support edge: number of continuous derivatives.
    # None means C-infinity, -1 means discontinuous (square well).
    smoothness: int | None = -1
    is_zero: bool = False

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = r <= self.support_radius
        if np.any(inside) and not self.is_zero:
            out[inside] = self.profile(r[inside])
        if out.ndim == 0:
            return float(out)
        return out


def square_well(V0: float, R0: float) -> RadialPotential:
    """V(r) = V0 for r <= R0, else 0."""
    if V0 < 0 or R0 <= 0:
        raise ValueError("square well needs V0 >= 0, R0 > 0")
    return RadialPotential(
        profile=lambda r: np.full_like(np.asarray(r, dtype=float), V0),
        support_radius=R0,
        name=f"square_well(V0={V0},R0={R0})",
        smoothness=-1,
        is_zero=(V0 == 0.0),
    )


def smooth_bump(V0: float, R0: float, k: int | None = None) -> RadialPotential:
    """Bump with k continuous derivatives at r = R0; k=None gives C-infinity.

    Finite k uses V0 * (1 - (r/R0)^2)^(k+1); k=None uses the exponential
    bump V0 * e * exp(-1/(1-(r/R0)^2)).
    """
    if V0 < 0 or R0 <= 0:
        raise ValueError("bump needs V0 >= 0, R0 > 0")
    if k is None:

        def profile(r):
            x2 = np.clip((np.asarray(r, dtype=float) / R0) ** 2, 0.0, 1.0)
            out = np.zeros_like(x2)
            good = x2 < 1.0
            out[good] = V0 * np.e * np.exp(-1.0 / (1.0 - x2[good]))
            return out

        return RadialPotential(profile, R0, f"smooth_bump(V0={V0},R0={R0},k=inf)",
                               smoothness=None, is_zero=(V0 == 0.0))
    if k < 0:
        raise ValueError("smoothness order must be >= 0")

    def profile(r):
        x2 = np.clip((np.asarray(r, dtype=float) / R0) ** 2, 0.0, 1.0)
        return V0 * (1.0 - x2) ** (k + 1)

    return RadialPotential(profile, R0, f"smooth_bump(V0={V0},R0={R0},k={k})",
                           smoothness=k, is_zero=(V0 == 0.0))


def zero_potential(R0: float = 1.0) -> RadialPotential:
    return RadialPotential(lambda r: np.zeros_like(np.asarray(r, dtype=float)),
                           R0, "zero", smoothness=None, is_zero=True)


def tabulated(radii, values) -> RadialPotential:
    """Monotone-cubic interpolation of a sampled radial profile.

    Radii must be ascending; the last radius defines the support edge.
    PCHIP keeps the interpolant nonnegative for nonnegative samples.
    """
    from scipy.interpolate import PchipInterpolator

    radii = np.asarray(radii, dtype=float)
    values = np.asarray(values, dtype=float)
    if radii.ndim != 1 or radii.shape != values.shape or len(radii) < 4:
        raise ValueError("need matching 1d arrays with at least 4 samples")
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be strictly ascending")
    if np.any(values < 0):
        raise ValueError("potential samples must be nonnegative (V >= 0 assumed)")
    if radii[0] > 0:
        radii = np.concatenate([[0.0], radii])
        values = np.concatenate([[values[0]], values])
    interp = PchipInterpolator(radii, values, extrapolate=False)
    R0 = float(radii[-1])

    def profile(r):
        out = interp(np.asarray(r, dtype=float))
        return np.nan_to_num(out, nan=0.0)

    return RadialPotential(profile, R0, "tabulated", smoothness=0,
                           is_zero=bool(np.all(values == 0)))


def load_tabulated(path) -> RadialPotential:
    """Read a two-column whitespace text file (radius, value), ascending radii."""
    data = np.loadtxt(path)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("expected two whitespace-separated columns (radius, value)")
    return tabulated(data[:, 0], data[:, 1])


def fourier_transform_radial(V: RadialPotential, p) -> float | np.ndarray:
    """Vhat(p) = (4*pi/p) * int_0^R0 r sin(p r) V(r) dr, with the p->0 limit.

    The square well has a closed form; other profiles go through adaptive
    quadrature with an oscillatory (sin-weighted) rule.
    """
    p_arr = np.atleast_1d(np.asarray(p, dtype=float))
    if np.any(p_arr < 0):
        raise ValueError("p must be nonnegative")
    out = np.empty_like(p_arr)
    R0 = V.support_radius
    if V.is_zero:
        out[:] = 0.0
        return out[0] if np.isscalar(p) or np.asarray(p).ndim == 0 else out

    if V.name.startswith("square_well"):
        V0 = float(V.profile(np.array([0.0]))[0])
        small = p_arr * R0 < 1e-4
        out[small] = 4.0 * np.pi * V0 * R0**3 / 3.0
        q = p_arr[~small]
        out[~small] = 4.0 * np.pi * V0 * (np.sin(q * R0) - q * R0 * np.cos(q * R0)) / q**3
    elif len(p_arr) > 64:
        # Vectorized path: Simpson on a fine fixed mesh (smooth profiles).
        from .radial import radial_fourier_on_mesh

        r = np.linspace(0.0, R0, 8193)
        out[:] = radial_fourier_on_mesh(r, V(r), p_arr)
    else:
        for i, q in enumerate(p_arr):
            if q * R0 < 1e-6:
                val, err = integrate.quad(lambda r: r * r * V.profile(np.array([r]))[0],
                                          0.0, R0, epsrel=QUAD_RELTOL, epsabs=1e-14, limit=200)
                val *= 4.0 * np.pi
                scale = 4.0 * np.pi
            else:
                val, err = integrate.quad(lambda r: r * V.profile(np.array([r]))[0],
                                          0.0, R0, weight="sin", wvar=q,
                                          epsrel=QUAD_RELTOL, epsabs=1e-14, limit=200)
                val *= 4.0 * np.pi / q
                scale = 4.0 * np.pi / q
            if err * abs(scale) > 1e-6 * (abs(val) + 1e-12):
                raise AccuracyError(f"radial quadrature did not converge at p={q}")
            out[i] = val
    if np.asarray(p).ndim == 0:
        return float(out[0])
    return out


@dataclass
class PeriodizedPotential:
    """Fourier table of the periodization of V onto the torus of side L.

    Coefficients are Vhat_inf(p) evaluated on lattice momenta; they are real
    by radial symmetry.  Position-space values come either from the truncated
    Fourier sum or from the exact image sum (support fits the box, so at most
    one image contributes).
    """

    V: RadialPotential
    L: float
    pmax: float
    lattice: MomentumLattice
    coefficients: np.ndarray  # aligned with lattice.points
    _radial_cache: dict = field(default_factory=dict, repr=False)

    @property
    def vhat0(self) -> float:
        return self.vhat(0.0)

    def vhat(self, p_norm) -> float | np.ndarray:
        """Radial Vhat at arbitrary |p| (cached per distinct value)."""
        arr = np.atleast_1d(np.asarray(p_norm, dtype=float))
        if len(arr) > 4096:
            out = np.asarray(fourier_transform_radial(self.V, arr), dtype=float)
            if np.asarray(p_norm).ndim == 0:
                return float(out[0])
            return out
        out = np.empty_like(arr)
        missing = []
        for i, q in enumerate(arr):
            key = round(float(q), 12)
            if key in self._radial_cache:
                out[i] = self._radial_cache[key]
            else:
                missing.append((i, key, q))
        if missing:
            vals = fourier_transform_radial(self.V, np.array([m[2] for m in missing]))
            vals = np.atleast_1d(vals)
            for (i, key, _), v in zip(missing, vals):
                self._radial_cache[key] = float(v)
                out[i] = v
        if np.asarray(p_norm).ndim == 0:
            return float(out[0])
        return out

    def eval_fourier(self, x) -> float:
        """V(x) from the truncated Fourier sum L^-3 sum e^{ip.x} Vhat(p)."""
        x = np.asarray(x, dtype=float)
        phases = self.lattice.k_vectors @ x
        return float(np.sum(self.coefficients * np.cos(phases)) / self.L**3)

    def eval_exact(self, x) -> float:
        """V(x) by wrapping x to the fundamental image (exact)."""
        x = np.asarray(x, dtype=float)
        wrapped = (x + 0.5 * self.L) % self.L - 0.5 * self.L
        return float(self.V(np.linalg.norm(wrapped)))

    def tail_estimate(self) -> float:
        """Crude bound on the neglected sum of |Vhat| beyond pmax.

        Fits |Vhat(p)| ~ C p^-s on the outer half of the table and integrates;
        returns inf when the fitted decay is too slow for convergence
        (s <= 3), which happens for discontinuous profiles.
        """
        norms = self.lattice.k_norms
        coefs = np.abs(self.coefficients)
        sel = norms > 0.5 * self.pmax
        if np.count_nonzero(sel) < 8:
            return np.inf
        # Envelope fit: bin by radius and take max per bin.
        q = norms[sel]
        c = coefs[sel] + 1e-300
        bins = np.geomspace(q.min(), q.max() + 1e-9, 8)
        idx = np.digitize(q, bins)
        env_q, env_c = [], []
        for b in range(1, len(bins) + 1):
            m = idx == b
            if np.any(m):
                env_q.append(np.exp(np.mean(np.log(q[m]))))
                env_c.append(c[m].max())
        if len(env_q) < 3:
            return np.inf
        slope, logC = np.polyfit(np.log(env_q), np.log(env_c), 1)
        s = -slope
        if s <= 3.0:
            return np.inf
        C = np.exp(logC)
        # Lattice tail: (L/2pi)^3 * int_pmax 4 pi q^2 C q^-s dq
        dens = (self.L / TWO_PI) ** 3
        return dens * 4.0 * np.pi * C * self.pmax ** (3.0 - s) / (s - 3.0)


def periodize(V: RadialPotential, L: float, pmax: float) -> PeriodizedPotential:
    """Tabulate Vhat_inf(p) on lattice momenta |p| <= pmax."""
    if L <= 2.0 * V.support_radius:
        raise GeometryError(f"support 2*R0={2*V.support_radius} does not fit box L={L}")
    lat = enumerate_momenta(L, pmax)
    per = PeriodizedPotential(V=V, L=float(L), pmax=float(pmax), lattice=lat,
                              coefficients=np.zeros(len(lat)))
    per.coefficients = np.asarray(per.vhat(lat.k_norms), dtype=float)
    per.coefficients.setflags(write=False)
    return per
