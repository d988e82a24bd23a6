"""Zero-energy and Neumann scattering problems, scattering lengths, and the
Fourier-space scattering equation on a periodic box.

The Neumann problem on the ball of radius R,

    (-Delta + V/2) f = E f,   f(R) = 1,  f'(R) = 0,

is reduced to the radial equation -u'' + (V/2) u = E u for u = r f with
u(0) = 0 and the Robin condition u'(R) = u(R)/R.  The lowest eigenpair is
found with second-order central differences and shifted inverse iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import quad, simpson
from scipy.interpolate import CubicSpline

from .errors import AccuracyError, ConvergenceError, GeometryError, ParameterError
from .lattice import MomentumLattice, TWO_PI, chi, enumerate_momenta, shell_multiplicities
from .potential import PeriodizedPotential, RadialPotential, fourier_transform_radial
from .radial import radial_fourier_on_mesh


# ---------------------------------------------------------------------------
# Neumann problem on the ball
# ---------------------------------------------------------------------------

@dataclass
class NeumannSolution:
    """Ground state of the Neumann scattering problem on B_R(0).

    phi = 1 - f is the scattering correction, extended by zero outside the
    ball.  a_R = (1/8 pi) int V f is the finite-R scattering length.
    """

    V: RadialPotential
    R: float
    grid: np.ndarray   # radial nodes, uniform, grid[0] = 0, grid[-1] = R
    f: np.ndarray      # f on grid, normalized f(R) = 1
    u: np.ndarray      # u = r f on grid
    E_R: float
    a_R: float

    def phi(self, r):
        """phi(r) = 1 - f(r) inside the ball, 0 outside."""
        r = np.asarray(r, dtype=float)
        spl = self._spline()
        out = np.zeros_like(r)
        inside = r <= self.R
        rr = r[inside]
        vals = 1.0 - np.where(rr > 0, spl(rr) / np.where(rr > 0, rr, 1.0), self._f0())
        out[inside] = vals
        if out.ndim == 0:
            return float(out)
        return out

    def _spline(self):
        if not hasattr(self, "_spl"):
            self._spl = CubicSpline(self.grid, self.u)
        return self._spl

    def _f0(self):
        h = self.grid[1] - self.grid[0]
        return (4.0 * self.u[1] - self.u[2]) / (2.0 * h)

    def recompute_a_R(self) -> float:
        """a_R from the stored fields (invariant check)."""
        return _a_from_u(self.V, self.grid, self.u)


def _potential_nodes(V: RadialPotential, r: np.ndarray, h: float) -> np.ndarray:
    """V at nodes; a node sitting on a jump gets the two-sided average."""
    eps = 1e-6 * h
    return 0.5 * (V(np.maximum(r - eps, 0.0)) + V(r + eps))


def _a_from_u(V: RadialPotential, r: np.ndarray, u: np.ndarray) -> float:
    """a_R = (1/2) int_0^R0 r V(r) u(r) dr via a fine submesh."""
    R0 = V.support_radius
    spl = CubicSpline(r, u)
    rq = np.linspace(0.0, min(R0, r[-1]), 4097)
    w = 0.5 * rq * V(rq) * spl(rq)
    return float(simpson(w, x=rq))


def _solve_neumann_once(V: RadialPotential, R: float, N: int) -> tuple[float, np.ndarray, np.ndarray]:
    """One FD solve at mesh size N; returns (E, r, u) with f(R) = 1."""
    h = R / N
    r = np.arange(N + 1) * h
    c = 0.5 * _potential_nodes(V, r, h)

    # Unknowns u_1..u_{N-1}; u_N eliminated via the one-sided second-order
    # Robin stencil (3 u_N - 4 u_{N-1} + u_{N-2}) / (2h) = u_N / R.
    alpha = 1.0 / (3.0 - 2.0 * h / R)
    n = N - 1
    main = 2.0 / h**2 + c[1:N]
    off = np.full(n - 1, -1.0 / h**2)
    A = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    A[n - 1, n - 1] += -(4.0 * alpha) / h**2
    A[n - 1, n - 2] += alpha / h**2
    A = A.tocsc()

    sigma = -0.05 * (np.pi / R) ** 2
    lu = spla.splu(A - sigma * sp.identity(n, format="csc"))
    x = r[1:N] / R  # linear profile: close to the V=0 ground state
    x /= np.linalg.norm(x)
    delta = np.inf
    for _ in range(100):
        y = lu.solve(x)
        y /= np.linalg.norm(y)
        if y @ x < 0:
            y = -y
        delta = np.linalg.norm(y - x)
        x = y
        if delta < 1e-14:
            break
    if delta > 1e-9:
        raise ConvergenceError(f"inverse iteration did not settle (delta={delta:.2e})")
    E = x @ (A @ x)
    if x[n // 2] < 0:
        x = -x
    u = np.zeros(N + 1)
    u[1:N] = x
    u[N] = alpha * (4.0 * x[n - 1] - x[n - 2])
    u *= R / u[N]
    return float(E), r, u


def solve_neumann(V: RadialPotential, R: float, mesh_size: int = 2000,
                  refine: bool = False) -> NeumannSolution:
    """Lowest Neumann eigenpair on the ball of radius R.

    mesh_size is adjusted slightly so a node lands (near-)exactly on the
    support edge of V; refine=True additionally halves the mesh and
    Richardson-extrapolates E_R and a_R (the O(h^2) error is removed).
    """
    if R <= V.support_radius:
        raise GeometryError("ball radius must exceed the potential support")
    if mesh_size < 200:
        raise ValueError("mesh_size must be >= 200")
    if V.is_zero:
        r = np.linspace(0.0, R, mesh_size + 1)
        return NeumannSolution(V=V, R=R, grid=r, f=np.ones_like(r), u=r.copy(),
                               E_R=0.0, a_R=0.0)

    # Align the support edge with the mesh: pick the node count inside the
    # support first, then round the total count to match.
    m = R / V.support_radius
    n_in = max(8, round(mesh_size / m))
    N = max(mesh_size, round(n_in * m))

    E, r, u = _solve_neumann_once(V, R, N)
    a_R = _a_from_u(V, r, u)
    if refine:
        E2, r2, u2 = _solve_neumann_once(V, R, 2 * N)
        a2 = _a_from_u(V, r2, u2)
        E = (4.0 * E2 - E) / 3.0
        a_R = (4.0 * a2 - a_R) / 3.0
        r, u = r2, u2
    if E < -1e-10 * max(1.0, abs(E)):
        raise AccuracyError(f"negative Neumann eigenvalue E={E} (discretization bug)")
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.where(r > 0, u / np.where(r > 0, r, 1.0), 0.0)
    f[0] = (4.0 * u[1] - u[2]) / (2.0 * (r[1] - r[0]))
    return NeumannSolution(V=V, R=float(R), grid=r, f=f, u=u, E_R=E, a_R=float(a_R))


def scattering_length(V: RadialPotential, R1: float | None = None,
                      mesh_h: float | None = None, full_output: bool = False):
    """Scattering length by extrapolating a_R to R -> infinity.

    a_R = a + c1/R + c2/R^2 + ...; three radii (R1, 2 R1, 4 R1) cancel the
    first two corrections, and each solve is mesh-refined, leaving a
    relative error around 1e-7 for well-resolved potentials.  With
    full_output=True returns (a, error_estimate).
    """
    if V.is_zero:
        return (0.0, 0.0) if full_output else 0.0
    R0 = V.support_radius
    if R1 is None:
        R1 = 24.0 * R0
    if mesh_h is None:
        mesh_h = R0 / 64.0
    radii = [R1, 2.0 * R1, 4.0 * R1]
    a_vals = []
    for R in radii:
        sol = solve_neumann(V, R, mesh_size=int(round(R / mesh_h)), refine=True)
        a_vals.append(sol.a_R)
    a1, a2, a3 = a_vals
    if a1 < a2 - 1e-9 * abs(a2) or a2 < a3 - 1e-9 * abs(a3):
        raise AccuracyError("a_R sequence not monotone; refine the mesh")
    a_two = 2.0 * a3 - a2
    a_three = (8.0 * a3 - 6.0 * a2 + a1) / 3.0
    err = abs(a_three - a_two)
    if full_output:
        return float(a_three), float(err)
    return float(a_three)


def square_well_scattering_length(V0: float, R0: float) -> float:
    """Closed form a = R0 (1 - tanh(kappa R0)/(kappa R0)), kappa = sqrt(V0/2)."""
    if V0 == 0:
        return 0.0
    kap = np.sqrt(V0 / 2.0)
    return R0 * (1.0 - np.tanh(kap * R0) / (kap * R0))


def born_series(V: RadialPotential, order: int, grid: MomentumLattice | None = None) -> list[float]:
    """Partial sums of the Born series for the scattering length.

    a1 = Vhat(0)/8 pi; a2 subtracts the second-order term
    (continuum quadrature, or a lattice sum when a grid is supplied).
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if V.is_zero:
        return [0.0] * order
    a1 = fourier_transform_radial(V, 0.0) / (8.0 * np.pi)
    sums = [float(a1)]
    if order == 2:
        if grid is None:
            val, err = quad(lambda q: fourier_transform_radial(V, q) ** 2,
                            0.0, np.inf, epsrel=1e-10, limit=400)
            if err > 1e-6 * max(abs(val), 1e-12):
                raise AccuracyError("Born-term quadrature did not converge")
            second = val / (32.0 * np.pi**3)
        else:
            norms = grid.k_norms
            nz = norms > 0
            vh = fourier_transform_radial(V, norms[nz])
            second = float(np.sum(vh**2 / (2.0 * norms[nz] ** 2))) / (8.0 * np.pi * grid.L**3)
        sums.append(float(a1 - second))
    return sums


# ---------------------------------------------------------------------------
# Periodized scattering solution
# ---------------------------------------------------------------------------

@dataclass
class PeriodizedPhi:
    """Periodization of phi_inf = 1 - f_R onto the torus of side L.

    Carries the Fourier table phihat_inf(p) on lattice momenta together with
    a radial evaluator for arbitrary |p| (used by operator builders).
    """

    neumann: NeumannSolution
    L: float
    lattice: MomentumLattice
    phi_hat: np.ndarray  # aligned with lattice.points
    _radial_cache: dict = field(default_factory=dict, repr=False)

    @property
    def R(self) -> float:
        return self.neumann.R

    def phi_hat_radial(self, p_norm) -> float | np.ndarray:
        arr = np.atleast_1d(np.asarray(p_norm, dtype=float))
        sol = self.neumann
        if len(arr) > 4096:
            out = radial_fourier_on_mesh(sol.grid, 1.0 - sol.f, arr)
            if np.asarray(p_norm).ndim == 0:
                return float(out[0])
            return out
        out = np.empty_like(arr)
        missing_idx = []
        missing_p = []
        for i, q in enumerate(arr):
            key = round(float(q), 12)
            if key in self._radial_cache:
                out[i] = self._radial_cache[key]
            else:
                missing_idx.append(i)
                missing_p.append(q)
        if missing_idx:
            vals = radial_fourier_on_mesh(sol.grid, 1.0 - sol.f, np.asarray(missing_p))
            for i, q, v in zip(missing_idx, missing_p, vals):
                self._radial_cache[round(float(q), 12)] = float(v)
                out[i] = v
        if np.asarray(p_norm).ndim == 0:
            return float(out[0])
        return out

    def eval_fourier(self, x) -> float:
        x = np.asarray(x, dtype=float)
        phases = self.lattice.k_vectors @ x
        return float(np.sum(self.phi_hat * np.cos(phases)) / self.L**3)

    def eval_exact(self, x) -> float:
        """phi at x by wrapping to the fundamental image (needs R <= L/2)."""
        x = np.asarray(x, dtype=float)
        wrapped = (x + 0.5 * self.L) % self.L - 0.5 * self.L
        return float(self.neumann.phi(np.linalg.norm(wrapped)))

    def l1_norm(self) -> float:
        """||phi||_1 on the torus (single image: radial quadrature)."""
        sol = self.neumann
        r = sol.grid
        return float(simpson(4.0 * np.pi * r**2 * np.abs(1.0 - sol.f), x=r))


def periodize_phi(neumann: NeumannSolution, L: float, pmax: float) -> PeriodizedPhi:
    if neumann.R > 0.5 * L:
        raise GeometryError("ball radius exceeds L/2; images would overlap")
    lat = enumerate_momenta(L, pmax)
    phi = PeriodizedPhi(neumann=neumann, L=float(L), lattice=lat,
                        phi_hat=np.zeros(len(lat)))
    phi.phi_hat = np.asarray(phi.phi_hat_radial(lat.k_norms), dtype=float)
    phi.phi_hat.setflags(write=False)
    return phi


# ---------------------------------------------------------------------------
# Fourier-space scattering equation on the box
# ---------------------------------------------------------------------------

def _grid_to_cube(grid: MomentumLattice):
    """Embed grid points into a cube array index space."""
    pts = grid.points
    nmax = int(np.max(np.abs(pts))) if len(pts) else 0
    side = 2 * nmax + 1
    flat = ((pts[:, 0] + nmax) * side + (pts[:, 1] + nmax)) * side + (pts[:, 2] + nmax)
    return nmax, side, flat


class _TruncatedConvolution:
    """y(p) = L^-3 sum_{q in grid} Vhat(p - q) x(q), truncated to the grid."""

    def __init__(self, Vper: PeriodizedPotential, grid: MomentumLattice):
        from scipy.fft import next_fast_len

        self.grid = grid
        self.nmax, self.side, self.flat = _grid_to_cube(grid)
        self.L = grid.L
        n = self.nmax
        self.pad = next_fast_len(4 * n + 1)
        # Vhat on the difference cube [-2n, 2n]^3, wrapped for circular FFT.
        axis = np.arange(-2 * n, 2 * n + 1)
        d2 = (axis[:, None, None] ** 2 + axis[None, :, None] ** 2 + axis[None, None, :] ** 2)
        dnorm = (TWO_PI / self.L) * np.sqrt(d2.astype(float))
        uniq, inv = np.unique(dnorm, return_inverse=True)
        vals = np.asarray(Vper.vhat(uniq), dtype=float)
        vcube = vals[inv].reshape(d2.shape)
        big = np.zeros((self.pad,) * 3)
        idx = np.arange(-2 * n, 2 * n + 1) % self.pad
        big[np.ix_(idx, idx, idx)] = vcube
        from scipy.fft import fftn

        self.vhat_fft = fftn(big)

    def apply(self, x: np.ndarray) -> np.ndarray:
        from scipy.fft import fftn, ifftn

        n, pad = self.nmax, self.pad
        cube = np.zeros((pad,) * 3)
        idx = np.arange(-n, n + 1) % pad
        small = np.zeros((2 * n + 1,) * 3)
        small.reshape(-1)[self._flat_small()] = x
        cube[np.ix_(idx, idx, idx)] = small
        conv = ifftn(fftn(cube) * self.vhat_fft).real
        out_cube = conv[np.ix_(idx, idx, idx)]
        return out_cube.reshape(-1)[self._flat_small()] / self.L**3

    def _flat_small(self):
        return self.flat


@dataclass
class FourierScatteringSolution:
    """Solution of 2|p|^2 phihat + (Vhat * phihat) = Vhat on a momentum grid."""

    grid: MomentumLattice
    phi_hat: np.ndarray      # aligned with grid.points; phi_hat = 0 at p = 0
    residual_norm: float     # linear-system residual (p != 0 rows)
    p0_residual: float       # Vhat(0) - (Vhat * phihat)(0): 8 pi a_gamma diagnostic
    e_value: float           # e(phi) at the solution

    def phi_hat_map(self) -> dict:
        return {tuple(n): v for n, v in zip(self.grid.points, self.phi_hat)}


def solve_scattering_fourier(Vper: PeriodizedPotential, grid: MomentumLattice,
                             rtol: float = 1e-13, maxiter: int = 2000) -> FourierScatteringSolution:
    """Solve the box scattering equation on the grid momenta, p = 0 excluded.

    The system is symmetric positive definite (V >= 0), solved by
    preconditioned conjugate gradients with an FFT-based truncated
    convolution.  The p = 0 row residual is reported as a diagnostic.
    """
    conv = _TruncatedConvolution(Vper, grid)
    norms = grid.k_norms
    zero_mask = norms == 0.0
    if not np.any(zero_mask):
        raise ParameterError("grid must contain p = 0 (it is excluded from the unknowns)")
    diag = 2.0 * norms**2
    b = np.asarray(Vper.vhat(norms), dtype=float)
    b = np.where(zero_mask, 0.0, b)

    def matvec(x):
        x = np.where(zero_mask, 0.0, x)
        y = diag * x + conv.apply(x)
        return np.where(zero_mask, x, y)

    precond_diag = diag + Vper.vhat0 / Vper.L**3
    precond_diag[zero_mask] = 1.0

    op = spla.LinearOperator((len(norms), len(norms)), matvec=matvec)
    M = spla.LinearOperator((len(norms), len(norms)), matvec=lambda x: x / precond_diag)
    x, info = spla.cg(op, b, rtol=rtol, atol=0.0, maxiter=maxiter, M=M)
    if info != 0:
        raise ConvergenceError(f"CG did not converge (info={info})")
    x = np.where(zero_mask, 0.0, x)
    res = matvec(x) - b
    res[zero_mask] = 0.0
    conv_x = conv.apply(x)
    p0_res = float(Vper.vhat0 - conv_x[zero_mask][0])
    e_val, _ = energy_functional_e(x, grid, Vper, conv=conv)
    return FourierScatteringSolution(grid=grid, phi_hat=x,
                                     residual_norm=float(np.linalg.norm(res)),
                                     p0_residual=p0_res, e_value=float(e_val))


def energy_functional_e(phi_hat: np.ndarray, grid: MomentumLattice,
                        Vper: PeriodizedPotential, conv: _TruncatedConvolution | None = None):
    """e(phi) = L^-3 sum_p (|p|^2 phihat^2 - Vhat phihat + (Vhat*phihat) phihat / 2).

    Returns (value, gradient); the gradient is with respect to the grid
    phihat values, gradient(p) = L^-3 (2|p|^2 phihat - Vhat + Vhat*phihat).
    """
    if conv is None:
        conv = _TruncatedConvolution(Vper, grid)
    norms = grid.k_norms
    vh = np.asarray(Vper.vhat(norms), dtype=float)
    cx = conv.apply(phi_hat)
    L3 = grid.L**3
    value = np.sum(norms**2 * phi_hat**2 - vh * phi_hat + 0.5 * cx * phi_hat) / L3
    gradient = (2.0 * norms**2 * phi_hat - vh + cx) / L3
    return float(value), gradient


def effective_interaction(Vper: PeriodizedPotential, phi, pmax: float | None = None) -> float:
    """int V (1 - phi) = Vhat(0) - L^-3 sum_p Vhat(p) phihat(p)  (= 8 pi a_gamma).

    For a PeriodizedPhi the lattice sum runs radially over distinct shells
    (with exact multiplicities) up to pmax, which may extend well past the
    stored table.
    """
    if isinstance(phi, FourierScatteringSolution):
        lattice, phi_hat = phi.grid, phi.phi_hat
        vh = np.asarray(Vper.vhat(lattice.k_norms), dtype=float)
        return float(Vper.vhat0 - np.sum(vh * phi_hat) / lattice.L**3)
    if not isinstance(phi, PeriodizedPhi):
        lattice, phi_hat = phi
        vh = np.asarray(Vper.vhat(lattice.k_norms), dtype=float)
        return float(Vper.vhat0 - np.sum(vh * phi_hat) / lattice.L**3)
    L = phi.L
    if pmax is None:
        pmax = float(phi.lattice.kmax)
    n2max = int(np.floor((pmax * L / TWO_PI) ** 2))
    mult = shell_multiplicities(n2max)
    p_norms = (TWO_PI / L) * np.sqrt(np.arange(n2max + 1, dtype=float))
    vh = np.asarray(Vper.vhat(p_norms), dtype=float)
    sol = phi.neumann
    ph = radial_fourier_on_mesh(sol.grid, 1.0 - sol.f, p_norms)
    return float(Vper.vhat0 - np.sum(mult * vh * ph) / L**3)


# ---------------------------------------------------------------------------
# Cutoff decomposition (infrared / intermediate / ultraviolet windows)
# ---------------------------------------------------------------------------

@dataclass
class CutoffDecomposition:
    """Fourier-windowed split phi_<, phi_0, phi_> with their L1 norms.

    The windows partition the ultraviolet cutoff exactly:
    window_low + window_mid + window_high = chi(4 rho^beta |p|) pointwise.
    """

    rho: float
    gamma: float
    eta: float
    delta: float
    beta: float
    p_mesh: np.ndarray
    phi_hat: np.ndarray
    window_low: np.ndarray
    window_mid: np.ndarray
    window_high: np.ndarray
    l1_norms: tuple[float, float, float]


def cutoff_windows(p_norms, rho: float, eta: float, delta: float, beta: float):
    """Three complementary radial windows with edges at rho^eta, rho^(eta/delta),
    and the ultraviolet scale rho^-beta; they sum to chi(4 rho^beta |p|)."""
    p = np.asarray(p_norms, dtype=float)
    low = chi(2.0 * p / rho**eta)
    mid = chi(2.0 * p / rho ** (eta / delta)) - chi(2.0 * p / rho**eta)
    high = chi(4.0 * rho**beta * p) - chi(2.0 * p / rho ** (eta / delta))
    return low, mid, high


def cutoff_decomposition(phi: PeriodizedPhi, rho: float, gamma: float, eta: float,
                         delta: float, beta: float, r_max: float | None = None,
                         points_per_scale: int = 12) -> CutoffDecomposition:
    """Split phi into Fourier-windowed components and measure their L1 norms.

    The components are radial, so the position-grid quadrature reduces to a
    one-dimensional mesh: each component is reconstructed with the inverse
    radial transform and integrated with 4 pi r^2 |phi_#(r)| weights.  The
    mesh spacing resolves the fastest retained oscillation (the ultraviolet
    window edge).
    """
    if not (0.0 <= eta < gamma):
        raise ParameterError("need 0 <= eta < gamma (window overlap)")
    if delta <= 1.0:
        raise ParameterError("need delta > 1")
    if beta <= 0.0:
        raise ParameterError("need beta > 0")
    from .radial import inverse_radial_fourier

    # Ultraviolet support edge: chi(4 rho^beta p) vanishes for p >= 1/(2 rho^beta).
    p_uv = 0.5 * rho ** (-beta)
    # Largest position scale carried by any component: the low window keeps
    # structure out to ~ 1/rho^eta; phi itself is supported in the R-ball.
    if r_max is None:
        r_max = 8.0 * max(phi.R, 4.0 / rho**eta)
    n_t = int(np.ceil(points_per_scale * p_uv * r_max / np.pi)) | 1
    t = np.linspace(0.0, p_uv, max(n_t, 2049))
    phv = np.asarray(phi.phi_hat_radial(t), dtype=float)
    low, mid, high = cutoff_windows(t, rho, eta, delta, beta)

    dr = np.pi / (points_per_scale * p_uv)
    r = np.arange(0.0, r_max, dr)
    if len(r) % 2 == 0:
        r = np.append(r, r[-1] + dr)
    from .radial import simpson_weights

    rw = simpson_weights(r) * 4.0 * np.pi * r**2
    norms = []
    for win in (low, mid, high):
        vals = inverse_radial_fourier(phv * win, r, t)
        norms.append(float(np.sum(rw * np.abs(vals))))
    return CutoffDecomposition(rho=rho, gamma=gamma, eta=eta, delta=delta, beta=beta,
                               p_mesh=t, phi_hat=phv,
                               window_low=low, window_mid=mid, window_high=high,
                               l1_norms=(norms[0], norms[1], norms[2]))
