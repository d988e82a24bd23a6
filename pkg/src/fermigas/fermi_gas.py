"""Fermi balls, free-gas and Hartree-Fock energetics on the torus, the
one-particle density matrix, regularized kernels, and the second-order
energy formula with its error band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AdmissibilityError, ParameterError
from .lattice import TWO_PI, chi, closed_shell_sizes, enumerate_momenta
from .potential import PeriodizedPotential
from .radial import fit_loglog_slope, inverse_radial_fourier, simpson_weights


@dataclass(frozen=True)
class FermiBall:
    """Completely filled Fermi sea of one spin species on the box lattice."""

    spin: str
    L: float
    momenta: np.ndarray   # (N, 3) integer triples
    k_F: float
    N: int

    @property
    def rho(self) -> float:
        return self.N / self.L**3

    @property
    def k_vectors(self) -> np.ndarray:
        return (TWO_PI / self.L) * self.momenta

    @property
    def mu(self) -> float:
        """Chemical potential k_F^2 used by the relative kinetic operator."""
        return self.k_F**2


def build_fermi_ball(L: float, N: int, spin: str = "up") -> FermiBall:
    """Fermi ball with exactly N momenta; N must close a shell."""
    sizes = closed_shell_sizes(max(N, 1))
    if N not in sizes:
        nearest = [s for s in closed_shell_sizes(2 * N + 20)]
        lo = max((s for s in nearest if s < N), default=None)
        hi = min((s for s in nearest if s > N), default=None)
        raise AdmissibilityError(
            f"N={N} is not a closed-shell size (nearest: {lo}, {hi})")
    # Enumerate just past the Fermi surface and cut at N.
    kmax_guess = (TWO_PI / L) * (1.5 + (3.0 * N / (4.0 * np.pi)) ** (1.0 / 3.0))
    lat = enumerate_momenta(L, kmax_guess)
    while len(lat) < N:
        kmax_guess *= 1.3
        lat = enumerate_momenta(L, kmax_guess)
    momenta = lat.points[:N].copy()
    k_F = float(lat.k_norms[N - 1])
    return FermiBall(spin=spin, L=float(L), momenta=momenta, k_F=k_F, N=N)


def kinetic_energy_density(ball: FermiBall) -> float:
    """L^-3 sum_{k in ball} |k|^2."""
    k2 = np.einsum("ij,ij->i", ball.momenta, ball.momenta).astype(float)
    return float((TWO_PI / ball.L) ** 2 * np.sum(k2) / ball.L**3)


def free_gas_energy_density(rho: float) -> float:
    """Thermodynamic-limit kinetic density (3/5)(6 pi^2)^(2/3) rho^(5/3)."""
    return 0.6 * (6.0 * np.pi**2) ** (2.0 / 3.0) * rho ** (5.0 / 3.0)


@dataclass(frozen=True)
class HFBreakdown:
    kinetic: float
    direct: float
    exchange: float

    @property
    def total(self) -> float:
        return self.kinetic + self.direct + self.exchange


def _exchange_sum_direct(ball: FermiBall, Vper: PeriodizedPotential) -> float:
    """sum_{k,k' in ball} Vhat(k - k') by a chunked double loop."""
    pts = ball.momenta
    n = len(pts)
    total = 0.0
    scale = TWO_PI / ball.L
    for start in range(0, n, 512):
        block = pts[start:start + 512]
        d = block[:, None, :] - pts[None, :, :]
        d2 = np.einsum("abj,abj->ab", d, d).astype(float)
        uniq, inv = np.unique(d2, return_inverse=True)
        vals = np.asarray(Vper.vhat(scale * np.sqrt(uniq)), dtype=float)
        total += float(np.sum(vals[inv]))
    return total


def _exchange_sum_fft(ball: FermiBall, Vper: PeriodizedPotential) -> float:
    """Same sum via the pair-difference histogram (FFT autocorrelation)."""
    from scipy.fft import irfftn, rfftn

    pts = ball.momenta
    nmax = int(np.max(np.abs(pts))) if len(pts) else 0
    side = 4 * nmax + 1
    cube = np.zeros((side,) * 3)
    cube[pts[:, 0] + 2 * nmax, pts[:, 1] + 2 * nmax, pts[:, 2] + 2 * nmax] = 1.0
    f = rfftn(cube)
    corr = irfftn(f * np.conj(f), s=cube.shape)
    counts = np.rint(np.fft.fftshift(corr)).astype(np.int64)
    axis = np.arange(side) - (side // 2)
    d2 = (axis[:, None, None] ** 2 + axis[None, :, None] ** 2
          + axis[None, None, :] ** 2).astype(float)
    keep = counts.reshape(-1) > 0
    uniq, inv = np.unique(d2.reshape(-1)[keep], return_inverse=True)
    vals = np.asarray(Vper.vhat((TWO_PI / ball.L) * np.sqrt(uniq)), dtype=float)
    return float(np.sum(vals[inv] * counts.reshape(-1)[keep]))


def hf_energy(ball_up: FermiBall, ball_dn: FermiBall, Vper: PeriodizedPotential,
              exchange_method: str = "auto") -> HFBreakdown:
    """Hartree-Fock energy of the free Fermi gas state (total, not density).

    direct  = (L^3/2) Vhat(0) (rho_up + rho_dn)^2,
    exchange = -(1/2 L^3) sum_sigma sum_{k,k' in ball_sigma} Vhat(k - k').
    """
    if ball_up.L != ball_dn.L:
        raise ParameterError("balls must share the box length")
    L = ball_up.L
    kinetic = (kinetic_energy_density(ball_up) + kinetic_energy_density(ball_dn)) * L**3
    rho_tot = ball_up.rho + ball_dn.rho
    direct = 0.5 * L**3 * Vper.vhat0 * rho_tot**2
    exchange = 0.0
    for ball in (ball_up, ball_dn):
        if exchange_method == "fft" or (exchange_method == "auto" and ball.N > 2000):
            s = _exchange_sum_fft(ball, Vper)
        else:
            s = _exchange_sum_direct(ball, Vper)
        exchange -= 0.5 * s / L**3
    return HFBreakdown(kinetic=float(kinetic), direct=float(direct), exchange=float(exchange))


def omega_kernel(ball: FermiBall, r) -> float:
    """Reduced one-particle density matrix omega(r) = L^-3 sum e^{ik.r} (real)."""
    r = np.asarray(r, dtype=float)
    phases = ball.k_vectors @ r
    return float(np.sum(np.cos(phases)) / ball.L**3)


def omega_infinite_volume(rho: float, r: float) -> float:
    """Thermodynamic-limit kernel rho * 3 (sin t - t cos t)/t^3, t = k_F r."""
    k_F = (6.0 * np.pi**2 * rho) ** (1.0 / 3.0)
    t = k_F * np.asarray(r, dtype=float)
    small = np.abs(t) < 1e-6
    out = np.where(small, 1.0, 3.0 * (np.sin(t) - t * np.cos(t)) / np.where(small, 1.0, t) ** 3)
    return rho * out


# ---------------------------------------------------------------------------
# Regularized kernels u^r, v^r, omega^r (Fourier multipliers)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegularizedKernels:
    """Smooth radial multipliers around the Fermi surface and UV scale.

    vr_hat: 1 inside |k| < k_F - rho^alpha, 0 beyond k_F.
    ur_hat: 0 inside the ball, 1 on [2 k_F, (3/2) rho^-beta], 0 past 2 rho^-beta;
    it decomposes exactly as ur_hat = delta_r_hat - nu_hat.
    """

    rho: float
    k_F: float
    alpha: float
    beta: float
    eps: float

    def vr_hat(self, k):
        return chi((np.asarray(k, dtype=float) - (self.k_F - 2.0 * self.rho**self.alpha))
                   / self.rho**self.alpha)

    def nu_hat(self, k):
        return chi(np.asarray(k, dtype=float) / self.k_F)

    def delta_r_hat(self, k):
        # 1 up to (3/2) rho^-beta, 0 from 2 rho^-beta on.
        return chi(2.0 * self.rho**self.beta * np.asarray(k, dtype=float) - 2.0)

    def delta_uv_hat(self, k):
        return 1.0 - self.delta_r_hat(k)

    def ur_hat(self, k):
        return self.delta_r_hat(k) - self.nu_hat(k)

    def omega_r_hat(self, k):
        return self.vr_hat(k) ** 2

    @property
    def uv_scale(self) -> float:
        return self.rho ** (-self.beta)


def build_regularized_kernels(rho: float, beta: float, eps: float = 1.0 / 3.0,
                              alpha: float | None = None,
                              k_F: float | None = None) -> RegularizedKernels:
    """Multipliers at density rho; alpha defaults to 1/3 + eps/3 and k_F to
    the thermodynamic value (6 pi^2 rho)^(1/3)."""
    if beta <= 0 or eps < 0 or rho <= 0:
        raise ParameterError("need beta > 0, eps >= 0, rho > 0")
    if alpha is None:
        alpha = 1.0 / 3.0 + eps / 3.0
    if k_F is None:
        k_F = (6.0 * np.pi**2 * rho) ** (1.0 / 3.0)
    if k_F - 2.0 * rho**alpha <= 0:
        raise ParameterError("rho too large: k_F - 2 rho^alpha must stay positive")
    if 2.0 * k_F > 1.5 * rho ** (-beta):
        raise ParameterError("scales overlap: need 2 k_F <= (3/2) rho^-beta")
    return RegularizedKernels(rho=float(rho), k_F=float(k_F), alpha=float(alpha),
                              beta=float(beta), eps=float(eps))


def _l2_norm_multiplier(ghat, kmax: float, n: int = 8193) -> float:
    """||g_x||_2 = sqrt((2 pi)^-3 int ghat^2 d^3k) for a radial multiplier."""
    t = np.linspace(0.0, kmax, n)
    w = simpson_weights(t)
    val = np.sum(w * t**2 * np.asarray(ghat(t), dtype=float) ** 2) / (2.0 * np.pi**2)
    return float(np.sqrt(val))


def _l1_norm_position(ghat, kmax: float, osc_scale: float, r_max: float,
                      points_per_osc: int = 12) -> float:
    """||g_x||_1 = int 4 pi r^2 |g(r)| dr by radial grid quadrature.

    osc_scale sets the fastest position-space oscillation (the largest
    multiplier edge); the radial mesh resolves it.
    """
    dr = np.pi / (points_per_osc * osc_scale)
    r = np.arange(0.0, r_max, dr)
    if len(r) % 2 == 0:
        r = np.append(r, r[-1] + dr)
    nt = max(4097, int(np.ceil(8 * kmax * r_max / np.pi)) | 1)
    t = np.linspace(0.0, kmax, nt)
    vals = inverse_radial_fourier(np.asarray(ghat(t), dtype=float), r, t)
    return float(np.sum(simpson_weights(r) * 4.0 * np.pi * r**2 * np.abs(vals)))


def kernel_norms(kern: RegularizedKernels) -> dict[str, float]:
    """Position-space norms of the regularized kernels at one density."""
    uv = 2.0 * kern.uv_scale
    u_l2 = _l2_norm_multiplier(kern.ur_hat, uv)
    v_l2 = _l2_norm_multiplier(kern.vr_hat, kern.k_F)
    omega0 = v_l2**2
    # omega^r oscillates at the Fermi scale; u^r also at the UV scale.
    omega_l1 = _l1_norm_position(kern.omega_r_hat, kern.k_F, kern.k_F,
                                 r_max=40.0 * kern.rho ** (-kern.alpha))
    # u^r = delta^r - nu: the ultraviolet core is confined to x ~ rho^beta
    # (smooth multiplier, fast decay), the Fermi-scale tail is pure -nu.
    # Integrating the regions separately avoids a UV-fine mesh on the whole
    # Fermi-scale domain.
    r_split = 60.0 * kern.rho**kern.beta
    u_core = _l1_norm_position(kern.ur_hat, uv, uv, r_max=r_split)
    nu_tail = (_l1_norm_position(kern.nu_hat, 2.0 * kern.k_F, 2.0 * kern.k_F,
                                 r_max=60.0 / kern.k_F)
               - _l1_norm_position(kern.nu_hat, 2.0 * kern.k_F, 2.0 * kern.k_F,
                                   r_max=r_split))
    u_l1 = u_core + nu_tail
    return {"u_l2": u_l2, "v_l2": v_l2, "omega0": omega0,
            "omega_l1": omega_l1, "u_l1": u_l1}


def kernel_norm_diagnostics(rhos, beta: float, eps: float = 1.0 / 3.0) -> dict:
    """Norms over a density sweep plus fitted log-log exponents.

    Needs at least 4 densities spanning a decade for a meaningful fit.
    """
    rhos = np.asarray(rhos, dtype=float)
    if len(rhos) < 4 or rhos.max() / rhos.min() < 9.99:
        raise ParameterError("need >= 4 densities spanning at least a decade")
    rows = []
    for rho in rhos:
        kern = build_regularized_kernels(rho, beta=beta, eps=eps)
        rows.append(kernel_norms(kern))
    table = {key: np.array([row[key] for row in rows]) for key in rows[0]}
    fits = {
        "u_l2_exponent": fit_loglog_slope(rhos, table["u_l2"]),
        "v_l2_exponent": fit_loglog_slope(rhos, table["v_l2"]),
        "omega_l1_exponent": fit_loglog_slope(rhos, table["omega_l1"]),
        "u_l1_exponent": fit_loglog_slope(rhos, table["u_l1"]),
    }
    return {"rhos": rhos, "norms": table, "fits": fits,
            "expected": {"u_l2_exponent": -1.5 * beta, "v_l2_exponent": 0.5,
                         "omega_l1_exponent": -eps / 3.0, "u_l1_exponent": 0.0}}


def shell_count(L: float, mu: float, w: float) -> int:
    """|{k : ||k|^2 - mu| <= w}| by direct enumeration."""
    if w < 0:
        raise ParameterError("window width must be nonnegative")
    kmax = np.sqrt(max(mu + w, 0.0))
    if kmax == 0.0:
        return 1 if abs(mu) <= w else 0
    lat = enumerate_momenta(L, kmax * 1.000001)
    k2 = lat.k_norms**2
    return int(np.count_nonzero(np.abs(k2 - mu) <= w * (1 + 1e-12)))


# ---------------------------------------------------------------------------
# Second-order energy formula with error band
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyFormulaResult:
    value: float
    band_lower: float
    band_upper: float
    xi1: float
    xi2: float
    C: float


XI1 = 2.0 / 9.0
XI2 = 1.0 / 9.0


def eval_energy_formula(rho_up: float, rho_dn: float, a: float,
                        C: float = 1.0) -> EnergyFormulaResult:
    """(3/5)(6 pi^2)^(2/3)(rho_up^(5/3) + rho_dn^(5/3)) + 8 pi a rho_up rho_dn.

    The band is [-C rho^(2+xi2), +C rho^(2+xi1)] around the value with
    xi1 = 2/9, xi2 = 1/9 and a user-supplied constant C.
    """
    if rho_up < 0 or rho_dn < 0:
        raise ParameterError("densities must be nonnegative")
    value = (free_gas_energy_density(rho_up) + free_gas_energy_density(rho_dn)
             + 8.0 * np.pi * a * rho_up * rho_dn)
    rho = rho_up + rho_dn
    return EnergyFormulaResult(value=float(value),
                               band_lower=float(value - C * rho ** (2.0 + XI2)),
                               band_upper=float(value + C * rho ** (2.0 + XI1)),
                               xi1=XI1, xi2=XI2, C=C)
