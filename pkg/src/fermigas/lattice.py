"""Momentum lattices (2*pi/L)Z^3, closed-shell bookkeeping, and the smooth cutoff chi.

All momenta are represented by integer triples n; physical momentum is
k = (2*pi/L) * n.  Enumeration order is fixed to (|n|^2, lexicographic n)
so every downstream reduction has a reproducible order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError

TWO_PI = 2.0 * np.pi

# Above this point count the lattice no longer fits desk-scale memory targets.
DEFAULT_POINT_LIMIT = 2_000_000


def _bump(t):
    """exp(-1/t) for t > 0, 0 otherwise (C-infinity at t = 0)."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def chi(t):
    """Smooth nonincreasing step: 1 for t <= 1, 0 for t >= 2, C-infinity.

    Built from the standard e^{-1/t} bump ratio.  Accepts scalars or arrays
    and any real argument (values below 1 map to 1).
    """
    t = np.asarray(t, dtype=float)
    up = _bump(2.0 - t)
    down = _bump(t - 1.0)
    with np.errstate(invalid="ignore"):
        val = up / (up + down)
    val = np.where(t <= 1.0, 1.0, val)
    val = np.where(t >= 2.0, 0.0, val)
    if val.ndim == 0:
        return float(val)
    return val


def chi_c(t):
    """Complementary cutoff 1 - chi(t)."""
    return 1.0 - chi(t)


# Maximum of |chi'| on [1, 2]; verified by the finite-difference test suite.
CHI_DERIVATIVE_BOUND = 2.5


@dataclass(frozen=True)
class MomentumLattice:
    """All lattice momenta k = (2*pi/L) n with |k| <= kmax.

    points holds the integer triples sorted by (|n|^2, lexicographic);
    k_norms the matching |k| values.
    """

    L: float
    kmax: float
    points: np.ndarray  # (N, 3) int64
    k_norms: np.ndarray  # (N,) float

    def __post_init__(self):
        self.points.setflags(write=False)
        self.k_norms.setflags(write=False)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def k_vectors(self) -> np.ndarray:
        return (TWO_PI / self.L) * self.points


def _sorted_integer_points(nmax_sq: float) -> np.ndarray:
    """Integer triples with |n|^2 <= nmax_sq, sorted by (|n|^2, lex)."""
    nmax = int(np.floor(np.sqrt(nmax_sq) + 1e-12))
    axis = np.arange(-nmax, nmax + 1, dtype=np.int64)
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    n2 = np.einsum("ij,ij->i", grid, grid)
    keep = n2 <= nmax_sq + 1e-9
    pts = grid[keep]
    n2 = n2[keep]
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0], n2))
    return pts[order]


def enumerate_momenta(L: float, kmax: float, point_limit: int = DEFAULT_POINT_LIMIT) -> MomentumLattice:
    """Enumerate lattice momenta with |k| <= kmax, sorted by (|k|^2, lex n)."""
    if L <= 0:
        raise ValueError("box length must be positive")
    if kmax < 0:
        raise ValueError("kmax must be nonnegative")
    nmax_sq = (kmax * L / TWO_PI) ** 2
    est = max(1.0, 4.19 * nmax_sq ** 1.5)
    if est > 4 * point_limit:
        raise ResourceLimitError(f"lattice would hold ~{est:.2e} points (limit {point_limit})")
    pts = _sorted_integer_points(nmax_sq)
    if pts.shape[0] > point_limit:
        raise ResourceLimitError(f"lattice holds {pts.shape[0]} points (limit {point_limit})")
    k_norms = (TWO_PI / L) * np.sqrt(np.einsum("ij,ij->i", pts, pts).astype(float))
    return MomentumLattice(L=float(L), kmax=float(kmax), points=pts, k_norms=k_norms)


def enumerate_cube(L: float, nmax: int, point_limit: int = DEFAULT_POINT_LIMIT) -> MomentumLattice:
    """Full cube n in [-nmax, nmax]^3, same ordering as enumerate_momenta.

    Used by the Fourier-space scattering solver, which works on a cubic
    momentum grid so that truncated convolutions map onto padded FFTs.
    """
    if L <= 0:
        raise ValueError("box length must be positive")
    count = (2 * nmax + 1) ** 3
    if count > point_limit:
        raise ResourceLimitError(f"cube holds {count} points (limit {point_limit})")
    axis = np.arange(-nmax, nmax + 1, dtype=np.int64)
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    n2 = np.einsum("ij,ij->i", grid, grid)
    order = np.lexsort((grid[:, 2], grid[:, 1], grid[:, 0], n2))
    pts = grid[order]
    k_norms = (TWO_PI / L) * np.sqrt(np.einsum("ij,ij->i", pts, pts).astype(float))
    return MomentumLattice(L=float(L), kmax=float(TWO_PI / L * nmax * np.sqrt(3.0)), points=pts, k_norms=k_norms)


def shell_structure(max_size: int) -> tuple[np.ndarray, np.ndarray]:
    """(distinct |n|^2 values, cumulative point counts) up to max_size points."""
    if max_size < 1:
        raise ValueError("max_size must be >= 1")
    # Grow the enumeration radius until enough points are collected.
    nmax_sq = 1.0
    while True:
        pts = _sorted_integer_points(nmax_sq)
        # Only shells strictly inside the enumeration radius are complete.
        n2 = np.einsum("ij,ij->i", pts, pts)
        complete = n2 <= nmax_sq - 1.0 + 1e-9
        if np.count_nonzero(complete) >= max_size or len(pts) > 64 * max_size + 1000:
            n2 = n2[complete]
            break
        nmax_sq *= 2.0
    values, counts = np.unique(n2, return_counts=True)
    cumulative = np.cumsum(counts)
    keep = cumulative <= max_size
    if not np.any(keep):
        keep = np.zeros(len(values), dtype=bool)
        keep[0] = True
    return values[keep], cumulative[keep]


def closed_shell_sizes(max_size: int) -> list[int]:
    """Ascending particle numbers N for which the Fermi ball closes exactly.

    Independent of L: counts depend only on the integer lattice.
    """
    _, cumulative = shell_structure(max_size)
    return [int(c) for c in cumulative]


def shell_multiplicities(n2max: int) -> np.ndarray:
    """r3(m) = #{n in Z^3 : |n|^2 = m} for m = 0..n2max.

    Computed exactly as the triple convolution of the one-dimensional
    squares histogram; lets radial lattice sums run over distinct shells
    instead of materializing the lattice.
    """
    from scipy.signal import fftconvolve

    nmax = int(np.floor(np.sqrt(n2max)))
    h1 = np.zeros(n2max + 1)
    squares = np.arange(-nmax, nmax + 1) ** 2
    np.add.at(h1, squares, 1.0)
    h2 = fftconvolve(h1, h1)[: n2max + 1]
    h3 = fftconvolve(h2, h1)[: n2max + 1]
    return np.rint(h3).astype(np.int64)
