"""Fock-space exact diagonalization on a small set of lattice modes.

Basis states are occupation words (one bit per mode) over a fixed, globally
ordered mode list: up-spin modes first, then down-spin, each block sorted by
(|n|^2, lexicographic).  A creation operator on mode i carries the sign
(-1)^(number of occupied modes below i), which makes the canonical
anticommutation relations exact.

Operators are built either from explicit normal-ordered monomial lists
(the particle-hole operator zoo) or state-driven (the two-body Hamiltonian),
both compiled to sparse matrices with numba kernels.  A slow dictionary
applier provides an independent oracle for tests.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from numba import njit

from .errors import ConvergenceError, ParameterError, ResourceLimitError
from .fermi_gas import FermiBall, RegularizedKernels, hf_energy
from .lattice import TWO_PI
from .potential import PeriodizedPotential

SPIN_UP, SPIN_DN = 0, 1

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)


@njit(cache=True)
def _popcount64(x):
    x = x - ((x >> _ONE) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return (x * _H01) >> np.uint64(56)


# ---------------------------------------------------------------------------
# Mode sets and Fock spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModeSet:
    """Ordered list of (momentum, spin) modes; both spins share the momenta.

    Mode index m encodes spin = m // n_mom and momentum index m % n_mom.
    """

    L: float
    momenta: np.ndarray  # (n_mom, 3) int64, sorted by (|n|^2, lex)

    def __post_init__(self):
        self.momenta.setflags(write=False)

    @property
    def n_mom(self) -> int:
        return self.momenta.shape[0]

    @property
    def n_modes(self) -> int:
        return 2 * self.n_mom

    @property
    def k_vectors(self) -> np.ndarray:
        return (TWO_PI / self.L) * self.momenta

    @property
    def k2(self) -> np.ndarray:
        """|k|^2 per momentum index."""
        return (TWO_PI / self.L) ** 2 * np.einsum(
            "ij,ij->i", self.momenta, self.momenta).astype(float)

    @property
    def k_norms(self) -> np.ndarray:
        return np.sqrt(self.k2)

    def mode_index(self, spin: int, mom_index: int) -> int:
        return spin * self.n_mom + mom_index

    def lookup(self) -> tuple[np.ndarray, int]:
        """Dense momentum -> index map over the bounding cube; -1 if absent."""
        nmax = int(np.max(np.abs(self.momenta))) if self.n_mom else 0
        side = 2 * nmax + 1
        table = -np.ones((side, side, side), dtype=np.int64)
        idx = self.momenta + nmax
        table[idx[:, 0], idx[:, 1], idx[:, 2]] = np.arange(self.n_mom)
        return table, nmax


def mode_set_from_cutoff(L: float, n2max: int) -> ModeSet:
    """All lattice momenta with |n|^2 <= n2max (closed under negation)."""
    nmax = int(np.floor(np.sqrt(n2max)))
    axis = np.arange(-nmax, nmax + 1, dtype=np.int64)
    grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    n2 = np.einsum("ij,ij->i", grid, grid)
    pts = grid[n2 <= n2max]
    n2 = n2[n2 <= n2max]
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0], n2))
    pts = pts[order]
    if 2 * len(pts) > 62:
        raise ResourceLimitError(f"{2*len(pts)} modes exceed the 62-bit word limit")
    return ModeSet(L=float(L), momenta=pts)


def mode_set_from_momenta(L: float, momenta) -> ModeSet:
    pts = np.asarray(momenta, dtype=np.int64).reshape(-1, 3)
    as_set = {tuple(p) for p in pts}
    if len(as_set) != len(pts):
        raise ParameterError("duplicate momenta in mode set")
    for p in pts:
        if tuple(-p) not in as_set:
            raise ParameterError("mode set must be closed under n -> -n")
    n2 = np.einsum("ij,ij->i", pts, pts)
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0], n2))
    pts = pts[order]
    if 2 * len(pts) > 62:
        raise ResourceLimitError(f"{2*len(pts)} modes exceed the 62-bit word limit")
    return ModeSet(L=float(L), momenta=pts)


DEFAULT_DIM_CAP = 500_000


@dataclass
class FockSpace:
    """Explicit word basis over a mode set, sorted by word value."""

    modes: ModeSet
    words: np.ndarray  # (dim,) uint64 ascending

    def __post_init__(self):
        self.words.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.words.shape[0]

    def index(self, word: int) -> int:
        i = int(np.searchsorted(self.words, np.uint64(word)))
        if i >= self.dim or self.words[i] != np.uint64(word):
            raise KeyError(f"word {word:b} not in space")
        return i

    def occupation_counts(self) -> tuple[np.ndarray, np.ndarray]:
        """(n_up, n_dn) arrays per basis word."""
        n_mom = self.modes.n_mom
        up_mask = np.uint64((1 << n_mom) - 1)
        w = self.words
        n_up = np.array([bin(int(x) & int(up_mask)).count("1") for x in w])
        n_dn = np.array([bin(int(x) >> n_mom).count("1") for x in w])
        return n_up, n_dn

    def basis_vector(self, word: int) -> np.ndarray:
        v = np.zeros(self.dim)
        v[self.index(word)] = 1.0
        return v


def _signed_momentum_sums(modes: ModeSet, indices, signs=None) -> np.ndarray:
    moms = modes.momenta[list(indices)] if len(indices) else np.zeros((0, 3), dtype=np.int64)
    if signs is None:
        return moms.sum(axis=0)
    s = np.asarray([signs[i] for i in indices], dtype=np.int64)
    return (moms * s[:, None]).sum(axis=0)


def build_sector(modes: ModeSet, n_up: int, n_dn: int, total_momentum=None,
                 momentum_signs: np.ndarray | None = None,
                 dim_cap: int = DEFAULT_DIM_CAP) -> FockSpace:
    """All words with fixed per-spin particle numbers, optionally restricted
    to a total (signed) momentum.

    momentum_signs, when given, weights each momentum index by +-1 in the
    conservation sum (used for the particle-hole-transformed frame, where
    hole modes carry negative momentum).
    """
    n_mom = modes.n_mom
    if n_up > n_mom or n_dn > n_mom or n_up < 0 or n_dn < 0:
        raise ParameterError("particle numbers exceed available modes")
    est = comb(n_mom, n_up) * comb(n_mom, n_dn)
    if total_momentum is None and est > dim_cap:
        raise ResourceLimitError(f"sector dimension {est} exceeds cap {dim_cap}")
    if est > 5e7:
        raise ResourceLimitError(f"enumeration of {est} words is beyond desk scale")

    def spin_groups(count):
        groups: dict[tuple, list] = {}
        for combo in itertools.combinations(range(n_mom), count):
            key = tuple(_signed_momentum_sums(modes, combo, momentum_signs))
            groups.setdefault(key, []).append(combo)
        return groups

    words = []
    if total_momentum is None:
        for cu in itertools.combinations(range(n_mom), n_up):
            wu = sum(1 << i for i in cu)
            for cd in itertools.combinations(range(n_mom), n_dn):
                words.append(wu | sum(1 << (n_mom + i) for i in cd))
    else:
        target = np.asarray(total_momentum, dtype=np.int64)
        up_groups = spin_groups(n_up)
        dn_groups = spin_groups(n_dn)
        for pu, combos_u in up_groups.items():
            need = tuple(target - np.asarray(pu, dtype=np.int64))
            if need not in dn_groups:
                continue
            for cu in combos_u:
                wu = sum(1 << i for i in cu)
                for cd in dn_groups[need]:
                    words.append(wu | sum(1 << (n_mom + i) for i in cd))
    if len(words) > dim_cap:
        raise ResourceLimitError(f"sector dimension {len(words)} exceeds cap {dim_cap}")
    if not words:
        raise ParameterError("empty sector")
    arr = np.array(sorted(words), dtype=np.uint64)
    return FockSpace(modes=modes, words=arr)


def union_space(spaces) -> FockSpace:
    words = np.unique(np.concatenate([s.words for s in spaces]))
    return FockSpace(modes=spaces[0].modes, words=words)


def dagger_monomials(monomials):
    """Python-format monomials of the adjoint operator."""
    out = []
    for ops, coef in monomials:
        out.append((tuple((m, 1 - d) for (m, d) in reversed(ops)), coef))
    return out


def reachable_space(modes: ModeSet, seeds, monomials_py, max_popcount: int,
                    rounds: int = 16, dim_cap: int = DEFAULT_DIM_CAP) -> FockSpace:
    """Closure of seed words under a monomial family, capped at max_popcount.

    Used to build the smallest Fock space invariant (up to the particle
    cap) under B and B*, so the correlation structure acts exactly.
    """
    seen = {int(w) for w in seeds}
    frontier = list(seen)
    for _ in range(rounds):
        new = []
        for w in frontier:
            for ops, _ in monomials_py:
                ww = w
                dead = False
                for mode, dag in reversed(ops):
                    bit = 1 << mode
                    occ = bool(ww & bit)
                    if (dag and occ) or (not dag and not occ):
                        dead = True
                        break
                    ww ^= bit
                if dead or ww in seen:
                    continue
                if bin(ww).count("1") > max_popcount:
                    continue
                seen.add(ww)
                new.append(ww)
                if len(seen) > dim_cap:
                    raise ResourceLimitError("reachable space exceeds the cap")
        frontier = new
        if not frontier:
            break
    words = np.array(sorted(seen), dtype=np.uint64)
    return FockSpace(modes=modes, words=words)


def pair_tower(modes: ModeSet, ball_up: FermiBall, ball_dn: FermiBall,
               b_monos: MonomialList, j_max: int,
               dim_cap: int = DEFAULT_DIM_CAP) -> FockSpace:
    """Smallest space containing Omega and closed under B, B* up to 2 j_max
    created pairs: the home of T_lambda Omega."""
    py = b_monos.as_python()
    fam = py + dagger_monomials(py)
    return reachable_space(modes, [0], fam, max_popcount=4 * j_max,
                           dim_cap=dim_cap)


def hole_momentum_signs(modes: ModeSet, ball_up: FermiBall, ball_dn: FermiBall) -> np.ndarray:
    """Per-momentum-index sign: -1 inside the (up) Fermi ball, +1 outside.

    Both spins share momenta; the sign array is per momentum index and is
    used for the transformed-frame momentum bookkeeping.  Balls of the two
    spins must fill the same momenta for a shared sign table.
    """
    in_up = ball_membership(modes, ball_up)
    in_dn = ball_membership(modes, ball_dn)
    if not np.array_equal(in_up, in_dn):
        raise ParameterError("pair tower bookkeeping assumes equal Fermi balls")
    return np.where(in_up, -1, 1).astype(np.int64)


def ball_membership(modes: ModeSet, ball: FermiBall) -> np.ndarray:
    """Boolean per momentum index: momentum belongs to the Fermi ball."""
    ball_set = {tuple(p) for p in ball.momenta}
    missing = ball_set - {tuple(p) for p in modes.momenta}
    if missing:
        raise ParameterError("Fermi ball momenta must be contained in the mode set")
    return np.array([tuple(p) in ball_set for p in modes.momenta], dtype=bool)


# ---------------------------------------------------------------------------
# Numba kernels: monomial and Hamiltonian application
# ---------------------------------------------------------------------------

@njit(cache=True)
def _apply_ops(w, ops, dags, nops):
    """Apply an operator string (rightmost acts first) to a word."""
    sign = 1
    for j in range(nops - 1, -1, -1):
        m = ops[j]
        bit = _ONE << np.uint64(m)
        occ = (w & bit) != _ZERO
        if dags[j]:
            if occ:
                return _ZERO, 0
        else:
            if not occ:
                return _ZERO, 0
        below = w & (bit - _ONE)
        if _popcount64(below) & _ONE:
            sign = -sign
        w = w ^ bit
    return w, sign


@njit(cache=True)
def _monomial_pass(words, ops, dags, lens, coefs, rows, cols, vals, fill):
    cnt = 0
    dropped = 0
    for wi in range(words.shape[0]):
        w = words[wi]
        for mi in range(lens.shape[0]):
            tw, sgn = _apply_ops(w, ops[mi], dags[mi], lens[mi])
            if sgn == 0:
                continue
            ti = np.searchsorted(words, tw)
            if ti < words.shape[0] and words[ti] == tw:
                if fill:
                    rows[cnt] = ti
                    cols[cnt] = wi
                    vals[cnt] = coefs[mi] * sgn
                cnt += 1
            else:
                dropped += 1
    return cnt, dropped


@njit(cache=True)
def _hamiltonian_pass(words, n_mom, mom, lookup, nmax, vtable, voffset, inv2L3,
                      rows, cols, vals, fill):
    """Quartic part (1/2L^3) sum V(p) a+_{k+p,s} a+_{k'-p,s'} a_{k',s'} a_{k,s}.

    Truncation: creation momenta outside the mode set are dropped (counted).
    """
    n_words = words.shape[0]
    cnt = 0
    dropped = 0
    M = 2 * n_mom
    occ = np.empty(M, dtype=np.int64)
    for wi in range(n_words):
        w = words[wi]
        nocc = 0
        for m in range(M):
            if (w >> np.uint64(m)) & _ONE:
                occ[nocc] = m
                nocc += 1
        for a1 in range(nocc):          # annihilate m1 (rightmost)
            m1 = occ[a1]
            s1 = m1 // n_mom
            i1 = m1 % n_mom
            for a2 in range(nocc):      # then annihilate m2
                m2 = occ[a2]
                if m2 == m1:
                    continue
                s2 = m2 // n_mom
                i2 = m2 % n_mom
                for t1 in range(n_mom):  # created momentum for spin s1
                    px = mom[t1, 0] - mom[i1, 0]
                    py = mom[t1, 1] - mom[i1, 1]
                    pz = mom[t1, 2] - mom[i1, 2]
                    qx = mom[i2, 0] - px
                    qy = mom[i2, 1] - py
                    qz = mom[i2, 2] - pz
                    if (qx < -nmax or qx > nmax or qy < -nmax or qy > nmax
                            or qz < -nmax or qz > nmax):
                        dropped += 1
                        continue
                    t2 = lookup[qx + nmax, qy + nmax, qz + nmax]
                    if t2 < 0:
                        dropped += 1
                        continue
                    vh = vtable[px + voffset, py + voffset, pz + voffset]
                    if vh == 0.0:
                        continue
                    # a+_{t1,s1} a+_{t2,s2} a_{m2} a_{m1}
                    sign = 1
                    ww = w
                    bit = _ONE << np.uint64(m1)
                    if _popcount64(ww & (bit - _ONE)) & _ONE:
                        sign = -sign
                    ww = ww ^ bit
                    bit = _ONE << np.uint64(m2)
                    if _popcount64(ww & (bit - _ONE)) & _ONE:
                        sign = -sign
                    ww = ww ^ bit
                    mt2 = s2 * n_mom + t2
                    bit = _ONE << np.uint64(mt2)
                    if (ww & bit) != _ZERO:
                        continue
                    if _popcount64(ww & (bit - _ONE)) & _ONE:
                        sign = -sign
                    ww = ww ^ bit
                    mt1 = s1 * n_mom + t1
                    bit = _ONE << np.uint64(mt1)
                    if (ww & bit) != _ZERO:
                        continue
                    if _popcount64(ww & (bit - _ONE)) & _ONE:
                        sign = -sign
                    ww = ww ^ bit
                    ti = np.searchsorted(words, ww)
                    if ti < n_words and words[ti] == ww:
                        if fill:
                            rows[cnt] = ti
                            cols[cnt] = wi
                            vals[cnt] = 0.5 * inv2L3 * vh * sign
                        cnt += 1
                    else:
                        dropped += 1
    return cnt, dropped


@njit(cache=True)
def _diagonal_from_mode_values(words, mode_values):
    out = np.zeros(words.shape[0])
    M = mode_values.shape[0]
    for wi in range(words.shape[0]):
        w = words[wi]
        acc = 0.0
        for m in range(M):
            if (w >> np.uint64(m)) & _ONE:
                acc += mode_values[m]
        out[wi] = acc
    return out


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------

@dataclass
class Operator:
    """Sparse matrix on a FockSpace plus truncation bookkeeping."""

    space: FockSpace
    matrix: sp.csr_matrix
    name: str
    dropped_terms: int = 0

    def apply(self, vec: np.ndarray) -> np.ndarray:
        return self.matrix @ vec

    def expectation(self, vec: np.ndarray) -> float:
        return float(np.real(np.vdot(vec, self.matrix @ vec)))

    def dagger(self) -> "Operator":
        return Operator(space=self.space, matrix=self.matrix.T.conj().tocsr(),
                        name=self.name + "^*", dropped_terms=self.dropped_terms)

    def plus_hc(self) -> "Operator":
        return Operator(space=self.space,
                        matrix=(self.matrix + self.matrix.T.conj()).tocsr(),
                        name=self.name + "+h.c.", dropped_terms=self.dropped_terms)

    def __add__(self, other: "Operator") -> "Operator":
        return Operator(space=self.space, matrix=(self.matrix + other.matrix).tocsr(),
                        name=f"({self.name}+{other.name})",
                        dropped_terms=self.dropped_terms + other.dropped_terms)


class MonomialList:
    """Normal-ordered operator strings with coefficients (build buffer)."""

    def __init__(self):
        self.ops: list = []
        self.dags: list = []
        self.coefs: list = []

    def add(self, ops, dags, coef):
        if abs(coef) < 1e-300:
            return
        self.ops.append(list(ops))
        self.dags.append(list(dags))
        self.coefs.append(float(coef))

    def __len__(self):
        return len(self.coefs)

    def arrays(self):
        n = len(self.coefs)
        maxlen = max((len(o) for o in self.ops), default=1)
        ops = np.zeros((n, maxlen), dtype=np.int64)
        dags = np.zeros((n, maxlen), dtype=np.uint8)
        lens = np.zeros(n, dtype=np.int64)
        for i, (o, d) in enumerate(zip(self.ops, self.dags)):
            lens[i] = len(o)
            ops[i, : len(o)] = o
            dags[i, : len(o)] = d
        return ops, dags, lens, np.asarray(self.coefs, dtype=float)

    def as_python(self):
        """For the slow dictionary applier."""
        return [(tuple(zip(o, d)), c) for o, d, c in zip(self.ops, self.dags, self.coefs)]


def operator_from_monomials(space: FockSpace, monos: MonomialList, name: str) -> Operator:
    if len(monos) == 0:
        return Operator(space=space, matrix=sp.csr_matrix((space.dim, space.dim)),
                        name=name)
    ops, dags, lens, coefs = monos.arrays()
    dummy = np.zeros(0, dtype=np.int64)
    dummyv = np.zeros(0, dtype=float)
    cnt, dropped = _monomial_pass(space.words, ops, dags, lens, coefs,
                                  dummy, dummy, dummyv, False)
    rows = np.zeros(cnt, dtype=np.int64)
    cols = np.zeros(cnt, dtype=np.int64)
    vals = np.zeros(cnt, dtype=float)
    _monomial_pass(space.words, ops, dags, lens, coefs, rows, cols, vals, True)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(space.dim, space.dim)).tocsr()
    mat.sum_duplicates()
    return Operator(space=space, matrix=mat, name=name, dropped_terms=int(dropped))


def apply_monomials_dict(monomials, state: dict) -> dict:
    """Slow, obviously-correct applier on {word: amplitude} dictionaries.

    Independent of the numba path; used as the oracle in tests and for
    small brute-force contraction counts.
    """
    out: dict = {}
    for word, amp in state.items():
        for ops, coef in monomials:
            w = int(word)
            sign = 1
            dead = False
            for mode, dag in reversed(ops):
                bit = 1 << mode
                occ = bool(w & bit)
                if (dag and occ) or (not dag and not occ):
                    dead = True
                    break
                if bin(w & (bit - 1)).count("1") % 2:
                    sign = -sign
                w ^= bit
            if dead:
                continue
            out[w] = out.get(w, 0.0) + coef * sign * amp
    return {w: a for w, a in out.items() if a != 0.0}


# -- diagonal operators ------------------------------------------------------

def number_operator(space: FockSpace, spin: int | None = None) -> Operator:
    n_mom = space.modes.n_mom
    vals = np.ones(2 * n_mom)
    if spin is not None:
        vals = np.zeros(2 * n_mom)
        vals[spin * n_mom:(spin + 1) * n_mom] = 1.0
    diag = _diagonal_from_mode_values(space.words, vals)
    return Operator(space=space, matrix=sp.diags(diag).tocsr(), name="N")


def spin_operator(space: FockSpace) -> Operator:
    n_mom = space.modes.n_mom
    vals = np.concatenate([np.ones(n_mom), -np.ones(n_mom)])
    diag = _diagonal_from_mode_values(space.words, vals)
    return Operator(space=space, matrix=sp.diags(diag).tocsr(), name="S")


def kinetic_operator(space: FockSpace) -> Operator:
    k2 = space.modes.k2
    vals = np.concatenate([k2, k2])
    diag = _diagonal_from_mode_values(space.words, vals)
    return Operator(space=space, matrix=sp.diags(diag).tocsr(), name="K")


def h0_operator(space: FockSpace, ball_up: FermiBall, ball_dn: FermiBall) -> Operator:
    """Relative kinetic energy sum_k ||k|^2 - mu_sigma| n_k (mu = k_F^2)."""
    k2 = space.modes.k2
    vals = np.concatenate([np.abs(k2 - ball_up.mu), np.abs(k2 - ball_dn.mu)])
    diag = _diagonal_from_mode_values(space.words, vals)
    return Operator(space=space, matrix=sp.diags(diag).tocsr(), name="H0")


def x_operator(space: FockSpace, ball_up: FermiBall, ball_dn: FermiBall,
               Vper: PeriodizedPotential) -> Operator:
    """Exchange-type quadratic term: diagonal in momentum space.

    X = sum_{k,sigma} g_sigma(k) (vhat^2 - uhat^2)(k) n_{k,sigma} with
    g_sigma(k) = L^-3 sum_{q in ball_sigma} Vhat(k - q): the exchange
    self-energy lowers particle and raises hole excitation costs.  The sign
    is fixed by the exact normal ordering of the conjugated Hamiltonian
    (verified at matrix level in the tests).
    """
    modes = space.modes
    scale = TWO_PI / modes.L
    vals = []
    for ball in (ball_up, ball_dn):
        inside = ball_membership(modes, ball)
        g = np.zeros(modes.n_mom)
        for i in range(modes.n_mom):
            d = modes.momenta[i][None, :] - ball.momenta
            dn = scale * np.sqrt(np.einsum("ij,ij->i", d, d).astype(float))
            g[i] = np.sum(np.asarray(Vper.vhat(dn), dtype=float)) / modes.L**3
        vals.append(g * np.where(inside, 1.0, -1.0))
    diag = _diagonal_from_mode_values(space.words, np.concatenate(vals))
    return Operator(space=space, matrix=sp.diags(diag).tocsr(), name="X")


# -- the Hamiltonian ---------------------------------------------------------

def _vhat_difference_table(modes: ModeSet, Vper: PeriodizedPotential) -> tuple[np.ndarray, int]:
    nmax = int(np.max(np.abs(modes.momenta))) if modes.n_mom else 0
    off = 2 * nmax
    axis = np.arange(-off, off + 1)
    d2 = (axis[:, None, None] ** 2 + axis[None, :, None] ** 2
          + axis[None, None, :] ** 2).astype(float)
    uniq, inv = np.unique(d2, return_inverse=True)
    vals = np.asarray(Vper.vhat((TWO_PI / modes.L) * np.sqrt(uniq)), dtype=float)
    return vals[inv].reshape(d2.shape), off


def hamiltonian_operator(space: FockSpace, Vper: PeriodizedPotential) -> Operator:
    """H = sum |k|^2 n_k + (1/2L^3) sum V(p) a+a+aa on the mode set.

    Scattering events whose created momenta leave the mode set are dropped
    and counted in dropped_terms; the truncated operator stays Hermitian.
    """
    modes = space.modes
    lookup, nmax = modes.lookup()
    vtable, voff = _vhat_difference_table(modes, Vper)
    dummy = np.zeros(0, dtype=np.int64)
    dummyv = np.zeros(0, dtype=float)
    cnt, dropped = _hamiltonian_pass(space.words, modes.n_mom, modes.momenta,
                                     lookup, nmax, vtable, voff, 1.0 / modes.L**3,
                                     dummy, dummy, dummyv, False)
    rows = np.zeros(cnt, dtype=np.int64)
    cols = np.zeros(cnt, dtype=np.int64)
    vals = np.zeros(cnt, dtype=float)
    _hamiltonian_pass(space.words, modes.n_mom, modes.momenta, lookup, nmax,
                      vtable, voff, 1.0 / modes.L**3, rows, cols, vals, True)
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(space.dim, space.dim)).tocsr()
    mat.sum_duplicates()
    mat = (mat + kinetic_operator(space).matrix).tocsr()
    return Operator(space=space, matrix=mat, name="H", dropped_terms=int(dropped))


# -- particle-hole quartic zoo ----------------------------------------------

def _leg_multipliers(modes: ModeSet, ball: FermiBall,
                     kernels: RegularizedKernels | None):
    """(u, v) multiplier arrays per momentum index.

    Without kernels these are the sharp indicators 1 - 1_ball and 1_ball;
    with kernels, the smooth regularized multipliers evaluated on |k|.
    """
    inside = ball_membership(modes, ball)
    if kernels is None:
        u = np.where(inside, 0.0, 1.0)
        v = np.where(inside, 1.0, 0.0)
    else:
        norms = modes.k_norms
        u = np.asarray(kernels.ur_hat(norms), dtype=float)
        v = np.asarray(kernels.vr_hat(norms), dtype=float)
    return u, v


_SPIN_PAIRS_ALL = ((0, 0), (0, 1), (1, 0), (1, 1))
_SPIN_PAIRS_OPPOSITE = ((0, 1), (1, 0))


def q_monomials(modes: ModeSet, ball_up: FermiBall, ball_dn: FermiBall,
                Vper: PeriodizedPotential, which: int, tilde: bool = False,
                kernels: RegularizedKernels | None = None,
                aligned_only: bool = False) -> tuple[MonomialList, bool]:
    """Monomials of Q1..Q4 (without the h.c. part); returns (list, needs_hc)."""
    if which not in (1, 2, 3, 4):
        raise ParameterError("which must be 1..4")
    if tilde and aligned_only:
        raise ParameterError("tilde and aligned_only are mutually exclusive")
    n_mom = modes.n_mom
    lookup, nmax = modes.lookup()
    vtable, voff = _vhat_difference_table(modes, Vper)
    mults = {SPIN_UP: _leg_multipliers(modes, ball_up, kernels),
             SPIN_DN: _leg_multipliers(modes, ball_dn, kernels)}
    if tilde:
        spin_pairs = _SPIN_PAIRS_OPPOSITE
    elif aligned_only:
        spin_pairs = ((0, 0), (1, 1))
    else:
        spin_pairs = _SPIN_PAIRS_ALL
    mom = modes.momenta
    L3 = modes.L**3
    monos = MonomialList()

    def vhat_of(dvec):
        return vtable[dvec[0] + voff, dvec[1] + voff, dvec[2] + voff]

    def lookup_idx(vec):
        if np.any(np.abs(vec) > nmax):
            return -1
        return int(lookup[vec[0] + nmax, vec[1] + nmax, vec[2] + nmax])

    add_hc = False
    for s, sq in spin_pairs:
        us, vs = mults[s]
        uq, vq = mults[sq]
        if which == 1:
            # (1/2L^3) V(k1-k4) u(k1)u(k2)u(k3)u(k4) a+_{k1 s}a+_{k2 s'}a_{k3 s'}a_{k4 s}
            # with k1 + k2 = k3 + k4.
            for i1 in range(n_mom):
                if us[i1] == 0.0:
                    continue
                for i4 in range(n_mom):
                    if us[i4] == 0.0:
                        continue
                    vh_p = vhat_of(mom[i1] - mom[i4])
                    for i3 in range(n_mom):
                        if uq[i3] == 0.0:
                            continue
                        i2 = lookup_idx(mom[i3] + mom[i4] - mom[i1])
                        if i2 < 0 or uq[i2] == 0.0:
                            continue
                        c = 0.5 / L3 * vh_p * us[i1] * uq[i2] * uq[i3] * us[i4]
                        monos.add((s * n_mom + i1, sq * n_mom + i2,
                                   sq * n_mom + i3, s * n_mom + i4),
                                  (1, 1, 0, 0), c)
        elif which == 2:
            # piece A: a+_s(u_x) a+_s(vbar_x) a_s'(vbar_y) a_s'(u_y):
            #   phases -k1 x + k2 x - k3 y + k4 y; V(k1 - k2), k1-k2 = k4-k3.
            for i1 in range(n_mom):
                if us[i1] == 0.0:
                    continue
                for i2 in range(n_mom):
                    if vs[i2] == 0.0:
                        continue
                    vh_p = vhat_of(mom[i1] - mom[i2])
                    for i3 in range(n_mom):
                        if vq[i3] == 0.0:
                            continue
                        i4 = lookup_idx(mom[i1] - mom[i2] + mom[i3])
                        if i4 < 0 or uq[i4] == 0.0:
                            continue
                        # coefficient 1/L^3 (not 1/2): both the (x,y) and the
                        # relabeled (y,x) contraction channels land on this
                        # normal-ordered form.
                        c = 1.0 / L3 * vh_p * us[i1] * vs[i2] * vq[i3] * uq[i4]
                        monos.add((s * n_mom + i1, s * n_mom + i2,
                                   sq * n_mom + i3, sq * n_mom + i4),
                                  (1, 1, 0, 0), c)
            # piece B: -2 a+_s(u_x) a+_s'(vbar_y) a_s'(vbar_y) a_s(u_x):
            #   phases -k1 x + k2 y - k3 y + k4 x; V(k1 - k4), k3 = k2 + k4 - k1.
            for i1 in range(n_mom):
                if us[i1] == 0.0:
                    continue
                for i4 in range(n_mom):
                    if us[i4] == 0.0:
                        continue
                    vh_p = vhat_of(mom[i1] - mom[i4])
                    for i2 in range(n_mom):
                        if vq[i2] == 0.0:
                            continue
                        i3 = lookup_idx(mom[i2] + mom[i4] - mom[i1])
                        if i3 < 0 or vq[i3] == 0.0:
                            continue
                        c = -1.0 / L3 * vh_p * us[i1] * vq[i2] * vq[i3] * us[i4]
                        monos.add((s * n_mom + i1, sq * n_mom + i2,
                                   sq * n_mom + i3, s * n_mom + i4),
                                  (1, 1, 0, 0), c)
            # piece C: a+_s'(vbar_y) a+_s(vbar_x) a_s(vbar_x) a_s'(vbar_y):
            #   phases +k1 y + k2 x - k3 x - k4 y; V(k2 - k3), k1-k4 = k3-k2.
            for i1 in range(n_mom):
                if vq[i1] == 0.0:
                    continue
                for i4 in range(n_mom):
                    if vq[i4] == 0.0:
                        continue
                    for i2 in range(n_mom):
                        if vs[i2] == 0.0:
                            continue
                        i3 = lookup_idx(mom[i2] + mom[i1] - mom[i4])
                        if i3 < 0 or vs[i3] == 0.0:
                            continue
                        vh_p = vhat_of(mom[i2] - mom[i3])
                        c = 0.5 / L3 * vh_p * vq[i1] * vs[i2] * vs[i3] * vq[i4]
                        monos.add((sq * n_mom + i1, s * n_mom + i2,
                                   s * n_mom + i3, sq * n_mom + i4),
                                  (1, 1, 0, 0), c)
        elif which == 3:
            add_hc = True
            # piece A: -a+_s(u_x) a+_s'(u_y) a+_s(vbar_x) a_s'(u_y):
            #   phases -k1 x - k2 y + k3 x + k4 y; V(k1 - k3), k1-k3 = k4-k2.
            for i1 in range(n_mom):
                if us[i1] == 0.0:
                    continue
                for i3 in range(n_mom):
                    if vs[i3] == 0.0:
                        continue
                    vh_p = vhat_of(mom[i1] - mom[i3])
                    for i4 in range(n_mom):
                        if uq[i4] == 0.0:
                            continue
                        i2 = lookup_idx(mom[i4] - mom[i1] + mom[i3])
                        if i2 < 0 or uq[i2] == 0.0:
                            continue
                        c = -1.0 / L3 * vh_p * us[i1] * uq[i2] * vs[i3] * uq[i4]
                        monos.add((s * n_mom + i1, sq * n_mom + i2,
                                   s * n_mom + i3, sq * n_mom + i4),
                                  (1, 1, 1, 0), c)
            # piece B: +a+_s(u_x) a+_s'(vbar_y) a+_s(vbar_x) a_s'(vbar_y):
            #   phases -k1 x + k2 y + k3 x - k4 y; V(k1 - k3), k1-k3 = k2-k4.
            for i1 in range(n_mom):
                if us[i1] == 0.0:
                    continue
                for i3 in range(n_mom):
                    if vs[i3] == 0.0:
                        continue
                    vh_p = vhat_of(mom[i1] - mom[i3])
                    for i4 in range(n_mom):
                        if vq[i4] == 0.0:
                            continue
                        i2 = lookup_idx(mom[i1] - mom[i3] + mom[i4])
                        if i2 < 0 or vq[i2] == 0.0:
                            continue
                        c = 1.0 / L3 * vh_p * us[i1] * vq[i2] * vs[i3] * vq[i4]
                        monos.add((s * n_mom + i1, sq * n_mom + i2,
                                   s * n_mom + i3, sq * n_mom + i4),
                                  (1, 1, 1, 0), c)
        elif which == 4:
            add_hc = True
            # (1/2L^3) V(k1-k4) u(k1)u(k2)v(k3)v(k4) a+a+a+a+ with k1+k2 = k3+k4:
            # a+_s(u_x) a+_s'(u_y) a+_s'(vbar_y) a+_s(vbar_x);
            #   phases -k1 x - k2 y + k3 y + k4 x; V(k1-k4), k1-k4 = k3-k2.
            for i1 in range(n_mom):
                if us[i1] == 0.0:
                    continue
                for i4 in range(n_mom):
                    if vs[i4] == 0.0:
                        continue
                    vh_p = vhat_of(mom[i1] - mom[i4])
                    for i2 in range(n_mom):
                        if uq[i2] == 0.0:
                            continue
                        i3 = lookup_idx(mom[i1] - mom[i4] + mom[i2])
                        if i3 < 0 or vq[i3] == 0.0:
                            continue
                        c = 0.5 / L3 * vh_p * us[i1] * uq[i2] * vq[i3] * vs[i4]
                        monos.add((s * n_mom + i1, sq * n_mom + i2,
                                   sq * n_mom + i3, s * n_mom + i4),
                                  (1, 1, 1, 1), c)

    return monos, add_hc


def q_operator(space: FockSpace, ball_up: FermiBall, ball_dn: FermiBall,
               Vper: PeriodizedPotential, which: int, tilde: bool = False,
               kernels: RegularizedKernels | None = None,
               aligned_only: bool = False) -> Operator:
    """The quartic operators Q1..Q4 of the particle-hole decomposition.

    tilde restricts the spin sum to sigma != sigma'; aligned_only keeps
    sigma = sigma' (the spin-aligned part whose expectation vanishes on
    spin-balanced pair states).  kernels switches the u, v legs to their
    regularized versions (used for the Q4-with-r variant).
    """
    monos, add_hc = q_monomials(space.modes, ball_up, ball_dn, Vper, which,
                                tilde=tilde, kernels=kernels,
                                aligned_only=aligned_only)
    name = f"Q{which}" + ("~" if tilde else "") + ("^r" if kernels else "")
    op = operator_from_monomials(space, monos, name)
    if add_hc:
        op = Operator(space=space, matrix=(op.matrix + op.matrix.T).tocsr(),
                      name=name, dropped_terms=op.dropped_terms)
    return op


def q_sum_operator(space: FockSpace, ball_up: FermiBall, ball_dn: FermiBall,
                   Vper: PeriodizedPotential) -> Operator:
    total = q_operator(space, ball_up, ball_dn, Vper, 1)
    for which in (2, 3, 4):
        total = total + q_operator(space, ball_up, ball_dn, Vper, which)
    return Operator(space=space, matrix=total.matrix, name="Q",
                    dropped_terms=total.dropped_terms)


# -- pair (pseudo-boson) operators -------------------------------------------

def pair_annihilator(space: FockSpace, p, spin: int, ball: FermiBall) -> Operator:
    """bhat_{p,sigma} = sum_{k in ball, k+p not in ball} a_{k+p,s} a_{k,s},
    restricted to the mode set."""
    modes = space.modes
    n_mom = modes.n_mom
    lookup, nmax = modes.lookup()
    inside = ball_membership(modes, ball)
    p = np.asarray(p, dtype=np.int64)
    monos = MonomialList()
    for i in range(n_mom):
        if not inside[i]:
            continue
        tvec = modes.momenta[i] + p
        if np.any(np.abs(tvec) > nmax):
            continue
        j = int(lookup[tvec[0] + nmax, tvec[1] + nmax, tvec[2] + nmax])
        if j < 0 or inside[j]:
            continue
        monos.add((spin * n_mom + j, spin * n_mom + i), (0, 0), 1.0)
    return operator_from_monomials(space, monos, f"b({tuple(p)},{spin})")


def _pair_kernel_table(modes: ModeSet, kernel_radial) -> tuple[np.ndarray, int]:
    nmax = int(np.max(np.abs(modes.momenta))) if modes.n_mom else 0
    off = 2 * nmax
    axis = np.arange(-off, off + 1)
    d2 = (axis[:, None, None] ** 2 + axis[None, :, None] ** 2
          + axis[None, None, :] ** 2).astype(float)
    uniq, inv = np.unique(d2, return_inverse=True)
    vals = np.asarray(kernel_radial((TWO_PI / modes.L) * np.sqrt(uniq)), dtype=float)
    return vals[inv].reshape(d2.shape), off


def pair_pair_monomials(modes: ModeSet, kernel_radial, up_legs, dn_legs,
                        prefactor: float = 1.0) -> MonomialList:
    """L^-3 sum_p K(p) [sum u(k1)v(k2) a_{k1 up} a_{k2 up}]_{k1-k2=p}
                      [sum u(k3)v(k4) a_{k3 dn} a_{k4 dn}]_{k3-k4=-p}.

    up_legs/dn_legs are (first_mult, second_mult) arrays per momentum for the
    two annihilators of each spin, in the operator order written.
    """
    n_mom = modes.n_mom
    ktable, koff = _pair_kernel_table(modes, kernel_radial)
    m1u, m2u = up_legs
    m1d, m2d = dn_legs
    mom = modes.momenta
    monos = MonomialList()
    up_pairs: dict[tuple, list] = {}
    for i1 in range(n_mom):
        if m1u[i1] == 0.0:
            continue
        for i2 in range(n_mom):
            if m2u[i2] == 0.0:
                continue
            pvec = tuple(mom[i1] - mom[i2])
            up_pairs.setdefault(pvec, []).append((i1, i2, m1u[i1] * m2u[i2]))
    for i3 in range(n_mom):
        if m1d[i3] == 0.0:
            continue
        for i4 in range(n_mom):
            if m2d[i4] == 0.0:
                continue
            pvec = tuple(mom[i4] - mom[i3])  # k3 - k4 = -p
            if pvec not in up_pairs:
                continue
            kval = ktable[pvec[0] + koff, pvec[1] + koff, pvec[2] + koff]
            if kval == 0.0:
                continue
            wdn = m1d[i3] * m2d[i4]
            for (i1, i2, wup) in up_pairs[pvec]:
                c = prefactor / modes.L**3 * kval * wup * wdn
                monos.add((i1, i2, n_mom + i3, n_mom + i4), (0, 0, 0, 0), c)
    return monos


def pair_pair_operator(space: FockSpace, kernel_radial, up_legs, dn_legs,
                       name: str, prefactor: float = 1.0) -> Operator:
    monos = pair_pair_monomials(space.modes, kernel_radial, up_legs, dn_legs,
                                prefactor)
    return operator_from_monomials(space, monos, name)


def b_monomials(modes: ModeSet, phi, kernels: RegularizedKernels,
                ball_up: FermiBall, ball_dn: FermiBall) -> MonomialList:
    u_up, v_up = _leg_multipliers(modes, ball_up, kernels)
    u_dn, v_dn = _leg_multipliers(modes, ball_dn, kernels)
    return pair_pair_monomials(modes, phi.phi_hat_radial, (u_up, v_up), (u_dn, v_dn))


def b_operator(space: FockSpace, phi, kernels: RegularizedKernels,
               ball_up: FermiBall, ball_dn: FermiBall) -> Operator:
    """B = int phi(z-z') a_up(u^r_z) a_up(vbar^r_z) a_dn(u^r_z') a_dn(vbar^r_z')."""
    monos = b_monomials(space.modes, phi, kernels, ball_up, ball_dn)
    return operator_from_monomials(space, monos, "B")


def t1_operator(space: FockSpace, neumann, kernels: RegularizedKernels,
                ball_up: FermiBall, ball_dn: FermiBall) -> Operator:
    """T1 = int theta(|x-y| < R) (2 lap phi)(x-y) b_x,up b_y,dn + h.c.

    On the ball, 2 lap phi = 2 (E_R - V/2) f_R from the Neumann equation.
    """
    from .radial import radial_fourier_on_mesh

    r = neumann.grid
    w = 2.0 * (neumann.E_R - 0.5 * neumann.V(r)) * neumann.f

    def kernel(p):
        return radial_fourier_on_mesh(r, w, np.atleast_1d(p))

    modes = space.modes
    u_up, v_up = _leg_multipliers(modes, ball_up, kernels)
    u_dn, v_dn = _leg_multipliers(modes, ball_dn, kernels)
    op = pair_pair_operator(space, kernel, (u_up, v_up), (u_dn, v_dn), "T1")
    return op.plus_hc()


def t2_operator(space: FockSpace, neumann, kernels: RegularizedKernels,
                ball_up: FermiBall, ball_dn: FermiBall) -> Operator:
    """T2 = -int V phi (x-y) a_up(vbar^r_x) a_up(u_x) a_dn(vbar^r_y) a_dn(u_y) + h.c.

    Note the unregularized u legs and the (vbar, u) operator order.
    """
    from .radial import radial_fourier_on_mesh

    r = neumann.grid
    w = -neumann.V(r) * (1.0 - neumann.f)

    def kernel(p):
        return radial_fourier_on_mesh(r, w, np.atleast_1d(p))

    modes = space.modes
    u_up, v_up = _leg_multipliers(modes, ball_up, None)
    u_dn, v_dn = _leg_multipliers(modes, ball_dn, None)
    _, vr_up = _leg_multipliers(modes, ball_up, kernels)
    _, vr_dn = _leg_multipliers(modes, ball_dn, kernels)
    # operator order per spin: a(vbar^r) then a(u); phases give kernel(k2 - k1)
    # for legs (k1 = vbar leg, k2 = u leg), i.e. p = k_u - k_v per spin, with
    # the down pair at -p.  pair_pair_operator contracts first-leg minus
    # second-leg, so feed (vr, u) with kernel argument sign absorbed by
    # radial symmetry (the kernel is even).
    op = pair_pair_operator(space, kernel, (vr_up, u_up), (vr_dn, u_dn), "T2")
    return op.plus_hc()


def q4r_tilde_operator(space: FockSpace, Vper: PeriodizedPotential,
                       kernels: RegularizedKernels, ball_up: FermiBall,
                       ball_dn: FermiBall) -> Operator:
    """Q4~ with regularized legs: int V a+_up(u^r_x) a+_dn(u^r_y) a+_dn(vbar^r_y)
    a+_up(vbar^r_x) + h.c. (the sigma != sigma' sum collapses to this)."""
    op = q_operator(space, ball_up, ball_dn, Vper, 4, tilde=True, kernels=kernels)
    return op


# ---------------------------------------------------------------------------
# Particle-hole transformation R
# ---------------------------------------------------------------------------

@dataclass
class ParticleHoleMap:
    """Basis map R: |w> -> sign(w) |w xor mask_F| implementing the
    particle-hole transformation (R* a_k R = a_k outside, a+_k inside)."""

    modes: ModeSet
    mask: np.uint64
    odd_mask: np.uint64  # modes k with |F_{<k}| odd

    def sign(self, words: np.ndarray) -> np.ndarray:
        w = np.asarray(words, dtype=np.uint64)
        par = np.zeros(w.shape, dtype=np.int64)
        masked = w & self.odd_mask
        for shift in (1, 2, 4, 8, 16, 32):
            masked = masked ^ (masked >> np.uint64(shift))
        par = (masked & np.uint64(1)).astype(np.int64)
        return 1 - 2 * par

    def map_words(self, words: np.ndarray) -> np.ndarray:
        return np.asarray(words, dtype=np.uint64) ^ self.mask

    def apply(self, space: FockSpace, vec: np.ndarray,
              image_space: FockSpace | None = None) -> tuple[np.ndarray, FockSpace]:
        """R vec; builds (or reuses) the image FockSpace."""
        imgs = self.map_words(space.words)
        signs = self.sign(space.words)
        if image_space is None:
            order = np.argsort(imgs)
            image_space = FockSpace(modes=self.modes, words=imgs[order])
        out = np.zeros(image_space.dim, dtype=vec.dtype)
        pos = np.searchsorted(image_space.words, imgs)
        out[pos] = signs * vec
        return out, image_space

    def apply_inverse(self, space: FockSpace, vec: np.ndarray,
                      image_space: FockSpace | None = None) -> tuple[np.ndarray, FockSpace]:
        """R* vec: R*|w> = sign(w xor mask) |w xor mask>."""
        imgs = self.map_words(space.words)
        signs = self.sign(imgs)
        if image_space is None:
            order = np.argsort(imgs)
            image_space = FockSpace(modes=self.modes, words=imgs[order])
        out = np.zeros(image_space.dim, dtype=vec.dtype)
        pos = np.searchsorted(image_space.words, imgs)
        out[pos] = signs * vec
        return out, image_space


def particle_hole_map(modes: ModeSet, ball_up: FermiBall, ball_dn: FermiBall) -> ParticleHoleMap:
    in_up = ball_membership(modes, ball_up)
    in_dn = ball_membership(modes, ball_dn)
    member = np.concatenate([in_up, in_dn])
    mask = np.uint64(0)
    for m in np.nonzero(member)[0]:
        mask |= np.uint64(1) << np.uint64(m)
    odd = np.uint64(0)
    below = 0
    for m in range(modes.n_modes):
        if below % 2 == 1:
            odd |= np.uint64(1) << np.uint64(m)
        if member[m]:
            below += 1
    return ParticleHoleMap(modes=modes, mask=mask, odd_mask=odd)


def fermi_sea_word(modes: ModeSet, ball_up: FermiBall, ball_dn: FermiBall) -> int:
    phm = particle_hole_map(modes, ball_up, ball_dn)
    return int(phm.mask)


# ---------------------------------------------------------------------------
# Ground states and the correlation structure
# ---------------------------------------------------------------------------

@dataclass
class SpectralResult:
    E0: float
    vector: np.ndarray
    residual: float
    method: str


def ground_state(op: Operator, method: str = "auto") -> SpectralResult:
    """Lowest eigenpair of a Hermitian operator.

    method 'dense' uses LAPACK on the full matrix, 'iterative' uses Lanczos
    with a deterministic start vector; 'auto' picks dense for dim <= 1200.
    """
    dim = op.space.dim
    if method == "auto":
        method = "dense" if dim <= 1200 else "iterative"
    if method == "dense":
        from scipy.linalg import eigh

        arr = op.matrix.toarray()
        evals, evecs = eigh(arr)
        E0 = float(evals[0])
        vec = np.ascontiguousarray(evecs[:, 0])
    elif method == "iterative":
        if dim < 3:
            return ground_state(op, "dense")
        v0 = np.full(dim, 1.0) + 1e-3 * np.sin(np.arange(dim))
        v0 /= np.linalg.norm(v0)
        try:
            evals, evecs = spla.eigsh(op.matrix, k=1, which="SA", v0=v0,
                                      maxiter=5000, tol=0.0)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError("Lanczos did not converge") from exc
        E0 = float(evals[0])
        vec = evecs[:, 0]
    else:
        raise ParameterError(f"unknown method {method!r}")
    if vec[np.argmax(np.abs(vec))] < 0:
        vec = -vec
    residual = float(np.linalg.norm(op.matrix @ vec - E0 * vec))
    return SpectralResult(E0=E0, vector=vec, residual=residual, method=method)


def antihermitian_exponential_apply(A: sp.spmatrix, vec: np.ndarray,
                                    dense_cutoff: int = 2000) -> np.ndarray:
    """exp(A) vec for antihermitian sparse A, deterministic.

    Dense scaling-and-squaring below the cutoff; otherwise a scaled Taylor
    series with the rigorous tail bound sum_{j>J} 1/j! after splitting A so
    each step has unit 1-norm.
    """
    dim = A.shape[0]
    if dim <= dense_cutoff:
        from scipy.linalg import expm

        return expm(A.toarray()) @ vec
    norm1 = float(np.max(np.abs(A).sum(axis=0))) if A.nnz else 0.0
    steps = max(1, int(np.ceil(norm1)))
    y = vec.astype(float).copy()
    for _ in range(steps):
        term = y.copy()
        acc = y.copy()
        for j in range(1, 30):
            term = (A @ term) / (steps * j)
            acc += term
            if np.linalg.norm(term) < 1e-17 * max(1.0, np.linalg.norm(acc)):
                break
        y = acc
    return y


def correlation_structure_apply(lam: float, B_op: Operator, vec: np.ndarray) -> np.ndarray:
    """T_lambda vec = exp(lambda (B - B*)) vec on B_op's space."""
    A = lam * (B_op.matrix - B_op.matrix.T)
    return antihermitian_exponential_apply(A, vec)


# ---------------------------------------------------------------------------
# High-level diagnostics
# ---------------------------------------------------------------------------

def hf_identity_residual(modes: ModeSet, ball_up: FermiBall, ball_dn: FermiBall,
                         Vper: PeriodizedPotential, psi: np.ndarray,
                         sector: FockSpace, _cache: dict | None = None) -> float:
    """|<psi, H psi> - E_HF - <R* psi, (H0 + X + Q) R* psi>| on a sector state.

    psi must carry sharp particle numbers (N_up, N_dn) matching the balls.
    """
    cache = _cache if _cache is not None else {}
    if "H" not in cache:
        cache["H"] = hamiltonian_operator(sector, Vper)
        cache["phm"] = particle_hole_map(modes, ball_up, ball_dn)
        _, img = cache["phm"].apply_inverse(sector, np.zeros(sector.dim))
        cache["img"] = img
        h0 = h0_operator(img, ball_up, ball_dn)
        x = x_operator(img, ball_up, ball_dn, Vper)
        q = q_sum_operator(img, ball_up, ball_dn, Vper)
        cache["HXQ"] = (h0.matrix + x.matrix + q.matrix).tocsr()
        cache["EHF"] = hf_energy(ball_up, ball_dn, Vper).total
    lhs = float(np.real(np.vdot(psi, cache["H"].matrix @ psi)))
    rpsi, img = cache["phm"].apply_inverse(sector, psi, cache["img"])
    rhs = cache["EHF"] + float(np.real(np.vdot(rpsi, cache["HXQ"] @ rpsi)))
    return abs(lhs - rhs)


def pseudo_boson_commutators(space: FockSpace, p, q, spin_p: int, spin_q: int,
                             ball: FermiBall, psi: np.ndarray):
    """(<psi,[b_p, b+_q] psi>, <psi,[b_p, b_q] psi>) via direct application."""
    bp = pair_annihilator(space, p, spin_p, ball)
    bq = pair_annihilator(space, q, spin_q, ball)
    bqd = bq.matrix.T.tocsr()
    comm1 = bp.matrix @ (bqd @ psi) - bqd @ (bp.matrix @ psi)
    comm2 = bp.matrix @ (bq.matrix @ psi) - bq.matrix @ (bp.matrix @ psi)
    return (complex(np.vdot(psi, comm1)), complex(np.vdot(psi, comm2)))


def pair_count_in_set(modes: ModeSet, ball: FermiBall, p) -> int:
    """|{k in ball : k + p in modes \\ ball}|: the brute-force contraction count."""
    lookup, nmax = modes.lookup()
    inside = ball_membership(modes, ball)
    p = np.asarray(p, dtype=np.int64)
    count = 0
    for i in range(modes.n_mom):
        if not inside[i]:
            continue
        t = modes.momenta[i] + p
        if np.any(np.abs(t) > nmax):
            continue
        j = int(lookup[t[0] + nmax, t[1] + nmax, t[2] + nmax])
        if j >= 0 and not inside[j]:
            count += 1
    return count
