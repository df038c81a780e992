"""Exact state engine: N atoms with levels drawn from {a, b, c, d} times one
cavity mode truncated at ``n_max`` photons.

Basis ordering (all golden values depend on it):

* ``full`` sector: lexicographic in (atom configuration, photon number).
  Atom 0 is the most significant digit, levels are ordered a < b < c < d and
  the photon number is the innermost (fastest) index.
* ``symmetric`` sector: lexicographic in (occupation counts of the non-b
  levels, photon number), i.e. ``(n_c, p)`` for levels {b, c} and
  ``(n_a, n_c, p)`` for {a, b, c}. Each entry is the normalized totally
  symmetric (Dicke) state with those counts.

Atoms are indexed from 0 in every function of this package.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from functools import lru_cache
from math import comb, factorial, prod

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, DimensionOverflow, SectorMismatch

LEVEL_ORDER = "abcd"
DEFAULT_CAP = 2_000_000
SECTORS = ("full", "symmetric")


@dataclass(frozen=True)
class BasisSpec:
    N: int
    levels: tuple = ("b", "c")
    n_max: int = 0
    sector: str = "full"
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        levels = tuple(self.levels)
        if any(lv not in LEVEL_ORDER for lv in levels) or len(set(levels)) != len(levels):
            raise ValueError(f"invalid level set {self.levels!r}")
        if "b" not in levels:
            raise ValueError("level b (the ground state) is mandatory")
        object.__setattr__(self, "levels", tuple(sorted(levels, key=LEVEL_ORDER.index)))
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if int(self.n_max) != self.n_max or self.n_max < 0:
            raise ValueError("n_max must be a non-negative integer")
        if self.sector not in SECTORS:
            raise ValueError(f"sector must be one of {SECTORS}")
        if self.dim > self.cap:
            raise DimensionOverflow(
                f"dimension {self.dim} exceeds cap {self.cap} for {self!r}"
            )

    @property
    def L(self) -> int:
        return len(self.levels)

    @property
    def P(self) -> int:
        return self.n_max + 1

    @property
    def excited_levels(self) -> tuple:
        return tuple(lv for lv in self.levels if lv != "b")

    @property
    def atom_dim(self) -> int:
        if self.sector == "full":
            return self.L**self.N
        m = self.L - 1
        return comb(self.N + m, m)

    @property
    def dim(self) -> int:
        return self.atom_dim * self.P

    def level_index(self, level: str) -> int:
        try:
            return self.levels.index(level)
        except ValueError:
            raise SectorMismatch(f"level {level!r} not in basis levels {self.levels}") from None

    def with_atoms(self, N: int) -> "BasisSpec":
        return replace(self, N=N)

    def as_full(self) -> "BasisSpec":
        return replace(self, sector="full")

    def as_symmetric(self) -> "BasisSpec":
        return replace(self, sector="symmetric")


class Basis:
    """Index <-> configuration map for a :class:`BasisSpec`.

    Full-sector configurations are ``(atoms, p)`` with ``atoms`` a string such
    as ``"cbb"``; symmetric-sector configurations are ``(counts, p)`` with
    ``counts`` the occupation numbers of ``spec.excited_levels``.
    """

    def __init__(self, spec: BasisSpec):
        self.spec = spec
        self.dim = spec.dim
        if spec.sector == "symmetric":
            m = spec.L - 1
            self._atom_configs = [
                c for c in itertools.product(range(spec.N + 1), repeat=m) if sum(c) <= spec.N
            ]
            self._atom_index = {c: i for i, c in enumerate(self._atom_configs)}

    def config(self, i: int):
        spec = self.spec
        if not 0 <= i < self.dim:
            raise IndexError(i)
        a, p = divmod(i, spec.P)
        if spec.sector == "symmetric":
            return self._atom_configs[a], p
        digits = []
        for _ in range(spec.N):
            a, d = divmod(a, spec.L)
            digits.append(spec.levels[d])
        return "".join(reversed(digits)), p

    def index(self, config) -> int:
        spec = self.spec
        atoms, p = config
        if not 0 <= p <= spec.n_max:
            raise IndexError(f"photon number {p} outside 0..{spec.n_max}")
        if spec.sector == "symmetric":
            a = self._atom_index[tuple(atoms)]
        else:
            if len(atoms) != spec.N:
                raise IndexError(f"configuration {atoms!r} does not have {spec.N} atoms")
            a = 0
            for lv in atoms:
                a = a * spec.L + spec.level_index(lv)
        return a * spec.P + p

    @property
    def symmetric_configs(self) -> list:
        return self._atom_configs


@lru_cache(maxsize=64)
def build_basis(spec: BasisSpec) -> Basis:
    return Basis(spec)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PureState:
    basis: BasisSpec
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.basis.dim:
            raise DimensionMismatch(
                f"amplitude length {amps.size} != basis dimension {self.basis.dim}"
            )
        object.__setattr__(self, "amplitudes", _frozen(amps))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "PureState":
        n = self.norm
        if n == 0:
            raise ZeroDivisionError("cannot normalize the zero vector")
        return PureState(self.basis, self.amplitudes / n)

    def inner(self, other: "PureState") -> complex:
        """<self|other>."""
        _check_same(self.basis, other.basis)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density(self) -> "DensityOperator":
        return DensityOperator(self.basis, np.outer(self.amplitudes, self.amplitudes.conj()))

    def __add__(self, other: "PureState") -> "PureState":
        _check_same(self.basis, other.basis)
        return PureState(self.basis, self.amplitudes + other.amplitudes)

    def __sub__(self, other: "PureState") -> "PureState":
        _check_same(self.basis, other.basis)
        return PureState(self.basis, self.amplitudes - other.amplitudes)

    def __mul__(self, c) -> "PureState":
        return PureState(self.basis, self.amplitudes * c)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class DensityOperator:
    basis: BasisSpec
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d = self.basis.dim
        if m.shape != (d, d):
            raise DimensionMismatch(f"matrix shape {m.shape} != ({d}, {d})")
        object.__setattr__(self, "matrix", _frozen(m))

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def normalized(self) -> "DensityOperator":
        return DensityOperator(self.basis, self.matrix / self.trace)

    def is_valid(self, herm_tol=1e-12, trace_tol=1e-10, eig_tol=1e-10) -> bool:
        m = self.matrix
        if np.max(np.abs(m - m.conj().T), initial=0.0) > herm_tol:
            return False
        if abs(self.trace - 1.0) > trace_tol:
            return False
        return bool(np.linalg.eigvalsh((m + m.conj().T) / 2).min() >= -eig_tol)

    def expectation(self, psi: PureState) -> complex:
        _check_same(self.basis, psi.basis)
        return complex(np.vdot(psi.amplitudes, self.matrix @ psi.amplitudes))


def _check_same(a: BasisSpec, b: BasisSpec):
    if a != b:
        raise DimensionMismatch(f"basis mismatch: {a} vs {b}")


def _require_full(spec: BasisSpec, what: str):
    if spec.sector != "full":
        raise SectorMismatch(f"{what} requires the full-product sector")


# -- state constructors -----------------------------------------------------


def basis_state(spec: BasisSpec, config) -> PureState:
    v = np.zeros(spec.dim, dtype=complex)
    v[build_basis(spec).index(config)] = 1.0
    return PureState(spec, v)


def product_state(spec: BasisSpec, atoms: str, p: int = 0) -> PureState:
    """``|atoms> (x) |p>`` in the full sector, e.g. ``product_state(spec, "cb")``."""
    _require_full(spec, "product_state")
    return basis_state(spec, (atoms, p))


def ground_state(spec: BasisSpec, p: int = 0) -> PureState:
    """``|b...b, p>`` in either sector."""
    if spec.sector == "full":
        return basis_state(spec, ("b" * spec.N, p))
    return basis_state(spec, ((0,) * (spec.L - 1), p))


def dicke_state(spec: BasisSpec, k: int, p: int = 0) -> PureState:
    """Normalized symmetric state with ``k`` atoms in ``c`` and ``p`` photons."""
    if not 0 <= k <= spec.N:
        raise ValueError(f"need 0 <= k <= N, got k={k}")
    counts = tuple(k if lv == "c" else 0 for lv in spec.excited_levels)
    sym = spec.as_symmetric()
    state = basis_state(sym, (counts, p))
    return state if spec.sector == "symmetric" else embed_symmetric(state)


# -- digit tables for the full sector ----------------------------------------


@lru_cache(maxsize=32)
def _digits(L: int, N: int) -> np.ndarray:
    """Level index of every atom for every full atom configuration, shape (L**N, N)."""
    a = np.arange(L**N)
    powers = L ** np.arange(N - 1, -1, -1)
    return _frozen((a[:, None] // powers[None, :]) % L)


# -- single-atom and cavity actions ------------------------------------------


def _atom_tensor(arr: np.ndarray, spec: BasisSpec) -> np.ndarray:
    return arr.reshape((spec.L,) * spec.N + (spec.P,) + arr.shape[1:])


def _flip_array(arr: np.ndarray, spec: BasisSpec, j: int, frm: str, to: str) -> np.ndarray:
    """sigma_{to,frm}^j applied to the leading axis of ``arr``."""
    if not 0 <= j < spec.N:
        raise IndexError(f"atom index {j} outside 0..{spec.N - 1}")
    t = _atom_tensor(arr, spec)
    out = np.zeros_like(t)
    src = [slice(None)] * t.ndim
    dst = [slice(None)] * t.ndim
    src[j] = spec.level_index(frm)
    dst[j] = spec.level_index(to)
    out[tuple(dst)] = t[tuple(src)]
    return out.reshape(arr.shape)


def _diag_atom_array(arr: np.ndarray, spec: BasisSpec, j: int, values) -> np.ndarray:
    """Multiply by ``values[level of atom j]``."""
    t = _atom_tensor(arr, spec)
    shape = [1] * t.ndim
    shape[j] = spec.L
    return (t * np.asarray(values).reshape(shape)).reshape(arr.shape)


def _cavity_array(arr: np.ndarray, spec: BasisSpec, which: str):
    t = arr.reshape((spec.atom_dim, spec.P) + arr.shape[1:])
    out = np.zeros_like(t)
    n = np.arange(spec.P)
    bshape = (1, spec.P) + (1,) * (t.ndim - 2)
    truncated = False
    if which == "annihilate":
        out[:, :-1] = (t * np.sqrt(n).reshape(bshape))[:, 1:]
    elif which == "create":
        out[:, 1:] = (t * np.sqrt(n + 1).reshape(bshape))[:, :-1]
        truncated = bool(np.any(t[:, -1] != 0))
    else:
        raise ValueError("which must be 'create' or 'annihilate'")
    return out.reshape(arr.shape), truncated


def apply_atomic_flip(state: PureState, j: int, frm: str, to: str) -> PureState:
    """sigma_{to,frm}^j |state>, unnormalized. Components with atom j not in
    ``frm`` are annihilated."""
    _require_full(state.basis, "single-atom flip")
    return PureState(state.basis, _flip_array(state.amplitudes, state.basis, j, frm, to))


def apply_cavity(state: PureState, which: str) -> tuple[PureState, bool]:
    """Apply ``a`` or ``a^dagger``. Returns the state and a truncation flag that
    is set when ``a^dagger`` met weight at ``n_max`` (that weight is dropped)."""
    out, truncated = _cavity_array(state.amplitudes, state.basis, which)
    return PureState(state.basis, out), truncated


# -- sparse operator matrices ------------------------------------------------


def flip_matrix(spec: BasisSpec, j: int, frm: str, to: str) -> sp.csr_matrix:
    _require_full(spec, "single-atom flip")
    dig = _digits(spec.L, spec.N)
    f, t = spec.level_index(frm), spec.level_index(to)
    atoms = np.nonzero(dig[:, j] == f)[0]
    stride = spec.L ** (spec.N - 1 - j)
    src = (atoms[:, None] * spec.P + np.arange(spec.P)).ravel()
    dst = ((atoms + (t - f) * stride)[:, None] * spec.P + np.arange(spec.P)).ravel()
    return sp.csr_matrix((np.ones(src.size, complex), (dst, src)), shape=(spec.dim, spec.dim))


def collective_matrix(spec: BasisSpec, frm: str, to: str) -> sp.csr_matrix:
    """S_{to,frm} = sum_j sigma_{to,frm}^j, in either sector."""
    if spec.sector == "full":
        out = sp.csr_matrix((spec.dim, spec.dim), dtype=complex)
        for j in range(spec.N):
            out = out + flip_matrix(spec, j, frm, to)
        return out
    basis = build_basis(spec)
    exc = spec.excited_levels
    rows, cols, vals = [], [], []
    for a, counts in enumerate(basis.symmetric_configs):
        occ = dict(zip(exc, counts))
        occ["b"] = spec.N - sum(counts)
        n_f, n_t = occ[frm], occ[to]
        if n_f == 0 or frm == to:
            continue
        occ[frm] -= 1
        occ[to] += 1
        a2 = basis._atom_index[tuple(occ[lv] for lv in exc)]
        amp = np.sqrt(n_f * (n_t + 1))
        for p in range(spec.P):
            rows.append(a2 * spec.P + p)
            cols.append(a * spec.P + p)
            vals.append(amp)
    if frm == to:
        return number_matrix(spec, frm)
    return sp.csr_matrix((np.array(vals, complex), (rows, cols)), shape=(spec.dim, spec.dim))


def number_matrix(spec: BasisSpec, level: str) -> sp.csr_matrix:
    """sum_j sigma_{level,level}^j (population of ``level``)."""
    spec.level_index(level)
    if spec.sector == "full":
        counts = (_digits(spec.L, spec.N) == spec.level_index(level)).sum(axis=1)
    else:
        configs = build_basis(spec).symmetric_configs
        if level == "b":
            counts = np.array([spec.N - sum(c) for c in configs])
        else:
            counts = np.array([c[spec.excited_levels.index(level)] for c in configs])
    return sp.diags(np.repeat(counts, spec.P).astype(complex), format="csr")


def cavity_matrix(spec: BasisSpec, which: str) -> sp.csr_matrix:
    n = np.arange(spec.n_max)
    a = sp.diags(np.sqrt(n + 1.0), 1, shape=(spec.P, spec.P), dtype=complex)
    op = a if which == "annihilate" else a.T
    return sp.kron(sp.identity(spec.atom_dim, dtype=complex), op, format="csr")


def as_operator(m: sp.spmatrix):
    """Dense array when the fill ratio is at least 5 %, CSR otherwise."""
    m = sp.csr_matrix(m)
    d = m.shape[0] * m.shape[1]
    if d and m.nnz / d >= 0.05:
        return m.toarray()
    return m


# -- reductions and sector bridges --------------------------------------------


def partial_trace_atom(W: DensityOperator, j: int) -> DensityOperator:
    """Trace out atom ``j``; the result lives on N-1 atoms."""
    spec = W.basis
    _require_full(spec, "partial trace over one atom")
    if spec.N < 2:
        raise ValueError("partial trace needs N >= 2")
    if not 0 <= j < spec.N:
        raise IndexError(j)
    shape = (spec.L,) * spec.N + (spec.P,)
    t = W.matrix.reshape(shape + shape)
    r = np.trace(t, axis1=j, axis2=spec.N + 1 + j)
    new = spec.with_atoms(spec.N - 1)
    return DensityOperator(new, r.reshape(new.dim, new.dim))


def atom_branches(psi: PureState, j: int) -> list[PureState]:
    """Unnormalized states phi_s on N-1 atoms with Tr_j |psi><psi| = sum_s |phi_s><phi_s|."""
    spec = psi.basis
    _require_full(spec, "partial trace over one atom")
    if spec.N < 2:
        raise ValueError("partial trace needs N >= 2")
    t = _atom_tensor(psi.amplitudes, spec)
    new = spec.with_atoms(spec.N - 1)
    return [PureState(new, np.take(t, s, axis=j).reshape(-1)) for s in range(spec.L)]


@lru_cache(maxsize=32)
def _embedding_map(spec: BasisSpec):
    """For the full sector of ``spec``: symmetric atom index and 1/sqrt(multiplicity)
    for every full atom configuration."""
    sym = spec.as_symmetric()
    basis = build_basis(sym)
    dig = _digits(spec.L, spec.N)
    counts = np.stack([(dig == spec.level_index(lv)).sum(axis=1) for lv in spec.excited_levels], axis=1)
    lookup = {c: i for i, c in enumerate(basis.symmetric_configs)}
    keys = [tuple(r) for r in counts]
    sym_idx = np.fromiter((lookup[k] for k in keys), dtype=np.int64, count=len(keys))
    b_count = spec.N - counts.sum(axis=1)
    mult = np.array(
        [factorial(spec.N) // (factorial(nb) * prod(factorial(x) for x in row)) for nb, row in zip(b_count, counts)],
        dtype=float,
    )
    return _frozen(sym_idx), _frozen(1.0 / np.sqrt(mult))


def embed_symmetric(state: PureState) -> PureState:
    """Map a symmetric-sector state into the full-product sector (isometry)."""
    spec = state.basis
    if spec.sector != "symmetric":
        raise SectorMismatch("embed_symmetric expects a symmetric-sector state")
    full = spec.as_full()  # raises DimensionOverflow if too large
    sym_idx, w = _embedding_map(full)
    amps = state.amplitudes.reshape(spec.atom_dim, spec.P)
    return PureState(full, (amps[sym_idx] * w[:, None]).reshape(-1))


def project_symmetric(state: PureState) -> PureState:
    """Adjoint of :func:`embed_symmetric` (orthogonal projection onto the
    symmetric subspace, expressed in symmetric coordinates)."""
    spec = state.basis
    _require_full(spec, "project_symmetric")
    sym = spec.as_symmetric()
    sym_idx, w = _embedding_map(spec)
    amps = state.amplitudes.reshape(spec.atom_dim, spec.P)
    out = np.zeros((sym.atom_dim, spec.P), dtype=complex)
    np.add.at(out, sym_idx, amps * w[:, None])
    return PureState(sym, out.reshape(-1))


def cavity_reduced(psi: PureState) -> np.ndarray:
    """Cavity density matrix after tracing out all atoms (not renormalized)."""
    spec = psi.basis
    m = psi.amplitudes.reshape(spec.atom_dim, spec.P)
    return m.T @ m.conj()
