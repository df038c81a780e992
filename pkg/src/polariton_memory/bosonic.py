"""Bosonic engine: one cavity mode plus N atomic spin-wave modes treated as
true bosons, truncated at a total excitation number ``E_max``.

Mode 0 is the cavity and modes 1..N are the atoms in the site frame. In a
polariton frame (see :func:`polariton_transform`) mode 0 is the dark mode Psi,
mode 1 is Phi_0 and mode 1 + l is Phi_l.

Basis ordering: occupation tuples sorted by total excitation, then
lexicographically by the sorted list of occupied mode indices (with
repetition). The vacuum is index 0, followed by the single excitations of
modes 0, 1, ..., M - 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, factorial, prod

import numpy as np
import scipy.sparse as sp

from .errors import CutoffExceeded, CutoffLoss, DimensionMismatch, DimensionOverflow
from .statespace import DEFAULT_CAP, DensityOperator, PureState, _digits

_TOL = 1e-12


@dataclass(frozen=True)
class ModeBasis:
    mode_count: int
    E_max: int = 4
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.mode_count < 1:
            raise ValueError("mode_count must be positive")
        if self.E_max < 1:
            raise ValueError("E_max must be at least 1")
        if self.dim > self.cap:
            raise DimensionOverflow(f"bosonic dimension {self.dim} exceeds cap {self.cap}")

    @property
    def dim(self) -> int:
        return comb(self.mode_count + self.E_max, self.E_max)

    def sector_dim(self, e: int) -> int:
        return comb(self.mode_count + e - 1, e)

    def offset(self, e: int) -> int:
        return comb(self.mode_count + e - 1, e - 1) if e > 0 else 0

    def index(self, occupation) -> int:
        return _tables(self).index[_multiset(occupation)]

    def occupation(self, i: int) -> tuple:
        occ = [0] * self.mode_count
        for k in _tables(self).multisets[i]:
            occ[k] += 1
        return tuple(occ)


def _multiset(occupation) -> tuple:
    return tuple(k for k, n in enumerate(occupation) for _ in range(n))


class _Tables:
    def __init__(self, basis: ModeBasis):
        M = basis.mode_count
        self.multisets = []
        for e in range(basis.E_max + 1):
            self.multisets.extend(itertools.combinations_with_replacement(range(M), e))
        self.index = {ms: i for i, ms in enumerate(self.multisets)}
        self.total = np.array([len(ms) for ms in self.multisets])
        # sqrt(prod n_k!) for every configuration
        self.norm = np.array(
            [math.sqrt(prod(factorial(ms.count(k)) for k in set(ms))) for ms in self.multisets]
        )


@lru_cache(maxsize=16)
def _tables(basis: ModeBasis) -> _Tables:
    return _Tables(basis)


@lru_cache(maxsize=16)
def _ladders(basis: ModeBasis) -> tuple:
    """Sparse annihilation matrices, one per mode."""
    tab = _tables(basis)
    rows = [[] for _ in range(basis.mode_count)]
    cols = [[] for _ in range(basis.mode_count)]
    vals = [[] for _ in range(basis.mode_count)]
    for i, ms in enumerate(tab.multisets):
        for k in set(ms):
            lst = list(ms)
            lst.remove(k)
            rows[k].append(tab.index[tuple(lst)])
            cols[k].append(i)
            vals[k].append(np.sqrt(ms.count(k)))
    d = basis.dim
    return tuple(
        sp.csr_matrix((np.array(v, complex), (r, c)), shape=(d, d)) for r, c, v in zip(rows, cols, vals)
    )


@dataclass(frozen=True, eq=False)
class ModeTransform:
    """Unitary whose row k gives the new annihilator k in terms of the
    site-frame annihilators."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch("mode transform must be square")
        if np.abs(m @ m.conj().T - np.eye(m.shape[0])).max() > 1e-12:
            raise ValueError("mode transform is not unitary within 1e-12")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def bright_permuted(self, perm) -> "ModeTransform":
        """Same dark mode, bright rows (1..M-1) reordered by ``perm``."""
        order = [0] + [1 + p for p in perm]
        return ModeTransform(self.matrix[order])


def eta(N: int) -> np.ndarray:
    """eta[j - 1, l] = exp(2 pi i l j / N) for atoms j = 1..N, waves l = 0..N-1."""
    j = np.arange(1, N + 1)[:, None]
    l = np.arange(N)[None, :]
    return np.exp(2j * np.pi * l * j / N)


def polariton_transform(theta: float, N: int) -> ModeTransform:
    if not -1e-15 <= theta <= np.pi / 2 + 1e-15:
        raise ValueError("theta must lie in [0, pi/2]")
    c, s = np.cos(theta), np.sin(theta)
    if abs(theta - np.pi / 2) < 1e-15:
        c, s = 0.0, 1.0
    m = np.zeros((N + 1, N + 1), dtype=complex)
    m[0, 0], m[0, 1:] = c, -s / np.sqrt(N)
    m[1, 0], m[1, 1:] = s, c / np.sqrt(N)
    m[2:, 1:] = eta(N)[:, 1:].T / np.sqrt(N)
    return ModeTransform(m)


@dataclass(frozen=True, eq=False)
class ModeState:
    """Pure (``amplitudes``) or mixed (``matrix``) state over a :class:`ModeBasis`.

    ``frame`` is None for the site frame, otherwise the transform whose rows
    define the modes the coefficients refer to.
    """

    basis: ModeBasis
    amplitudes: np.ndarray | None = field(default=None, repr=False)
    matrix: np.ndarray | None = field(default=None, repr=False)
    frame: ModeTransform | None = None

    def __post_init__(self):
        if (self.amplitudes is None) == (self.matrix is None):
            raise ValueError("give exactly one of amplitudes or matrix")
        d = self.basis.dim
        if self.amplitudes is not None:
            a = np.array(self.amplitudes, dtype=complex).reshape(-1)
            if a.size != d:
                raise DimensionMismatch(f"amplitude length {a.size} != {d}")
            a.flags.writeable = False
            object.__setattr__(self, "amplitudes", a)
        else:
            m = np.array(self.matrix, dtype=complex)
            if m.shape != (d, d):
                raise DimensionMismatch(f"matrix shape {m.shape} != ({d}, {d})")
            m.flags.writeable = False
            object.__setattr__(self, "matrix", m)
        if self.frame is not None and self.frame.size != self.basis.mode_count:
            raise DimensionMismatch("frame size does not match mode count")

    @property
    def is_pure(self) -> bool:
        return self.amplitudes is not None

    @property
    def norm(self) -> float:
        """Vector norm for pure states, trace for mixed states."""
        if self.is_pure:
            return float(np.linalg.norm(self.amplitudes))
        return float(np.trace(self.matrix).real)

    def normalized(self) -> "ModeState":
        if self.is_pure:
            return self._with(self.amplitudes / self.norm)
        return self._with(self.matrix / self.norm)

    def density(self) -> "ModeState":
        if not self.is_pure:
            return self
        a = self.amplitudes
        return ModeState(self.basis, matrix=np.outer(a, a.conj()), frame=self.frame)

    def scaled(self, c) -> "ModeState":
        """c |psi> for pure states, |c|^2 rho for mixed ones."""
        if self.is_pure:
            return self._with(self.amplitudes * c)
        return self._with(self.matrix * abs(c) ** 2)

    def _with(self, data) -> "ModeState":
        if data.ndim == 1:
            return ModeState(self.basis, amplitudes=data, frame=self.frame)
        return ModeState(self.basis, matrix=data, frame=self.frame)


def vacuum(basis: ModeBasis, frame: ModeTransform | None = None) -> ModeState:
    a = np.zeros(basis.dim, dtype=complex)
    a[0] = 1.0
    return ModeState(basis, amplitudes=a, frame=frame)


def fock(basis: ModeBasis, occupation, frame: ModeTransform | None = None) -> ModeState:
    a = np.zeros(basis.dim, dtype=complex)
    a[basis.index(occupation)] = 1.0
    return ModeState(basis, amplitudes=a, frame=frame)


# -- change of mode basis ----------------------------------------------------


def _transform_columns(basis: ModeBasis, U: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Apply the Fock-space unitary induced by the one-mode unitary U to every
    column of X (shape (dim, B))."""
    tab = _tables(basis)
    M = basis.mode_count
    out = np.zeros_like(X)
    out[0] = X[0]
    for e in range(1, basis.E_max + 1):
        lo, hi = basis.offset(e), basis.offset(e) + basis.sector_dim(e)
        block = X[lo:hi]
        if not np.any(block):
            continue
        B = X.shape[1]
        ms = np.array(tab.multisets[lo:hi], dtype=np.int64)  # (S, e)
        flat = np.ravel_multi_index(ms.T, (M,) * e)
        T = np.zeros((M**e, B), dtype=complex)
        T[flat] = block / tab.norm[lo:hi, None]
        T = T.reshape((M,) * e + (B,))
        for ax in range(e):
            T = np.moveaxis(np.tensordot(U, T, axes=([1], [ax])), 0, ax)
        # symmetrize over axis permutations
        S = np.zeros_like(T)
        for perm in itertools.permutations(range(e)):
            S += np.transpose(T, perm + (e,))
        T = S.reshape(M**e, B) / factorial(e)
        out[lo:hi] = T[flat] * (factorial(e) / tab.norm[lo:hi, None])
    return out


def change_basis(state: ModeState, T: ModeTransform, direction: str = "to") -> ModeState:
    """Re-express ``state`` in the mode basis of ``T`` (``direction="to"``,
    state must be in the site frame) or back to the site frame
    (``direction="from"``, state must be in frame ``T``)."""
    if T.size != state.basis.mode_count:
        raise DimensionMismatch("transform size does not match mode count")
    if direction == "to":
        if state.frame is not None:
            raise ValueError("state is not in the site frame")
        U, frame = T.matrix, T
    elif direction == "from":
        if state.frame is not T:
            raise ValueError("state is not expressed in the given frame")
        U, frame = T.matrix.conj().T, None
    else:
        raise ValueError("direction must be 'to' or 'from'")
    basis = state.basis
    if state.is_pure:
        new = _transform_columns(basis, U, state.amplitudes[:, None])[:, 0]
        before = state.norm
        after = float(np.linalg.norm(new))
    else:
        half = _transform_columns(basis, U, state.matrix)
        new = _transform_columns(basis, U, half.conj().T).conj().T
        before, after = state.norm, float(np.trace(new).real)
    if abs(before - after) > 1e-10 * max(1.0, before):
        raise CutoffLoss(f"norm changed from {before} to {after} under a mode transform")
    if new.ndim == 1:
        return ModeState(basis, amplitudes=new, frame=frame)
    return ModeState(basis, matrix=new, frame=frame)


def to_frame(state: ModeState, T: ModeTransform | None) -> ModeState:
    """Bring ``state`` to frame ``T`` (None = site frame) from whatever frame it is in."""
    if state.frame is T:
        return state
    if state.frame is not None:
        state = change_basis(state, state.frame, "from")
    return state if T is None else change_basis(state, T, "to")


def site_vector_in_frame(v, frame: ModeTransform | None) -> np.ndarray:
    """Annihilator sum_i v_i a_i (site frame) expressed in the modes of ``frame``."""
    v = np.asarray(v, dtype=complex)
    return v if frame is None else frame.matrix.conj() @ v


# -- operator application -----------------------------------------------------


def annihilator(basis: ModeBasis, u) -> sp.csr_matrix:
    """sum_k u_k c_k over the modes of the basis."""
    u = np.asarray(u, dtype=complex)
    lad = _ladders(basis)
    out = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for k in np.nonzero(np.abs(u) > 0)[0]:
        out = out + u[k] * lad[k]
    return out


def mode_vector(M: int, k: int) -> np.ndarray:
    v = np.zeros(M, dtype=complex)
    v[k] = 1.0
    return v


def create(u) -> tuple:
    """Creation operator of the mode with annihilator sum_k u_k c_k."""
    return ("create", np.asarray(u, dtype=complex))


def annihilate(u) -> tuple:
    return ("annihilate", np.asarray(u, dtype=complex))


def operator_matrix(basis: ModeBasis, polynomial) -> sp.csr_matrix:
    """Sparse matrix of sum_t coeff_t * prod(ops_t) (rightmost factor acts first)."""
    d = basis.dim
    total = sp.csr_matrix((d, d), dtype=complex)
    for coeff, ops in polynomial:
        term = sp.identity(d, dtype=complex, format="csr")
        for kind, u in ops:
            a = annihilator(basis, u)
            term = term @ (a.conj().T if kind == "create" else a)
        total = total + coeff * term
    return total.tocsr()


def _check_room(basis: ModeBasis, vec: np.ndarray, ops):
    """Raise CutoffExceeded when creation operators would push weight past E_max."""
    tab = _tables(basis)
    net = max(
        (sum(1 if kind == "create" else -1 for kind, _ in ops[: i + 1]) for i in range(len(ops))),
        default=0,
    )
    if net <= 0:
        return
    weight = np.abs(vec) if vec.ndim == 1 else np.abs(vec).sum(axis=1)
    if np.any(weight[tab.total > basis.E_max - net] > 1e-14):
        raise CutoffExceeded(f"operator product would exceed E_max = {basis.E_max}")


def apply_mode_ops(state: ModeState, polynomial) -> ModeState:
    """Apply a polynomial in creation/annihilation operators, given as a list of
    ``(coeff, [create(u) | annihilate(u), ...])`` terms, to ``state``.
    Mode vectors ``u`` refer to the modes of ``state.frame``. Mixed states are
    mapped to K rho K^dagger."""
    basis = state.basis
    data = state.amplitudes if state.is_pure else state.matrix
    for _, ops in polynomial:
        _check_room(basis, data, list(reversed(ops)))
    K = operator_matrix(basis, polynomial)
    if state.is_pure:
        return state._with(K @ data)
    half = K @ data
    return state._with((K @ half.conj().T).conj().T)


def one_body_matrix(basis: ModeBasis, G) -> sp.csr_matrix:
    """sum_{kl} G[k, l] c_k^dagger c_l."""
    lad = _ladders(basis)
    G = np.asarray(G, dtype=complex)
    out = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for k, l in zip(*np.nonzero(np.abs(G) > 0)):
        out = out + G[k, l] * (lad[k].conj().T @ lad[l])
    return out.tocsr()


def number_operator(basis: ModeBasis, u) -> sp.csr_matrix:
    """A^dagger A for A = sum_k u_k c_k."""
    a = annihilator(basis, u)
    return (a.conj().T @ a).tocsr()


def expectation(state: ModeState, op) -> complex:
    if state.is_pure:
        a = state.amplitudes
        return complex(np.vdot(a, op @ a))
    return complex(np.sum((op @ state.matrix).diagonal()))


def commutator(basis: ModeBasis, u, v) -> sp.csr_matrix:
    """[A, B^dagger] for A = sum u_k c_k, B = sum v_k c_k."""
    a, b = annihilator(basis, u), annihilator(basis, v)
    return (a @ b.conj().T - b.conj().T @ a).tocsr()


# -- reductions ----------------------------------------------------------------


@lru_cache(maxsize=16)
def _dark_bright_split(basis: ModeBasis):
    """Dark (mode 0) occupation and bright-key id for every configuration."""
    tab = _tables(basis)
    keys = {}
    dark = np.empty(basis.dim, dtype=np.int64)
    bright = np.empty(basis.dim, dtype=np.int64)
    for i, ms in enumerate(tab.multisets):
        n0 = ms.count(0)
        dark[i] = n0
        bright[i] = keys.setdefault(ms[n0:], len(keys))
    return dark, bright, len(keys)


def trace_out_bright(W: ModeState, T: ModeTransform | None = None) -> np.ndarray:
    """Reduced density matrix of mode 0 of frame ``T`` (the dark mode), size
    (E_max + 1) x (E_max + 1). ``T`` defaults to the state's own frame. The
    result is not renormalized, so its trace equals the trace of ``W``."""
    if T is not None:
        W = to_frame(W, T)
    elif W.frame is None:
        raise ValueError("state is in the site frame; pass the polariton transform")
    basis = W.basis
    dark, bright, nb = _dark_bright_split(basis)
    E = basis.E_max
    if W.is_pure:
        c = np.zeros((E + 1, nb), dtype=complex)
        c[dark, bright] = W.amplitudes
        return c @ c.conj().T
    R = sp.csr_matrix(
        (np.ones(basis.dim), (dark * nb + bright, np.arange(basis.dim))), shape=((E + 1) * nb, basis.dim)
    )
    big = R @ (R @ W.matrix).conj().T
    big = big.conj().T.reshape(E + 1, nb, E + 1, nb)
    return np.einsum("ibjb->ij", big)


def mode_occupations(W: ModeState) -> np.ndarray:
    """<c_k^dagger c_k> for every mode of the state's frame."""
    tab = _tables(W.basis)
    p = np.abs(W.amplitudes) ** 2 if W.is_pure else np.diag(W.matrix).real
    occ = np.zeros(W.basis.mode_count)
    for i, ms in enumerate(tab.multisets):
        if p[i]:
            for k in ms:
                occ[k] += p[i]
    return occ


# -- bridge from the exact engine ------------------------------------------------


def _spin_embedding(spec, E_max: int | None):
    """Index map from a full-sector {b, c} spin basis into the hard-core mode basis."""
    if spec.sector != "full" or spec.levels != ("b", "c"):
        raise ValueError("hard-core embedding needs a full-sector state over levels {b, c}")
    dig = _digits(2, spec.N)
    if E_max is None:
        E_max = spec.N + spec.n_max
    basis = ModeBasis(spec.N + 1, E_max)
    idx = np.full(spec.dim, -1, dtype=np.int64)
    for a in range(dig.shape[0]):
        for p in range(spec.P):
            if dig[a].sum() + p <= E_max:
                idx[a * spec.P + p] = basis.index((p,) + tuple(int(x) for x in dig[a]))
    return basis, idx


def from_spin(psi: PureState, E_max: int | None = None) -> ModeState:
    """Hard-core embedding of a full-sector {b, c} spin state: sigma_cb^j -> s_j^dagger,
    photon number -> cavity occupation. The result is in the site frame."""
    basis, idx = _spin_embedding(psi.basis, E_max)
    amps = np.asarray(psi.amplitudes)
    if np.any(amps[idx < 0] != 0):
        raise CutoffExceeded("spin state has more excitations than E_max")
    out = np.zeros(basis.dim, dtype=complex)
    out[idx[idx >= 0]] = amps[idx >= 0]
    return ModeState(basis, amplitudes=out)


def from_spin_density(W: DensityOperator, E_max: int | None = None) -> ModeState:
    """Hard-core embedding of a full-sector {b, c} density operator."""
    basis, idx = _spin_embedding(W.basis, E_max)
    M = np.asarray(W.matrix.toarray() if sp.issparse(W.matrix) else W.matrix)
    keep = idx >= 0
    if np.any(np.abs(np.diag(M)[~keep]) > 0):
        raise CutoffExceeded("density has weight above E_max")
    out = np.zeros((basis.dim, basis.dim), dtype=complex)
    out[np.ix_(idx[keep], idx[keep])] = M[np.ix_(keep, keep)]
    return ModeState(basis, matrix=out)
