"""Dark and bright polariton operators, dark-state constructors and meters.

Every polariton mode is described by its site-frame annihilator vector
``u = (u_cav, u_1, ..., u_N)``: the mode operator is
``u_cav * a + sum_j u_j * sigma_bc^j`` on the exact engine and
``u_cav * a + sum_j u_j * s_j`` on the bosonic engine. The rows of
:func:`~polariton_memory.bosonic.polariton_transform` are these vectors for
Psi, Phi_0, Phi_1, ..., Phi_{N-1}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from . import bosonic as bos
from . import statespace as ss
from .errors import CutoffExceeded, ExcitationOverflow, SectorMismatch


@dataclass(frozen=True)
class PolaritonFrame:
    theta: float
    N: int
    g: float | None = None
    Omega: float | None = None

    def __post_init__(self):
        if not -1e-15 <= self.theta <= np.pi / 2 + 1e-15:
            raise ValueError("theta must lie in [0, pi/2]")
        if self.N < 1:
            raise ValueError("N must be positive")
        if self.g is not None and self.Omega is not None:
            expected = np.arctan2(self.g * np.sqrt(self.N), self.Omega)
            if abs(np.tan(expected) - np.tan(self.theta)) > 1e-12 * max(1.0, abs(np.tan(expected))):
                raise ValueError("tan(theta) != g sqrt(N) / Omega")

    @classmethod
    def from_couplings(cls, g: float, Omega: float, N: int) -> "PolaritonFrame":
        return cls(float(np.arctan2(g * np.sqrt(N), Omega)), N, g, Omega)

    @property
    def transform(self) -> bos.ModeTransform:
        return bos.polariton_transform(self.theta, self.N)

    def mode(self, label) -> np.ndarray:
        """Site-frame annihilator vector of 'psi', 'phi0' or 'phi<l>' (or an int row)."""
        return self.transform.matrix[mode_row(label)]


def mode_row(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label)
    if label == "psi":
        return 0
    if isinstance(label, str) and label.startswith("phi"):
        return 1 + int(label[3:])
    raise ValueError(f"unknown mode label {label!r}")


@dataclass(frozen=True)
class DarkStateSpec:
    n: int
    N: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be non-negative")
        if self.n > self.N:
            raise ExcitationOverflow(f"n = {self.n} exceeds the atom number {self.N}")

    @property
    def xi(self) -> np.ndarray:
        return np.sqrt([comb(self.n, k) for k in range(self.n + 1)])

    def series_weights(self, theta: float) -> np.ndarray:
        """xi_k (-sin theta)^k cos^{n-k} theta: the large-N form, exact for n <= 1."""
        k = np.arange(self.n + 1)
        s, c = _sin_cos(theta)
        return self.xi * (-s) ** k * c ** (self.n - k)

    def weights(self, theta: float) -> np.ndarray:
        """Amplitudes of |c^k, n - k> for k = 0..n in the exact dark state.

        The interaction kernel fixes x_{k+1}/x_k = -tan(theta) sqrt((n-k)(N-k)/(N(k+1))),
        i.e. the series weights times sqrt(N!/((N-k)! N^k)), renormalized."""
        k = np.arange(self.n + 1)
        finite = np.sqrt(np.cumprod(np.concatenate([[1.0], (self.N - k[:-1]) / self.N])))
        w = self.series_weights(theta) * finite
        return w / np.linalg.norm(w)


def _sin_cos(theta: float):
    if abs(theta - np.pi / 2) < 1e-15:
        return 1.0, 0.0
    return np.sin(theta), np.cos(theta)


def dark_state(
    spec,
    frame: PolaritonFrame,
    engine: str = "exact",
    *,
    n_max: int | None = None,
    E_max: int | None = None,
    sector: str = "full",
    levels=("b", "c"),
):
    """|D, n>_N on the exact engine (``ss.PureState``) or its bosonic image
    (Psi^dagger)^n / sqrt(n!) |vac> as a ``ModeState`` in the polariton frame."""
    if isinstance(spec, int):
        spec = DarkStateSpec(spec, frame.N)
    if spec.N != frame.N:
        raise ValueError("dark-state and frame atom numbers differ")
    n = spec.n
    if engine == "bosonic":
        E_max = max(n, 1) if E_max is None else E_max
        if n > E_max:
            raise ExcitationOverflow(f"n = {n} exceeds E_max = {E_max}")
        basis = bos.ModeBasis(frame.N + 1, E_max)
        occ = (n,) + (0,) * frame.N
        return bos.fock(basis, occ, frame=frame.transform)
    if engine != "exact":
        raise ValueError("engine must be 'exact' or 'bosonic'")
    n_max = n if n_max is None else n_max
    w = spec.weights(frame.theta)
    for k, amp in enumerate(w):
        if abs(amp) > 1e-15 and n - k > n_max:
            raise ExcitationOverflow(f"|D,{n}> needs {n - k} photons but n_max = {n_max}")
    sym = ss.BasisSpec(frame.N, levels, n_max, "symmetric")
    basis = ss.build_basis(sym)
    amps = np.zeros(sym.dim, dtype=complex)
    for k, amp in enumerate(w):
        if n - k <= n_max:
            counts = tuple(k if lv == "c" else 0 for lv in sym.excited_levels)
            amps[basis.index((counts, n - k))] = amp
    state = ss.PureState(sym, amps)
    return state if sector == "symmetric" else ss.embed_symmetric(state)


# -- operators on the exact engine ---------------------------------------------


def spin_annihilator(spec: ss.BasisSpec, u) -> sp.csr_matrix:
    """u_cav * a + sum_j u_j sigma_bc^j on the exact engine."""
    u = np.asarray(u, dtype=complex)
    if u.size != spec.N + 1:
        raise ValueError("mode vector length must be N + 1")
    out = u[0] * ss.cavity_matrix(spec, "annihilate")
    atoms = u[1:]
    if spec.sector == "symmetric":
        if np.ptp(atoms.real) > 1e-14 or np.ptp(atoms.imag) > 1e-14:
            raise SectorMismatch("non-symmetric spin wave is not representable in the symmetric sector")
        return (out + atoms[0] * ss.collective_matrix(spec, "c", "b")).tocsr()
    for j, c in enumerate(atoms):
        if c != 0:
            out = out + c * ss.flip_matrix(spec, j, "c", "b")
    return out.tocsr()


def _apply_mode(state, u, which: str):
    if which not in ("create", "annihilate"):
        raise ValueError("which must be 'create' or 'annihilate'")
    if isinstance(state, bos.ModeState):
        v = bos.site_vector_in_frame(u, state.frame)
        op = bos.create(v) if which == "create" else bos.annihilate(v)
        return bos.apply_mode_ops(state, [(1.0, [op])])
    spec = state.basis
    A = spin_annihilator(spec, u)
    if which == "annihilate":
        return ss.PureState(spec, A @ state.amplitudes)
    if u[0] != 0:
        top = state.amplitudes.reshape(-1, spec.P)[:, -1]
        if np.any(np.abs(top) > 1e-14):
            raise CutoffExceeded("photon creation at n_max")
    return ss.PureState(spec, A.conj().T @ state.amplitudes)


def apply_dark(state, which: str, frame: PolaritonFrame):
    """Psi or Psi^dagger applied to ``state`` (exact or bosonic engine)."""
    return _apply_mode(state, frame.mode("psi"), which)


def apply_bright(state, l: int, which: str, frame: PolaritonFrame):
    """Phi_l or Phi_l^dagger; l = 0 is the symmetric bright mode."""
    if not 0 <= l < frame.N:
        raise ValueError(f"l must lie in 0..{frame.N - 1}")
    return _apply_mode(state, frame.mode(f"phi{l}"), which)


def mode_creation_power(state, u, n: int):
    """(A^dagger)^n / sqrt(n!) applied to ``state``."""
    out = state
    for m in range(1, n + 1):
        out = _apply_mode(out, u, "create")
        out = out * (1 / np.sqrt(m)) if isinstance(out, ss.PureState) else out.scaled(1 / np.sqrt(m))
    return out


def commutator_defect(state, frame: PolaritonFrame, A="psi", B="psi") -> complex:
    """<[A, B^dagger]> - delta_AB for polariton modes A, B."""
    u, v = frame.mode(A), frame.mode(B)
    ideal = 1.0 if mode_row(A) == mode_row(B) else 0.0
    if isinstance(state, bos.ModeState):
        uu = bos.site_vector_in_frame(u, state.frame)
        vv = bos.site_vector_in_frame(v, state.frame)
        C = bos.commutator(state.basis, uu, vv)
        scale = state.norm**2 if state.is_pure else state.norm
        return bos.expectation(state, C) / scale - ideal
    spec = state.basis
    a, b = spin_annihilator(spec, u), spin_annihilator(spec, v)
    bd = b.conj().T
    psi = state.amplitudes
    # photon-number truncation would corrupt a a^dagger at n_max
    if np.any(np.abs(psi.reshape(-1, spec.P)[:, -1]) > 1e-14) and (u[0] != 0 or v[0] != 0):
        raise CutoffExceeded("state reaches n_max; enlarge the photon cutoff")
    val = np.vdot(psi, a @ (bd @ psi)) - np.vdot(psi, bd @ (a @ psi))
    return complex(val / np.vdot(psi, psi).real - ideal)


def verify_sigma_identity(N: int, j: int, state: ss.PureState | None = None, rng=None) -> float:
    """Max amplitude deviation between sigma_cb^j |psi> and
    (1/sqrt N)(sum_{l>=1} eta_{jl} Phi_l^dagger - Psi^dagger)|psi> at theta = pi/2.
    ``j`` is 0-based (atom j + 1 in the phase convention of ``eta``)."""
    if state is None:
        rng = np.random.default_rng(rng)
        spec = ss.BasisSpec(N, ("b", "c"), 1)
        v = rng.normal(size=spec.dim) + 1j * rng.normal(size=spec.dim)
        state = ss.PureState(spec, v / np.linalg.norm(v))
    frame = PolaritonFrame(np.pi / 2, N)
    lhs = ss.apply_atomic_flip(state, j, "b", "c").amplitudes
    et = bos.eta(N)
    rhs = -apply_dark(state, "create", frame).amplitudes
    for l in range(1, N):
        rhs = rhs + et[j, l] * apply_bright(state, l, "create", frame).amplitudes
    rhs = rhs / np.sqrt(N)
    return float(np.abs(lhs - rhs).max())


@dataclass(frozen=True, eq=False)
class CoherentFactorization:
    product_state: ss.PureState = field(repr=False)
    deviation: float
    overlap: float


def coherent_storage_factorization(alpha: complex, N: int) -> CoherentFactorization:
    """Compare exp{-(alpha/sqrt N) S_cb}|b,0> with prod_j (1 - alpha sigma_cb^j / sqrt N)|b,0>
    and the normalized product state with the dark coherent state
    sum_n e^{-|alpha|^2/2} alpha^n / sqrt(n!) |D,n> at theta = pi/2 (truncated at n = N)."""
    spec = ss.BasisSpec(N, ("b", "c"), 0)
    ground = ss.ground_state(spec)
    x = alpha / np.sqrt(N)
    prod_state = ground
    for j in range(N):
        prod_state = prod_state - x * ss.apply_atomic_flip(prod_state, j, "b", "c")
    S = ss.collective_matrix(spec, "b", "c")
    exp_state = expm_multiply(-x * S, ground.amplitudes)
    deviation = float(np.abs(exp_state - prod_state.amplitudes).max())

    frame = PolaritonFrame(np.pi / 2, N)
    n = np.arange(N + 1)
    log_fact = np.array([np.sum(np.log(np.arange(1, k + 1))) for k in n])
    coeff = np.exp(-abs(alpha) ** 2 / 2 - log_fact / 2) * (alpha + 0j) ** n
    ref = np.zeros(spec.dim, dtype=complex)
    for k in n:
        ref += coeff[k] * dark_state(int(k), frame, n_max=0).amplitudes
    ref /= np.linalg.norm(ref)
    psi = prod_state.normalized()
    overlap = float(abs(np.vdot(ref, psi.amplitudes)) ** 2)
    return CoherentFactorization(psi, deviation, overlap)
