"""Decoherence events and processes acting on stored polariton states."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from . import bosonic as bos
from . import statespace as ss
from .errors import (
    CutoffExceeded,
    CutoffWarning,
    SectorMismatch,
    SeedMissing,
    StepTooLarge,
    ZeroProbability,
)

EVENT_FLAVORS = ("flip_cb", "flip_bc", "symmetric_flip", "phase_flip", "aux_flip_bd")
FLAVORS = EVENT_FLAVORS + ("atom_loss", "spin_flip_liouvillian", "motion_diffusion", "thermal_prep")


@dataclass(frozen=True)
class ChannelSpec:
    flavor: str
    target: int | str | None = None
    Gamma: float = 0.0
    D: float = 0.0
    beta: float | None = None
    omega_c: float | None = None
    delta_k: float | None = None

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise ValueError(f"unknown channel flavor {self.flavor!r}")
        if self.Gamma < 0 or self.D < 0:
            raise ValueError("rates must be non-negative")
        if self.target is not None and self.target != "random":
            if int(self.target) != self.target or self.target < 0:
                raise ValueError("target must be a non-negative atom index or 'random'")

    def resolve_target(self, N: int, rng=None) -> int:
        if self.target is None:
            raise ValueError(f"{self.flavor} needs a target atom")
        if self.target == "random":
            if rng is None:
                raise SeedMissing("random-target events need a random generator")
            return int(rng.integers(N))
        if self.target >= N:
            raise ValueError(f"target {self.target} outside 0..{N - 1}")
        return int(self.target)


# -- discrete events -------------------------------------------------------------


def _spin_kraus(arr: np.ndarray, spec: ss.BasisSpec, flavor: str, j: int) -> np.ndarray:
    if flavor == "flip_cb":
        return ss._flip_array(arr, spec, j, "b", "c")
    if flavor == "flip_bc":
        return ss._flip_array(arr, spec, j, "c", "b")
    if flavor == "symmetric_flip":
        return ss._flip_array(arr, spec, j, "b", "c") + ss._flip_array(arr, spec, j, "c", "b")
    if flavor == "phase_flip":
        # +1 on b, -1 on c, +1 on any other level so the map stays unitary
        signs = [-1.0 if lv == "c" else 1.0 for lv in spec.levels]
        return ss._diag_atom_array(arr, spec, j, signs)
    if flavor == "aux_flip_bd":
        if "d" not in spec.levels:
            raise SectorMismatch("aux_flip_bd needs level d in the basis")
        # unitary b <-> d swap; atoms in other levels are untouched
        keep = [0.0 if lv in ("b", "d") else 1.0 for lv in spec.levels]
        return (
            ss._flip_array(arr, spec, j, "b", "d")
            + ss._flip_array(arr, spec, j, "d", "b")
            + ss._diag_atom_array(arr, spec, j, keep)
        )
    raise ValueError(f"{flavor} is not a discrete event")


def _mode_event(state: bos.ModeState, flavor: str, j: int) -> bos.ModeState:
    frame = state.frame
    site = bos.to_frame(state, None)
    M = site.basis.mode_count
    u = bos.mode_vector(M, j + 1)
    if flavor == "flip_cb":
        out = bos.apply_mode_ops(site, [(1.0, [bos.create(u)])])
    elif flavor == "flip_bc":
        out = bos.apply_mode_ops(site, [(1.0, [bos.annihilate(u)])])
    elif flavor == "symmetric_flip":
        out = bos.apply_mode_ops(site, [(1.0, [bos.create(u)]), (1.0, [bos.annihilate(u)])])
    elif flavor == "phase_flip":
        # bosonic parity (-1)^{n_j}, itself a mode transform
        occ_j = np.array([ms.count(j + 1) for ms in bos._tables(site.basis).multisets])
        sign = np.where(occ_j % 2, -1.0, 1.0)
        if site.is_pure:
            out = site._with(sign * site.amplitudes)
        else:
            out = site._with(sign[:, None] * site.matrix * sign[None, :])
    else:
        raise SectorMismatch(f"{flavor} is not available on the bosonic engine")
    return bos.to_frame(out, frame)


def apply_event(W, spec: ChannelSpec, rng=None):
    """Apply K W K^dagger for the event's Kraus operator K and renormalize.

    Returns ``(state, weight)`` where weight = Tr{K W K^dagger} (or ||K psi||^2
    for pure input). Accepts exact-engine ``PureState`` / ``DensityOperator``
    (full sector) and bosonic ``ModeState`` (site or polariton frame; the
    result keeps the input frame).
    """
    if spec.flavor not in EVENT_FLAVORS:
        raise ValueError(f"{spec.flavor} is not a discrete event")
    if isinstance(W, bos.ModeState):
        j = spec.resolve_target(W.basis.mode_count - 1, rng)
        out = _mode_event(W, spec.flavor, j)
        weight = out.norm**2 if out.is_pure else out.norm
        if weight <= 1e-24:
            raise ZeroProbability(f"{spec.flavor} on atom {j} has zero probability")
        return out.normalized(), float(weight)
    bspec = W.basis
    if bspec.sector != "full":
        raise SectorMismatch("single-atom events need the full-product sector")
    j = spec.resolve_target(bspec.N, rng)
    if isinstance(W, ss.PureState):
        v = _spin_kraus(W.amplitudes, bspec, spec.flavor, j)
        weight = float(np.vdot(v, v).real)
        if weight <= 1e-24:
            raise ZeroProbability(f"{spec.flavor} on atom {j} has zero probability")
        return ss.PureState(bspec, v / math.sqrt(weight)), weight
    half = _spin_kraus(W.matrix, bspec, spec.flavor, j)
    m = _spin_kraus(half.conj().T, bspec, spec.flavor, j).conj().T
    weight = float(np.trace(m).real)
    if weight <= 1e-24:
        raise ZeroProbability(f"{spec.flavor} on atom {j} has zero probability")
    return ss.DensityOperator(bspec, m / weight), weight


def phase_flip_overlap(psi: ss.PureState) -> complex:
    """<psi| Z_j |psi> for a permutation-symmetric state, any j, evaluated in
    the symmetric sector as <(N_b - N_c) / N> (other levels count +1)."""
    spec = psi.basis
    nc = ss.number_matrix(spec, "c")
    v = psi.amplitudes
    return complex(np.vdot(v, v) - 2 * np.vdot(v, nc @ v) / spec.N)


# -- atom loss ---------------------------------------------------------------------


def atom_loss(W, j: int = -1) -> ss.DensityOperator:
    """Trace out atom ``j`` (default: the last one). Symmetric-sector states are
    reduced exactly with the Dicke split
    |c^k>_N = sqrt((N-k)/N)|c^k>_{N-1}|b> + sqrt(k/N)|c^{k-1}>_{N-1}|c>."""
    if isinstance(W, ss.PureState):
        if W.basis.sector == "symmetric":
            return _density_from_branches(symmetric_loss_branches(W))
        W = W.density()
    if W.basis.sector == "symmetric":
        raise SectorMismatch("mixed symmetric-sector states are not supported; pass a pure state")
    j = j % W.basis.N
    return ss.partial_trace_atom(W, j)


def symmetric_loss_branches(psi: ss.PureState) -> list[ss.PureState]:
    spec = psi.basis
    if spec.sector != "symmetric" or spec.levels != ("b", "c"):
        raise SectorMismatch("needs a symmetric-sector state over levels {b, c}")
    N = spec.N
    if N < 2:
        raise ValueError("atom loss needs N >= 2")
    new = spec.with_atoms(N - 1)
    amps = psi.amplitudes.reshape(N + 1, spec.P)
    k = np.arange(N + 1)[:, None]
    stay = np.zeros((N, spec.P), dtype=complex)
    gone = np.zeros((N, spec.P), dtype=complex)
    stay[:] = (amps * np.sqrt((N - k) / N))[:N]
    gone[:] = (amps * np.sqrt(k / N))[1:]
    return [ss.PureState(new, stay.reshape(-1)), ss.PureState(new, gone.reshape(-1))]


def _density_from_branches(branches) -> ss.DensityOperator:
    m = sum(np.outer(b.amplitudes, b.amplitudes.conj()) for b in branches)
    return ss.DensityOperator(branches[0].basis, m)


def loss_fidelity(psi: ss.PureState, reference: ss.PureState, j: int = -1) -> float:
    """<ref| Tr_j{|psi><psi|} |ref> computed from pure branches."""
    if psi.basis.sector == "symmetric":
        branches = symmetric_loss_branches(psi)
    else:
        branches = ss.atom_branches(psi, j % psi.basis.N)
    return float(sum(abs(reference.inner(b)) ** 2 for b in branches))


# -- spin-flip Liouvillian -----------------------------------------------------------


def _spin_flip_rhs(W: np.ndarray, spec: ss.BasisSpec, nb: np.ndarray, Gamma: float) -> np.ndarray:
    out = -0.5 * Gamma * (nb[:, None] * W + W * nb[None, :])
    for j in range(spec.N):
        half = ss._flip_array(W, spec, j, "b", "c")
        out += Gamma * ss._flip_array(half.conj().T, spec, j, "b", "c").conj().T
    return out


def spin_flip_liouvillian(W: ss.DensityOperator, Gamma: float, dt: float, steps: int, record_every: int = 1):
    """RK4 integration of dW/dt = sum_j -(Gamma/2){sigma_bb^j, W} + Gamma sigma_cb^j W sigma_bc^j.

    Returns ``(times, states)`` sampled every ``record_every`` steps
    (including t = 0). Raises StepTooLarge if one step changes the trace by
    more than 1e-9.
    """
    spec = W.basis
    if spec.sector != "full":
        raise SectorMismatch("the spin-flip Liouvillian needs the full-product sector")
    nb = np.real(ss.number_matrix(spec, "b").diagonal())
    m = np.array(W.matrix)
    times, states = [0.0], [W]
    if Gamma == 0:
        for s in range(1, steps + 1):
            if s % record_every == 0:
                times.append(s * dt)
                states.append(W)
        return times, states
    f = lambda x: _spin_flip_rhs(x, spec, nb, Gamma)  # noqa: E731
    for s in range(1, steps + 1):
        tr0 = np.trace(m).real
        k1 = f(m)
        k2 = f(m + 0.5 * dt * k1)
        k3 = f(m + 0.5 * dt * k2)
        k4 = f(m + dt * k3)
        m = m + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if abs(np.trace(m).real - tr0) > 1e-9:
            raise StepTooLarge(f"trace drift {abs(np.trace(m).real - tr0):.2e} at step {s}")
        if s % record_every == 0:
            times.append(s * dt)
            states.append(ss.DensityOperator(spec, m))
    return times, states


def reduced_spin_flip_liouvillian(rho: np.ndarray, Gamma: float, t: float, E_max: int | None = None) -> np.ndarray:
    """exp(L t) rho for the single-mode pumping process
    L rho = -(Gamma/2)(Psi Psi^dagger rho + rho Psi Psi^dagger - 2 Psi^dagger rho Psi),
    i.e. dp_n/dt = -Gamma (n+1) p_n + Gamma n p_{n-1}.

    ``rho`` is embedded into an (E_max+1)-level space when E_max is larger than
    its own cutoff. Raises CutoffExceeded when more than 1e-6 of the
    population would leave the truncated space."""
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0] if E_max is None else E_max + 1
    if d < rho.shape[0]:
        raise ValueError("E_max smaller than the given operator")
    r = np.zeros((d, d), dtype=complex)
    r[: rho.shape[0], : rho.shape[0]] = rho
    if Gamma * t == 0:
        return r
    n = np.arange(d)
    ad = sp.diags(np.sqrt(n[1:]), -1, format="csr", dtype=complex)  # creation, truncated
    aad = sp.diags(n + 1.0, format="csr", dtype=complex)  # Psi Psi^dagger without truncation
    eye = sp.identity(d, format="csr")
    # row-major vectorization: vec(A X B) = kron(A, B^T) vec(X)
    L = -0.5 * Gamma * (sp.kron(aad, eye) + sp.kron(eye, aad.T) - 2 * sp.kron(ad, ad.conj()))
    out = expm_multiply(L.tocsc() * t, r.reshape(-1)).reshape(d, d)
    leak = np.trace(r).real - np.trace(out).real
    if leak > 1e-6:
        raise CutoffExceeded(f"population {leak:.2e} left the {d}-level space")
    return out


# -- motion: Wiener phase diffusion ------------------------------------------------


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Reproducible phase paths; trajectory i uses SeedSequence(seed, spawn_key=(i,))."""

    M_traj: int
    seed: int
    N: int
    D: float
    max_step: float = 0.01

    def generator(self, i: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(i,)))

    def substeps(self, times) -> list[int]:
        t = np.concatenate([[0.0], np.asarray(times, dtype=float)])
        dts = np.diff(t)
        if np.any(dts < 0):
            raise ValueError("time grid must be non-decreasing and start at t >= 0")
        return [max(1, math.ceil(self.D * x / self.max_step - 1e-12)) if x > 0 else 0 for x in dts]

    def phases(self, i: int, times) -> np.ndarray:
        """Delta phi_j(t) for every requested time, shape (len(times), N).

        Euler-Maruyama increments sqrt(D dt) * normal with D dt <= max_step."""
        rng = self.generator(i)
        t = np.concatenate([[0.0], np.asarray(times, dtype=float)])
        out = np.zeros((len(times), self.N))
        phi = np.zeros(self.N)
        for k, (dt_total, n_sub) in enumerate(zip(np.diff(t), self.substeps(times))):
            if n_sub:
                dt = dt_total / n_sub
                phi = phi + np.sqrt(self.D * dt) * rng.standard_normal((n_sub, self.N)).sum(axis=0)
            out[k] = phi
        return out


def fock_mode_reduced(n: int, w0: complex) -> np.ndarray:
    """Dark-mode reduced operator of (A^dagger)^n/sqrt(n!)|vac> where the unit
    mode A has overlap w0 with the dark mode: binomial populations, no coherences."""
    p = abs(w0) ** 2
    k = np.arange(n + 1)
    pops = np.array([math.comb(n, int(m)) for m in k]) * p**k * (1 - p) ** (n - k)
    return np.diag(pops).astype(complex)


@dataclass(frozen=True, eq=False)
class MotionResult:
    times: np.ndarray
    fidelity: np.ndarray
    stderr: np.ndarray
    rho: np.ndarray = field(repr=False)
    n: int = 1
    N: int = 1
    D: float = 0.0
    M_traj: int = 0
    seed: int = 0
    dt: float = 0.0


def motion_sample_fidelity(n: int, N: int, D: float, t_grid, M_traj: int, seed: int | None, max_step: float = 0.01):
    """Monte Carlo fidelity of |D,n> (theta = pi/2) under independent Wiener
    phase diffusion of every atom.

    Each trajectory stores (Psi_check^dagger)^n/sqrt(n!)|vac> with
    Psi_check^dagger = -(1/sqrt N) sum_j s_j^dagger e^{-i Delta phi_j(t)}. The
    bright modes are traced out in the polariton frame, which for a Fock state
    of one mode reduces to binomial dark populations with parameter
    |<Psi|Psi_check>|^2."""
    if seed is None:
        raise SeedMissing("motion sampling needs a seed")
    if M_traj < 100:
        raise ValueError("M_traj must be at least 100")
    times = np.asarray(t_grid, dtype=float)
    ens = TrajectoryEnsemble(M_traj, seed, N, D, max_step)
    dark = bos.polariton_transform(np.pi / 2, N).matrix[0, 1:]
    samples = np.empty((M_traj, len(times)))
    rho = np.zeros((len(times), n + 1, n + 1), dtype=complex)
    for i in range(M_traj):
        phi = ens.phases(i, times)
        # site-frame creation vector of Psi_check^dagger; its dark component
        w = -np.exp(-1j * phi) / np.sqrt(N)
        w0 = w @ dark  # <vac| Psi Psi_check^dagger |vac> = sum_j F[0, j] w_j
        for k, x in enumerate(w0):
            r = fock_mode_reduced(n, x)
            rho[k] += r
            samples[i, k] = r[n, n].real
    rho /= M_traj
    f = samples.mean(axis=0)
    err = samples.std(axis=0, ddof=1) / np.sqrt(M_traj)
    dts = [
        (t1 - t0) / s if s else 0.0 for t0, t1, s in zip(np.concatenate([[0.0], times[:-1]]), times, ens.substeps(times))
    ]
    return MotionResult(times, f, err, rho, n, N, D, M_traj, seed, float(max(dts, default=0.0)))


# -- thermal preparation ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ThermalState:
    """Diagonal thermal state in the polariton frame ``frame``."""

    basis: bos.ModeBasis
    populations: np.ndarray = field(repr=False)
    frame: bos.ModeTransform = field(repr=False)
    dark_occupation: float = 0.0
    mean_cc: float = 0.0
    tail: float = 0.0

    def density(self) -> bos.ModeState:
        return bos.ModeState(self.basis, matrix=np.diag(self.populations.astype(complex)), frame=self.frame)


def thermal_prepare(beta: float, omega_c: float, N: int, E_max: int, hbar: float = 1.0) -> ThermalState:
    """Thermal state exp{-beta hbar omega_c (Psi^dagger Psi + sum_{l>=1} Phi_l^dagger Phi_l)}/Z
    at theta = pi/2 with Phi_0 (the cavity) in vacuum, truncated at E_max total
    excitations and renormalized. Diagonal in the polariton frame.

    ``mean_cc`` is (1/N) sum_j <sigma_cc^j> evaluated from the same state
    through the site-frame number operator sum_j s_j^dagger s_j."""
    if beta == math.inf:
        x = 0.0
    else:
        x_exp = beta * hbar * omega_c
        if not x_exp > 0:
            raise ValueError("beta * hbar * omega_c must be positive")
        x = math.exp(-x_exp)
    T = bos.polariton_transform(np.pi / 2, N)
    basis = bos.ModeBasis(N + 1, E_max)
    tab = bos._tables(basis)
    total = tab.total
    phi0 = np.array([ms.count(1) for ms in tab.multisets])
    w = np.where(phi0 == 0, float(x) ** total, 0.0)
    Z_trunc = w.sum()
    tail = 1 - Z_trunc * (1 - x) ** N
    if tail > 1e-4:
        warnings.warn(f"thermal tail beyond E_max = {E_max} is {tail:.2e}", CutoffWarning, stacklevel=2)
    p = w / Z_trunc
    dark_occ = float(p @ np.array([ms.count(0) for ms in tab.multisets]))
    atoms = T.matrix[:, 1:]
    Nc = bos.one_body_matrix(basis, atoms @ atoms.conj().T)
    mean_cc = float(np.real(Nc.diagonal() @ p)) / N
    return ThermalState(basis, p, T, dark_occ, mean_cc, float(max(tail, 0.0)))
