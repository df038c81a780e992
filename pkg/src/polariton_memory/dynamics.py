"""Time evolution: the three-level Hamiltonian with excited-state loss, adiabatic
store/retrieve sweeps, the adiabatic polariton-frame model with optical pumping
of the bright spin waves, and the linear non-adiabatic mode model.

All evolutions run at exact one- and two-photon resonance in the rotating frame,
so the free-evolution frequencies only enter through the resonance checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import null_space

from . import bosonic as bos
from . import statespace as ss
from .errors import SingularSchedule, StepTooLarge

THETA_MIN = 1e-3
PROFILES = ("linear", "cosine", "tanh", "constant")
_TANH_K = 3.0


@dataclass(frozen=True)
class HamiltonianParams:
    g: float
    gamma: float = 0.0
    Omega_max: float | None = None
    omega: float = 0.0
    omega_a: float = 0.0
    omega_c: float = 0.0
    nu: float = 0.0
    two_photon_resonant: bool = True
    one_photon_resonant: bool = True

    def __post_init__(self):
        if self.g <= 0:
            raise ValueError("g must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if not (self.two_photon_resonant and self.one_photon_resonant):
            raise ValueError("only exact one- and two-photon resonance is supported")
        if abs(self.omega - (self.omega_a - self.omega_c - self.nu)) > 1e-9 * max(1.0, abs(self.omega)):
            raise ValueError("two-photon resonance omega = omega_a - omega_c - nu is violated")
        if abs(self.omega_a - self.omega) > 1e-9 * max(1.0, abs(self.omega)):
            raise ValueError("one-photon resonance omega = omega_a is violated")

    def omega_cap(self, N: int) -> float:
        return 100.0 * self.g * math.sqrt(N) if self.Omega_max is None else self.Omega_max

    def control(self, theta: float, N: int) -> float:
        """Omega = g sqrt(N) cot(theta'), tan(theta') = sqrt(tan^2 theta + eps^2),
        eps = g sqrt(N) / omega_cap: a smooth saturation that reaches omega_cap
        at theta = 0 and keeps the right-hand side smooth for RK4."""
        gs = self.g * math.sqrt(N)
        eps = gs / self.omega_cap(N)
        s, c = math.sin(theta), math.cos(theta)
        return gs * c / math.sqrt(s * s + (eps * c) ** 2)

    def effective_theta(self, theta: float, N: int) -> float:
        """Mixing angle whose dark state is stationary under ``control(theta)``."""
        eps = self.g * math.sqrt(N) / self.omega_cap(N)
        return math.atan2(math.hypot(math.sin(theta), eps * math.cos(theta)), math.cos(theta))


@dataclass(frozen=True)
class SweepSchedule:
    """Mixing-angle schedule on [0, T]. ``store`` runs 0 -> pi/2, ``retrieve``
    runs pi/2 -> 0 (the time mirror of the store profile). ``constant`` holds
    ``theta0``."""

    profile: str
    T: float
    direction: str = "store"
    theta0: float = math.pi / 2

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"profile must be one of {PROFILES}")
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.direction not in ("store", "retrieve"):
            raise ValueError("direction must be 'store' or 'retrieve'")

    def _store(self, s):
        s = np.clip(s, 0.0, 1.0)
        if self.profile == "linear":
            return 0.5 * np.pi * s
        if self.profile == "cosine":
            return 0.25 * np.pi * (1 - np.cos(np.pi * s))
        k = _TANH_K
        return 0.25 * np.pi * (1 + np.tanh(k * (2 * s - 1)) / np.tanh(k))

    def _store_rate(self, s):
        s = np.clip(s, 0.0, 1.0)
        if self.profile == "linear":
            return 0.5 * np.pi * np.ones_like(s)
        if self.profile == "cosine":
            return 0.25 * np.pi**2 * np.sin(np.pi * s)
        k = _TANH_K
        return 0.5 * np.pi * k / np.cosh(k * (2 * s - 1)) ** 2 / np.tanh(k)

    def theta(self, t):
        if self.profile == "constant":
            return np.full_like(np.asarray(t, dtype=float), self.theta0)
        s = np.asarray(t, dtype=float) / self.T
        return self._store(s) if self.direction == "store" else self._store(1 - s)

    def theta_dot(self, t):
        if self.profile == "constant":
            return np.zeros_like(np.asarray(t, dtype=float))
        s = np.asarray(t, dtype=float) / self.T
        r = self._store_rate(s) / self.T
        return r if self.direction == "store" else -self._store_rate(1 - s) / self.T

    def adiabaticity(self, g: float, N: int) -> float:
        return g * math.sqrt(N) * self.T


def pumping_rate(theta: float, g: float, gamma: float, N: int) -> float:
    """(g^2 N / gamma) cot^2(theta); refuses theta below THETA_MIN."""
    if theta < THETA_MIN:
        raise SingularSchedule(f"theta = {theta:.2e} is below the pumping floor {THETA_MIN}")
    if gamma <= 0:
        raise ValueError("optical pumping needs gamma > 0")
    if abs(theta - math.pi / 2) < 1e-15:
        return 0.0
    return g * g * N / gamma / math.tan(theta) ** 2


# -- exact three-level evolution ------------------------------------------------


def hamiltonian_terms(spec: ss.BasisSpec, g: float, gamma: float):
    """(H0, Hc) with H(t) = H0 + Omega(t) Hc:
    H0 = -i gamma sum sigma_aa + g (a S_ab + a^dagger S_ba), Hc = S_ac + S_ca."""
    if "a" not in spec.levels:
        raise ValueError("the Hamiltonian needs level a in the basis")
    a = ss.cavity_matrix(spec, "annihilate")
    S_ab = ss.collective_matrix(spec, "b", "a")
    S_ac = ss.collective_matrix(spec, "c", "a")
    H0 = -1j * gamma * ss.number_matrix(spec, "a") + g * (a @ S_ab + (a @ S_ab).conj().T)
    Hc = S_ac + S_ac.conj().T
    return ss.as_operator(H0), ss.as_operator(Hc)


@dataclass(frozen=True, eq=False)
class FullTrajectory:
    times: np.ndarray
    final: ss.PureState = field(repr=False)
    norm: float
    norm_history: np.ndarray = field(repr=False)
    excited_population: np.ndarray = field(repr=False)
    adiabaticity: float
    dt: float


def _steps(T: float, dt: float) -> tuple[int, float]:
    n = max(1, math.ceil(T / dt - 1e-9))
    return n, T / n


def evolve_full(
    state: ss.PureState,
    params: HamiltonianParams,
    schedule: SweepSchedule,
    dt: float,
    record_every: int = 1,
) -> FullTrajectory:
    """RK4 integration of i d|psi>/dt = H(t)|psi> with the non-hermitian
    excited-state loss. The state is renormalized every step and its log norm
    accumulated, so strongly damped components do not underflow.

    StepTooLarge is raised if dt does not resolve max(g sqrt N, peak Omega,
    gamma) with 20 steps per period, or if one step changes the squared norm
    by more than 1e-3 relative to the loss expected from the excited-state
    population (-2 gamma dt <P_a>)."""
    spec = state.basis
    N = spec.N
    fine = np.linspace(0, schedule.T, 2001)
    omega_peak = max(params.control(float(th), N) for th in schedule.theta(fine))
    fastest = max(params.g * math.sqrt(N), omega_peak, params.gamma)
    if dt * fastest > 2 * math.pi / 20 + 1e-12:
        raise StepTooLarge(f"dt = {dt} does not resolve the fastest scale {fastest}")
    H0, Hc = hamiltonian_terms(spec, params.g, params.gamma)
    Pa = ss.number_matrix(spec, "a").diagonal().real
    n, h = _steps(schedule.T, dt)

    def rhs(t, v):
        om = params.control(float(schedule.theta(t)), N)
        return -1j * (H0 @ v + om * (Hc @ v))

    v = np.array(state.amplitudes)
    log_norm2 = math.log(np.vdot(v, v).real)
    v = v / math.sqrt(np.vdot(v, v).real)
    times = [0.0]
    norms = [math.exp(log_norm2)]
    exc = [float(Pa @ np.abs(v) ** 2)]
    pa = exc[0]
    k1 = rhs(0.0, v)
    for s in range(n):
        t = s * h
        k2 = rhs(t + h / 2, v + h / 2 * k1)
        k3 = rhs(t + h / 2, v + h / 2 * k2)
        k4 = rhs(t + h, v + h * k3)
        w = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        kw = rhs(t + h, w)
        # Simpson estimate of the expected loss, Hermite midpoint
        mid = 0.5 * (v + w) + h / 8 * (k1 - kw)
        pa_mid = float(Pa @ np.abs(mid) ** 2)
        pa_end = float(Pa @ np.abs(w) ** 2)
        expected = -2 * params.gamma * h * (pa + 4 * pa_mid + pa_end) / 6
        n2 = np.vdot(w, w).real
        if n2 - 1 > 1e-3 or abs((n2 - 1) - expected) > 1e-3:
            raise StepTooLarge(f"norm jump {n2 - 1:.2e} at t = {t + h:.4g} (expected {expected:.2e})")
        log_norm2 += math.log(n2)
        scale = 1 / math.sqrt(n2)
        v = w * scale
        k1 = kw * scale
        pa = pa_end / n2
        if (s + 1) % record_every == 0 or s == n - 1:
            times.append(t + h)
            norms.append(math.exp(log_norm2))
            exc.append(pa)
    final = ss.PureState(spec, v * math.exp(0.5 * log_norm2))
    return FullTrajectory(
        np.array(times),
        final,
        math.exp(0.5 * log_norm2),
        np.sqrt(np.array(norms)),
        np.array(exc),
        schedule.adiabaticity(params.g, N),
        h,
    )


@dataclass(frozen=True, eq=False)
class Readout:
    rho: np.ndarray  # normalized cavity density matrix
    survival: float  # trace before normalization
    raw: np.ndarray  # unnormalized cavity density matrix


def readout_reduce(W, schedule: SweepSchedule, params: HamiltonianParams, dt: float) -> Readout:
    """Evolve ``W`` (pure state or density operator) under the retrieval
    schedule and trace out every atom. The normalized cavity state is the
    retrieved field conditioned on no spontaneous loss; ``survival`` is that
    probability."""
    if schedule.direction != "retrieve" and schedule.profile != "constant":
        raise ValueError("readout needs a retrieval schedule")
    if isinstance(W, ss.PureState):
        parts = [(1.0, W)]
    else:
        vals, vecs = np.linalg.eigh(W.matrix)
        parts = [(float(p), ss.PureState(W.basis, vecs[:, k])) for k, p in enumerate(vals) if p > 1e-14]
    raw = 0
    for p, psi in parts:
        out = evolve_full(psi, params, schedule, dt, record_every=10**9).final
        raw = raw + p * ss.cavity_reduced(out)
    survival = float(np.trace(raw).real)
    return Readout(raw / survival if survival > 0 else raw, survival, raw)


def step_halving_deviation(run, dt: float) -> float:
    """max |run(dt) - run(dt/2)| for a callable returning an array."""
    return float(np.max(np.abs(np.asarray(run(dt)) - np.asarray(run(dt / 2)))))


# -- ideal read-out of the exact engine ------------------------------------------


def _ladder_basis(N: int):
    """Orthonormal collective-spin ladders for N two-level atoms at theta = pi/2.

    Returns a list of (m, r, vectors) where ``vectors`` has one column per
    lowest-weight state alpha of the r-excitation sector, raised m times with
    normalized (-S_cb)."""
    spec = ss.BasisSpec(N, ("b", "c"), 0)
    S_up = ss.collective_matrix(spec, "b", "c").toarray()
    S_dn = S_up.conj().T
    exc = ss._digits(2, N).sum(axis=1)
    out = []
    for r in range(N // 2 + 1):
        idx = np.nonzero(exc == r)[0]
        low = exc == r - 1
        block = S_dn[np.ix_(np.nonzero(low)[0], idx)] if r > 0 else np.zeros((0, idx.size))
        ker = null_space(block) if r > 0 else np.ones((1, 1))
        vecs = np.zeros((spec.dim, ker.shape[1]), dtype=complex)
        vecs[idx] = ker
        for m in range(N - 2 * r + 1):
            out.append((m, r, vecs))
            nxt = -S_up @ vecs
            nrm = np.linalg.norm(nxt, axis=0)
            if np.all(nrm > 1e-12):
                vecs = nxt / nrm
    return spec, out


def ideal_readout(W, E_max: int | None = None) -> np.ndarray:
    """Cavity state produced by an ideal adiabatic read-out of an exact-engine
    storage state (levels {b, c}, no photons, theta = pi/2).

    Each collective ladder state (normalized (-S_cb)^m on a lowest-weight state
    of the r-excitation sector) is mapped to m photons with the lowest-weight
    state left in the atoms; the atoms are then traced out:
    rho[m, m'] = sum_{r, alpha} <u_{r alpha m}| W |u_{r alpha m'}>."""
    if isinstance(W, ss.PureState):
        W = W.density()
    spec = W.basis
    if spec.levels != ("b", "c") or spec.n_max != 0 or spec.sector != "full":
        raise ValueError("ideal_readout expects a full-sector {b, c} state without photons")
    _, ladders = _ladder_basis(spec.N)
    M = spec.N if E_max is None else E_max
    rho = np.zeros((M + 1, M + 1), dtype=complex)
    by_r = {}
    for m, r, vecs in ladders:
        by_r.setdefault(r, {})[m] = vecs
    for r, rungs in by_r.items():
        for m, u in rungs.items():
            for m2, u2 in rungs.items():
                if m <= M and m2 <= M:
                    rho[m, m2] += np.trace(u.conj().T @ W.matrix @ u2)
    return rho


# -- adiabatic polariton-frame model ---------------------------------------------------


@dataclass(frozen=True, eq=False)
class FrameTrajectory:
    times: np.ndarray
    states: list = field(repr=False)
    final: bos.ModeState = field(repr=False)


def evolve_polariton_frame(
    state: bos.ModeState,
    schedule: SweepSchedule,
    gamma: float,
    g: float,
    N: int,
    dt: float,
    pumping: bool = True,
    record_every: int = 1,
) -> FrameTrajectory:
    """Adiabatic-frame evolution: no inter-mode coupling, Psi and Phi_0 undamped,
    every Phi_{l>=1} amplitude damped at (g^2 N / gamma) cot^2 theta(t). The
    state must be expressed in a polariton frame; coefficients refer to the
    instantaneous modes, so the returned states carry the frame of theta(t).
    Integrated with RK4 on the diagonal generator."""
    if state.frame is None:
        raise ValueError("state must be expressed in a polariton frame")
    if state.basis.mode_count != N + 1:
        raise ValueError("mode count does not match N")
    tab = bos._tables(state.basis)
    bright_count = np.array([sum(1 for k in ms if k >= 2) for ms in tab.multisets], dtype=float)
    n, h = _steps(schedule.T, dt)

    def rate(t):
        if not pumping:
            return 0.0
        return pumping_rate(float(schedule.theta(t)), g, gamma, N)

    if pumping:
        fine = np.linspace(0, schedule.T, 4 * n + 1)
        if np.min(schedule.theta(fine)) < THETA_MIN:
            raise SingularSchedule("schedule reaches theta < theta_min with pumping enabled")
    pure = state.is_pure
    x = np.array(state.amplitudes if pure else state.matrix)

    def rhs(t, y):
        r = rate(t) * bright_count
        if pure:
            return -r * y
        return -(r[:, None] + r[None, :]) * y

    times, states = [0.0], [state]
    for s in range(n):
        t = s * h
        k1 = rhs(t, x)
        k2 = rhs(t + h / 2, x + h / 2 * k1)
        k3 = rhs(t + h / 2, x + h / 2 * k2)
        k4 = rhs(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if (s + 1) % record_every == 0 or s == n - 1:
            frame = bos.polariton_transform(float(np.clip(schedule.theta(t + h), 0, np.pi / 2)), N)
            st = bos.ModeState(state.basis, amplitudes=x, frame=frame) if pure else bos.ModeState(
                state.basis, matrix=x, frame=frame
            )
            times.append(t + h)
            states.append(st)
    return FrameTrajectory(np.array(times), states, states[-1])


# -- non-adiabatic linear mode model ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NonAdiabaticModel:
    """Single-excitation amplitudes of Psi, Phi_0, Phi_1..Phi_{N-1} and K bath
    modes b_k, each coupled to the cavity with the same kappa."""

    kappa: float
    N: int
    K: int = 32
    psi: complex = 0.0
    phi0: complex = 0.0
    phi: np.ndarray | None = field(default=None, repr=False)
    bath: np.ndarray | None = field(default=None, repr=False)
    g: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be at least 1")
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")
        phi = np.zeros(self.N - 1, complex) if self.phi is None else np.asarray(self.phi, complex)
        bath = np.zeros(self.K, complex) if self.bath is None else np.asarray(self.bath, complex)
        if phi.shape != (self.N - 1,) or bath.shape != (self.K,):
            raise ValueError("phi must have N - 1 entries and bath K entries")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "bath", bath)

    @property
    def pumping(self) -> bool:
        return self.g is not None and self.gamma is not None and self.gamma > 0

    def initial_vector(self) -> np.ndarray:
        return np.concatenate([[self.psi, self.phi0], self.bath, self.phi])

    def slices(self):
        """Index ranges of (Psi, Phi_0), bath and Phi_{l>=1} in the state vector."""
        return slice(0, 2), slice(2, 2 + self.K), slice(2 + self.K, 2 + self.K + self.N - 1)


def jacobian(model: NonAdiabaticModel, theta: float, theta_dot: float) -> np.ndarray:
    """Generator A of dx/dt = A x, ordered (Psi, Phi_0, b_1..b_K, Phi_1..Phi_{N-1})."""
    K, N = model.K, model.N
    A = np.zeros((2 + K + N - 1, 2 + K + N - 1), dtype=complex)
    c, s = math.cos(theta), math.sin(theta)
    ik = 1j * model.kappa
    A[0, 1] = -theta_dot
    A[1, 0] = theta_dot
    A[0, 2 : 2 + K] = ik * c
    A[1, 2 : 2 + K] = ik * s
    A[2 : 2 + K, 0] = ik * c
    A[2 : 2 + K, 1] = ik * s
    if model.pumping:
        rate = pumping_rate(theta, model.g, model.gamma, N)
        idx = np.arange(2 + K, 2 + K + N - 1)
        A[idx, idx] = -rate
    return A


@dataclass(frozen=True, eq=False)
class NonAdiabaticResult:
    psi: complex
    phi0: complex
    bath: np.ndarray
    phi: np.ndarray
    cavity: complex  # a = cos(theta) Psi + sin(theta) Phi_0 at the final time
    norm_drift: float

    @property
    def retrieved(self) -> np.ndarray:
        """Retrieved field: bath amplitudes followed by the cavity amplitude."""
        return np.concatenate([self.bath, [self.cavity]])


def nonadiabatic_linear(
    model: NonAdiabaticModel, schedule: SweepSchedule, dt: float, t_end: float | None = None
) -> NonAdiabaticResult:
    """RK4 integration of the linear mode equations
    dPsi/dt = -theta_dot Phi_0 + i kappa cos(theta) sum_k b_k,
    dPhi_0/dt = theta_dot Psi + i kappa sin(theta) sum_k b_k,
    db_k/dt = i kappa (cos(theta) Psi + sin(theta) Phi_0),
    dPhi_l/dt = -(g^2 N / gamma) cot^2(theta) Phi_l (only with pumping).

    Integrates over [0, t_end] (default: the whole schedule)."""
    t_end = schedule.T if t_end is None else t_end
    if not 0 < t_end <= schedule.T:
        raise ValueError("t_end must lie in (0, T]")
    n, h = _steps(t_end, dt)
    if model.pumping:
        fine = np.linspace(0, schedule.T, 4 * n + 1)
        if np.min(schedule.theta(fine)) < THETA_MIN:
            raise SingularSchedule("schedule reaches theta < theta_min with pumping enabled")
    x = model.initial_vector()
    core = slice(0, 2 + model.K)
    norm0 = np.linalg.norm(x[core])

    def f(t, y):
        return jacobian(model, float(schedule.theta(t)), float(schedule.theta_dot(t))) @ y

    for s in range(n):
        t = s * h
        k1 = f(t, x)
        k2 = f(t + h / 2, x + h / 2 * k1)
        k3 = f(t + h / 2, x + h / 2 * k2)
        k4 = f(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    th = float(schedule.theta(t_end))
    cav = math.cos(th) * x[0] + math.sin(th) * x[1]
    sl_core, sl_bath, sl_phi = model.slices()
    return NonAdiabaticResult(
        complex(x[0]),
        complex(x[1]),
        x[sl_bath].copy(),
        x[sl_phi].copy(),
        complex(cav),
        float(abs(np.linalg.norm(x[core]) - norm0)),
    )
