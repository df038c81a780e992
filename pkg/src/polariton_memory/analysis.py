"""Fidelity metrics, closed-form reference predictions, scaling sweeps and the
ledger comparing printed formulas with computed values."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from . import bosonic as bos
from . import channels as ch
from . import polariton as pol
from . import statespace as ss
from .errors import DimensionMismatch, UnknownScenario

# -- state specifications ---------------------------------------------------------


@dataclass(frozen=True)
class Fock:
    n: int

    @property
    def coefficients(self) -> np.ndarray:
        c = np.zeros(self.n + 1, complex)
        c[self.n] = 1
        return c


@dataclass(frozen=True)
class Coherent:
    alpha: complex
    n_cut: int = 12

    @property
    def coefficients(self) -> np.ndarray:
        n = np.arange(self.n_cut + 1)
        lf = np.array([math.lgamma(k + 1) for k in n])
        c = np.exp(-abs(self.alpha) ** 2 / 2 - lf / 2) * (self.alpha + 0j) ** n
        return c / np.linalg.norm(c)


@dataclass(frozen=True)
class Superposition:
    coeffs: tuple

    @property
    def coefficients(self) -> np.ndarray:
        c = np.asarray(self.coeffs, complex)
        return c / np.linalg.norm(c)


def mean_number(state) -> float:
    c = state.coefficients
    return float(np.sum(np.arange(c.size) * np.abs(c) ** 2))


def mean_amplitude(state) -> complex:
    """<Psi> for sum_n c_n |n>."""
    c = state.coefficients
    n = np.arange(1, c.size)
    return complex(np.sum(c[:-1].conj() * np.sqrt(n) * c[1:]))


# -- fidelity ----------------------------------------------------------------------


def fidelity(rho, psi0) -> float:
    """<psi0| rho |psi0> for exact-engine, bosonic or plain-array operands."""
    if isinstance(rho, (ss.PureState, ss.DensityOperator)):
        if rho.basis != psi0.basis:
            raise DimensionMismatch(f"basis mismatch: {rho.basis} vs {psi0.basis}")
        rho = rho.amplitudes if isinstance(rho, ss.PureState) else rho.matrix
        psi0 = psi0.amplitudes
    elif isinstance(rho, bos.ModeState):
        if not isinstance(psi0, bos.ModeState) or psi0.basis != rho.basis or psi0.frame is not rho.frame:
            raise DimensionMismatch("bosonic states must share basis and frame")
        rho = rho.amplitudes if rho.is_pure else rho.matrix
        psi0 = psi0.amplitudes
    rho = np.asarray(rho)
    psi0 = np.asarray(psi0, dtype=complex).reshape(-1)
    if rho.shape[0] != psi0.size:
        raise DimensionMismatch(f"operator size {rho.shape[0]} vs state size {psi0.size}")
    if rho.ndim == 1:
        return float(abs(np.vdot(psi0, rho)) ** 2)
    return float(np.vdot(psi0, rho @ psi0).real)


# -- reference formulas ---------------------------------------------------------------


SCENARIOS = ("flip_cb", "symmetric_flip", "phase_flip", "loss", "motion")


@dataclass(frozen=True)
class Reference:
    scenario: str
    value: float  # leading-order prediction
    order: str  # stated remainder
    variants: dict = field(default_factory=dict)  # printed / derived alternatives
    contested: bool = False


def reference_formula(scenario: str, N: int, state, Dt: float | None = None) -> Reference:
    """Closed-form fidelity predictions after a single event on a stored state.

    ``state`` is a Fock, Coherent or Superposition spec. For contested formulas
    ``variants`` holds both the printed and the derived expression."""
    if scenario not in SCENARIOS:
        raise UnknownScenario(scenario)
    fock = isinstance(state, Fock)
    nbar = mean_number(state)
    if scenario == "flip_cb":
        if fock:
            n = state.n
            printed = (1 - 1 / N) / (1 - n / N) if n != N else math.inf
            derived = (1 - 1 / N) / (1 + n / N)
            return Reference(scenario, 1 - (n + 1) / N, "O(1/N^2)", {"printed": printed, "derived": derived}, True)
        a2 = abs(state.alpha) ** 2 if isinstance(state, Coherent) else nbar
        exact = (1 - 1 / N + a2 / N) / (1 + a2 / N)
        return Reference(scenario, 1 - 1 / N, "O(1/N^2)", {"printed": exact, "derived": exact})
    if scenario == "symmetric_flip":
        if fock:
            n = state.n
            exact = (1 - 1 / N) / (1 - 1 / N + (2 * n + 1) / N)
            return Reference(scenario, 1 - (2 * n + 1) / N, "O(1/N^2)", {"derived": exact})
        return Reference(scenario, 1 - 1 / N, "O(1/N^2)")
    if scenario == "phase_flip":
        printed = 1 - 2 * nbar / N
        derived_lo = 1 - 4 * nbar / N
        variants = {"printed": printed, "derived": derived_lo}
        if fock:
            variants["exact"] = (1 - 2 * state.n / N) ** 2
        return Reference(scenario, printed, "O(1/N^2)", variants, True)
    if scenario == "loss":
        if fock:
            return Reference(scenario, 1 - state.n / N, "exact", {"printed": 1 - state.n / N})
        val = 1 - (nbar - abs(mean_amplitude(state)) ** 2) / N
        return Reference(scenario, val, "O(1/N^2)", {"printed": val})
    if Dt is None:
        raise ValueError("motion needs Dt")
    if fock and state.n == 1:
        return Reference(scenario, (1 + (N - 1) * math.exp(-Dt)) / N, "exact")
    return Reference(scenario, math.exp(-nbar * Dt), "leading order in 1/N")


# -- single-event oracles ---------------------------------------------------------------


def event_fidelity(scenario: str, N: int, state, engine: str = "bosonic") -> float:
    """Fidelity of the dark-mode content after one event on sum_n c_n |D,n>.

    flip_cb / symmetric_flip / phase_flip use the bosonic Tr_Phi by default
    (phase_flip on the exact engine uses the symmetric-sector identity);
    loss always uses the exact engine with the reference state on N - 1 atoms."""
    c = state.coefficients
    M = c.size - 1
    if scenario == "loss":
        psi = _dark_superposition(c, N, sector="symmetric")
        ref = _dark_superposition(c, N - 1, sector="symmetric")
        return ch.loss_fidelity(psi, ref)
    if scenario == "phase_flip" and engine == "exact":
        if N <= 16:
            psi = _dark_superposition(c, N, sector="full")
            out, _ = ch.apply_event(psi, ch.ChannelSpec("phase_flip", target=0))
            return float(abs(psi.inner(out)) ** 2)
        psi = _dark_superposition(c, N, sector="symmetric")
        return float(abs(ch.phase_flip_overlap(psi)) ** 2)
    if engine != "bosonic":
        raise ValueError(f"engine {engine!r} not supported for {scenario}")
    frame = pol.PolaritonFrame(math.pi / 2, N)
    E = M + (1 if scenario in ("flip_cb", "symmetric_flip") else 0)
    basis = bos.ModeBasis(N + 1, max(E, 1))
    amps = np.zeros(basis.dim, complex)
    for n, cn in enumerate(c):
        amps[basis.index((n,) + (0,) * N)] = cn
    W0 = bos.ModeState(basis, amplitudes=amps, frame=frame.transform)
    flavor = scenario
    out, _ = ch.apply_event(W0, ch.ChannelSpec(flavor, target=0))
    rho = bos.trace_out_bright(out)
    ref = np.zeros(rho.shape[0], complex)
    ref[: c.size] = c
    return fidelity(rho, ref)


def _dark_superposition(c, N: int, sector: str) -> ss.PureState:
    frame = pol.PolaritonFrame(math.pi / 2, N)
    out = None
    for n, cn in enumerate(c):
        if n > N or cn == 0:
            continue
        d = pol.dark_state(n, frame, n_max=0, sector=sector) * cn
        out = d if out is None else out + d
    return out.normalized()


# -- scaling sweeps ---------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SweepResult:
    scenario: str
    abscissa: np.ndarray
    infidelity: np.ndarray
    slope: float
    intercept: float
    slope_stderr: float
    residual_norm: float
    errors: np.ndarray | None = None
    notes: tuple = ()

    def as_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "abscissa": [float(x) for x in self.abscissa],
            "infidelity": [float(x) for x in self.infidelity],
            "slope": float(self.slope),
            "intercept": float(self.intercept),
            "slope_stderr": float(self.slope_stderr),
            "residual_norm": float(self.residual_norm),
            "notes": list(self.notes),
        }


def loglog_fit(x, y, sigma=None):
    """Least-squares fit log y = s log x + c. Returns (s, c, s_err, residual norm).
    With ``sigma`` (absolute errors on y) the fit is inverse-variance weighted."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    lx, ly = np.log(x), np.log(y)
    w = np.ones_like(lx) if sigma is None else (y / np.asarray(sigma, float)) ** 2
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    Wm = np.sqrt(w)[:, None]
    coef, *_ = np.linalg.lstsq(A * Wm, ly * Wm[:, 0], rcond=None)
    resid = ly - A @ coef
    dof = max(len(x) - 2, 1)
    if sigma is None:
        s2 = float(resid @ resid) / dof
        cov = s2 * np.linalg.inv(A.T @ A)
    else:
        cov = np.linalg.inv(A.T @ (A * w[:, None]))
    return float(coef[0]), float(coef[1]), float(math.sqrt(max(cov[0, 0], 0.0))), float(np.linalg.norm(resid))


def scaling_sweep(scenario: str, state, N_list, engine: str = "bosonic", seed=None, Dt: float = 0.5, M_traj: int = 2000):
    """Infidelity 1 - f per N and its log-log fit. Points with zero infidelity
    are dropped from the fit and noted."""
    N_list = sorted(int(n) for n in N_list)
    if len(N_list) < 3:
        raise ValueError("need at least 3 abscissa points")
    inf, err = [], []
    for N in N_list:
        if scenario == "motion":
            if not isinstance(state, Fock):
                raise ValueError("motion sweeps take a Fock state")
            r = ch.motion_sample_fidelity(state.n, N, 1.0, [Dt], M_traj, seed)
            inf.append(1 - r.fidelity[0])
            err.append(r.stderr[0])
        else:
            inf.append(1 - event_fidelity(scenario, N, state, engine))
    inf = np.array(inf)
    keep = inf > 0
    notes = tuple(f"N={N}: zero infidelity excluded from fit" for N, k in zip(N_list, keep) if not k)
    x = np.array(N_list, float)
    sigma = np.array(err)[keep] if scenario == "motion" else None
    s, c, se, rn = loglog_fit(x[keep], inf[keep], sigma)
    return SweepResult(scenario, x, inf, s, c, se, rn, np.array(err) if err else None, notes)


# -- motion decay fits ----------------------------------------------------------------------


def fit_decay_rate(t, f, sigma=None):
    """Fit f(t) = c0 + c1 exp(-k t); returns (k, k_stderr)."""
    t = np.asarray(t, float)
    f = np.asarray(f, float)
    model = lambda tt, c0, c1, k: c0 + c1 * np.exp(-k * tt)  # noqa: E731
    p0 = (f[-1], f[0] - f[-1], 1.0 / max(t[-1] / 3, 1e-12))
    popt, pcov = curve_fit(model, t, f, p0=p0, sigma=sigma, absolute_sigma=sigma is not None, maxfev=20000)
    return float(popt[2]), float(math.sqrt(max(pcov[2, 2], 0.0)))


# -- discrepancy ledger ----------------------------------------------------------------------


@dataclass(frozen=True)
class LedgerEntry:
    scenario: str
    printed: str
    oracle: str
    printed_value: float
    oracle_value: float
    gap: float
    classification: str  # match | typo-candidate | open


def discrepancy_ledger(N: int = 8) -> list[LedgerEntry]:
    """Compare printed closed forms with computed values at atom number ``N``."""
    out = []

    def add(scenario, printed, oracle, pv, ov, cls=None):
        gap = abs(pv - ov)
        if cls is None:
            cls = "match" if gap < 1e-12 else "open"
        out.append(LedgerEntry(scenario, printed, oracle, float(pv), float(ov), float(gap), cls))

    for n in (1, 2):
        pv = 1 - n / N
        ov = event_fidelity("loss", N, Fock(n))
        add(f"loss |{n}>", "1 - n/N", "exact one-atom partial trace", pv, ov)
    # coherent loss: printed leading order is exact only up to O(1/N^2)
    st = Coherent(1.0)
    ov = event_fidelity("loss", N, st)
    add(
        "loss coherent alpha=1",
        "1 - (<n> - |<Psi>|^2)/N",
        "exact one-atom partial trace",
        reference_formula("loss", N, st).value,
        ov,
        "match" if abs(1 - ov) <= 4 / N**2 else "open",
    )
    n = 1
    ref = reference_formula("phase_flip", N, Fock(n))
    exact = event_fidelity("phase_flip", N, Fock(n), engine="exact")
    add(
        "phase flip coefficient |1>",
        "1 - 2<n>/N",
        "(1 - 2<n>/N)^2 = 1 - 4<n>/N + O(1/N^2)",
        ref.variants["printed"],
        exact,
        "typo-candidate",
    )
    ref = reference_formula("flip_cb", N, Fock(n))
    ov = event_fidelity("flip_cb", N, Fock(n))
    add(
        "flip_cb Fock denominator |1>",
        "(1 - 1/N)/(1 - n/N)",
        "(1 - 1/N)/(1 + n/N)",
        ref.variants["printed"],
        ov,
        "typo-candidate",
    )
    ov = event_fidelity("symmetric_flip", N, Fock(n))
    add(
        "symmetric flip |1>",
        "(1 - 1/N)/(1 - 1/N + (2n+1)/N)",
        "bosonic Tr_Phi",
        reference_formula("symmetric_flip", N, Fock(n)).variants["derived"],
        ov,
    )
    return out
