import math

import numpy as np
import pytest

from polariton_memory import bosonic as bos
from polariton_memory import dynamics as dy
from polariton_memory import polariton as pol
from polariton_memory import statespace as ss
from polariton_memory.errors import SingularSchedule, StepTooLarge

HALF_PI = math.pi / 2
ABC = ("a", "b", "c")


def sym_spec(N, n_max=1):
    return ss.BasisSpec(N, ABC, n_max, "symmetric")


def store_overlap(N, A, gamma, profile="linear", g=1.0, cap=100.0, direction="store"):
    p = dy.HamiltonianParams(g=g, gamma=gamma, Omega_max=cap * g * math.sqrt(N))
    psi0 = ss.ground_state(sym_spec(N), 1)
    T = A / (g * math.sqrt(N))
    tr = dy.evolve_full(psi0, p, dy.SweepSchedule(profile, T, "store"), 0.3 / p.omega_cap(N), record_every=10**9)
    target = pol.dark_state(1, pol.PolaritonFrame(HALF_PI, N), n_max=1, sector="symmetric", levels=ABC)
    return abs(target.inner(tr.final)) ** 2, tr


@pytest.mark.parametrize("profile", ["linear", "cosine", "tanh"])
def test_schedule_endpoints_and_rate(profile):
    s = dy.SweepSchedule(profile, 2.0, "store")
    r = dy.SweepSchedule(profile, 2.0, "retrieve")
    assert s.theta(0.0) == pytest.approx(0) and s.theta(2.0) == pytest.approx(HALF_PI)
    t = np.linspace(0.1, 1.9, 7)
    assert np.allclose(r.theta(t), s.theta(2.0 - t))
    h = 1e-6
    assert np.allclose(s.theta_dot(t), (s.theta(t + h) - s.theta(t - h)) / (2 * h), atol=1e-6)
    assert np.allclose(r.theta_dot(t), (r.theta(t + h) - r.theta(t - h)) / (2 * h), atol=1e-6)


def test_resonance_is_enforced():
    with pytest.raises(ValueError):
        dy.HamiltonianParams(g=1.0, omega=1.0, omega_a=2.0, omega_c=0.5, nu=0.5)
    dy.HamiltonianParams(g=1.0, omega=2.0, omega_a=2.0, omega_c=0.5, nu=-0.5)


def test_control_cap():
    p = dy.HamiltonianParams(g=1.0, Omega_max=10.0)
    assert p.control(0.0, 4) == pytest.approx(10.0, rel=1e-14)
    assert p.control(HALF_PI, 4) == pytest.approx(0.0, abs=1e-14)
    assert p.control(HALF_PI / 2, 4) == pytest.approx(2.0 / math.sqrt(1.04))
    p = dy.HamiltonianParams(g=1.0, Omega_max=1e6)
    assert p.control(0.3, 4) == pytest.approx(2.0 / math.tan(0.3), rel=1e-9)
    for th in (0.0, 0.4, 1.2, HALF_PI):
        assert p.control(th, 4) == pytest.approx(2.0 / math.tan(p.effective_theta(th, 4)), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("n", [0, 1, 2])
def test_dark_state_is_stationary(n):
    N, th = 3, 0.7
    p = dy.HamiltonianParams(g=1.0, gamma=2.0)
    d = pol.dark_state(n, pol.PolaritonFrame(p.effective_theta(th, N), N), n_max=n, sector="symmetric", levels=ABC)
    tr = dy.evolve_full(d, p, dy.SweepSchedule("constant", 5.0, theta0=th), 0.002, record_every=10**9)
    assert abs(d.inner(tr.final)) == pytest.approx(1, abs=1e-10)
    assert 1 - tr.norm**2 < 1e-10


def test_slow_storage():
    # gamma = g/2; the storage example does not fix gamma
    f, _ = store_overlap(4, 100, 0.5)
    assert f >= 0.99


def test_violent_storage():
    f, tr = store_overlap(4, 1, 0.5)
    assert f < 0.9
    assert 1 - tr.norm**2 > 1e-3


def test_coarse_step_is_refused():
    p = dy.HamiltonianParams(g=1.0, gamma=1.0)
    with pytest.raises(StepTooLarge):
        dy.evolve_full(ss.ground_state(sym_spec(2), 1), p, dy.SweepSchedule("linear", 5.0), 0.05)


def test_step_halving_convergence():
    p = dy.HamiltonianParams(g=1.0, gamma=1.0, Omega_max=20.0)
    psi0 = ss.ground_state(sym_spec(2), 1)
    sched = dy.SweepSchedule("cosine", 3.0)

    def run(dt):
        return dy.evolve_full(psi0, p, sched, dt, record_every=10**9).final.amplitudes

    assert dy.step_halving_deviation(run, 0.002) < 1e-8


def test_round_trip_improves_with_adiabaticity():
    losses = []
    for A in np.logspace(1, 2, 5):
        p = dy.HamiltonianParams(g=1.0, gamma=1.0, Omega_max=20 * math.sqrt(2))
        psi0 = ss.ground_state(sym_spec(2), 1)
        T = A / math.sqrt(2)
        dt = 0.3 / p.omega_cap(2)
        st = dy.evolve_full(psi0, p, dy.SweepSchedule("cosine", T, "store"), dt, record_every=10**9)
        back = dy.evolve_full(st.final, p, dy.SweepSchedule("cosine", T, "retrieve"), dt, record_every=10**9)
        losses.append(1 - abs(psi0.inner(back.final)) ** 2)
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_storage_loss_follows_adiabatic_estimate():
    # leading-order spontaneous loss of a linear sweep: gamma pi^2 / (4 g^2 N T)
    N, g, gamma, A = 2, 1.0, 4.0, 200.0
    f, tr = store_overlap(N, A, gamma, cap=100.0)
    T = A / (g * math.sqrt(N))
    assert 1 - tr.norm**2 == pytest.approx(gamma * math.pi**2 / (4 * g * g * N * T), rel=0.15)


def test_readout_of_dark_excitation():
    N = 3
    p = dy.HamiltonianParams(g=1.0, gamma=0.5)
    T = 100 / math.sqrt(N)
    sched = dy.SweepSchedule("linear", T, "retrieve")
    dt = 0.3 / p.omega_cap(N)
    fr = pol.PolaritonFrame(HALF_PI, N)
    d1 = pol.dark_state(1, fr, n_max=2, levels=ABC)
    r = dy.readout_reduce(d1, sched, p, dt)
    assert r.rho[1, 1].real >= 0.99
    vac = dy.readout_reduce(ss.ground_state(d1.basis), sched, p, dt)
    assert np.max(np.abs(vac.raw - np.diag([1, 0, 0]))) == 0
    partner = pol.apply_bright(d1, 2, "create", fr).normalized()
    r2 = dy.readout_reduce(partner, sched, p, dt)
    assert np.max(np.abs(r2.rho - r.rho)) < 1e-3


def test_ideal_readout_of_dicke_states():
    N = 4
    spec = ss.BasisSpec(N, ("b", "c"), 0)
    for k in range(N + 1):
        rho = dy.ideal_readout(ss.dicke_state(spec, k))
        expect = np.zeros((N + 1, N + 1))
        expect[k, k] = 1
        assert np.max(np.abs(rho - expect)) < 1e-12


def frame_state(N, occ, theta):
    basis = bos.ModeBasis(N + 1, 1)
    return bos.fock(basis, occ, frame=bos.polariton_transform(theta, N))


def test_bright_pumping_rate():
    N, g, gamma, th = 4, 1.0, 3.0, math.pi / 4
    s = frame_state(N, (0, 0, 1, 0, 0), th)
    sched = dy.SweepSchedule("constant", 2.0, theta0=th)
    tr = dy.evolve_polariton_frame(s, sched, gamma, g, N, 0.001, record_every=100)
    idx = s.basis.index((0, 0, 1, 0, 0))
    amps = np.array([st.amplitudes[idx].real for st in tr.states])
    assert np.max(np.abs(amps - np.exp(-(g * g * N / gamma) * tr.times))) < 1e-8
    k = -np.polyfit(tr.times, np.log(amps**2), 1)[0] / 2
    assert k == pytest.approx(g * g * N / gamma, rel=0.01)


def test_dark_and_frozen_modes():
    N = 3
    s = frame_state(N, (1, 0, 0, 0), HALF_PI)
    idx = s.basis.index((1, 0, 0, 0))
    tr = dy.evolve_polariton_frame(s, dy.SweepSchedule("constant", 4.0, theta0=0.3), 2.0, 1.0, N, 0.01)
    assert abs(tr.final.amplitudes[idx]) == pytest.approx(1, abs=1e-14)
    tr = dy.evolve_polariton_frame(s, dy.SweepSchedule("cosine", 4.0, "retrieve"), 2.0, 1.0, N, 0.01, pumping=False)
    assert abs(tr.final.amplitudes[idx]) == pytest.approx(1, abs=1e-14)
    b = frame_state(N, (0, 0, 1, 0), HALF_PI)
    tr = dy.evolve_polariton_frame(b, dy.SweepSchedule("constant", 3.0), 2.0, 1.0, N, 0.01)
    assert np.array_equal(tr.final.amplitudes, b.amplitudes)


def test_pumping_floor():
    with pytest.raises(SingularSchedule):
        dy.pumping_rate(1e-4, 1.0, 1.0, 4)
    s = frame_state(3, (0, 0, 1, 0), HALF_PI)
    with pytest.raises(SingularSchedule):
        dy.evolve_polariton_frame(s, dy.SweepSchedule("linear", 1.0, "retrieve"), 1.0, 1.0, 3, 0.01)


@pytest.mark.parametrize("N", [2, 3, 4])
def test_adiabatic_elimination_rate(N):
    g, th = 1.0, math.pi / 4
    gamma = 20 * g * math.sqrt(N)
    fr = pol.PolaritonFrame(th, N)
    s = pol.apply_bright(ss.ground_state(ss.BasisSpec(N, ABC, 0)), 1, "create", fr)
    p = dy.HamiltonianParams(g=g, gamma=gamma)
    dt = 0.25 / gamma
    tr = dy.evolve_full(s, p, dy.SweepSchedule("constant", 2.0, theta0=th), dt, record_every=int(0.1 / dt))
    k = -np.polyfit(tr.times[5:], np.log(tr.norm_history[5:]), 1)[0]
    assert k == pytest.approx(dy.pumping_rate(th, g, gamma, N), rel=0.1)


def test_jacobian_blocks_are_zero():
    m = dy.NonAdiabaticModel(0.7, 5, K=8, g=1.0, gamma=2.0)
    core, _, phi = m.slices()
    core = slice(0, 2 + m.K)
    for th, thd in ((0.3, 1.0), (1.2, -0.4)):
        J = dy.jacobian(m, th, thd)
        assert not np.any(J[core, phi]) and not np.any(J[phi, core])


def test_bright_seed_is_decoupled():
    N = 5
    sched = dy.SweepSchedule("linear", 4.0, "retrieve")
    phi = np.zeros(N - 1, complex)
    phi[2] = 1.0
    r = dy.nonadiabatic_linear(dy.NonAdiabaticModel(0.8, N, 16, phi=phi), sched, 0.01)
    assert np.all(r.retrieved == 0)


def test_symmetric_bright_transfer_is_linear_in_rate():
    ratios = []
    for T in (10.0, 100.0, 1000.0):
        sched = dy.SweepSchedule("linear", T, "retrieve")
        tau = 0.5
        r = dy.nonadiabatic_linear(dy.NonAdiabaticModel(0.0, 4, 4, phi0=1.0), sched, 0.01, t_end=tau)
        pert = -(-HALF_PI / T) * tau  # dPsi/dt = -theta_dot Phi_0 with Phi_0 = 1
        ratios.append(r.psi.real / pert)
    assert abs(ratios[-1] - 1) < abs(ratios[0] - 1)
    assert ratios[-1] == pytest.approx(1, abs=1e-6)


def test_frozen_linear_model():
    m = dy.NonAdiabaticModel(0.0, 3, 4, psi=0.3, phi0=0.2j, bath=np.full(4, 0.1), phi=np.array([0.5, 0.1]))
    r = dy.nonadiabatic_linear(m, dy.SweepSchedule("constant", 2.0, theta0=0.9), 0.01)
    x = np.concatenate([[r.psi, r.phi0], r.bath, r.phi])
    assert np.array_equal(x, m.initial_vector())
