import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polariton_memory import statespace as ss
from polariton_memory.errors import DimensionOverflow, SectorMismatch


def full(N, levels=("b", "c"), n_max=0):
    return ss.BasisSpec(N, levels, n_max)


def random_state(spec, rng):
    v = rng.normal(size=spec.dim) + 1j * rng.normal(size=spec.dim)
    return ss.PureState(spec, v / np.linalg.norm(v))


def test_dimensions():
    assert ss.BasisSpec(2, ("b", "c"), 1).dim == 8
    assert ss.BasisSpec(3, ("b", "c"), 0, "symmetric").dim == 4
    assert ss.BasisSpec(1, ("a", "b", "c"), 2).dim == 9


def test_symmetric_dimension_counts_pairs():
    spec = ss.BasisSpec(5, ("b", "c"), 2, "symmetric")
    assert spec.dim == 6 * 3
    spec = ss.BasisSpec(4, ("a", "b", "c"), 0, "symmetric")
    assert spec.dim == 15  # multisets of 4 atoms over 3 levels


def test_dimension_cap():
    with pytest.raises(DimensionOverflow):
        ss.BasisSpec(30, ("b", "c"), 0)
    with pytest.raises(DimensionOverflow):
        ss.BasisSpec(4, ("b", "c"), 0, cap=10)


def test_missing_level_is_rejected():
    spec = full(2)
    with pytest.raises(SectorMismatch):
        ss.apply_atomic_flip(ss.ground_state(spec), 0, "b", "a")


@pytest.mark.parametrize("spec", [full(3, n_max=1), full(2, ("a", "b", "c"), 2), ss.BasisSpec(4, ("a", "b", "c"), 1, "symmetric")])
def test_basis_round_trip(spec):
    basis = ss.build_basis(spec)
    for i in range(spec.dim):
        assert basis.index(basis.config(i)) == i


def test_full_ordering_is_lexicographic():
    basis = ss.build_basis(full(2, n_max=1))
    assert [basis.config(i) for i in range(4)] == [("bb", 0), ("bb", 1), ("bc", 0), ("bc", 1)]


def test_flip_examples():
    spec = full(2)
    cb = ss.product_state(spec, "cb")
    out = ss.apply_atomic_flip(cb, 0, "c", "b")
    assert np.allclose(out.amplitudes, ss.product_state(spec, "bb").amplitudes)
    assert ss.apply_atomic_flip(cb, 0, "b", "c").norm == 0
    bell = (ss.product_state(spec, "cb") + ss.product_state(spec, "bc")) * (1 / np.sqrt(2))
    out = ss.apply_atomic_flip(bell, 1, "b", "c")
    assert np.allclose(out.amplitudes, ss.product_state(spec, "cc").amplitudes / np.sqrt(2))
    assert out.norm == pytest.approx(1 / np.sqrt(2), abs=1e-15)


def test_cavity_examples():
    spec = full(1, n_max=2)
    s, trunc = ss.apply_cavity(ss.ground_state(spec, 0), "create")
    assert not trunc and np.allclose(s.amplitudes, ss.ground_state(spec, 1).amplitudes)
    s, _ = ss.apply_cavity(ss.ground_state(spec, 2), "annihilate")
    assert np.allclose(s.amplitudes, np.sqrt(2) * ss.ground_state(spec, 1).amplitudes)
    s, trunc = ss.apply_cavity(ss.ground_state(spec, 2), "create")
    assert trunc and s.norm == 0


def test_partial_trace_examples():
    spec = full(2)
    bell = ((ss.product_state(spec, "cb") + ss.product_state(spec, "bc")) * (1 / np.sqrt(2))).density()
    r = ss.partial_trace_atom(bell, 1)
    assert np.allclose(r.matrix, np.eye(2) / 2)
    r = ss.partial_trace_atom(ss.product_state(spec, "bb").density(), 0)
    assert np.allclose(r.matrix, np.diag([1, 0]))


@pytest.mark.parametrize("N", range(2, 9))
def test_partial_trace_of_dicke_state(N):
    for n in range(N + 1):
        W = ss.dicke_state(full(N), n).density()
        r = ss.partial_trace_atom(W, N - 1)
        small = full(N - 1)
        expect = 0
        if n < N:
            expect = expect + (N - n) / N * ss.dicke_state(small, n).density().matrix
        if n > 0:
            expect = expect + n / N * ss.dicke_state(small, n - 1).density().matrix
        assert np.max(np.abs(r.matrix - expect)) < 1e-12


def test_dicke_examples():
    spec = full(3)
    d1 = ss.dicke_state(spec, 1)
    ref = (ss.product_state(spec, "cbb") + ss.product_state(spec, "bcb") + ss.product_state(spec, "bbc")) * (1 / np.sqrt(3))
    assert np.allclose(d1.amplitudes, ref.amplitudes)
    assert np.allclose(ss.dicke_state(spec, 0).amplitudes, ss.product_state(spec, "bbb").amplitudes)
    d2 = ss.dicke_state(spec, 2)
    ref = (ss.product_state(spec, "ccb") + ss.product_state(spec, "cbc") + ss.product_state(spec, "bcc")) * (1 / np.sqrt(3))
    assert np.allclose(d2.amplitudes, ref.amplitudes)


@settings(max_examples=30, deadline=None)
@given(N=st.integers(1, 6), seed=st.integers(0, 2**31 - 1))
def test_flip_algebra_is_projector(N, seed):
    rng = np.random.default_rng(seed)
    spec = full(N, ("a", "b", "c"))
    j = int(rng.integers(N))
    mu, nu = rng.choice(list("abc"), 2, replace=False)
    P = (ss.flip_matrix(spec, j, nu, mu) @ ss.flip_matrix(spec, j, mu, nu)).toarray()
    assert np.allclose(P @ P, P)
    assert np.allclose(np.diag(np.diag(P)), P)


@settings(max_examples=20, deadline=None)
@given(N=st.integers(1, 5), seed=st.integers(0, 2**31 - 1))
def test_unitary_preserves_norm(N, seed):
    rng = np.random.default_rng(seed)
    spec = full(N, n_max=1)
    psi = random_state(spec, rng)
    X = ss.flip_matrix(spec, 0, "b", "c") + ss.flip_matrix(spec, 0, "c", "b")
    assert abs(np.linalg.norm(X @ psi.amplitudes) - 1) < 1e-12
    Z = ss.number_matrix(spec, "b") - ss.number_matrix(spec, "c")
    U = np.exp(1j * 0.3 * Z.diagonal())
    assert abs(np.linalg.norm(U * psi.amplitudes) - 1) < 1e-12


@pytest.mark.parametrize("levels", [("b", "c"), ("a", "b", "c")])
def test_collective_operator_agrees_between_sectors(levels):
    sym = ss.BasisSpec(4, levels, 1, "symmetric")
    rng = np.random.default_rng(1)
    psi = random_state(sym, rng)
    S = ss.collective_matrix(sym, "b", "c")
    S_full = ss.collective_matrix(sym.as_full(), "b", "c")
    a = ss.embed_symmetric(ss.PureState(sym, S @ psi.amplitudes))
    b = S_full @ ss.embed_symmetric(psi).amplitudes
    assert np.max(np.abs(a.amplitudes - b)) < 1e-12


def test_embedding_is_isometry():
    sym = ss.BasisSpec(5, ("a", "b", "c"), 1, "symmetric")
    psi = random_state(sym, np.random.default_rng(3))
    up = ss.embed_symmetric(psi)
    assert up.norm == pytest.approx(1, abs=1e-12)
    back = ss.project_symmetric(up)
    assert np.allclose(back.amplitudes, psi.amplitudes)


def test_density_validity():
    spec = full(2, n_max=1)
    W = random_state(spec, np.random.default_rng(0)).density()
    assert W.is_valid()
    assert W.trace == pytest.approx(1)
    bad = ss.DensityOperator(spec, -W.matrix)
    assert not bad.is_valid()


def test_cavity_reduced_trace():
    spec = full(2, n_max=2)
    psi = random_state(spec, np.random.default_rng(5))
    rho = ss.cavity_reduced(psi)
    assert np.trace(rho).real == pytest.approx(1)
    assert np.allclose(rho, rho.conj().T)
