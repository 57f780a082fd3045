import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qadv.core import (
    PAULI_Z,
    DensityMatrix,
    DimensionMismatch,
    InvalidQuantumObject,
    Observable,
    PureState,
    QuantumChannel,
    UnitaryOperator,
    apply_channel,
    expectation,
    fidelity,
    fidelity_squared,
    hs_distance,
    hs_fidelity_gap,
    hs_fidelity_gap_batch,
    trace_distance,
)
from qadv.sampling import RngStream, haar_state, haar_unitaries, planar_rotation, random_channel, random_density_matrix

SQRT_HALF = 0.7071068
PLUS = PureState.normalized([1, 1])

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.sampled_from([2, 3, 4, 8])


def test_fidelity_examples():
    zero = PureState.basis(2, 0)
    assert fidelity(zero, zero) == pytest.approx(1.0)
    assert fidelity(zero, PLUS) == pytest.approx(SQRT_HALF, abs=1e-7)
    assert fidelity(zero.density(), DensityMatrix.maximally_mixed(2)) == pytest.approx(SQRT_HALF, abs=1e-7)
    assert fidelity_squared(zero, PLUS) == pytest.approx(0.5)


def test_fidelity_conventions_agree_across_representations():
    s = RngStream(11)
    a, b = haar_state(5, s.spawn(0)), haar_state(5, s.spawn(1))
    f = fidelity(a, b)
    assert fidelity(a, b.density()) == pytest.approx(f, abs=1e-10)
    assert fidelity(a.density(), b) == pytest.approx(f, abs=1e-10)
    assert fidelity(a.density(), b.density()) == pytest.approx(f, abs=1e-7)


def test_trace_distance_examples():
    zero, one = PureState.basis(2, 0), PureState.basis(2, 1)
    assert trace_distance(zero.density(), one.density()) == pytest.approx(1.0)
    rho = random_density_matrix(3, None, RngStream(2))
    assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-12)
    assert trace_distance(zero.density(), PLUS.density()) == pytest.approx(SQRT_HALF, abs=1e-7)


def test_hs_distance_examples():
    eye = np.eye(2)
    assert hs_distance(eye, eye) == pytest.approx(0.0)
    assert hs_distance(eye, np.diag([1j, -1j])) == pytest.approx(2.0)
    assert hs_distance(eye, np.array([[0, 1], [-1, 0]])) == pytest.approx(2.0)
    assert hs_distance(eye, np.diag([1j, -1j]), metric="norm") == pytest.approx(2.0 / np.sqrt(2))
    with pytest.raises(ValueError):
        hs_distance(eye, eye, metric="other")


def test_channel_examples():
    rho = random_density_matrix(3, 2, RngStream(3))
    assert np.allclose(apply_channel(QuantumChannel.identity(3), rho).matrix, rho.matrix)
    u = haar_unitaries(2, 1, True, RngStream(4))[0]
    zero = PureState.basis(2, 0)
    out = apply_channel(QuantumChannel.from_unitary(u), zero)
    psi = u @ zero.amplitudes
    assert np.allclose(out.matrix, np.outer(psi, psi.conj()))
    dep = apply_channel(QuantumChannel.fully_depolarizing(2), zero)
    assert np.allclose(dep.matrix, np.eye(2) / 2)


def test_expectation_examples():
    z = Observable(PAULI_Z)
    assert expectation(z, PureState.basis(2, 0)) == pytest.approx(1.0)
    assert expectation(z, PLUS) == pytest.approx(0.0, abs=1e-12)
    assert expectation(z, DensityMatrix.maximally_mixed(2)) == pytest.approx(0.0, abs=1e-12)


def test_hs_fidelity_gap_examples():
    b2 = PureState.basis(2, 0)
    r2 = planar_rotation(b2.amplitudes, PureState.basis(2, 1).amplitudes, np.pi / 2)
    assert hs_fidelity_gap(np.eye(2), np.eye(2), b2) == pytest.approx((0, 0, 0), abs=1e-12)
    assert hs_fidelity_gap(np.eye(2), r2, b2) == pytest.approx((4, 2, 4), abs=1e-12)
    b4 = PureState.basis(4, 0)
    r4 = planar_rotation(b4.amplitudes, PureState.basis(4, 1).amplitudes, np.pi / 2)
    h_sq, two, two_d = hs_fidelity_gap(np.eye(4), r4, b4)
    assert (h_sq, two, two_d) == pytest.approx((4, 2, 8), abs=1e-12)
    assert h_sq < two_d


def test_validation_errors():
    with pytest.raises(InvalidQuantumObject):
        PureState(np.array([1.0, 1.0]))
    with pytest.raises(InvalidQuantumObject):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(InvalidQuantumObject):
        UnitaryOperator(np.array([[1, 1], [0, 1]]))
    with pytest.raises(InvalidQuantumObject):
        UnitaryOperator(np.diag([1j, 1j]), special=True)
    with pytest.raises(InvalidQuantumObject):
        QuantumChannel((np.eye(2) * 0.5,))
    with pytest.raises(DimensionMismatch):
        fidelity(PureState.basis(2), PureState.basis(3))


def test_states_are_read_only():
    psi = PureState.basis(3, 1)
    with pytest.raises(ValueError):
        psi.amplitudes[0] = 1.0


@settings(max_examples=60, deadline=None)
@given(seed=seeds, d=dims)
def test_pure_trace_distance_matches_fidelity(seed, d):
    s = RngStream(seed)
    a, b = haar_state(d, s.spawn(0)), haar_state(d, s.spawn(1))
    assert trace_distance(a, b) == pytest.approx(np.sqrt(1 - fidelity(a, b) ** 2), abs=1e-8)


@settings(max_examples=60, deadline=None)
@given(seed=seeds, d=dims)
def test_fuchs_van_de_graaf(seed, d):
    s = RngStream(seed)
    rho, sigma = random_density_matrix(d, None, s.spawn(0)), random_density_matrix(d, None, s.spawn(1))
    f, t = fidelity(rho, sigma), trace_distance(rho, sigma)
    assert 1 - f - 1e-8 <= t <= np.sqrt(1 - f**2) + 1e-8
    assert fidelity(rho, sigma) == pytest.approx(fidelity(sigma, rho), abs=1e-8)


def test_uhlmann_monotonicity_under_channels():
    s = RngStream(21)
    for k in range(1000):
        d = (2, 4, 8)[k % 3]
        r = s.spawn(k).generator()
        ch = random_channel(d, int(r.integers(1, d + 1)), r)
        rho, sigma = random_density_matrix(d, None, r), random_density_matrix(d, None, r)
        assert fidelity(apply_channel(ch, rho), apply_channel(ch, sigma)) >= fidelity(rho, sigma) - 1e-8


@settings(max_examples=60, deadline=None)
@given(seed=seeds, d=dims)
def test_hs_distance_is_a_metric(seed, d):
    u, v, w = haar_unitaries(d, 3, False, RngStream(seed))
    assert hs_distance(u, v) == hs_distance(v, u)
    assert hs_distance(u, w) <= hs_distance(u, v) + hs_distance(v, w) + 1e-9


def test_provable_gap_relation_on_random_pairs():
    d = 4
    s = RngStream(5)
    u1 = haar_unitaries(d, 10_000, True, s.spawn(0))
    u2 = haar_unitaries(d, 10_000, True, s.spawn(1))
    gaps = hs_fidelity_gap_batch(u1, u2, PureState.basis(d, 0).amplitudes)
    assert np.all(gaps[:, 0] >= gaps[:, 1] - 1e-9)
    single = hs_fidelity_gap(u1[0], u2[0], PureState.basis(d, 0))
    assert np.allclose(single, gaps[0])


def test_channel_adjoint_matches_trace_duality():
    s = RngStream(8)
    ch = random_channel(3, 2, s.spawn(0))
    rho = random_density_matrix(3, None, s.spawn(1))
    g = haar_unitaries(3, 1, False, s.spawn(2))[0]
    obs = g @ np.diag([0.1, 0.5, 2.0]) @ g.conj().T
    lhs = np.trace(obs @ apply_channel(ch, rho).matrix)
    rhs = np.trace(ch.adjoint_apply(obs) @ rho.matrix)
    assert lhs == pytest.approx(rhs, abs=1e-12)
