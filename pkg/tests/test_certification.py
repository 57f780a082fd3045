import math

import numpy as np
import pytest

from qadv.certification import (
    PauliLabel,
    certification_gap_experiment,
    channel_fidelity_estimate,
    dfe_estimate,
    dfe_runs,
    exact_average_channel_fidelity,
    pauli_char,
    pauli_traces,
    qubit_count,
    rotated_state,
)
from qadv.core import PureState, QuantumChannel, UnitaryOperator, fidelity
from qadv.sampling import RngStream, haar_state, haar_states, haar_unitary, planar_rotation, random_channel, random_density_matrix


def test_pauli_char_examples():
    zero = PureState.basis(2, 0)
    assert pauli_char(zero, PauliLabel("Z")) == pytest.approx(0.7071068, abs=1e-7)
    assert pauli_char(zero, PauliLabel("X")) == pytest.approx(0.0, abs=1e-12)
    psi = haar_state(8, RngStream(1))
    assert np.sum(pauli_traces(psi) ** 2) / 8 == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_fast_traces_match_dense_paulis(n):
    d = 2**n
    rho = random_density_matrix(d, None, RngStream(n))
    fast = pauli_traces(rho)
    for x in range(d):
        for z in range(d):
            k = PauliLabel.from_xz(n, x, z)
            assert k.xz == (x, z)
            dense = np.trace(rho.matrix @ k.matrix()).real
            assert fast[x * d + z] == pytest.approx(dense, abs=1e-12)


def test_label_validation():
    with pytest.raises(ValueError):
        PauliLabel("XQ")
    with pytest.raises(ValueError):
        qubit_count(6)
    with pytest.raises(ValueError):
        pauli_char(PureState.basis(4, 0), PauliLabel("Z"))


def test_dfe_identical_and_orthogonal_states():
    eta, delta = 0.05, 0.1
    sigma = haar_state(4, RngStream(2))
    same = dfe_runs(sigma, sigma.density(), eta, delta, 200, RngStream(3))
    assert np.mean([abs(r.estimate - 1) <= eta for r in same]) >= 1 - delta
    v = sigma.amplitudes.copy()
    perp = PureState.normalized(haar_states(4, 1, RngStream(4))[0] - np.vdot(v, haar_states(4, 1, RngStream(4))[0]) * v)
    assert fidelity(sigma, perp) == pytest.approx(0.0, abs=1e-12)
    ortho = dfe_runs(sigma, perp.density(), eta, delta, 200, RngStream(5))
    assert np.mean([abs(r.estimate_raw) <= eta for r in ortho]) >= 1 - delta


def test_dfe_resource_accounting():
    sigma = haar_state(8, RngStream(6))
    rho = random_density_matrix(8, None, RngStream(7))
    r = dfe_estimate(sigma, rho, 0.05, 0.1, RngStream(8))
    assert r.settings_used == 4000
    assert r.shots_used == 4000
    again = dfe_estimate(sigma, rho, 0.05, 0.1, RngStream(9))
    assert (again.settings_used, again.shots_used) == (4000, 4000)
    auto = dfe_estimate(sigma, rho, 0.05, 0.1, RngStream(8), shots="auto")
    assert auto.shots_used >= auto.settings_used
    with pytest.raises(ValueError):
        dfe_estimate(sigma, rho, 0.05, 0.1, RngStream(8), shots=0)


def test_dfe_is_unbiased_for_squared_fidelity():
    sigma = haar_state(4, RngStream(10))
    rho = random_density_matrix(4, 2, RngStream(11))
    truth = fidelity(sigma, rho) ** 2
    raw = np.array([r.estimate_raw for r in dfe_runs(sigma, rho, 0.1, 0.2, 300, RngStream(12))])
    assert abs(raw.mean() - truth) <= 4 * raw.std(ddof=1) / math.sqrt(raw.size)


def test_stabilizer_target_calibrates_with_one_shot():
    # |0...0> has only Z-type labels in its support
    sigma = PureState.basis(8, 0)
    rho = random_density_matrix(8, None, RngStream(13))
    truth = fidelity(sigma, rho) ** 2
    runs = dfe_runs(sigma, rho, 0.05, 0.1, 500, RngStream(14))
    miss = np.mean([abs(r.estimate_raw - truth) > 0.05 for r in runs])
    assert miss <= 0.1 + 3 * math.sqrt(0.1 * 0.9 / 500)


def test_channel_examples():
    u = haar_unitary(4, True, RngStream(15))
    exact = channel_fidelity_estimate(u, QuantumChannel.from_unitary(u), 0.02, 0.1, 200, RngStream(16))
    assert exact.estimate == pytest.approx(1.0, abs=1e-9)
    assert channel_fidelity_estimate(u, QuantumChannel.from_unitary(u), 0.02, 0.1, "auto", RngStream(16)).settings_used == 25000


def test_channel_estimate_matches_fresh_monte_carlo():
    d, theta = 4, 0.2
    s = RngStream(17)
    u = haar_unitary(d, True, s.spawn(0))
    b = PureState.basis(d, 0).amplitudes
    c = PureState.basis(d, 1).amplitudes
    v = UnitaryOperator(planar_rotation(b, c, theta))
    ch = QuantumChannel.from_unitary(u @ v)
    exact = exact_average_channel_fidelity(u, ch)
    psi = haar_states(d, 1_000_000, s.spawn(1))
    per_input = np.abs(np.einsum("ni,ij,nj->n", psi.conj(), v.matrix, psi)) ** 2
    oracle, oracle_se = per_input.mean(), per_input.std() / 1000
    assert abs(oracle - exact) <= 3 * oracle_se
    est = channel_fidelity_estimate(u, ch, 0.02, 0.1, "auto", s.spawn(2))
    assert abs(est.estimate - oracle) <= 3 * math.hypot(oracle_se, per_input.std() / math.sqrt(est.settings_used))


def test_exact_channel_fidelity_of_depolarizer():
    d = 4
    u = UnitaryOperator.identity(d)
    assert exact_average_channel_fidelity(u, QuantumChannel.fully_depolarizing(d)) == pytest.approx(1 / d)


def test_rotated_state_fidelity():
    psi = haar_state(6, RngStream(18))
    rng = np.random.default_rng(0)
    for f in (0.0, 0.3, 0.97, 1.0):
        assert fidelity(psi, rotated_state(psi, f, rng)) == pytest.approx(f, abs=1e-12)


def test_gap_experiment_at_d16():
    rep = certification_gap_experiment(16, 0.1, 0.5, 0.05, RngStream(19), runs=100)
    eta = (1 - 0.9711806) / 2
    assert rep.eta == pytest.approx(eta, abs=1e-7)
    assert rep.settings_used >= math.ceil(1 / (0.05 * rep.eta**2))
    assert rep.honest_accept_rate >= 0.95
    assert rep.below_reject_rate >= 1 - 0.05
    skipped = certification_gap_experiment(2, 0.01, 0.99, 0.05, RngStream(20), runs=10)
    assert skipped.skipped


def test_random_channel_fidelity_estimator_is_unbiased():
    s = RngStream(21)
    u = haar_unitary(4, True, s.spawn(0))
    ch = random_channel(4, 3, s.spawn(1))
    exact = exact_average_channel_fidelity(u, ch)
    ests = np.array([channel_fidelity_estimate(u, ch, 0.02, 0.1, 2000, s.named("runs").spawn(r)).estimate for r in range(400)])
    assert abs(ests.mean() - exact) <= 4 * ests.std(ddof=1) / math.sqrt(ests.size)
