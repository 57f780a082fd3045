import numpy as np
import pytest

from qadv.classifier import (
    ClassifierPair,
    ClassLabel,
    FidelityThresholdClassifier,
    ObservableClassifier,
    analytic_risk_threshold,
    estimate_risk,
    haar_median_threshold,
    label,
    labels_from_scores,
    score,
    solve_threshold_for_risk,
    tuned_threshold_pair,
)
from qadv.core import PAULI_Z, DimensionMismatch, Observable, PureState, QuantumChannel
from qadv.sampling import RngStream, haar_states, random_channel

ZERO, ONE = PureState.basis(2, 0), PureState.basis(2, 1)
PLUS = PureState.normalized([1, 1])


def threshold_pair(d, t_h, t_c):
    b = PureState.basis(d, 0)
    return ClassifierPair(FidelityThresholdClassifier(b, t_h), FidelityThresholdClassifier(b, t_c))


def test_score_examples():
    clf = FidelityThresholdClassifier(ZERO, 0.5)
    assert score(clf, ZERO) == pytest.approx(0.5)
    assert score(clf, ONE) == pytest.approx(-0.5)
    obs = ObservableClassifier(QuantumChannel.identity(2), Observable(PAULI_Z), 0.0)
    assert score(obs, PLUS) == pytest.approx(0.0, abs=1e-12)


def test_label_tie_break():
    assert list(labels_from_scores(np.array([0.5, -0.5, 0.0]))) == [1, -1, 1]
    obs = ObservableClassifier(QuantumChannel.identity(2), Observable(PAULI_Z), 0.0)
    assert label(obs, PLUS) is ClassLabel.POS
    assert label(FidelityThresholdClassifier(ZERO, 0.5), ONE) is ClassLabel.NEG


def test_vectorized_scores_match_single():
    s = RngStream(1)
    ch = random_channel(3, 2, s.spawn(0))
    g = haar_states(3, 3, s.spawn(1))
    obs = Observable(g.T @ np.diag([0.2, 0.7, 1.5]) @ g.conj())
    clf = ObservableClassifier(ch, obs, 0.4)
    psis = haar_states(3, 20, s.spawn(2))
    batch = clf.scores(psis)
    for row, v in zip(psis, batch):
        assert clf.score(PureState(row)) == pytest.approx(v, abs=1e-12)


def test_global_phase_invariance():
    s = RngStream(2)
    ch = random_channel(4, 2, s.spawn(0))
    clf = ObservableClassifier(ch, Observable(np.diag([1.0, 0.0, 0.3, 0.2])), 0.3)
    ft = FidelityThresholdClassifier(PureState.basis(4, 2), 0.2)
    rng = s.spawn(1).generator()
    for row in haar_states(4, 50, s.spawn(2)):
        psi = PureState(row)
        rot = PureState(np.exp(1j * rng.uniform(0, 2 * np.pi)) * row)
        for c in (clf, ft):
            assert score(c, rot) == pytest.approx(score(c, psi), abs=1e-12)


def test_threshold_label_depends_only_on_overlap():
    clf = FidelityThresholdClassifier(PureState.basis(3, 0), 0.4)
    a = PureState.normalized([np.sqrt(0.4), np.sqrt(0.6), 0])
    b = PureState.normalized([np.sqrt(0.4), 0, 1j * np.sqrt(0.6)])
    assert label(clf, a) == label(clf, b)


def test_analytic_risk_examples():
    assert analytic_risk_threshold(4, 0.3, 0.3) == 0.0
    assert analytic_risk_threshold(2, 0.5, 0.3) == pytest.approx(0.2)
    assert analytic_risk_threshold(3, 0.5, 0.25) == pytest.approx(0.3125)
    assert analytic_risk_threshold(4, 0.5, 0.4) == pytest.approx(0.091)


def test_solve_threshold_examples():
    assert solve_threshold_for_risk(2, 0.5, 0.1) == pytest.approx(0.4, abs=1e-12)
    assert solve_threshold_for_risk(4, 0.5, 0.1) == pytest.approx(0.391780, abs=1e-6)
    assert solve_threshold_for_risk(4, 0.5, 0.0) == 0.5
    with pytest.raises(ValueError):
        solve_threshold_for_risk(2, 0.5, 0.6)


def test_tuned_pair_hits_target_risk():
    for d in (2, 4, 8, 16, 32, 64):
        pair = tuned_threshold_pair(d, 0.1)
        assert pair.truth.threshold == pytest.approx(haar_median_threshold(d))
        assert analytic_risk_threshold(d, pair.truth.threshold, pair.hypothesis.threshold) == pytest.approx(0.1, abs=1e-12)


def test_estimate_risk_examples():
    same = threshold_pair(3, 0.3, 0.3)
    assert estimate_risk(same, 3, 1000, RngStream(0)).mean == 0.0
    est = estimate_risk(threshold_pair(2, 0.3, 0.5), 2, 100_000, RngStream(1))
    assert abs(est.mean - 0.2) <= 3 * est.std_error
    est = estimate_risk(threshold_pair(4, 0.4, 0.5), 4, 100_000, RngStream(2))
    assert abs(est.mean - 0.091) <= 3 * est.std_error


@pytest.mark.parametrize("d", [2, 4, 8, 16])
def test_estimate_risk_agrees_with_analytic(d):
    t_c = haar_median_threshold(d)
    t_h = 0.7 * t_c
    est = estimate_risk(threshold_pair(d, t_h, t_c), d, 100_000, RngStream(d).named("risk"))
    assert abs(est.mean - analytic_risk_threshold(d, t_c, t_h)) <= 4 * est.std_error


def test_estimate_risk_is_worker_independent():
    pair = threshold_pair(4, 0.2, 0.3)
    a = estimate_risk(pair, 4, 10_000, RngStream(5), workers=1)
    b = estimate_risk(pair, 4, 10_000, RngStream(5), workers=4)
    assert a == b


def test_pair_validation():
    with pytest.raises(DimensionMismatch):
        ClassifierPair(FidelityThresholdClassifier(PureState.basis(2), 0.5), FidelityThresholdClassifier(PureState.basis(3), 0.5))
    with pytest.raises(ValueError):
        FidelityThresholdClassifier(ZERO, 1.0)
    with pytest.raises(ValueError):
        estimate_risk(threshold_pair(2, 0.3, 0.5), 2, 10, RngStream(0))
