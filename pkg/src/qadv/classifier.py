"""Score-then-threshold classifiers over pure states and risk estimation.

Both classifier families have scores that are quadratic forms in the
state, ``score(psi) = <psi|M|psi> - offset``:

* :class:`ObservableClassifier` -- ``M = sum_k K_k^dag O K_k`` (the
  Heisenberg-picture observable), so ``score = Tr(O Lambda(psi)) - theta``;
* :class:`FidelityThresholdClassifier` -- ``M = |b><b|``, so
  ``score = |<b|psi>|^2 - t``.

Labels are ``+1`` when ``score >= 0`` and ``-1`` otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Union

import numpy as np

from .core import (
    DimensionMismatch,
    Observable,
    PureState,
    QuantumChannel,
    _check_dims,
    apply_channel,
    expectation,
)
from .parallel import run_blocks
from .sampling import RngStream, haar_states

MIN_RISK_TRIALS = 100


class ClassLabel(IntEnum):
    NEG = -1
    POS = 1


def _vec(psi) -> np.ndarray:
    return psi.amplitudes if isinstance(psi, PureState) else np.asarray(psi, dtype=complex)


def labels_from_scores(scores: np.ndarray) -> np.ndarray:
    """Sign with the tie at zero resolved to +1."""
    return np.where(scores >= 0, 1, -1)


@dataclass(frozen=True)
class ObservableClassifier:
    channel: QuantumChannel
    observable: Observable
    threshold: float = 0.0

    def __post_init__(self):
        _check_dims(self.channel.dim_out, self.observable.dim)
        heis = self.channel.adjoint_apply(self.observable.matrix)
        object.__setattr__(self, "_effective", 0.5 * (heis + heis.conj().T))

    @property
    def dim(self) -> int:
        return self.channel.dim_in

    @property
    def effective_operator(self) -> np.ndarray:
        return self._effective

    @property
    def offset(self) -> float:
        return float(self.threshold)

    def score(self, psi: PureState) -> float:
        _check_dims(self.dim, psi.dim)
        return expectation(self.observable, apply_channel(self.channel, psi)) - self.threshold

    def scores(self, psis: np.ndarray) -> np.ndarray:
        psis = np.atleast_2d(psis)
        _check_dims(self.dim, psis.shape[1])
        return np.einsum("ni,ij,nj->n", psis.conj(), self._effective, psis).real - self.threshold

    def score_gradient(self, psi: np.ndarray) -> np.ndarray:
        return self._effective @ psi

    def label(self, psi: PureState) -> ClassLabel:
        return ClassLabel(1 if self.score(psi) >= 0 else -1)


@dataclass(frozen=True)
class FidelityThresholdClassifier:
    reference: PureState
    threshold: float

    def __post_init__(self):
        if not (0.0 < self.threshold < 1.0):
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold!r}")

    @property
    def dim(self) -> int:
        return self.reference.dim

    @property
    def effective_operator(self) -> np.ndarray:
        b = self.reference.amplitudes
        return np.outer(b, b.conj())

    @property
    def offset(self) -> float:
        return float(self.threshold)

    def overlaps(self, psis: np.ndarray) -> np.ndarray:
        """``p = |<b|psi>|^2`` for each row."""
        psis = np.atleast_2d(psis)
        _check_dims(self.dim, psis.shape[1])
        return np.abs(psis @ self.reference.amplitudes.conj()) ** 2

    def score(self, psi: PureState) -> float:
        _check_dims(self.dim, psi.dim)
        return float(abs(np.vdot(self.reference.amplitudes, psi.amplitudes)) ** 2 - self.threshold)

    def scores(self, psis: np.ndarray) -> np.ndarray:
        return self.overlaps(psis) - self.threshold

    def score_gradient(self, psi: np.ndarray) -> np.ndarray:
        b = self.reference.amplitudes
        return b * np.vdot(b, psi)

    def label(self, psi: PureState) -> ClassLabel:
        return ClassLabel(1 if self.score(psi) >= 0 else -1)


Classifier = Union[ObservableClassifier, FidelityThresholdClassifier]


def score(clf: Classifier, psi: PureState) -> float:
    return clf.score(psi)


def label(clf: Classifier, psi: PureState) -> ClassLabel:
    return clf.label(psi)


@dataclass(frozen=True)
class ClassifierPair:
    hypothesis: Classifier
    truth: Classifier

    def __post_init__(self):
        if self.hypothesis.dim != self.truth.dim:
            raise DimensionMismatch(
                f"hypothesis acts on d={self.hypothesis.dim}, truth on d={self.truth.dim}"
            )

    @property
    def dim(self) -> int:
        return self.truth.dim

    def misclassified(self, psis: np.ndarray) -> np.ndarray:
        """Boolean mask of rows where h and c disagree."""
        h = labels_from_scores(self.hypothesis.scores(psis))
        c = labels_from_scores(self.truth.scores(psis))
        return h != c

    def is_threshold_family(self) -> bool:
        h, c = self.hypothesis, self.truth
        return (
            isinstance(h, FidelityThresholdClassifier)
            and isinstance(c, FidelityThresholdClassifier)
            and np.array_equal(h.reference.amplitudes, c.reference.amplitudes)
        )


@dataclass(frozen=True)
class RiskEstimate:
    mean: float
    std_error: float
    n_trials: int

    @classmethod
    def from_count(cls, hits: int, n: int) -> "RiskEstimate":
        m = hits / n
        return cls(m, float(np.sqrt(m * (1 - m) / n)), n)


def estimate_risk(
    pair: ClassifierPair,
    d: int,
    n_trials: int,
    stream: RngStream,
    workers: int = 1,
) -> RiskEstimate:
    """Fraction of Haar-random pure states on which h and c disagree."""
    if n_trials < MIN_RISK_TRIALS:
        raise ValueError(f"n_trials must be at least {MIN_RISK_TRIALS}")
    _check_dims(pair.dim, d)

    def block(rng, _i, n):
        return int(np.count_nonzero(pair.misclassified(haar_states(d, n, rng))))

    hits = sum(run_blocks(block, n_trials, stream, workers))
    return RiskEstimate.from_count(hits, n_trials)


def _check_threshold(t: float, name: str) -> None:
    if not (0.0 < t < 1.0):
        raise ValueError(f"{name} must lie in (0, 1), got {t!r}")


def analytic_risk_threshold(d: int, t_c: float, t_h: float) -> float:
    """Exact risk of a shared-reference threshold pair, ``|(1-t_h)^(d-1) - (1-t_c)^(d-1)|``."""
    _check_threshold(t_c, "t_c")
    _check_threshold(t_h, "t_h")
    return abs((1 - t_h) ** (d - 1) - (1 - t_c) ** (d - 1))


def solve_threshold_for_risk(d: int, t_c: float, target_mu: float) -> float:
    """Hypothesis threshold ``t_h <= t_c`` whose analytic risk equals ``target_mu``."""
    _check_threshold(t_c, "t_c")
    tail_c = (1 - t_c) ** (d - 1)
    if target_mu == 0:
        return t_c
    if not (0 < target_mu < 1 - tail_c):
        raise ValueError(
            f"target risk {target_mu} unreachable on the t_h < t_c branch (needs < {1 - tail_c:.6g})"
        )
    return 1 - (tail_c + target_mu) ** (1 / (d - 1))


def haar_median_threshold(d: int) -> float:
    """Threshold ``t`` with ``P(|<b|psi>|^2 >= t) = 1/2`` for Haar ``psi``."""
    return 1 - 0.5 ** (1 / (d - 1))


def tuned_threshold_pair(d: int, mu: float, reference: PureState | None = None) -> ClassifierPair:
    """Threshold pair with truth at the Haar median and analytic risk ``mu``."""
    b = reference if reference is not None else PureState.basis(d, 0)
    t_c = haar_median_threshold(d)
    t_h = solve_threshold_for_risk(d, t_c, mu)
    return ClassifierPair(FidelityThresholdClassifier(b, t_h), FidelityThresholdClassifier(b, t_c))
