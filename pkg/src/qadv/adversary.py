"""Minimal adversarial perturbations and Monte Carlo adversarial risk.

Costs are state infidelities ``chi = 1 - |<psi|psi'>|``.  A move of
Fubini-Study angle ``a`` is realised by a planar rotation with
Hilbert-Schmidt size ``2 sqrt(chi)`` (from ``H^2 = 4(1 - cos a)``).

For shared-reference threshold pairs the misclassified set is the band
``lo <= |<b|psi>|^2 < hi``; writing ``p = cos^2(phi)`` the cheapest move
is a rotation in span{psi, b} to the nearest band edge, which gives exact
closed forms for per-state cost, adversarial risk and the cost law.
Other classifiers are attacked numerically by :func:`gradient_attack`,
whose failures are censored observations, not robustness certificates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .classifier import MIN_RISK_TRIALS, ClassifierPair, labels_from_scores
from .core import NumericalFailure, PureState, _check_dims
from .parallel import run_blocks
from .sampling import (
    PerturbationSpec,
    RngStream,
    angle_for_infidelity,
    haar_states,
    infidelity_of_angle,
    orthogonal_partner,
)

MARGIN = 1e-9
UNREACHABLE_COST = 1.0
DEFAULT_STEPS = 200
DEFAULT_STEP_SIZE = 0.05


def infidelity_to_hs(chi):
    return 2.0 * np.sqrt(np.clip(chi, 0.0, None))


def hs_to_infidelity(eps):
    """Infidelity reached by a planar rotation of HS size ``eps``; capped at 1."""
    return np.minimum(np.asarray(eps, dtype=float) ** 2 / 4.0, 1.0)


@dataclass(frozen=True)
class AttackResult:
    success: bool
    cost_infidelity: float
    cost_hs: float
    witness: Optional[PureState] = None

    def __post_init__(self):
        if self.success and self.witness is None:
            raise ValueError("a successful attack must carry a witness")


@dataclass(frozen=True)
class AdvRiskEstimate:
    budget: PerturbationSpec
    budget_infidelity: float
    mean: float
    std_error: float
    n_trials: int
    method: str  # "closed-form" or "numeric-lower-bound"


def _require_threshold_pair(pair: ClassifierPair) -> tuple[float, float]:
    if not pair.is_threshold_family():
        raise ValueError("closed-form attacks need two FidelityThresholdClassifiers with one reference")
    t_h, t_c = pair.hypothesis.threshold, pair.truth.threshold
    return min(t_h, t_c), max(t_h, t_c)


def band_angles(lo: float, hi: float) -> tuple[float, float]:
    """``(phi_hi, phi_lo)``: band in angle is ``phi_hi < phi <= phi_lo``."""
    return float(np.arccos(np.sqrt(hi))), float(np.arccos(np.sqrt(lo)))


def min_angle_threshold(lo: float, hi: float, p: np.ndarray) -> np.ndarray:
    """Minimal Fubini-Study angle from overlap ``p`` to the band ``[lo, hi)``; inf if empty."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    if lo == hi:
        return np.full(p.shape, np.inf)
    phi = np.arccos(np.sqrt(p))
    phi_hi, phi_lo = band_angles(lo, hi)
    out = np.zeros(p.shape)
    above = p >= hi
    below = p < lo
    out[above] = phi_hi - phi[above]
    out[below] = phi[below] - phi_lo
    return np.clip(out, 0.0, None)


def analytic_cost_cdf(d: int, lo: float, hi: float, chi: float) -> float:
    """``P(min cost <= chi)`` for Haar states; equals the adversarial risk at budget ``chi``.

    The band dilated by angle ``a = arccos(1 - chi)`` is ``[cos^2(phi_lo + a), cos^2(phi_hi - a)]``
    in overlap, and ``P(p >= t) = (1 - t)^(d-1)``.
    """
    if lo == hi:
        return 0.0
    a = float(angle_for_infidelity(np.clip(chi, 0.0, 1.0)))
    phi_hi, phi_lo = band_angles(lo, hi)
    top = np.cos(max(phi_hi - a, 0.0)) ** 2
    bottom = np.cos(min(phi_lo + a, np.pi / 2)) ** 2
    upper_tail = 0.0 if phi_hi - a <= 0 else (1 - top) ** (d - 1)
    return float((1 - bottom) ** (d - 1) - upper_tail)


def analytic_cost_quantile(d: int, lo: float, hi: float, q: float) -> float:
    """Quantile of the minimal-infidelity law of Haar states, by bisection on the CDF."""
    if lo == hi:
        return UNREACHABLE_COST
    a, b = 0.0, 1.0
    for _ in range(200):
        m = 0.5 * (a + b)
        if analytic_cost_cdf(d, lo, hi, m) < q:
            a = m
        else:
            b = m
    return 0.5 * (a + b)


def _plane(b: np.ndarray, psi: np.ndarray) -> tuple[complex, np.ndarray]:
    """Phase of ``<b|psi>`` and the unit vector orthogonal to b in span{b, psi}."""
    c = np.vdot(b, psi)
    phase = c / abs(c) if abs(c) > 1e-15 else 1.0
    r = psi - c * b
    nr = np.linalg.norm(r)
    if nr > 1e-12:
        return phase, r / nr
    # psi is parallel to b: any orthogonal direction; choose it deterministically
    k = int(np.argmin(np.abs(b)))
    e = np.zeros_like(b)
    e[k] = 1.0
    e = e - np.vdot(b, e) * b
    return phase, e / np.linalg.norm(e)


def optimal_attack_threshold(pair: ClassifierPair, psi: PureState, budget_infidelity: float) -> AttackResult:
    """Exact minimal-infidelity attack on a shared-reference threshold pair."""
    lo, hi = _require_threshold_pair(pair)
    _check_dims(pair.dim, psi.dim)
    if not (0.0 <= budget_infidelity <= 1.0):
        raise ValueError("budget must lie in [0, 1]")
    b = pair.truth.reference.amplitudes
    x = psi.amplitudes
    p = abs(np.vdot(b, x)) ** 2
    angle = float(min_angle_threshold(lo, hi, np.array([p]))[0])
    if not np.isfinite(angle):
        return AttackResult(False, UNREACHABLE_COST, infidelity_to_hs(UNREACHABLE_COST), None)
    cost = float(infidelity_of_angle(angle))
    cost_hs = float(infidelity_to_hs(cost))
    if cost > budget_infidelity:
        return AttackResult(False, cost, cost_hs, None)
    if pair.misclassified(x[None, :])[0]:
        return AttackResult(True, 0.0, 0.0, psi)

    phase, perp = _plane(b, x)
    phi_hi, phi_lo = band_angles(lo, hi)
    half_width = 0.5 * (phi_lo - phi_hi)
    target_edge, inward = (phi_hi, 1.0) if p >= hi else (phi_lo, -1.0)
    margin = min(MARGIN, half_width)
    while True:
        phi_new = target_edge + inward * margin
        w = np.cos(phi_new) * phase * b + np.sin(phi_new) * perp
        w = w / np.linalg.norm(w)
        if pair.misclassified(w[None, :])[0]:
            return AttackResult(True, cost, cost_hs, PureState(w))
        if margin >= half_width:
            raise NumericalFailure("could not place a witness strictly inside the band")
        margin = min(margin * 10, half_width)


def _horizontal(y: np.ndarray, g: np.ndarray) -> np.ndarray:
    return g - np.vdot(y, g) * y


def _labels(pair, y):
    row = y[None, :]
    return (labels_from_scores(pair.hypothesis.scores(row))[0], labels_from_scores(pair.truth.scores(row))[0])


def _walk_to_band(pair, clf, x, sign, steps, step_size):
    """Steepest descent of ``sign * score`` on the sphere until h and c disagree.

    Stops at the first step that changes either label and bisects onto the
    exit point, so a step longer than the disagreement band cannot jump it.
    Returns that point if it is misclassified, else ``None``.
    """
    start = _labels(pair, x)
    y = x
    for _ in range(steps):
        g = clf.score_gradient(y)
        if not np.all(np.isfinite(g)):
            raise NumericalFailure("non-finite score gradient")
        t = -sign * _horizontal(y, g)
        nt = np.linalg.norm(t)
        if nt < 1e-14:
            return None
        direction = t / nt
        y_next = y + step_size * direction
        y_next /= np.linalg.norm(y_next)
        if _labels(pair, y_next) != start:
            a, b = 0.0, step_size
            for _ in range(60):
                m = 0.5 * (a + b)
                z = y + m * direction
                z /= np.linalg.norm(z)
                if _labels(pair, z) != start:
                    b = m
                else:
                    a = m
            z = y + b * direction
            z /= np.linalg.norm(z)
            return z if pair.misclassified(z[None, :])[0] else None
        y = y_next
    return None


def _slerp_to_budget(x: np.ndarray, w: np.ndarray, chi: float) -> np.ndarray:
    """Point on the geodesic from x toward w at infidelity ``chi``."""
    ov = np.vdot(x, w)
    phase = ov / abs(ov) if abs(ov) > 1e-15 else 1.0
    w = w / phase
    perp = w - np.vdot(x, w) * x
    perp /= np.linalg.norm(perp)
    a = angle_for_infidelity(chi)
    return np.cos(a) * x + np.sin(a) * perp


def gradient_attack(
    pair: ClassifierPair,
    psi: PureState,
    budget_infidelity: float,
    steps: int = DEFAULT_STEPS,
    step_size: float = DEFAULT_STEP_SIZE,
) -> AttackResult:
    """Numeric minimal-perturbation attack for arbitrary classifier pairs.

    For each of h and c, walks along the projected steepest-descent path
    that pushes its score toward the opposite sign, stopping at the first
    point where the two labels disagree.  The cheaper of the two entry
    points is the candidate witness.  If it lies outside the fidelity
    budget, the geodesic toward it is cut back to the budget sphere and
    re-checked.
    """
    _check_dims(pair.dim, psi.dim)
    if not (0.0 <= budget_infidelity <= 1.0):
        raise ValueError("budget must lie in [0, 1]")
    x = psi.amplitudes
    if pair.misclassified(x[None, :])[0]:
        return AttackResult(True, 0.0, 0.0, psi)

    best, best_cost = None, np.inf
    for clf in (pair.hypothesis, pair.truth):
        sign = labels_from_scores(np.array([clf.scores(x[None, :])[0]]))[0]
        w = _walk_to_band(pair, clf, x, sign, steps, step_size)
        if w is None:
            continue
        cost = 1.0 - min(abs(np.vdot(x, w)), 1.0)
        if cost < best_cost:
            best, best_cost = w, cost

    if best is None:
        return AttackResult(False, UNREACHABLE_COST, float(infidelity_to_hs(UNREACHABLE_COST)), None)
    if best_cost <= budget_infidelity:
        return AttackResult(True, float(best_cost), float(infidelity_to_hs(best_cost)), PureState(best))
    if budget_infidelity > 0:
        cut = _slerp_to_budget(x, best, budget_infidelity)
        if pair.misclassified(cut[None, :])[0]:
            cost = 1.0 - min(abs(np.vdot(x, cut)), 1.0)
            return AttackResult(True, float(cost), float(infidelity_to_hs(cost)), PureState(cut))
    return AttackResult(False, float(best_cost), float(infidelity_to_hs(best_cost)), None)


def _min_costs_threshold(pair: ClassifierPair, psis: np.ndarray) -> np.ndarray:
    """Exact minimal infidelity per row; ``inf`` where the band is empty."""
    lo, hi = _require_threshold_pair(pair)
    angle = min_angle_threshold(lo, hi, pair.truth.overlaps(psis))
    return np.where(np.isfinite(angle), infidelity_of_angle(np.minimum(angle, np.pi / 2)), np.inf)


def adversarial_risk(
    pair: ClassifierPair,
    d: int,
    budget_infidelity: float,
    n_trials: int,
    stream: RngStream,
    workers: int = 1,
    steps: int = DEFAULT_STEPS,
    step_size: float = DEFAULT_STEP_SIZE,
) -> AdvRiskEstimate:
    """Fraction of Haar states from which a misclassified state lies within the budget.

    Threshold pairs use the exact minimal cost; other pairs use
    :func:`gradient_attack`, giving a lower-bound estimate.
    """
    if n_trials < MIN_RISK_TRIALS:
        raise ValueError(f"n_trials must be at least {MIN_RISK_TRIALS}")
    if not (0.0 <= budget_infidelity <= 1.0):
        raise ValueError("budget must lie in [0, 1]")
    _check_dims(pair.dim, d)
    closed = pair.is_threshold_family()

    def block(rng, _i, n):
        psis = haar_states(d, n, rng)
        if closed:
            return int(np.count_nonzero(_min_costs_threshold(pair, psis) <= budget_infidelity))
        hits = 0
        for row in psis:
            hits += gradient_attack(pair, PureState(row), budget_infidelity, steps, step_size).success
        return hits

    hits = sum(run_blocks(block, n_trials, stream, workers))
    m = hits / n_trials
    return AdvRiskEstimate(
        budget=PerturbationSpec(float(infidelity_to_hs(budget_infidelity)), "planar"),
        budget_infidelity=float(budget_infidelity),
        mean=m,
        std_error=float(np.sqrt(m * (1 - m) / n_trials)),
        n_trials=n_trials,
        method="closed-form" if closed else "numeric-lower-bound",
    )


def median_std_error(sample: np.ndarray) -> float:
    """Distribution-free standard error of the sample median.

    Half the spread between the order statistics at ranks ``n/2 -+ sqrt(n)/2``
    (the one-sigma binomial band around the median rank).
    """
    s = np.sort(np.asarray(sample, dtype=float))
    n = s.size
    half = 0.5 * np.sqrt(n)
    lo = int(np.clip(np.floor(n / 2 - half), 0, n - 1))
    hi = int(np.clip(np.ceil(n / 2 + half), 0, n - 1))
    return float(0.5 * (s[hi] - s[lo]))


@dataclass(frozen=True)
class MinCostSurvey:
    costs_infidelity: np.ndarray
    costs_hs: np.ndarray
    median: float
    median_std_error: float
    p90: float
    n_trials: int


def min_perturbation_survey(pair: ClassifierPair, d: int, n_trials: int, stream: RngStream, workers: int = 1) -> MinCostSurvey:
    """Exact per-state minimal attack costs over Haar draws (threshold family only).

    States with no reachable misclassified point get cost 1 (HS cost 2).
    """
    if not pair.is_threshold_family():
        raise ValueError("the minimal-cost survey supports shared-reference threshold pairs only")
    _check_dims(pair.dim, d)

    def block(rng, _i, n):
        return _min_costs_threshold(pair, haar_states(d, n, rng))

    chi = np.concatenate(run_blocks(block, n_trials, stream, workers))
    chi[~np.isfinite(chi)] = UNREACHABLE_COST
    return MinCostSurvey(
        costs_infidelity=chi,
        costs_hs=infidelity_to_hs(chi),
        median=float(np.median(chi)),
        median_std_error=median_std_error(chi),
        p90=float(np.quantile(chi, 0.9)),
        n_trials=n_trials,
    )


def random_direction_risk(
    pair: ClassifierPair,
    d: int,
    budget_infidelity: float,
    n_trials: int,
    stream: RngStream,
    workers: int = 1,
) -> float:
    """Misclassification rate after a random-direction move of exactly the budget.

    Contrasts with :func:`adversarial_risk`: same budget, no optimisation.
    """
    _check_dims(pair.dim, d)
    a = float(angle_for_infidelity(budget_infidelity))

    def block(rng, _i, n):
        psis = haar_states(d, n, rng)
        moved = np.empty_like(psis)
        for k, x in enumerate(psis):
            moved[k] = np.cos(a) * x + np.sin(a) * orthogonal_partner(x, rng)
        return int(np.count_nonzero(pair.misclassified(moved)))

    return sum(run_blocks(block, n_trials, stream, workers)) / n_trials
