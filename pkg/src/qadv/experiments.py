"""Seeded experiment drivers behind the ``qadv`` subcommands.

Every driver takes plain parameters and an :class:`RngStream` and returns a
:class:`Table`: fixed CSV header, rows of Python scalars, a results dict for
the JSON summary, and a list of invariant violations (non-empty means the
run should exit with status 3 after writing its outputs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .adversary import adversarial_risk, analytic_cost_cdf, analytic_cost_quantile, min_perturbation_survey
from .certification import (
    channel_fidelity_estimate,
    dfe_runs,
    exact_average_channel_fidelity,
    qubit_count,
    rotated_state,
)
from .classifier import (
    ClassifierPair,
    FidelityThresholdClassifier,
    analytic_risk_threshold,
    estimate_risk,
    tuned_threshold_pair,
)
from .concentration import levy_tail_estimate
from .core import (
    DensityMatrix,
    Observable,
    PureState,
    QuantumChannel,
    UnitaryOperator,
    apply_channel,
    expectation,
    fidelity,
    hs_fidelity_gap_batch,
)
from .parallel import run_blocks
from .sampling import (
    RngStream,
    ginibre,
    haar_state,
    haar_unitaries,
    haar_unitary,
    orthogonal_partner,
    planar_rotation,
    random_channel,
)

HEADERS = {
    "risk": "d,t_c,t_h,mu_analytic,mu_hat,std_err,trials,seed",
    "attack-sweep": "d,t_c,t_h,budget_chi,budget_hs,adv_risk_hat,std_err,median_min_chi,trials,seed,variant",
    "concentration": "d,eps,tail_hat,std_err,levy_bound,metric,samples,seed",
    "certify-dfe": "n_qubits,eta,delta,run,estimate,true_fid,settings_used,shots_used,seed",
    "certify-channel": "n_qubits,theta,delta_prec,fail_prob,run,estimate,true_avg_fid,calls,seed",
    "probe-hs-fidelity": "d,sample,h_sq,two_one_minus_f,two_d_one_minus_f,paper_ineq_holds",
    "uhlmann-check": "d,chi,trial,lhs,bound,holds",
}

INEQ_TOL = 1e-9
PLANAR_PROBE_ANGLES = (math.pi / 8, math.pi / 4, math.pi / 2)
UHLMANN_BLOCK = 256


@dataclass
class Table:
    header: str
    rows: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)


def bound_summary(
    d: int,
    mu: float,
    risk_cap: float,
    fail_prob: float,
    variant: str = "paper",
    trace_o: float | None = None,
    chi: float | None = None,
) -> dict:
    report = bounds.evaluate(bounds.BoundQuery(d, mu, risk_cap, fail_prob), variant).as_dict()
    if trace_o is not None and chi is not None:
        if trace_o < 0 or not (0.0 <= chi <= 1.0):
            raise bounds.BoundDomainError("trace_O must be nonnegative and chi in [0, 1]")
        report["uhlmann_output_bound"] = bounds.uhlmann_output_bound(trace_o, chi)
    return report


def risk_table(dims, t_c: float, t_h: float, trials: int, seed: int, workers: int = 1) -> Table:
    root = RngStream(seed).named("risk")
    table = Table(HEADERS["risk"])
    for d in dims:
        b = PureState.basis(d, 0)
        pair = ClassifierPair(FidelityThresholdClassifier(b, t_h), FidelityThresholdClassifier(b, t_c))
        est = estimate_risk(pair, d, trials, root.spawn(d), workers)
        exact = analytic_risk_threshold(d, t_c, t_h)
        table.rows.append([d, t_c, t_h, exact, est.mean, est.std_error, trials, seed])
        table.results[str(d)] = {"mu_analytic": exact, "z_score": _z(est.mean, exact, est.std_error)}
    return table


def _z(value: float, expected: float, se: float) -> float:
    return (value - expected) / se if se > 0 else (0.0 if value == expected else math.inf)


def attack_sweep_table(
    dims,
    mu: float,
    risk_cap: float,
    trials: int,
    seed: int,
    workers: int = 1,
    variant: str = "paper",
) -> Table:
    """Exact adversarial risk at the maximal admissible HS budget plus the minimal-cost survey, per dimension."""
    root = RngStream(seed).named("attack-sweep")
    table = Table(HEADERS["attack-sweep"])
    for d in dims:
        pair = tuned_threshold_pair(d, mu)
        t_h, t_c = pair.hypothesis.threshold, pair.truth.threshold
        lo, hi = min(t_h, t_c), max(t_h, t_c)
        eps_sq = bounds.admissible_epsilon_sq(d, mu, risk_cap)
        budget_hs = math.sqrt(eps_sq)
        budget_chi = min(eps_sq / 4.0, 1.0)
        # same stream for both: risk and survey see the same Haar states
        stream = root.spawn(d)
        adv = adversarial_risk(pair, d, budget_chi, trials, stream, workers)
        survey = min_perturbation_survey(pair, d, trials, stream, workers)
        table.rows.append(
            [d, t_c, t_h, budget_chi, budget_hs, adv.mean, adv.std_error, survey.median, trials, seed, variant]
        )
        median_exact = analytic_cost_quantile(d, lo, hi, 0.5)
        table.results[str(d)] = {
            "method": adv.method,
            "adv_risk_analytic": analytic_cost_cdf(d, lo, hi, budget_chi),
            "median_min_chi_analytic": median_exact,
            "median_min_chi_std_err": survey.median_std_error,
            "median_z_score": _z(survey.median, median_exact, survey.median_std_error),
            "p90_min_chi": survey.p90,
        }
    return table


def parse_eps_grid(text: str) -> np.ndarray:
    """``START:STOP:STEP`` with STOP included when it lies on the grid."""
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError as exc:
        raise ValueError(f"eps grid must look like START:STOP:STEP, got {text!r}") from exc
    if step <= 0 or stop < start or start < 0:
        raise ValueError("eps grid needs 0 <= START <= STOP and STEP > 0")
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 12)


def concentration_table(
    dims,
    eps_grid: np.ndarray,
    samples: int,
    seed: int,
    metric: str = "unnorm",
    statistic: str = "re-overlap",
    workers: int = 1,
) -> Table:
    root = RngStream(seed).named("concentration")
    table = Table(HEADERS["concentration"])
    for d in dims:
        curve = levy_tail_estimate(d, statistic, eps_grid, samples, root.spawn(d), metric=metric, workers=workers)
        for e, t, se, bound in zip(curve.epsilons, curve.tail_estimates, curve.tail_std_errors, curve.bound_values):
            table.rows.append([d, float(e), float(t), float(se), float(bound), metric, samples, seed])
        table.results[str(d)] = {
            "statistic": statistic,
            "median": curve.median,
            "median_std_err": curve.median_std_error,
            "violations_3se": [float(curve.epsilons[i]) for i in curve.violations()],
        }
    return table


def _noisy_state(sigma: PureState, fidelity_value: float, noise: float, rng) -> DensityMatrix:
    """Depolarized pure state at square-root fidelity ``fidelity_value`` from ``sigma``."""
    d = sigma.dim
    phi = rotated_state(sigma, fidelity_value, rng).density().matrix
    return DensityMatrix((1.0 - noise) * phi + noise * np.eye(d) / d)


def certify_dfe_table(
    qubits: int,
    eta: float,
    delta: float,
    runs: int,
    seed: int,
    shots=1,
    fidelity_value: float = 0.9,
    noise: float = 0.1,
) -> Table:
    """DFE runs against a Haar target and a fixed noisy, rotated actual state."""
    if not (0.0 <= noise <= 1.0):
        raise ValueError("noise must lie in [0, 1]")
    d = 2**qubits
    qubit_count(d)
    root = RngStream(seed).named("certify-dfe")
    sigma = haar_state(d, root.named("target"))
    rho = _noisy_state(sigma, fidelity_value, noise, root.named("actual").generator())
    truth = fidelity(sigma, rho)
    out = dfe_runs(sigma, rho, eta, delta, runs, root.named("runs"), shots)
    table = Table(HEADERS["certify-dfe"])
    for r, run in enumerate(out):
        table.rows.append([qubits, eta, delta, r, run.estimate, truth, run.settings_used, run.shots_used, seed])
    raw = np.array([run.estimate_raw for run in out])
    est = np.array([run.estimate for run in out])
    miss_raw = np.abs(raw - truth**2) > eta
    table.results = {
        "true_fid_squared": truth**2,
        "mean_estimate_raw": float(raw.mean()),
        "violation_rate": float(np.mean(np.abs(est - truth) > eta)),
        "violation_rate_squared": float(miss_raw.mean()),
        "violation_rate_squared_std_err": float(np.sqrt(miss_raw.mean() * (1 - miss_raw.mean()) / runs)),
        "shots": shots,
    }
    return table


def certify_channel_table(
    qubits: int,
    theta: float,
    delta_prec: float,
    fail_prob: float,
    runs: int,
    seed: int,
    n_inputs="auto",
) -> Table:
    """Target is a Haar unitary ``U``; the device applies ``U`` after a planar rotation by ``theta``."""
    d = 2**qubits
    qubit_count(d)
    root = RngStream(seed).named("certify-channel")
    target = haar_unitary(d, True, root.named("target"))
    rng = root.named("error").generator()
    b = PureState.basis(d, 0).amplitudes
    error = planar_rotation(b, orthogonal_partner(b, rng), theta)
    actual = QuantumChannel.from_unitary(UnitaryOperator(target.matrix @ error))
    exact = exact_average_channel_fidelity(target, actual)
    stream = root.named("runs")
    table = Table(HEADERS["certify-channel"])
    ests = []
    for r in range(runs):
        run = channel_fidelity_estimate(target, actual, delta_prec, fail_prob, n_inputs, stream.spawn(r))
        ests.append(run.estimate)
        table.rows.append([qubits, theta, delta_prec, fail_prob, r, run.estimate, exact, run.settings_used, seed])
    ests = np.array(ests)
    se = float(ests.std(ddof=1) / math.sqrt(runs)) if runs > 1 else math.nan
    table.results = {
        "mean_estimate": float(ests.mean()),
        "mean_std_err": se,
        "bias_z_score": _z(float(ests.mean()), exact, se) if runs > 1 else math.nan,
        "violation_rate": float(np.mean(np.abs(ests - exact) > delta_prec)),
    }
    return table


def probe_hs_fidelity_table(d: int, samples: int, seed: int, workers: int = 1) -> Table:
    """Independent Haar SU(d) pairs, then the planar-rotation family.

    ``paper_ineq_holds`` tests ``H^2 >= 2d(1-F)``; the provable
    ``H^2 >= 2(1-F)`` must hold on every row or the run reports a violation.
    Planar rows are labelled ``planar-<k>`` in the ``sample`` column.
    """
    root = RngStream(seed).named("probe-hs-fidelity")
    b = PureState.basis(d, 0).amplitudes

    def block(rng, _i, n):
        u1 = haar_unitaries(d, n, True, rng)
        u2 = haar_unitaries(d, n, True, rng)
        return hs_fidelity_gap_batch(u1, u2, b)

    gaps = np.concatenate(run_blocks(block, samples, root.named("haar"), workers)) if samples else np.empty((0, 3))
    labels: list = list(range(samples))
    planar = []
    if d >= 2:
        c = PureState.basis(d, 1).amplitudes
        eye = np.eye(d, dtype=complex)[None]
        for theta in PLANAR_PROBE_ANGLES:
            planar.append(hs_fidelity_gap_batch(eye, planar_rotation(b, c, theta)[None], b)[0])
        labels += [f"planar-{k}" for k in range(len(planar))]
        gaps = np.vstack([gaps, *planar]) if planar else gaps

    table = Table(HEADERS["probe-hs-fidelity"])
    held = 0
    for lab, (h_sq, two, two_d) in zip(labels, gaps):
        paper = bool(h_sq >= two_d - INEQ_TOL)
        held += paper
        table.rows.append([d, lab, float(h_sq), float(two), float(two_d), paper])
        if h_sq < two - INEQ_TOL:
            table.violations.append(f"H^2 >= 2(1-F) failed at sample {lab}: {h_sq!r} < {two!r}")
    haar = gaps[:samples]
    table.results = {
        "dimension_free_holds_fraction": float(np.mean(haar[:, 0] >= haar[:, 1] - INEQ_TOL)) if samples else math.nan,
        "paper_ineq_holds_fraction_haar": float(np.mean(haar[:, 0] >= haar[:, 2] - INEQ_TOL)) if samples else math.nan,
        "planar_rows": [
            {"theta": th, "h_sq": float(g[0]), "two_d_one_minus_f": float(g[2]), "h_sq_over_one_minus_f": float(g[0] / (g[1] / 2))}
            for th, g in zip(PLANAR_PROBE_ANGLES, planar)
        ],
        "rows_total": len(table.rows),
        "paper_ineq_holds_total": held,
    }
    return table


def _uhlmann_trial(d: int, chi: float, rng: np.random.Generator) -> tuple[float, float]:
    ch = random_channel(d, int(rng.integers(1, d + 1)), rng)
    g = ginibre(rng, (d, d))
    obs = Observable(g @ g.conj().T)
    sigma = PureState.normalized(ginibre(rng, d))
    # square-root fidelity in [1 - chi, 1)
    rho = rotated_state(sigma, 1.0 - chi * (1.0 - rng.random()), rng)
    lhs = abs(expectation(obs, apply_channel(ch, sigma)) - expectation(obs, apply_channel(ch, rho)))
    return lhs, bounds.uhlmann_output_bound(obs.trace_value, chi)


def uhlmann_check_table(dims, chis, trials: int, seed: int, workers: int = 1) -> Table:
    """Random (channel, PSD observable, pure pair at infidelity <= chi) draws against the output bound."""
    root = RngStream(seed).named("uhlmann-check")
    table = Table(HEADERS["uhlmann-check"])
    worst = 0.0
    for i, d in enumerate(dims):
        for j, chi in enumerate(chis):
            if not (0.0 < chi <= 1.0):
                raise ValueError(f"chi must lie in (0, 1], got {chi!r}")

            def block(rng, _k, n, d=d, chi=chi):
                return [_uhlmann_trial(d, chi, rng) for _ in range(n)]

            cell = root.spawn(i).spawn(j)
            pairs = [p for blk in run_blocks(block, trials, cell, workers, UHLMANN_BLOCK) for p in blk]
            for t, (lhs, bound) in enumerate(pairs):
                holds = lhs <= bound + INEQ_TOL
                table.rows.append([d, chi, t, lhs, bound, holds])
                if bound > 0:
                    worst = max(worst, lhs / bound)
                if not holds:
                    table.violations.append(f"output bound exceeded at d={d}, chi={chi}, trial {t}: {lhs!r} > {bound!r}")
    table.results = {"draws": len(table.rows), "violations": len(table.violations), "max_lhs_over_bound": worst}
    return table
