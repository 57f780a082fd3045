"""Simulated certification protocols and their resource counts.

Direct fidelity estimation (DFE) importance-samples Pauli labels ``k`` with
probability ``chi_sigma(k)^2`` where ``chi_sigma(k) = Tr(sigma W_k)/sqrt(d)``,
measures ``W_k`` on the actual state and averages
``chi_rho(k) / chi_sigma(k)``, an unbiased estimator of ``Tr(rho sigma)``.
The number of settings is ``ceil(1 / (delta eta^2))``; shots per setting
are 1 by default or follow the Flammia-Liu schedule with ``shots="auto"``.

Average channel fidelity is estimated from Haar-random inputs with exact
per-input fidelities; only the number of device calls is simulated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .bounds import BoundQuery, fidelity_floor, n_settings, n_state_min
from .core import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    DensityMatrix,
    PureState,
    QuantumChannel,
    UnitaryOperator,
    _check_dims,
    kron_all,
)
from .sampling import RandomSource, RngStream, as_generator, haar_states, haar_unitary, orthogonal_partner

MAX_QUBITS = 10
PRUNE_BELOW = 1e-12
CHANNEL_CHUNK = 1 << 15

_PAULI_CHARS = "IXYZ"
_SINGLE = {"I": np.eye(2, dtype=complex), "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


def qubit_count(d: int) -> int:
    n = int(round(math.log2(d))) if d > 0 else -1
    if n < 1 or 2**n != d:
        raise ValueError(f"Pauli measurements need a power-of-two dimension, got {d}")
    return n


@dataclass(frozen=True)
class PauliLabel:
    word: str

    def __post_init__(self):
        if not self.word or any(ch not in _PAULI_CHARS for ch in self.word):
            raise ValueError(f"Pauli word must be a non-empty string over IXYZ, got {self.word!r}")

    @property
    def qubit_count(self) -> int:
        return len(self.word)

    @classmethod
    def from_xz(cls, n: int, x: int, z: int) -> "PauliLabel":
        chars = []
        for q in range(n):
            bit = n - 1 - q
            chars.append("IZXY"[((x >> bit) & 1) * 2 + ((z >> bit) & 1)])
        return cls("".join(chars))

    @property
    def xz(self) -> tuple[int, int]:
        x = z = 0
        for ch in self.word:
            x = (x << 1) | (ch in "XY")
            z = (z << 1) | (ch in "ZY")
        return x, z

    def matrix(self) -> np.ndarray:
        return kron_all([_SINGLE[ch] for ch in self.word])


def _fwht_last(a: np.ndarray, n: int) -> np.ndarray:
    """Walsh-Hadamard transform along the last axis (length 2^n)."""
    lead = a.shape[:-1]
    a = a.reshape(*lead, *([2] * n))
    for ax in range(len(lead), len(lead) + n):
        a0 = np.take(a, 0, axis=ax)
        a1 = np.take(a, 1, axis=ax)
        a = np.stack([a0 + a1, a0 - a1], axis=ax)
    return a.reshape(*lead, 2**n)


def pauli_traces(state) -> np.ndarray:
    """``Tr(state W_{x,z})`` for all ``4^n`` Pauli labels, flattened as ``x * d + z``."""
    if isinstance(state, PureState):
        vec, mat = state.amplitudes, None
    elif isinstance(state, DensityMatrix):
        vec, mat = None, state.matrix
    else:
        raise TypeError("expected PureState or DensityMatrix")
    d = state.dim
    n = qubit_count(d)
    j = np.arange(d)
    x = np.arange(d)
    flipped = j[None, :] ^ x[:, None]
    if vec is not None:
        a = vec[None, :] * vec.conj()[flipped]
    else:
        a = mat[j[None, :], flipped]
    t = _fwht_last(a, n)
    z = j
    return (t * (1j) ** np.bitwise_count(x[:, None] & z[None, :])).real.reshape(-1)


def pauli_char(state, k: PauliLabel) -> float:
    """Characteristic function ``Tr(state W_k) / sqrt(d)``."""
    d = state.dim
    n = qubit_count(d)
    if k.qubit_count != n:
        raise ValueError(f"label acts on {k.qubit_count} qubits, state on {n}")
    rho = state.density().matrix if isinstance(state, PureState) else state.matrix
    x, z = k.xz
    j = np.arange(d)
    signs = (-1.0) ** np.bitwise_count(j & z)
    val = (1j) ** int(np.bitwise_count(x & z)) * np.sum(signs * rho[j, j ^ x])
    if abs(val.imag) > 1e-9:
        raise ArithmeticError("Pauli expectation has an imaginary part")
    return float(val.real / math.sqrt(d))


@dataclass(frozen=True)
class CertificationRun:
    estimate: float  # square-root convention, clipped to [0, 1]
    estimate_raw: float  # unclipped estimator of the squared fidelity Tr(rho sigma)
    target_precision: float
    fail_prob_target: float
    settings_used: int
    shots_used: int


def _check_unit_interval(v: float, name: str) -> None:
    if not (0.0 < v < 1.0):
        raise ValueError(f"{name} must lie in (0, 1), got {v!r}")


@dataclass(frozen=True)
class _DfeTarget:
    support: np.ndarray
    probs: np.ndarray
    traces: np.ndarray


def _prepare_target(target: PureState) -> _DfeTarget:
    tr = pauli_traces(target)
    probs = tr**2 / target.dim
    keep = np.nonzero(probs >= PRUNE_BELOW)[0]
    p = probs[keep]
    return _DfeTarget(keep, p / p.sum(), tr[keep])


def dfe_estimate(
    target: PureState,
    actual: DensityMatrix,
    eta: float,
    delta: float,
    stream: RandomSource,
    shots: Union[int, str] = 1,
    _prepared: _DfeTarget | None = None,
    _actual_traces: np.ndarray | None = None,
) -> CertificationRun:
    d = target.dim
    _check_dims(d, actual.dim)
    if qubit_count(d) > MAX_QUBITS:
        raise ValueError(f"DFE simulation supports at most {MAX_QUBITS} qubits")
    _check_unit_interval(eta, "eta")
    _check_unit_interval(delta, "delta")
    prep = _prepared or _prepare_target(target)
    rho_tr = _actual_traces if _actual_traces is not None else pauli_traces(actual)
    ell = n_settings(eta, delta)
    rng = as_generator(stream)

    pick = rng.choice(prep.support.size, size=ell, p=prep.probs)
    sigma_tr = prep.traces[pick]
    expect = np.clip(rho_tr[prep.support[pick]], -1.0, 1.0)
    if shots == "auto":
        m = np.ceil(2.0 * math.log(2.0 / delta) / (sigma_tr**2 * ell * eta**2)).astype(np.int64)
        m = np.maximum(m, 1)
    elif isinstance(shots, (int, np.integer)) and shots >= 1:
        m = np.full(ell, int(shots), dtype=np.int64)
    else:
        raise ValueError(f"shots must be a positive integer or 'auto', got {shots!r}")
    plus = rng.binomial(m, (1.0 + expect) / 2.0)
    outcome_mean = (2.0 * plus - m) / m
    y = float(np.mean(outcome_mean / sigma_tr))
    return CertificationRun(
        estimate=math.sqrt(min(max(y, 0.0), 1.0)),
        estimate_raw=y,
        target_precision=eta,
        fail_prob_target=delta,
        settings_used=ell,
        shots_used=int(m.sum()),
    )


def dfe_runs(target: PureState, actual: DensityMatrix, eta: float, delta: float, runs: int, stream: RngStream, shots=1) -> list:
    """Independent DFE runs, run ``r`` drawing from ``stream.spawn(r)``."""
    prep = _prepare_target(target)
    rho_tr = pauli_traces(actual)
    return [
        dfe_estimate(target, actual, eta, delta, stream.spawn(r), shots, _prepared=prep, _actual_traces=rho_tr)
        for r in range(runs)
    ]


def exact_average_channel_fidelity(target: UnitaryOperator, actual: QuantumChannel) -> float:
    """Haar average of ``<psi|U^dag Lambda(psi) U|psi>``: ``(sum_k |Tr(U^dag K_k)|^2 + d) / (d(d+1))``."""
    _check_dims(target.dim, actual.dim_in)
    d = target.dim
    s = sum(abs(np.trace(target.matrix.conj().T @ k)) ** 2 for k in actual.kraus_ops)
    return float((s + d) / (d * (d + 1)))


def channel_fidelity_estimate(
    target: UnitaryOperator,
    actual: QuantumChannel,
    delta_prec: float,
    fail_prob: float,
    n_inputs: Union[int, str],
    stream: RandomSource,
) -> CertificationRun:
    _check_dims(target.dim, actual.dim_in)
    _check_dims(target.dim, actual.dim_out)
    _check_unit_interval(delta_prec, "delta_prec")
    _check_unit_interval(fail_prob, "fail_prob")
    calls = n_settings(delta_prec, fail_prob) if n_inputs == "auto" else int(n_inputs)
    if calls < 1:
        raise ValueError("n_inputs must be positive")
    d = target.dim
    rng = as_generator(stream)
    ops = np.stack([target.matrix.conj().T @ k for k in actual.kraus_ops])
    total = 0.0
    done = 0
    while done < calls:
        n = min(CHANNEL_CHUNK, calls - done)
        psi = haar_states(d, n, rng)
        amp = np.einsum("ni,kij,nj->nk", psi.conj(), ops, psi)
        total += float(np.sum(np.abs(amp) ** 2))
        done += n
    est = total / calls
    return CertificationRun(
        estimate=est,
        estimate_raw=est,
        target_precision=delta_prec,
        fail_prob_target=fail_prob,
        settings_used=calls,
        shots_used=calls,
    )


def rotated_state(psi: PureState, fidelity_value: float, rng: np.random.Generator) -> PureState:
    """Pure state at square-root fidelity ``fidelity_value`` from ``psi`` (random planar rotation)."""
    if not (0.0 <= fidelity_value <= 1.0):
        raise ValueError("fidelity must lie in [0, 1]")
    c = orthogonal_partner(psi.amplitudes, rng)
    theta = math.acos(fidelity_value)
    return PureState.normalized(math.cos(theta) * psi.amplitudes + math.sin(theta) * c)


@dataclass(frozen=True)
class GapReport:
    d: int
    skipped: bool
    fidelity_floor: float
    eta: float
    settings_used: int
    n_state_min: int
    runs: int
    honest_accept_rate: float
    floor_accept_rate: float
    below_floor: float
    below_reject_rate: float
    mean_shots: float


def certification_gap_experiment(
    d: int,
    mu: float,
    risk_cap: float,
    fail_prob: float,
    stream: RngStream,
    runs: int = 100,
    shots=1,
    below_offset: float = 0.05,
) -> GapReport:
    """Can DFE at the bound's precision tell an adversarial state at the fidelity floor apart?

    ``sigma = U|0>`` for Haar ``U``; the adversarial state sits at exactly
    the floor, a second one ``below_offset`` under it.  DFE runs at
    ``eta = (1 - floor) / 2`` and accepts when the estimate is ``>= 1 - eta``.
    """
    qubit_count(d)
    q = BoundQuery(d, mu, risk_cap, fail_prob)
    floor = fidelity_floor(q)
    n_min = n_state_min(q)
    if floor.vacuous:
        return GapReport(d, True, floor.raw, float("nan"), 0, n_min, 0, *(float("nan"),) * 5)
    eta = (1.0 - floor.raw) / 2.0
    u = haar_unitary(d, True, stream.named("target"))
    sigma = u.apply(PureState.basis(d, 0))
    rng = stream.named("adversary").generator()
    at_floor = rotated_state(sigma, floor.raw, rng)
    below = max(floor.raw - below_offset, 0.0)
    under = rotated_state(sigma, below, rng)

    results = {}
    shots_total = 0
    for name, state in (("honest", sigma), ("floor", at_floor), ("below", under)):
        rs = dfe_runs(sigma, state.density(), eta, fail_prob, runs, stream.named(name), shots)
        results[name] = np.array([r.estimate >= 1.0 - eta for r in rs])
        shots_total += sum(r.shots_used for r in rs)
    return GapReport(
        d=d,
        skipped=False,
        fidelity_floor=floor.raw,
        eta=eta,
        settings_used=n_settings(eta, fail_prob),
        n_state_min=n_min,
        runs=runs,
        honest_accept_rate=float(results["honest"].mean()),
        floor_accept_rate=float(results["floor"].mean()),
        below_floor=below,
        below_reject_rate=float(1.0 - results["below"].mean()),
        mean_shots=shots_total / (3 * runs),
    )
