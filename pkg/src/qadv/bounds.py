"""Closed-form robustness and certification-cost bounds.

Everything derives from one logarithm, ``L = ln(2 / (mu (1 - R)))``, where
``mu`` is the risk and ``R`` the tolerated adversarial risk:

* maximal HS perturbation ``eps^2 < (4/d) L``;
* fidelity floor ``1 - (2/d^2) L`` and precision ``eta < g/d^2`` with ``g = 2L``;
* copies / device calls ``>= d^4 / (g^2 Delta)``;
* output stability ``|v(sigma) - v(rho)| < 2 sqrt(2) Tr(O) sqrt(chi)``.

The ``validated`` variant replaces the state-level conversion with the
dimension-free relation ``H^2 >= 2(1 - F)``, which yields the floor
``1 - eps^2_max / 2``, precision ``g/d`` and ``ceil(d^2 / (g^2 Delta))``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

VARIANTS = ("paper", "validated")


class BoundDomainError(ValueError):
    pass


@dataclass(frozen=True)
class BoundQuery:
    """``d``, risk ``mu``, tolerated adversarial risk ``risk_cap`` and failure probability ``fail_prob``."""

    d: int
    mu: float
    risk_cap: float
    fail_prob: float

    def __post_init__(self):
        if not (isinstance(self.d, int) and self.d >= 1):
            raise BoundDomainError(f"d must be a positive integer, got {self.d!r}")
        if self.mu == 0:
            raise BoundDomainError("the bounds require a strictly positive misclassification probability mu > 0")
        if not (0 < self.mu <= 1):
            raise BoundDomainError(f"mu must lie in (0, 1], got {self.mu!r}")
        if not (0 <= self.risk_cap < 1):
            raise BoundDomainError(f"risk cap must lie in [0, 1), got {self.risk_cap!r}")
        if not (0 < self.fail_prob < 1):
            raise BoundDomainError(f"failure probability must lie in (0, 1), got {self.fail_prob!r}")

    @property
    def log_term(self) -> float:
        return math.log(2.0 / (self.mu * (1.0 - self.risk_cap)))


def g_value(q: BoundQuery) -> float:
    return 2.0 * q.log_term


def admissible_epsilon_sq(d: int, mu: float, risk_cap: float) -> float:
    """``(4/d) ln(2 / (mu (1 - R)))`` without building a full query."""
    return 4.0 / d * math.log(2.0 / (mu * (1.0 - risk_cap)))


def epsilon_sq_max(q: BoundQuery) -> float:
    return 4.0 / q.d * q.log_term


@dataclass(frozen=True)
class FidelityFloor:
    raw: float
    clamped: float
    vacuous: bool


def fidelity_floor(q: BoundQuery, variant: str = "paper") -> FidelityFloor:
    if variant == "paper":
        raw = 1.0 - 2.0 / q.d**2 * q.log_term
    elif variant == "validated":
        raw = 1.0 - epsilon_sq_max(q) / 2.0
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return FidelityFloor(raw, max(0.0, raw), raw <= 0.0)


def precision_max(q: BoundQuery, variant: str = "paper") -> float:
    """Largest admissible estimation error, ``1 - floor``: ``g/d^2`` (paper) or ``g/d`` (validated)."""
    if variant == "paper":
        return g_value(q) / q.d**2
    if variant == "validated":
        return g_value(q) / q.d
    raise ValueError(f"unknown variant {variant!r}")


def n_state_raw(q: BoundQuery, variant: str = "paper") -> float:
    """Pre-ceiling copy count ``1 / (Delta eta^2)``."""
    return 1.0 / (q.fail_prob * precision_max(q, variant) ** 2)


def _ceil_count(x: float) -> int:
    n = math.ceil(x)
    return max(int(n), 1)


def n_state_min(q: BoundQuery, variant: str = "paper") -> int:
    return _ceil_count(n_state_raw(q, variant))


def n_device_min(q: BoundQuery, variant: str = "paper") -> int:
    """Same form as :func:`n_state_min`, read with ``(mu, R', Delta')``."""
    return n_state_min(q, variant)


def n_settings(precision: float, fail_prob: float) -> int:
    """``ceil(1 / (fail_prob * precision^2))``."""
    if not (0 < precision and 0 < fail_prob < 1):
        raise ValueError("precision must be positive and fail_prob in (0, 1)")
    return _ceil_count(1.0 / (fail_prob * precision**2))


def uhlmann_output_bound(trace_O: float, chi: float) -> float:
    return 2.0 * math.sqrt(2.0) * trace_O * math.sqrt(chi)


@dataclass(frozen=True)
class BoundReport:
    variant: str
    d: int
    mu: float
    risk_cap: float
    fail_prob: float
    epsilon_sq_max: float
    fidelity_floor_raw: float
    fidelity_floor_clamped: float
    fidelity_floor_vacuous: bool
    g_value: float
    n_state_min: int
    n_device_min: int
    precision_eta_max: float
    precision_delta_max: float

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(q: BoundQuery, variant: str = "paper") -> BoundReport:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    floor = fidelity_floor(q, variant)
    eta = precision_max(q, variant)
    return BoundReport(
        variant=variant,
        d=q.d,
        mu=q.mu,
        risk_cap=q.risk_cap,
        fail_prob=q.fail_prob,
        epsilon_sq_max=epsilon_sq_max(q),
        fidelity_floor_raw=floor.raw,
        fidelity_floor_clamped=floor.clamped,
        fidelity_floor_vacuous=floor.vacuous,
        g_value=g_value(q),
        n_state_min=n_state_min(q, variant),
        n_device_min=n_device_min(q, variant),
        precision_eta_max=eta,
        precision_delta_max=eta,
    )
