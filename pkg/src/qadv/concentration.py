"""Empirical concentration of measure on SU(d) against the normal-Levy bound.

Expansions of arbitrary sets cannot be measured from samples, so this
module measures tails of Lipschitz statistics instead: if ``f`` is
``L``-Lipschitz, the sublevel set ``{f <= median}`` has measure >= 1/2 and
its ``eps``-expansion is contained in ``{f <= median + L eps}``; hence
``P(f > median + L eps) <= alpha(eps)``.

Statistics (both 1-Lipschitz for the unnormalized HS metric):

``re-overlap``  ``f(U) = Re <b|U|b>`` with ``b = |0>``
``re-trace``    ``f(U) = Re Tr(U) / sqrt(d)``

Under the normalized metric (HS / sqrt(d)) the Lipschitz constant of
either statistic becomes ``sqrt(d)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adversary import median_std_error
from .core import HS_METRICS
from .parallel import run_blocks
from .sampling import RngStream, haar_unitaries

STATISTICS = ("re-overlap", "re-trace")
MIN_SAMPLES = 1000
DEFAULT_EPS_GRID = tuple(np.round(np.linspace(0.1, 2.0, 20), 10))
CONCENTRATION_BLOCK = 1024


@dataclass(frozen=True)
class LevyParams:
    l1: float
    l2: float

    def __post_init__(self):
        if not (self.l1 > 0 and self.l2 > 0):
            raise ValueError("Levy constants must be positive")


SU_D_LEVY = LevyParams(np.sqrt(2.0), 0.25)


def levy_bound(eps: float, d: int, params: LevyParams = SU_D_LEVY) -> float:
    return float(params.l1 * np.exp(-params.l2 * eps**2 * d))


@dataclass(frozen=True)
class ConcentrationCurve:
    d: int
    statistic: str
    metric: str
    epsilons: np.ndarray
    tail_estimates: np.ndarray
    tail_std_errors: np.ndarray
    bound_values: np.ndarray
    median: float
    median_std_error: float
    n_samples: int

    def violations(self, n_se: float = 3.0) -> np.ndarray:
        """Grid indices where the empirical tail exceeds bound + n_se standard errors."""
        return np.nonzero(self.tail_estimates > self.bound_values + n_se * self.tail_std_errors)[0]


def _statistic(name: str, us: np.ndarray) -> np.ndarray:
    if name == "re-overlap":
        return us[:, 0, 0].real
    if name == "re-trace":
        return np.trace(us, axis1=1, axis2=2).real / np.sqrt(us.shape[1])
    raise ValueError(f"unknown statistic {name!r}; expected one of {STATISTICS}")


def lipschitz_constant(d: int, metric: str) -> float:
    if metric == "unnorm":
        return 1.0
    if metric == "norm":
        return float(np.sqrt(d))
    raise ValueError(f"unknown metric {metric!r}; expected one of {HS_METRICS}")


def sample_statistic(d: int, statistic: str, n_samples: int, stream: RngStream, workers: int = 1) -> np.ndarray:
    """Statistic values over Haar SU(d) draws, merged in block order."""
    if statistic not in STATISTICS:
        raise ValueError(f"unknown statistic {statistic!r}; expected one of {STATISTICS}")

    def block(rng, _i, n):
        return _statistic(statistic, haar_unitaries(d, n, True, rng))

    return np.concatenate(run_blocks(block, n_samples, stream, workers, CONCENTRATION_BLOCK))


def levy_tail_estimate(
    d: int,
    statistic: str,
    eps_grid,
    n_samples: int,
    stream: RngStream,
    metric: str = "unnorm",
    params: LevyParams = SU_D_LEVY,
    workers: int = 1,
) -> ConcentrationCurve:
    if n_samples < MIN_SAMPLES:
        raise ValueError(f"n_samples must be at least {MIN_SAMPLES}")
    eps = np.asarray(eps_grid, dtype=float)
    if eps.ndim != 1 or eps.size == 0 or np.any(eps < 0) or np.any(np.diff(eps) <= 0):
        raise ValueError("eps grid must be nonnegative and strictly increasing")
    lip = lipschitz_constant(d, metric)
    f = np.sort(sample_statistic(d, statistic, n_samples, stream, workers))
    m = float(np.median(f))
    # count of samples strictly above each cut, via the sorted sample
    above = n_samples - np.searchsorted(f, m + lip * eps, side="right")
    tails = above / n_samples
    return ConcentrationCurve(
        d=d,
        statistic=statistic,
        metric=metric,
        epsilons=eps,
        tail_estimates=tails,
        tail_std_errors=np.sqrt(tails * (1 - tails) / n_samples),
        bound_values=np.array([levy_bound(e, d, params) for e in eps]),
        median=m,
        median_std_error=median_std_error(f),
        n_samples=n_samples,
    )


def convention_comparison(d: int, statistic: str, eps_grid, n_samples: int, stream: RngStream, workers: int = 1) -> dict:
    """Run both HS conventions on the same sample stream; report bound violations per convention."""
    out = {}
    for metric in HS_METRICS:
        curve = levy_tail_estimate(d, statistic, eps_grid, n_samples, stream, metric=metric, workers=workers)
        out[metric] = {
            "violations": [float(curve.epsilons[i]) for i in curve.violations()],
            "max_excess": float(np.max(curve.tail_estimates - curve.bound_values)),
        }
    return out
