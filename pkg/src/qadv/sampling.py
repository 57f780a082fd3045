"""Haar-distributed random objects drawn from counter-based substreams.

Every sampler takes either an :class:`RngStream` (reproducible, addressable
by ``(master_seed, stream_index)``) or a ready ``numpy.random.Generator``.
Batch variants (``haar_unitaries``, ``haar_states``) return raw arrays and
are what the Monte Carlo drivers use.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import (
    MAX_MATRIX_DIM,
    DensityMatrix,
    NumericalFailure,
    PureState,
    QuantumChannel,
    UnitaryOperator,
    _check_dims,
)

MAX_STATE_DIM = 16384
_UINT64 = 2**64

PERTURBATION_MODES = ("haar-direction", "planar")
BISECTION_TOL = 1e-9
BISECTION_MAX_ITER = 60
DIRECTION_ATTEMPTS = 16


@dataclass(frozen=True)
class RngStream:
    """Addressable random stream.

    Identical ``(master_seed, namespace, stream_index)`` always produces the
    same sequence; distinct indices give statistically independent streams
    (``SeedSequence`` spawn keys feeding a Philox counter generator).
    """

    master_seed: int
    stream_index: int = 0
    namespace: tuple = ()

    def __post_init__(self):
        for v in (self.master_seed, self.stream_index, *self.namespace):
            if not (0 <= int(v) < _UINT64):
                raise ValueError(f"seed components must be 64-bit unsigned integers, got {v!r}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(*self.namespace, self.stream_index))
        return np.random.Generator(np.random.Philox(ss))

    def spawn(self, index: int) -> "RngStream":
        return RngStream(self.master_seed, index, (*self.namespace, self.stream_index))

    def named(self, name: str) -> "RngStream":
        return self.spawn(zlib.crc32(name.encode()))


RandomSource = Union[RngStream, np.random.Generator]


def as_generator(source: RandomSource) -> np.random.Generator:
    if isinstance(source, np.random.Generator):
        return source
    if isinstance(source, RngStream):
        return source.generator()
    raise TypeError(f"expected RngStream or numpy Generator, got {type(source).__name__}")


@dataclass(frozen=True)
class PerturbationSpec:
    magnitude_hs: float
    mode: str = "haar-direction"

    def __post_init__(self):
        if not np.isfinite(self.magnitude_hs) or self.magnitude_hs < 0:
            raise ValueError(f"perturbation magnitude must be a nonnegative real, got {self.magnitude_hs!r}")
        if self.mode not in PERTURBATION_MODES:
            raise ValueError(f"unknown perturbation mode {self.mode!r}")

    def check_dim(self, d: int) -> None:
        top = su_radius(d)
        if self.magnitude_hs > top + 1e-12:
            raise ValueError(f"magnitude {self.magnitude_hs} exceeds the largest SU({d}) distance from I, {top:.6g}")


def su_radius(d: int) -> float:
    """Largest ``hs_distance(V, I)`` over SU(d): ``2 sqrt(d)``, times ``cos(pi/(2d))`` for odd d (-I is not in SU(d))."""
    r = 2 * np.sqrt(d)
    return float(r if d % 2 == 0 else r * np.cos(np.pi / (2 * d)))


def _check_d(d: int, hi: int) -> None:
    if not (isinstance(d, (int, np.integer)) and 2 <= d <= hi):
        raise ValueError(f"dimension must be an integer in [2, {hi}], got {d!r}")


def ginibre(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def haar_unitaries(d: int, n: int, special: bool, source: RandomSource) -> np.ndarray:
    """``n`` Haar unitaries as an ``(n, d, d)`` array (QR of Ginibre, phase fixed)."""
    _check_d(d, MAX_MATRIX_DIM)
    rng = as_generator(source)
    q, r = np.linalg.qr(ginibre(rng, (n, d, d)))
    diag = np.diagonal(r, axis1=1, axis2=2)
    q = q * (diag / np.abs(diag))[:, None, :]
    if special:
        det = np.linalg.det(q)
        q = q * np.exp(-1j * np.angle(det) / d)[:, None, None]
    return q


def haar_unitary(d: int, special: bool, stream: RandomSource) -> UnitaryOperator:
    return UnitaryOperator(haar_unitaries(d, 1, special, stream)[0], special=special)


def haar_states(d: int, n: int, source: RandomSource) -> np.ndarray:
    """``n`` Haar-random pure states as rows of an ``(n, d)`` array."""
    _check_d(d, MAX_STATE_DIM)
    rng = as_generator(source)
    z = ginibre(rng, (n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def haar_state(d: int, stream: RandomSource) -> PureState:
    return PureState(haar_states(d, 1, stream)[0])


def random_density_matrix(d: int, rank: Optional[int], stream: RandomSource) -> DensityMatrix:
    """Induced-measure mixed state ``G G^dag / Tr`` with ``G`` a ``d x rank`` Ginibre matrix."""
    rng = as_generator(stream)
    g = ginibre(rng, (d, rank or d))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


def orthogonal_partner(b: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random unit vector orthogonal to ``b``."""
    for _ in range(100):
        c = ginibre(rng, b.shape[0])
        c = c - np.vdot(b, c) * b
        n = np.linalg.norm(c)
        if n > 1e-8:
            return c / n
    raise RuntimeError("failed to draw an orthogonal partner")


def planar_rotation(b: np.ndarray, c: np.ndarray, theta: float) -> np.ndarray:
    """Rotation by ``theta`` in span{b, c} (orthonormal), identity elsewhere; det = 1."""
    d = b.shape[0]
    pb, pc = np.outer(b, b.conj()), np.outer(c, c.conj())
    return (
        np.eye(d, dtype=complex)
        + (np.cos(theta) - 1) * (pb + pc)
        + np.sin(theta) * (np.outer(c, b.conj()) - np.outer(b, c.conj()))
    )


def angle_for_infidelity(chi):
    """Angle ``a`` with ``1 - cos(a) = chi``, as ``2 arcsin(sqrt(chi/2))`` (stable near 0)."""
    return 2.0 * np.arcsin(np.sqrt(np.clip(chi, 0.0, 2.0) / 2.0))


def infidelity_of_angle(a):
    """``1 - cos(a)`` as ``2 sin^2(a/2)``."""
    return 2.0 * np.sin(0.5 * a) ** 2


def planar_angle_for_hs(magnitude_hs: float) -> float:
    """Angle solving ``4(1 - cos theta) = eps^2``."""
    if magnitude_hs > 2 * np.sqrt(2) + 1e-12:
        raise ValueError(f"planar rotations reach HS distance at most 2*sqrt(2), got {magnitude_hs}")
    return float(angle_for_infidelity(magnitude_hs**2 / 4.0))


def _random_traceless_generator(d: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    g = ginibre(rng, (d, d))
    h = 0.5 * (g + g.conj().T)
    h -= np.trace(h).real / d * np.eye(d)
    lam, w = np.linalg.eigh(h)
    lam = lam / np.sqrt(np.sum(lam**2))
    return lam, w


def _hs_along(lam: np.ndarray, s: float) -> float:
    return float(np.sqrt(np.sum(4 * np.sin(0.5 * s * lam) ** 2)))


def perturbation_unitary(
    d: int,
    spec: PerturbationSpec,
    b: Optional[PureState],
    stream: RandomSource,
) -> UnitaryOperator:
    """Special unitary ``V`` with ``hs_distance(V, I) == spec.magnitude_hs``."""
    _check_d(d, MAX_MATRIX_DIM)
    spec.check_dim(d)
    rng = as_generator(stream)
    eps = spec.magnitude_hs
    if eps == 0:
        return UnitaryOperator.identity(d)

    if spec.mode == "planar":
        if b is None:
            raise ValueError("planar perturbations require the anchor state b")
        _check_dims(d, b.dim)
        theta = planar_angle_for_hs(eps)
        c = orthogonal_partner(b.amplitudes, rng)
        v = planar_rotation(b.amplitudes, c, theta)
        return UnitaryOperator(v, special=True)

    for _ in range(DIRECTION_ATTEMPTS):
        lam, w = _random_traceless_generator(d, rng)
        s = _scale_for_distance(lam, eps, 64 * np.pi / np.max(np.abs(lam)))
        if s is not None:
            return UnitaryOperator((w * np.exp(1j * s * lam)) @ w.conj().T, special=True)
    # near the radius: a Haar-rotated spectrum whose line passes through the farthest point
    lam, s_far = _extremal_spectrum(d)
    w = haar_unitaries(d, 1, False, rng)[0]
    s = _scale_for_distance(lam, eps, s_far)
    if s is None:
        raise NumericalFailure(f"magnitude {eps} not reached")
    return UnitaryOperator((w * np.exp(1j * s * lam)) @ w.conj().T, special=True)


def _extremal_spectrum(d: int) -> tuple[np.ndarray, float]:
    """Traceless spectrum and scale at which ``exp(i s diag(lam))`` is at distance :func:`su_radius` from I."""
    if d % 2 == 0:
        return np.repeat([1.0, -1.0], d // 2), np.pi
    lam = np.ones(d)
    lam[-1] = -(d - 1)
    return lam, np.pi * (d - 1) / d


def _scale_for_distance(lam: np.ndarray, eps: float, s_max: float) -> Optional[float]:
    """Smallest ``s <= s_max`` with ``HS(exp(i s H), I) = eps`` by bisection, or None."""
    # f(s) is increasing while s*max|lam| <= pi
    s_mono = min(np.pi / np.max(np.abs(lam)), s_max)
    lo, hi = 0.0, s_mono
    if _hs_along(lam, s_mono) < eps:
        grid = np.linspace(s_mono, s_max, 4096)
        vals = np.array([_hs_along(lam, x) for x in grid])
        hit = np.nonzero(vals >= eps)[0]
        if hit.size == 0:
            return None
        lo, hi = grid[hit[0] - 1], grid[hit[0]]
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        val = _hs_along(lam, mid)
        if abs(val - eps) <= 1e-3 * BISECTION_TOL:
            return mid
        if val < eps:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def random_channel(d: int, kraus_rank: int, stream: RandomSource) -> QuantumChannel:
    """Random CPTP map from a truncated Haar unitary on ``d * kraus_rank`` dimensions."""
    _check_d(d, MAX_MATRIX_DIM)
    if not (1 <= kraus_rank <= d * d):
        raise ValueError(f"kraus_rank must lie in [1, d^2], got {kraus_rank}")
    big = haar_unitaries(d * kraus_rank, 1, False, stream)[0]
    iso = big[:, :d]
    return QuantumChannel(tuple(iso[k * d:(k + 1) * d, :] for k in range(kraus_rank)))
