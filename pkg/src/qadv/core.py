"""Dense representations of states, unitaries, channels and observables.

All objects are immutable after construction and validate their physical
invariants eagerly.  The metrics here (fidelity, trace distance,
Hilbert-Schmidt distance) are consumed by every other module.

Fidelity uses the square-root convention ``F(psi, phi) = |<psi|phi>|``;
:func:`fidelity_squared` gives ``Tr(rho sigma)``-style values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

STATE_TOL = 1e-10
UNITARY_TOL = 1e-10
DET_TOL = 1e-8
CHANNEL_TOL = 1e-9
MAX_MATRIX_DIM = 1024

HS_METRICS = ("unnorm", "norm")


class DimensionMismatch(ValueError):
    """Raised when two objects live on Hilbert spaces of different size."""


class InvalidQuantumObject(ValueError):
    """Raised when an input violates a physical invariant (norm, trace, PSD)."""


class NumericalFailure(RuntimeError):
    """Raised when a computation produces non-finite or inconsistent numbers."""


def _as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=complex)
    if v.ndim != 1 or v.size == 0:
        raise InvalidQuantumObject(f"expected a non-empty 1-d amplitude vector, got shape {v.shape}")
    return v


def _as_square(x) -> np.ndarray:
    m = np.asarray(x, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise InvalidQuantumObject(f"expected a square matrix, got shape {m.shape}")
    return m


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        v = _as_vector(self.amplitudes)
        norm = np.linalg.norm(v)
        if not np.isfinite(norm) or abs(norm - 1.0) > STATE_TOL:
            raise InvalidQuantumObject(f"state norm {norm!r} differs from 1")
        object.__setattr__(self, "amplitudes", _freeze(v))

    @classmethod
    def normalized(cls, amplitudes) -> "PureState":
        v = _as_vector(amplitudes)
        norm = np.linalg.norm(v)
        if norm == 0 or not np.isfinite(norm):
            raise InvalidQuantumObject("cannot normalize a zero or non-finite vector")
        return cls(v / norm)

    @classmethod
    def basis(cls, d: int, index: int = 0) -> "PureState":
        v = np.zeros(d, dtype=complex)
        v[index] = 1.0
        return cls(v)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def __eq__(self, other):
        return isinstance(other, PureState) and np.array_equal(self.amplitudes, other.amplitudes)

    __hash__ = None


@dataclass(frozen=True)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = _as_square(self.matrix)
        if np.max(np.abs(m - m.conj().T)) > STATE_TOL:
            raise InvalidQuantumObject("density matrix is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > STATE_TOL:
            raise InvalidQuantumObject(f"density matrix trace {tr!r} differs from 1")
        m = 0.5 * (m + m.conj().T)
        if np.linalg.eigvalsh(m).min() < -STATE_TOL:
            raise InvalidQuantumObject("density matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", _freeze(m))

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityMatrix":
        return cls(np.eye(d, dtype=complex) / d)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def __eq__(self, other):
        return isinstance(other, DensityMatrix) and np.array_equal(self.matrix, other.matrix)

    __hash__ = None


@dataclass(frozen=True)
class UnitaryOperator:
    matrix: np.ndarray
    special: bool = False

    def __post_init__(self):
        u = _as_square(self.matrix)
        d = u.shape[0]
        err = np.max(np.abs(u.conj().T @ u - np.eye(d)))
        if err > UNITARY_TOL * d:
            raise InvalidQuantumObject(f"matrix is not unitary (max deviation {err:.3g})")
        if self.special:
            det = np.linalg.det(u)
            if abs(det - 1.0) > DET_TOL:
                raise InvalidQuantumObject(f"special unitary has det {det!r}")
        object.__setattr__(self, "matrix", _freeze(u))

    @classmethod
    def identity(cls, d: int) -> "UnitaryOperator":
        return cls(np.eye(d, dtype=complex), special=True)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, psi: PureState) -> PureState:
        _check_dims(self.dim, psi.dim)
        return PureState.normalized(self.matrix @ psi.amplitudes)

    def __matmul__(self, other: "UnitaryOperator") -> "UnitaryOperator":
        _check_dims(self.dim, other.dim)
        return UnitaryOperator(self.matrix @ other.matrix, special=self.special and other.special)

    def __eq__(self, other):
        return isinstance(other, UnitaryOperator) and np.array_equal(self.matrix, other.matrix)

    __hash__ = None


@dataclass(frozen=True)
class QuantumChannel:
    """CPTP map in Kraus form; each Kraus operator is ``dim_out x dim_in``."""

    kraus_ops: tuple = field(default=())

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise InvalidQuantumObject("a channel needs at least one Kraus operator")
        shape = ops[0].shape
        if any(k.ndim != 2 or k.shape != shape for k in ops):
            raise InvalidQuantumObject("Kraus operators must share one 2-d shape")
        d_in = shape[1]
        s = sum(k.conj().T @ k for k in ops)
        err = np.max(np.abs(s - np.eye(d_in)))
        if err > CHANNEL_TOL * d_in:
            raise InvalidQuantumObject(f"channel is not trace preserving (deviation {err:.3g})")
        object.__setattr__(self, "kraus_ops", tuple(_freeze(k) for k in ops))

    @classmethod
    def identity(cls, d: int) -> "QuantumChannel":
        return cls((np.eye(d, dtype=complex),))

    @classmethod
    def from_unitary(cls, u: Union[UnitaryOperator, np.ndarray]) -> "QuantumChannel":
        return cls((_matrix_of(u),))

    @classmethod
    def fully_depolarizing(cls, d: int) -> "QuantumChannel":
        """Kraus set ``{X^a Z^b / d}`` over the d^2 generalized Paulis; maps every state to I/d."""
        omega = np.exp(2j * np.pi / d)
        shift = np.roll(np.eye(d), 1, axis=0)
        clock = np.diag(omega ** np.arange(d))
        ops = []
        for a in range(d):
            for b in range(d):
                ops.append(np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b) / d)
        return cls(tuple(ops))

    @property
    def dim_in(self) -> int:
        return self.kraus_ops[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.kraus_ops[0].shape[0]

    @property
    def kraus_array(self) -> np.ndarray:
        return np.stack(self.kraus_ops)

    def adjoint_apply(self, op: np.ndarray) -> np.ndarray:
        """Heisenberg-picture action ``sum_k K^dag op K``."""
        k = self.kraus_array
        return np.sum(k.conj().transpose(0, 2, 1) @ op @ k, axis=0)


@dataclass(frozen=True)
class Observable:
    matrix: np.ndarray

    def __post_init__(self):
        m = _as_square(self.matrix)
        if np.max(np.abs(m - m.conj().T)) > STATE_TOL:
            raise InvalidQuantumObject("observable is not Hermitian")
        object.__setattr__(self, "matrix", _freeze(0.5 * (m + m.conj().T)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace_value(self) -> float:
        return float(np.trace(self.matrix).real)

    def is_psd(self, tol: float = STATE_TOL) -> bool:
        return bool(np.linalg.eigvalsh(self.matrix).min() >= -tol)


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise DimensionMismatch(f"dimension mismatch: {a} vs {b}")


def _matrix_of(u) -> np.ndarray:
    return u.matrix if isinstance(u, (UnitaryOperator, DensityMatrix, Observable)) else _as_square(u)


def _density_of(x) -> np.ndarray:
    if isinstance(x, PureState):
        return np.outer(x.amplitudes, x.amplitudes.conj())
    if isinstance(x, DensityMatrix):
        return x.matrix
    raise TypeError(f"expected PureState or DensityMatrix, got {type(x).__name__}")


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity(a, b) -> float:
    """Square-root fidelity between two states (pure or mixed)."""
    _check_dims(a.dim, b.dim)
    if isinstance(a, PureState) and isinstance(b, PureState):
        f = abs(np.vdot(a.amplitudes, b.amplitudes))
    elif isinstance(a, PureState) or isinstance(b, PureState):
        psi, rho = (a, b) if isinstance(a, PureState) else (b, a)
        val = np.vdot(psi.amplitudes, rho.matrix @ psi.amplitudes).real
        f = np.sqrt(max(val, 0.0))
    else:
        sa = _psd_sqrt(a.matrix)
        m = sa @ b.matrix @ sa
        w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        f = np.sum(np.sqrt(np.clip(w, 0.0, None)))
    if not np.isfinite(f):
        raise NumericalFailure("non-finite fidelity")
    return float(min(f, 1.0))


def fidelity_squared(a, b) -> float:
    return fidelity(a, b) ** 2


def trace_distance(a, b) -> float:
    _check_dims(a.dim, b.dim)
    diff = _density_of(a) - _density_of(b)
    w = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(min(0.5 * np.sum(np.abs(w)), 1.0))


def hs_distance(u1, u2, metric: str = "unnorm") -> float:
    """Hilbert-Schmidt distance ``sqrt(Tr((u1-u2)^dag (u1-u2)))``.

    ``metric="norm"`` divides by ``sqrt(d)``.
    """
    m1, m2 = _matrix_of(u1), _matrix_of(u2)
    _check_dims(m1.shape[0], m2.shape[0])
    d = m1.shape[0]
    # direct norm of the difference; 2d - 2 Re Tr cancels badly near 0
    dist = float(np.linalg.norm(m1 - m2))
    if metric == "norm":
        return dist / np.sqrt(d)
    if metric != "unnorm":
        raise ValueError(f"unknown metric {metric!r}; expected one of {HS_METRICS}")
    return dist


def apply_channel(ch: QuantumChannel, rho) -> DensityMatrix:
    m = _density_of(rho)
    _check_dims(ch.dim_in, m.shape[0])
    k = ch.kraus_array
    out = np.sum(k @ m @ k.conj().transpose(0, 2, 1), axis=0)
    return DensityMatrix(out)


def expectation(obs: Observable, rho) -> float:
    m = _density_of(rho)
    _check_dims(obs.dim, m.shape[0])
    val = np.sum(obs.matrix * m.T)
    if abs(val.imag) > 1e-9:
        raise NumericalFailure(f"expectation has imaginary residue {val.imag:.3g}")
    return float(val.real)


def hs_fidelity_gap(u1, u2, b: PureState) -> tuple[float, float, float]:
    """Return ``(H^2, 2(1-F), 2d(1-F))`` for ``F = |<u1 b|u2 b>|``.

    ``H^2 >= 2(1-F)`` always holds; ``H^2 >= 2d(1-F)`` is not guaranteed
    (planar rotations give ``H^2 = 4(1-F)`` in every dimension).
    """
    m1, m2 = _matrix_of(u1), _matrix_of(u2)
    _check_dims(m1.shape[0], m2.shape[0])
    _check_dims(m1.shape[0], b.dim)
    d = b.dim
    h_sq = np.sum(np.abs(m1 - m2) ** 2)
    f = min(abs(np.vdot(m1 @ b.amplitudes, m2 @ b.amplitudes)), 1.0)
    return float(h_sq), float(2 * (1 - f)), float(2 * d * (1 - f))


def hs_fidelity_gap_batch(u1: np.ndarray, u2: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Vectorized :func:`hs_fidelity_gap` over stacks ``(n, d, d)``; returns ``(n, 3)``."""
    d = b.shape[0]
    h_sq = np.sum(np.abs(u1 - u2) ** 2, axis=(1, 2))
    f = np.minimum(np.abs(np.einsum("ni,ni->n", (u1 @ b).conj(), u2 @ b)), 1.0)
    return np.column_stack([h_sq, 2 * (1 - f), 2 * d * (1 - f)])


def kron_all(ops: Sequence[np.ndarray]) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out
