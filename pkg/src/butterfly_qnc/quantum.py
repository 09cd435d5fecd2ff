"""Dense state-vector and density-matrix algebra for registers of up to 8 qubits.

Conventions used throughout the package:

* qubit 0 is the least-significant bit of the basis index, so ``tensor(a, b)``
  places ``a`` on the low qubits;
* polarization ``|H>`` is basis vector 0 and ``|V>`` is basis vector 1.

All value types are immutable: their arrays are flagged read-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

MAX_QUBITS = 8
ATOL = 1e-9

SeedLike = Union[int, np.random.Generator, None]


class QuantumError(ValueError):
    """Invalid quantum object or operation."""


class CapacityError(QuantumError):
    """Register would exceed ``MAX_QUBITS``."""


def _readonly(data, shape=None) -> np.ndarray:
    arr = np.array(data, dtype=complex)
    if shape is not None:
        arr = arr.reshape(shape)
    arr.setflags(write=False)
    return arr


def _qubits_for_dim(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise QuantumError(f"dimension {dim} is not a power of two >= 2")
    return n


def _check_register(n: int) -> None:
    if n > MAX_QUBITS:
        raise CapacityError(f"{n} qubits exceeds the {MAX_QUBITS}-qubit limit")


def as_rng(seed: SeedLike) -> np.random.Generator:
    """Return a Generator, passing existing generators through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized state vector of an n-qubit register."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _readonly(self.amplitudes).reshape(-1)
        n = _qubits_for_dim(amps.size)
        _check_register(n)
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > ATOL:
            raise QuantumError(f"state norm is {norm:.12g}, expected 1")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def _trusted(cls, amplitudes: np.ndarray) -> "PureState":
        obj = object.__new__(cls)
        object.__setattr__(obj, "amplitudes", _readonly(amplitudes))
        return obj

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix._trusted(np.outer(self.amplitudes, self.amplitudes.conj()))

    def __repr__(self) -> str:
        return f"PureState(n_qubits={self.n_qubits}, amplitudes={np.round(self.amplitudes, 6)})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix on n qubits."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = _readonly(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise QuantumError(f"density matrix must be square, got shape {mat.shape}")
        n = _qubits_for_dim(mat.shape[0])
        _check_register(n)
        if not np.allclose(mat, mat.conj().T, atol=ATOL, rtol=0):
            raise QuantumError("density matrix is not Hermitian")
        tr = np.trace(mat).real
        if abs(tr - 1.0) > ATOL:
            raise QuantumError(f"density matrix trace is {tr:.12g}, expected 1")
        if np.linalg.eigvalsh(mat).min() < -ATOL:
            raise QuantumError("density matrix is not positive semidefinite")
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def _trusted(cls, matrix: np.ndarray) -> "DensityMatrix":
        obj = object.__new__(cls)
        object.__setattr__(obj, "matrix", _readonly(matrix))
        return obj

    @classmethod
    def maximally_mixed(cls, n_qubits: int) -> "DensityMatrix":
        _check_register(n_qubits)
        dim = 1 << n_qubits
        return cls._trusted(np.eye(dim) / dim)

    @property
    def n_qubits(self) -> int:
        return self.matrix.shape[0].bit_length() - 1

    def purity(self) -> float:
        return float(np.real(np.einsum("ij,ji->", self.matrix, self.matrix)))

    def allclose(self, other: "DensityMatrix", atol: float = ATOL) -> bool:
        return self.matrix.shape == other.matrix.shape and np.allclose(
            self.matrix, other.matrix, atol=atol, rtol=0
        )

    def __repr__(self) -> str:
        return f"DensityMatrix(n_qubits={self.n_qubits})"


@dataclass(frozen=True, eq=False)
class Operator:
    """Square operator on n qubits, either a unitary or an observable.

    ``kind`` is checked against the matrix on construction: unitaries must
    satisfy U^dagger U = I and observables must be Hermitian.
    """

    matrix: np.ndarray
    kind: str = "unitary"

    def __post_init__(self):
        mat = _readonly(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise QuantumError(f"operator must be square, got shape {mat.shape}")
        _qubits_for_dim(mat.shape[0])
        if self.kind == "unitary":
            if not np.allclose(mat.conj().T @ mat, np.eye(mat.shape[0]), atol=ATOL, rtol=0):
                raise QuantumError("operator is not unitary")
        elif self.kind == "observable":
            if not np.allclose(mat, mat.conj().T, atol=ATOL, rtol=0):
                raise QuantumError("observable is not Hermitian")
        else:
            raise QuantumError(f"unknown operator kind {self.kind!r}")
        object.__setattr__(self, "matrix", mat)

    @property
    def n_qubits(self) -> int:
        return self.matrix.shape[0].bit_length() - 1

    def is_hermitian(self) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, atol=ATOL, rtol=0))

    def __matmul__(self, other: "Operator") -> "Operator":
        return Operator(self.matrix @ other.matrix, "unitary")


_SQRT2 = np.sqrt(2.0)

I2 = Operator(np.eye(2))
X = Operator([[0, 1], [1, 0]])
Y = Operator([[0, -1j], [1j, 0]])
Z = Operator([[1, 0], [0, -1]])
HADAMARD = Operator(np.array([[1, 1], [1, -1]]) / _SQRT2)

# Six polarization states; L/R carry +i/-i on |V>.
_LABELED = {
    "H": [1, 0],
    "V": [0, 1],
    "+": [1 / _SQRT2, 1 / _SQRT2],
    "-": [1 / _SQRT2, -1 / _SQRT2],
    "L": [1 / _SQRT2, 1j / _SQRT2],
    "R": [1 / _SQRT2, -1j / _SQRT2],
}
LABELS = tuple(_LABELED)


@lru_cache(maxsize=None)
def single_qubit_state(label: str) -> PureState:
    """Return one of the polarization states H, V, +, -, L, R."""
    try:
        return PureState(_LABELED[label])
    except KeyError:
        raise QuantumError(f"unknown state label {label!r}; expected one of {LABELS}") from None


def orthogonal_state(state: PureState) -> PureState:
    """Return the single-qubit state orthogonal to ``state`` (phase convention: (-b*, a*))."""
    if state.n_qubits != 1:
        raise QuantumError("orthogonal_state is defined for single qubits only")
    a, b = state.amplitudes
    return PureState._trusted(np.array([-np.conj(b), np.conj(a)]))


def projector(state: PureState) -> Operator:
    amps = state.amplitudes
    return Operator(np.outer(amps, amps.conj()), "observable")


def tensor(a, b):
    """Kronecker product with ``a`` on the lower qubit indices."""
    if type(a) is not type(b):
        raise QuantumError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")
    _check_register(a.n_qubits + b.n_qubits)
    if isinstance(a, PureState):
        return PureState._trusted(np.kron(b.amplitudes, a.amplitudes))
    if isinstance(a, DensityMatrix):
        return DensityMatrix._trusted(np.kron(b.matrix, a.matrix))
    if isinstance(a, Operator):
        mat = np.kron(b.matrix, a.matrix)
        if a.kind == b.kind:
            return Operator(mat, a.kind)
        # mixed kinds: keep whichever property the product actually has
        herm = np.allclose(mat, mat.conj().T, atol=ATOL, rtol=0)
        return Operator(mat, "observable" if herm else "unitary")
    raise QuantumError(f"cannot tensor objects of type {type(a).__name__}")


def tensor_all(*items):
    out = items[0]
    for item in items[1:]:
        out = tensor(out, item)
    return out


def _check_targets(targets: Sequence[int], n: int) -> list[int]:
    targets = [int(t) for t in targets]
    if not targets:
        raise QuantumError("target list is empty")
    if len(set(targets)) != len(targets):
        raise QuantumError(f"duplicate target qubits in {targets}")
    for t in targets:
        if not 0 <= t < n:
            raise QuantumError(f"qubit index {t} out of range for {n} qubits")
    return targets


def _contract(t: np.ndarray, mat: np.ndarray, targets: Sequence[int], n: int, offset: int = 0) -> np.ndarray:
    # t has one length-2 axis per qubit; qubit q lives on axis offset + n - 1 - q.
    k = len(targets)
    m = mat.reshape((2,) * (2 * k))
    axes = [offset + n - 1 - q for q in reversed(targets)]
    out = np.tensordot(m, t, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


def _apply_single(state, mat: np.ndarray, q: int) -> np.ndarray:
    # basis index = high * 2^(q+1) + bit * 2^q + low
    low = 1 << q
    if isinstance(state, PureState):
        v = state.amplitudes.reshape(-1, 2, low)
        return np.matmul(mat, v).reshape(-1)
    dim = state.matrix.shape[0]
    rows = np.matmul(mat, state.matrix.reshape(-1, 2, low * dim))
    cols = np.matmul(mat.conj(), rows.reshape(-1, 2, low))
    return cols.reshape(dim, dim)


def _apply_matrix(state, mat: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    n = state.n_qubits
    if len(targets) == n and all(q == i for i, q in enumerate(targets)):
        if isinstance(state, PureState):
            return mat @ state.amplitudes
        return mat @ state.matrix @ mat.conj().T
    if len(targets) == 1:
        return _apply_single(state, mat, targets[0])
    if isinstance(state, PureState):
        t = state.amplitudes.reshape((2,) * n)
        return _contract(t, mat, targets, n).reshape(-1)
    t = state.matrix.reshape((2,) * (2 * n))
    t = _contract(t, mat, targets, n, 0)
    t = _contract(t, mat.conj(), targets, n, n)
    dim = 1 << n
    return t.reshape(dim, dim)


def apply_unitary(state, u: Operator, targets: Sequence[int]):
    """Apply ``u`` to the ordered ``targets`` (u's qubit j acts on targets[j]).

    Density matrices are conjugated, rho -> U rho U^dagger.
    """
    targets = _check_targets(targets, state.n_qubits)
    if u.n_qubits != len(targets):
        raise QuantumError(f"{u.n_qubits}-qubit operator given {len(targets)} targets")
    out = _apply_matrix(state, u.matrix, targets)
    if isinstance(state, PureState):
        return PureState._trusted(out)
    return DensityMatrix._trusted(out)


def partial_trace(rho, keep: Sequence[int]) -> DensityMatrix:
    """Trace out every qubit not in ``keep``; result qubit j is ``keep[j]``."""
    if isinstance(rho, PureState):
        rho = rho.to_density()
    n = rho.n_qubits
    keep = _check_targets(keep, n)
    traced = [q for q in range(n) if q not in keep]
    row_keep = [n - 1 - q for q in reversed(keep)]
    row_traced = [n - 1 - q for q in traced]
    perm = row_keep + row_traced + [n + a for a in row_keep] + [n + a for a in row_traced]
    dk, dt = 1 << len(keep), 1 << len(traced)
    t = rho.matrix.reshape((2,) * (2 * n)).transpose(perm).reshape(dk, dt, dk, dt)
    return DensityMatrix._trusted(np.einsum("ajbj->ab", t))


@lru_cache(maxsize=64)
def _check_complete(projectors: tuple[Operator, ...]) -> None:
    # cached per projector tuple; Operators hash by identity and are immutable
    mats = [p.matrix for p in projectors]
    dim = mats[0].shape[0]
    if any(m.shape != (dim, dim) for m in mats):
        raise QuantumError("projectors have mismatched dimensions")
    if not np.allclose(sum(mats), np.eye(dim), atol=ATOL, rtol=0):
        raise QuantumError("projectors do not sum to the identity")
    for i, a in enumerate(mats):
        for b in mats[i + 1:]:
            if not np.allclose(a @ b, 0, atol=ATOL):
                raise QuantumError("projectors are not mutually orthogonal")


def born_probabilities(state, projectors: Sequence[Operator], targets: Sequence[int] | None = None) -> np.ndarray:
    """Born-rule probabilities of a complete projective measurement."""
    _check_complete(tuple(projectors))
    mats = [p.matrix for p in projectors]
    if targets is None:
        targets = list(range(state.n_qubits))
    targets = _check_targets(targets, state.n_qubits)
    if mats[0].shape[0] != 1 << len(targets):
        raise QuantumError("projector dimension does not match the target count")
    if isinstance(state, PureState):
        outs = [_apply_matrix(state, m, targets) for m in mats]
        probs = np.array([np.vdot(o, o).real for o in outs])
    else:
        reduced = partial_trace(state, targets).matrix
        probs = np.array([np.einsum("ij,ji->", m, reduced).real for m in mats])
    return np.clip(probs, 0.0, 1.0)


def projective_measure(
    state,
    projectors: Sequence[Operator],
    rng: SeedLike = None,
    *,
    targets: Sequence[int] | None = None,
    outcome: int | None = None,
):
    """Measure ``state`` with a complete set of orthogonal projectors.

    Args:
        state: PureState or DensityMatrix.
        projectors: complete, mutually orthogonal projectors. They act on
            ``targets`` (default: the whole register).
        rng: seed or Generator used to sample the outcome.
        targets: ordered qubits the projectors act on.
        outcome: if given, post-select this outcome instead of sampling.

    Returns:
        ``(index, post_state, probability)``; the post-state is renormalized.

    Raises:
        QuantumError: incomplete projector set, bad targets, or a
            post-selected outcome of zero probability.
    """
    if targets is None:
        targets = list(range(state.n_qubits))
    probs = born_probabilities(state, projectors, targets)
    if outcome is None:
        cdf = np.cumsum(probs)
        index = min(int(np.searchsorted(cdf, as_rng(rng).random() * cdf[-1], side="right")), len(probs) - 1)
    else:
        index = int(outcome)
        if not 0 <= index < len(probs):
            raise QuantumError(f"outcome {index} out of range")
    prob = float(probs[index])
    if prob <= 1e-15:
        raise QuantumError(f"outcome {index} has zero probability")
    out = _apply_matrix(state, projectors[index].matrix, targets)
    if isinstance(state, PureState):
        return index, PureState._trusted(out / np.sqrt(prob)), prob
    return index, DensityMatrix._trusted(out / prob), prob


def _as_matrix(state) -> np.ndarray:
    if isinstance(state, PureState):
        return state.to_density().matrix
    return state.matrix


def fidelity(a, b: PureState) -> float:
    """Overlap <b| rho_a |b> between a state and a pure reference state."""
    if not isinstance(b, PureState):
        raise QuantumError("reference state must be a PureState")
    if a.n_qubits != b.n_qubits:
        raise QuantumError(f"dimension mismatch: {a.n_qubits} vs {b.n_qubits} qubits")
    if isinstance(a, PureState):
        value = abs(np.vdot(b.amplitudes, a.amplitudes)) ** 2
    else:
        value = np.vdot(b.amplitudes, a.matrix @ b.amplitudes).real
    return float(min(max(value, 0.0), 1.0))


def expectation(state, obs: Operator) -> float:
    """Tr(rho O) for a Hermitian observable; the imaginary residue is dropped."""
    if not obs.is_hermitian():
        raise QuantumError("expectation requires a Hermitian observable")
    if obs.n_qubits != state.n_qubits:
        raise QuantumError(f"dimension mismatch: {obs.n_qubits} vs {state.n_qubits} qubits")
    if isinstance(state, PureState):
        amps = state.amplitudes
        value = np.vdot(amps, obs.matrix @ amps)
    else:
        value = np.einsum("ij,ji->", state.matrix, obs.matrix)
    if abs(value.imag) > ATOL:
        raise QuantumError(f"expectation has imaginary part {value.imag:.3g}")
    return float(value.real)


def hwp_unitary(theta: float) -> Operator:
    """Half-wave plate at ``theta`` degrees: [[cos 2t, sin 2t], [sin 2t, -cos 2t]]."""
    two_t = np.deg2rad(2.0 * theta)
    c, s = np.cos(two_t), np.sin(two_t)
    return Operator(np.array([[c, s], [s, -c]]), "unitary")
