"""Labeled multi-qubit polarization states.

Every qubit is the polarization of one photon sitting in a spatial mode, and
the mode id is used as the qubit label. Tensor factors are always stored in
sorted label order with H as basis index 0 and V as basis index 1.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence, Union

import numpy as np

EXACT_TOL = 1e-12
HERMITIAN_TOL = 1e-10
POSITIVITY_SLACK = 1e-8

SQRT2 = np.sqrt(2.0)
SQRT3 = np.sqrt(3.0)

# single-photon polarization kets in the (H, V) basis
SINGLE_QUBIT_KETS = {
    "H": np.array([1.0, 0.0], dtype=complex),
    "V": np.array([0.0, 1.0], dtype=complex),
    "D": np.array([1.0, 1.0], dtype=complex) / SQRT2,
    "A": np.array([1.0, -1.0], dtype=complex) / SQRT2,
    "R": np.array([1.0, -1.0j], dtype=complex) / SQRT2,
    "L": np.array([1.0, 1.0j], dtype=complex) / SQRT2,
}

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)

Label = Hashable


def _check_labels(labels: Sequence[Label]) -> tuple:
    labels = tuple(labels)
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate qubit labels in {labels}")
    return labels


def _sort_order(labels: tuple) -> list[int]:
    return sorted(range(len(labels)), key=lambda i: labels[i])


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure state over labeled qubits.

    `normalized` is False for states produced by projections or filters that
    did not rescale the result.
    """

    labels: tuple
    amplitudes: np.ndarray
    normalized: bool = True

    def __post_init__(self) -> None:
        labels = _check_labels(self.labels)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2 ** len(labels):
            raise ValueError(f"{amps.size} amplitudes for {len(labels)} qubits")
        order = _sort_order(labels)
        if order != list(range(len(labels))):
            amps = (
                amps.reshape((2,) * len(labels)).transpose(order).reshape(-1)
            )
            labels = tuple(labels[i] for i in order)
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "amplitudes", amps)
        if self.normalized and abs(np.linalg.norm(amps) - 1.0) > 1e-9:
            raise ValueError("state flagged normalized but has norm "
                             f"{np.linalg.norm(amps):.3e}")

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.labels, self.amplitudes / n, normalized=True)

    def to_density(self) -> "DensityMatrix":
        psi = self.amplitudes
        return DensityMatrix(self.labels, np.outer(psi, psi.conj()),
                             normalized=self.normalized)

    def amplitude(self, bits: str) -> complex:
        """Amplitude of a basis ket written as e.g. ``"HHV"`` in label order."""
        return complex(self.amplitudes[_bits_to_index(bits)])


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    labels: tuple
    matrix: np.ndarray
    normalized: bool = True

    def __post_init__(self) -> None:
        labels = _check_labels(self.labels)
        n = len(labels)
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.shape != (2 ** n, 2 ** n):
            raise ValueError(f"matrix shape {mat.shape} for {n} qubits")
        if np.max(np.abs(mat - mat.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise ValueError("density matrix is not Hermitian")
        order = _sort_order(labels)
        if order != list(range(n)):
            perm = order + [n + i for i in order]
            mat = mat.reshape((2,) * (2 * n)).transpose(perm).reshape(2 ** n, 2 ** n)
            labels = tuple(labels[i] for i in order)
        mat = mat.copy()
        mat.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "matrix", mat)
        if self.normalized and abs(self.trace() - 1.0) > HERMITIAN_TOL:
            raise ValueError(f"density matrix flagged normalized has trace {self.trace()}")

    @property
    def n_qubits(self) -> int:
        return len(self.labels)

    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def normalize(self) -> "DensityMatrix":
        tr = self.trace()
        if tr <= 0.0:
            raise ValueError("cannot normalize a density matrix with trace <= 0")
        return DensityMatrix(self.labels, self.matrix / tr, normalized=True)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues()[0])

    def is_positive(self, slack: float = POSITIVITY_SLACK) -> bool:
        return self.min_eigenvalue() >= -slack

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def element(self, row: str, col: str) -> complex:
        return complex(self.matrix[_bits_to_index(row), _bits_to_index(col)])


State = Union[StateVector, DensityMatrix]


def _bits_to_index(bits: str) -> int:
    index = 0
    for ch in bits:
        if ch not in "HV":
            raise ValueError(f"basis ket must be written with H/V, got {bits!r}")
        index = 2 * index + (ch == "V")
    return index


def basis_ket(bits: str) -> np.ndarray:
    vec = np.zeros(2 ** len(bits), dtype=complex)
    vec[_bits_to_index(bits)] = 1.0
    return vec


_MULTI_QUBIT = {
    "EPR": (2, lambda: (basis_ket("HH") + basis_ket("VV")) / SQRT2),
    "W3": (3, lambda: (basis_ket("HHV") + basis_ket("HVH") + basis_ket("VHH")) / SQRT3),
    "GHZ3": (3, lambda: (basis_ket("HHH") + basis_ket("VVV")) / SQRT2),
}


def make_state(labels: Iterable[Label], name: str = "custom",
               amplitudes: Sequence[complex] | None = None) -> StateVector:
    """Build a named polarization state on the given labels.

    Named states: EPR, W3, GHZ3 and the one-photon states H, V, D, A, R, L.
    A one-photon name on several labels gives the product state. With
    ``name="custom"`` the amplitudes are read in the order the labels are
    given and normalized.
    """
    labels = _check_labels(list(labels))
    n = len(labels)
    key = name.upper()
    if key == "CUSTOM":
        if amplitudes is None:
            raise ValueError("custom state needs amplitudes")
        return StateVector(labels, amplitudes, normalized=False).normalize()
    if key in _MULTI_QUBIT:
        arity, build = _MULTI_QUBIT[key]
        if n != arity:
            raise ValueError(f"{name} needs {arity} labels, got {n}")
        return StateVector(labels, build())
    if key in SINGLE_QUBIT_KETS:
        if n == 0:
            raise ValueError("need at least one label")
        vec = np.array([1.0], dtype=complex)
        for _ in range(n):
            vec = np.kron(vec, SINGLE_QUBIT_KETS[key])
        return StateVector(labels, vec)
    raise ValueError(f"unknown named state {name!r}")


def maximally_mixed(labels: Iterable[Label]) -> DensityMatrix:
    labels = tuple(labels)
    d = 2 ** len(labels)
    return DensityMatrix(labels, np.eye(d) / d)


def as_density(state: State) -> DensityMatrix:
    if isinstance(state, DensityMatrix):
        return state
    return state.to_density()


def tensor(s1: State, s2: State) -> State:
    """Tensor product of two states on disjoint labels."""
    if type(s1) is not type(s2):
        raise TypeError("tensor needs two states of the same kind")
    overlap = set(s1.labels) & set(s2.labels)
    if overlap:
        raise ValueError(f"overlapping labels {sorted(overlap)}")
    labels = s1.labels + s2.labels
    if isinstance(s1, StateVector):
        return StateVector(labels, np.kron(s1.amplitudes, s2.amplitudes),
                           normalized=s1.normalized and s2.normalized)
    return DensityMatrix(labels, np.kron(s1.matrix, s2.matrix),
                         normalized=s1.normalized and s2.normalized)


def partial_trace(rho: State, keep: Iterable[Label]) -> DensityMatrix:
    rho = as_density(rho)
    keep = set(keep)
    unknown = keep - set(rho.labels)
    if unknown:
        raise ValueError(f"unknown labels {sorted(unknown, key=str)}")
    n = rho.n_qubits
    kept = [i for i, lab in enumerate(rho.labels) if lab in keep]
    traced = [i for i, lab in enumerate(rho.labels) if lab not in keep]
    dk, dt = 2 ** len(kept), 2 ** len(traced)
    t = rho.matrix.reshape((2,) * (2 * n))
    perm = kept + traced + [n + i for i in kept] + [n + i for i in traced]
    t = t.transpose(perm).reshape(dk, dt, dk, dt)
    reduced = np.einsum("ajbj->ab", t)
    return DensityMatrix(tuple(rho.labels[i] for i in kept), reduced,
                         normalized=rho.normalized)


def _embed(state: State, label: Label, op: np.ndarray) -> np.ndarray:
    if label not in state.labels:
        raise ValueError(f"unknown label {label!r}")
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise ValueError("single-qubit operator must be 2x2")
    full = np.array([[1.0]], dtype=complex)
    for lab in state.labels:
        full = np.kron(full, op if lab == label else np.eye(2))
    return full


def apply_single_qubit(state: State, label: Label, op: np.ndarray) -> State:
    """Apply a 2x2 operator on one qubit. The result is never renormalized."""
    full = _embed(state, label, op)
    if isinstance(state, StateVector):
        return StateVector(state.labels, full @ state.amplitudes, normalized=False)
    return DensityMatrix(state.labels, full @ state.matrix @ full.conj().T,
                         normalized=False)


def relabel(state: State, mapping: dict) -> State:
    labels = tuple(mapping.get(lab, lab) for lab in state.labels)
    if isinstance(state, StateVector):
        return StateVector(labels, state.amplitudes, normalized=state.normalized)
    return DensityMatrix(labels, state.matrix, normalized=state.normalized)


def expectation(state: State, operator: np.ndarray) -> complex:
    if isinstance(state, StateVector):
        psi = state.amplitudes
        return complex(psi.conj() @ operator @ psi)
    return complex(np.trace(operator @ state.matrix))


def projector(bits: str) -> np.ndarray:
    """Product projector for a string of one-photon names like ``"HDR"``."""
    out = np.array([[1.0]], dtype=complex)
    for ch in bits:
        ket = SINGLE_QUBIT_KETS[ch]
        out = np.kron(out, np.outer(ket, ket.conj()))
    return out
