"""Fidelity, W-state witness, concurrence and entanglement of formation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qstate import (
    PAULI_Y,
    DensityMatrix,
    StateVector,
    as_density,
    make_state,
    partial_trace,
)

CLAMP_SLACK = 1e-8
W_TERMS = ("HHV", "HVH", "VHH")
_YY = np.kron(PAULI_Y, PAULI_Y)


def _clamp(value: float, lo: float, hi: float) -> float:
    # only numerical noise is clamped; larger excursions indicate a bug upstream
    if value < lo - CLAMP_SLACK or value > hi + CLAMP_SLACK:
        return value
    return min(max(value, lo), hi)


def fidelity_to_pure(rho, psi: StateVector, clamp: bool = True) -> float:
    """<psi|rho|psi> for a normalized target ket."""
    rho = as_density(rho)
    if set(rho.labels) != set(psi.labels):
        raise ValueError(f"label mismatch: {rho.labels} vs {psi.labels}")
    amps = psi.amplitudes
    value = float(np.real(amps.conj() @ rho.matrix @ amps))
    return _clamp(value, 0.0, 1.0) if clamp else value


def w_state_like(rho) -> StateVector:
    return make_state(as_density(rho).labels, "W3")


def w_witness(rho) -> float:
    """Expectation of ``(2/3) I - |W3><W3|``; negative values certify genuine tripartite entanglement."""
    rho = as_density(rho)
    if rho.n_qubits != 3:
        raise ValueError("W witness needs a three-qubit state")
    return 2.0 / 3.0 - fidelity_to_pure(rho, w_state_like(rho), clamp=False)


def _two_qubit(rho) -> DensityMatrix:
    rho = as_density(rho)
    if rho.n_qubits != 2:
        raise ValueError("needs a two-qubit state")
    return rho


def concurrence(rho, clamp: bool = True) -> float:
    """Wootters concurrence from the eigenvalues of ``rho (Y x Y) rho* (Y x Y)``."""
    m = _two_qubit(rho).matrix
    product = m @ _YY @ m.conj() @ _YY
    eig = np.real(np.linalg.eigvals(product))
    lam = np.sort(np.sqrt(np.maximum(eig, 0.0)))[::-1]
    value = float(lam[0] - lam[1] - lam[2] - lam[3])
    return max(0.0, value) if clamp else value


def binary_entropy(x: float) -> float:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def eof_from_concurrence(c: float) -> float:
    c = min(max(c, 0.0), 1.0)
    return binary_entropy((1.0 + math.sqrt(1.0 - c * c)) / 2.0)


def eof(rho) -> float:
    """Entanglement of formation in ebits."""
    return eof_from_concurrence(concurrence(rho))


def trace_distance(rho, sigma) -> float:
    rho, sigma = as_density(rho), as_density(sigma)
    if rho.labels != sigma.labels:
        raise ValueError("label mismatch")
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(rho.matrix - sigma.matrix))))


def diagonal_imbalance(rho) -> tuple[tuple[float, float, float], float]:
    """Populations of HHV, HVH, VHH and the fidelity lost to their imbalance alone.

    The penalty compares the best W-like ket with these populations,
    ``sum_i sqrt(w_i) |i>`` normalized, against W3:
    ``1 - (sum_i sqrt(w_i))**2 / (3 sum_i w_i)``. Coherence loss is not
    counted, only unequal populations.
    """
    rho = as_density(rho)
    if rho.n_qubits != 3:
        raise ValueError("diagonal imbalance needs a three-qubit state")
    weights = tuple(max(float(np.real(rho.element(t, t))), 0.0) for t in W_TERMS)
    total = sum(weights)
    if total == 0.0:
        return weights, 1.0
    overlap = sum(math.sqrt(w / total) for w in weights) ** 2 / 3.0
    return weights, max(0.0, 1.0 - overlap)


def subspace_fidelity_deficit(rho) -> float:
    """``1 - <W3|P rho P|W3> / Tr(P rho)`` with P the projector onto span{HHV, HVH, VHH}.

    Unlike the imbalance penalty this also counts lost coherence: a fully
    dephased state with equal populations scores 2/3.
    """
    rho = as_density(rho)
    if rho.n_qubits != 3:
        raise ValueError("needs a three-qubit state")
    idx = [int(t.replace("H", "0").replace("V", "1"), 2) for t in W_TERMS]
    block = rho.matrix[np.ix_(idx, idx)]
    total = float(np.real(np.trace(block)))
    if total <= 0.0:
        return 1.0
    overlap = float(np.real(np.sum(block))) / 3.0
    return _clamp(1.0 - overlap / total, 0.0, 1.0)


MARGINAL_PAIRS = {"14": (1, 4), "16": (1, 6), "46": (4, 6)}


@dataclass(frozen=True)
class MetricReport:
    fidelity_w3: float
    witness_value: float
    eof_14: float
    eof_16: float
    eof_46: float
    diagonal_weights: tuple[float, float, float]

    def as_vector(self) -> list[float]:
        return [self.fidelity_w3, self.witness_value, self.eof_14, self.eof_16,
                self.eof_46, *self.diagonal_weights]


METRIC_NAMES = ("fidelity_w3", "witness_value", "eof_14", "eof_16", "eof_46",
                "weight_HHV", "weight_HVH", "weight_VHH")


def metric_report(rho) -> MetricReport:
    """All W-state figures of merit for a state on modes (1, 4, 6)."""
    rho = as_density(rho)
    if set(rho.labels) != {1, 4, 6}:
        raise ValueError(f"expected modes (1, 4, 6), got {rho.labels}")
    eofs = {k: eof(partial_trace(rho, pair)) for k, pair in MARGINAL_PAIRS.items()}
    weights, _ = diagonal_imbalance(rho)
    return MetricReport(
        fidelity_w3=fidelity_to_pure(rho, w_state_like(rho)),
        witness_value=w_witness(rho),
        eof_14=eofs["14"],
        eof_16=eofs["16"],
        eof_46=eofs["46"],
        diagonal_weights=weights,
    )


def metric_vector(rho) -> list[float]:
    return metric_report(rho).as_vector()
