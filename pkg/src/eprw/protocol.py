"""Conversion of two EPR pairs into a three-photon W state.

Alice holds mode 1, Bob mode 4 and Charlie modes 2 and 3. Charlie overlaps
his photons on the polarization-dependent beam splitter, keeps events with
one photon in each of the outputs 5 and 6, announces the polarization found
in mode 5, and the three parties apply local polarization swaps, phase flips
and V-attenuating filters on modes 1, 4 and 6.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import optics
from .qstate import (
    PAULI_X,
    DensityMatrix,
    StateVector,
    apply_single_qubit,
    as_density,
    make_state,
    partial_trace,
    tensor,
)

H5 = "H5"
V5 = "V5"
BRANCHES = (H5, V5)

ALICE, BOB, CHARLIE_OUT = 1, 4, 6
HERALD = 5
OUTPUT_LABELS = (ALICE, BOB, CHARLIE_OUT)
SOURCE_LABELS = ((1, 2), (3, 4))


class ConversionError(ValueError):
    """The requested branch cannot be corrected into a W state."""


@dataclass(frozen=True)
class PdbsParams:
    mu: float
    nu: float

    def __post_init__(self) -> None:
        for name in ("mu", "nu"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")


@dataclass(frozen=True)
class ConversionAmplitudes:
    a: float
    b: float
    c: float
    d: float

    def branch_terms(self, branch: str) -> dict[int, float]:
        """Amplitude attached to each photon whose V component carries it.

        After the announced polarization swap every kept term has exactly one
        V photon; the dict maps that photon's label to the term amplitude.
        """
        if branch == H5:
            # c|HHV> + b|HVH> + a|VHH> on (1, 4, 6)
            return {ALICE: self.a, BOB: self.b, CHARLIE_OUT: self.c}
        if branch == V5:
            # d|HHV> + b|HVH> + a|VHH> after swapping modes 1 and 4
            return {ALICE: self.a, BOB: self.b, CHARLIE_OUT: self.d}
        raise ValueError(f"unknown branch {branch!r}")


def optimal_params() -> PdbsParams:
    root5 = math.sqrt(5.0)
    return PdbsParams((5.0 + root5) / 10.0, (5.0 - root5) / 10.0)


def experiment_params() -> PdbsParams:
    """The sub-optimal setting used in the experiment (V splits 50:50)."""
    return PdbsParams((7.0 + math.sqrt(17.0)) / 16.0, 0.5)


def conversion_amplitudes(p: PdbsParams) -> ConversionAmplitudes:
    return ConversionAmplitudes(
        a=math.sqrt(p.mu * p.nu) / 2.0,
        b=-math.sqrt((1.0 - p.mu) * (1.0 - p.nu)) / 2.0,
        c=(2.0 * p.mu - 1.0) / 2.0,
        d=(2.0 * p.nu - 1.0) / 2.0,
    )


def success_probability(p: PdbsParams, branch: str = H5) -> float:
    """Overall success probability ``3 min{|x|^2}`` of a heralding branch.

    For V5 this uses the amplitude set (d, b, c); see
    `success_probability_v_branch_amplitudes` for the (d, a, b) alternative.
    """
    amp = conversion_amplitudes(p)
    if branch == H5:
        terms = (amp.a, amp.b, amp.c)
    elif branch == V5:
        terms = (amp.d, amp.b, amp.c)
    else:
        raise ValueError(f"unknown branch {branch!r}")
    return 3.0 * min(x * x for x in terms)


def success_probability_v_branch_amplitudes(p: PdbsParams) -> float:
    """``3 min{|d|^2, |a|^2, |b|^2}``, built from the terms the V5 branch actually carries."""
    amp = conversion_amplitudes(p)
    return 3.0 * min(amp.d ** 2, amp.a ** 2, amp.b ** 2)


def success_probability_grid(mu: np.ndarray, nu: np.ndarray, branch: str = H5) -> np.ndarray:
    """Vectorized `success_probability` over broadcastable arrays."""
    mu, nu = np.broadcast_arrays(np.asarray(mu, float), np.asarray(nu, float))
    a2 = mu * nu / 4.0
    b2 = (1.0 - mu) * (1.0 - nu) / 4.0
    c2 = (2.0 * mu - 1.0) ** 2 / 4.0
    d2 = (2.0 * nu - 1.0) ** 2 / 4.0
    if branch == H5:
        return 3.0 * np.minimum(np.minimum(a2, b2), c2)
    if branch == V5:
        return 3.0 * np.minimum(np.minimum(d2, b2), c2)
    raise ValueError(f"unknown branch {branch!r}")


def werner_epr(labels: Sequence[int], fidelity: float) -> DensityMatrix:
    """EPR pair mixed with white noise so that its EPR fidelity equals `fidelity`."""
    if not 0.25 <= fidelity <= 1.0:
        raise ValueError(f"Werner fidelity {fidelity} outside [1/4, 1]")
    lam = (4.0 * fidelity - 1.0) / 3.0
    epr = make_state(labels, "EPR").to_density().matrix
    return DensityMatrix(tuple(labels), lam * epr + (1.0 - lam) * np.eye(4) / 4.0)


@lru_cache(maxsize=256)
def _conversion_kraus(mu: float, nu: float, xi: float) -> tuple[np.ndarray, ...]:
    # Kraus operators from qubits (1, 2, 3, 4) to qubits (1, 4, 5, 6), one per
    # temporal-bin pattern of the detected photons
    transform = optics.pdbs_transform(mu, nu)
    columns: dict[tuple[str, ...], np.ndarray] = {}
    for index in range(16):
        basis = np.zeros(16, dtype=complex)
        basis[index] = 1.0
        fock = optics.FockState.from_qubits(StateVector((1, 2, 3, 4), basis))
        fock = optics.set_distinguishability(fock, 3, xi)
        fock = optics.evolve_fock(fock, transform)
        parts = optics.post_select_components(fock, (1, 4, 5, 6))
        for pattern, ket in parts.items():
            k = columns.setdefault(pattern, np.zeros((16, 16), dtype=complex))
            k[:, index] = ket.amplitudes
    return tuple(columns[p] for p in sorted(columns))


@dataclass(frozen=True, eq=False)
class ConversionOutcome:
    """Heralded three-photon state on modes 1, 4, 6 before local filtering.

    `state` is normalized; `success_probability` is the joint probability of
    one photon in each of modes 5 and 6 with the announced polarization in 5.
    """

    branch: str
    state: DensityMatrix
    success_probability: float
    params: PdbsParams
    corrections: tuple[tuple[int, str], ...] = field(default_factory=tuple)


def _source(state, labels) -> DensityMatrix:
    rho = as_density(state)
    if rho.n_qubits != 2:
        raise ValueError("each source must be a two-qubit state")
    if set(rho.labels) != set(labels):
        raise ValueError(f"source labels {rho.labels} should be {labels}")
    return rho


def convert(source1, source2, p: PdbsParams, branch: str = H5,
            xi: float = 1.0) -> ConversionOutcome:
    """Run Charlie's beam-splitter measurement on two pair sources.

    `source1` lives on modes (1, 2), `source2` on (3, 4). `xi` is the
    amplitude overlap of the two photons meeting at the beam splitter.
    """
    if branch not in BRANCHES:
        raise ValueError(f"unknown branch {branch!r}")
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"overlap xi={xi} outside [0, 1]")
    rho_in = tensor(_source(source1, SOURCE_LABELS[0]),
                    _source(source2, SOURCE_LABELS[1])).matrix
    kraus = _conversion_kraus(float(p.mu), float(p.nu), float(xi))
    rho_out = sum(k @ rho_in @ k.conj().T for k in kraus)
    # herald on mode 5 (third qubit of 1, 4, 5, 6)
    herald = np.zeros((2, 2))
    herald[int(branch == V5), int(branch == V5)] = 1.0
    proj = np.kron(np.kron(np.eye(4), herald), np.eye(2))
    rho_out = DensityMatrix((1, 4, 5, 6), proj @ rho_out @ proj, normalized=False)
    rho = partial_trace(rho_out, OUTPUT_LABELS)
    probability = rho.trace()
    swapped = (CHARLIE_OUT,) if branch == H5 else (ALICE, BOB)
    for label in swapped:
        rho = apply_single_qubit(rho, label, PAULI_X)
    if probability <= 0.0:
        raise ConversionError(f"branch {branch} never heralds for {p}")
    return ConversionOutcome(
        branch=branch,
        state=rho.normalize(),
        success_probability=probability,
        params=p,
        corrections=tuple((label, "swap_HV") for label in swapped),
    )


def correction_filters(p: PdbsParams, branch: str = H5) -> dict[int, np.ndarray]:
    """Per-photon ``diag(1, t e^{i phi})`` operators that equalize the W terms."""
    terms = conversion_amplitudes(p).branch_terms(branch)
    smallest = min(abs(x) for x in terms.values())
    if smallest == 0.0:
        zero = [label for label, x in terms.items() if x == 0.0]
        raise ConversionError(f"zero amplitude on photon(s) {zero}; branch {branch} cannot yield W")
    filters = {}
    for label, amp in terms.items():
        t = smallest / abs(amp)
        phase = 1.0 if amp > 0 else -1.0
        filters[label] = np.diag([1.0, phase * t]).astype(complex)
    return filters


def local_correction(outcome: ConversionOutcome) -> tuple[DensityMatrix, float]:
    """Apply the phase flips and V attenuation that turn the heralded state into W.

    Filter settings come from the beam-splitter parameters, not from the
    actual state, so noisy inputs are filtered as the ideal ones would be.
    Returns the normalized corrected state and the overall success probability
    including filter survival.
    """
    filters = correction_filters(outcome.params, outcome.branch)
    rho = outcome.state
    for label, op in filters.items():
        rho = apply_single_qubit(rho, label, op)
    survival = rho.trace()
    if survival <= 0.0:
        raise ConversionError("no amplitude survives the local filters")
    return rho.normalize(), outcome.success_probability * survival


def ideal_branch_state(p: PdbsParams, branch: str = H5) -> StateVector:
    """Closed-form heralded ket on (1, 4, 6) after the announced swap, unnormalized."""
    amp = conversion_amplitudes(p)
    vec = np.zeros(8, dtype=complex)
    last = amp.c if branch == H5 else amp.d
    vec[0b001] = last   # HHV
    vec[0b010] = amp.b  # HVH
    vec[0b100] = amp.a  # VHH
    return StateVector(OUTPUT_LABELS, vec, normalized=False)


def run_conversion(p: PdbsParams, f12: float = 1.0, f34: float = 1.0,
                   xi: float = 1.0, branch: str = H5) -> tuple[DensityMatrix, float]:
    """Werner sources -> beam splitter -> local correction; returns (state, probability)."""
    outcome = convert(werner_epr((1, 2), f12), werner_epr((3, 4), f34), p, branch, xi)
    return local_correction(outcome)
