"""Bosonic-mode picture of the polarization-dependent beam splitter.

Photons live in modes labeled by (spatial id, polarization, temporal bin).
A FockState stores amplitudes on normalized occupation-number kets, so the
creation-operator product for occupation ``n`` carries a ``1/sqrt(prod n!)``
factor that `evolve_fock` takes care of.

Beam splitter convention (real orthogonal, per polarization with
transmission ``tau``)::

    a2 -> sqrt(1 - tau) a5 + sqrt(tau) a6
    a3 -> sqrt(tau) a5     - sqrt(1 - tau) a6
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .qstate import DensityMatrix, StateVector

MATCHED = "matched"
ORTHOGONAL = "orthogonal"
POLARIZATIONS = ("H", "V")
TEMPORAL_BINS = (MATCHED, ORTHOGONAL)

PDBS_INPUTS = (2, 3)
PDBS_OUTPUTS = (5, 6)

_PRUNE = 1e-15


@dataclass(frozen=True, order=True)
class BosonicMode:
    spatial: int
    polarization: str
    temporal_bin: str = MATCHED

    def __post_init__(self) -> None:
        if self.polarization not in POLARIZATIONS:
            raise ValueError(f"polarization must be H or V, got {self.polarization!r}")
        if self.temporal_bin not in TEMPORAL_BINS:
            raise ValueError(f"unknown temporal bin {self.temporal_bin!r}")


@dataclass(frozen=True, eq=False)
class FockState:
    """Superposition of occupation-number kets over an ordered mode list."""

    modes: tuple[BosonicMode, ...]
    terms: Mapping[tuple[int, ...], complex]

    def __post_init__(self) -> None:
        modes = tuple(self.modes)
        if len(set(modes)) != len(modes):
            raise ValueError("duplicate bosonic modes")
        order = sorted(range(len(modes)), key=lambda i: modes[i])
        terms: dict[tuple[int, ...], complex] = {}
        numbers = set()
        for occ, amp in self.terms.items():
            if len(occ) != len(modes):
                raise ValueError("occupation vector length does not match modes")
            if any(k < 0 for k in occ):
                raise ValueError("negative occupation")
            key = tuple(occ[i] for i in order)
            terms[key] = terms.get(key, 0.0) + complex(amp)
            numbers.add(sum(occ))
        if len(numbers) > 1:
            raise ValueError("terms with different total photon numbers")
        object.__setattr__(self, "modes", tuple(modes[i] for i in order))
        object.__setattr__(self, "terms", terms)

    @property
    def photon_number(self) -> int:
        for occ in self.terms:
            return sum(occ)
        return 0

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.terms.values()))

    def amplitude(self, occupied: Mapping[BosonicMode, int]) -> complex:
        """Amplitude of the ket with the given nonzero occupations."""
        unknown = set(occupied) - set(self.modes)
        if unknown:
            return 0.0
        occ = tuple(occupied.get(m, 0) for m in self.modes)
        return self.terms.get(occ, 0.0)

    def scaled(self, factor: complex) -> "FockState":
        return FockState(self.modes, {k: factor * v for k, v in self.terms.items()})

    @classmethod
    def from_photons(cls, photons: Sequence[BosonicMode], amplitude: complex = 1.0) -> "FockState":
        """Normalized ket with one creation operator per listed mode."""
        modes = tuple(sorted(set(photons)))
        occ = tuple(list(photons).count(m) for m in modes)
        return cls(modes, {occ: amplitude})

    @classmethod
    def from_qubits(cls, state: StateVector) -> "FockState":
        """Embed a polarization state: qubit label = spatial mode, one photon each."""
        modes = tuple(
            BosonicMode(lab, pol) for lab in state.labels for pol in POLARIZATIONS
        )
        terms = {}
        for index, amp in enumerate(state.amplitudes):
            if amp == 0:
                continue
            occ = [0] * len(modes)
            for q in range(state.n_qubits):
                bit = (index >> (state.n_qubits - 1 - q)) & 1
                occ[2 * q + bit] = 1
            terms[tuple(occ)] = amp
        return cls(modes, terms)


@dataclass(frozen=True, eq=False)
class ModeTransform:
    """Linear map on creation operators: ``a_in -> sum_out matrix[out, in] a_out``."""

    in_modes: tuple[BosonicMode, ...]
    out_modes: tuple[BosonicMode, ...]
    matrix: np.ndarray

    def __post_init__(self) -> None:
        mat = np.asarray(self.matrix, dtype=complex)
        if mat.shape != (len(self.out_modes), len(self.in_modes)):
            raise ValueError("transform matrix shape does not match modes")
        mat = mat.copy()
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)

    def is_unitary(self, tol: float = 1e-12) -> bool:
        m = self.matrix
        if m.shape[0] != m.shape[1]:
            return False
        return bool(np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))) < tol)

    def image(self, mode: BosonicMode) -> list[tuple[BosonicMode, complex]]:
        j = self.in_modes.index(mode)
        return [(out, self.matrix[i, j]) for i, out in enumerate(self.out_modes)
                if self.matrix[i, j] != 0]


def pdbs_transform(mu: float, nu: float,
                   bins: Iterable[str] = TEMPORAL_BINS) -> ModeTransform:
    """Beam splitter with H transmission ``mu`` and V transmission ``nu``.

    Inputs are spatial modes 2 and 3, outputs 5 and 6. Transmission sends
    2 -> 6 and 3 -> 5. The map acts the same way on every temporal bin.
    """
    for name, tau in (("mu", mu), ("nu", nu)):
        if not 0.0 <= tau <= 1.0:
            raise ValueError(f"{name}={tau} outside [0, 1]")
    bins = tuple(bins)
    in_modes, out_modes = [], []
    for b in bins:
        for pol in POLARIZATIONS:
            in_modes += [BosonicMode(s, pol, b) for s in PDBS_INPUTS]
            out_modes += [BosonicMode(s, pol, b) for s in PDBS_OUTPUTS]
    blocks = []
    for _ in bins:
        for tau in (mu, nu):
            t, r = math.sqrt(tau), math.sqrt(1.0 - tau)
            blocks.append(np.array([[r, t], [t, -r]]))
    matrix = np.zeros((len(out_modes), len(in_modes)))
    for k, block in enumerate(blocks):
        matrix[2 * k:2 * k + 2, 2 * k:2 * k + 2] = block
    return ModeTransform(tuple(in_modes), tuple(out_modes), matrix)


def _apply_mode_map(state: FockState,
                    images: Mapping[BosonicMode, list[tuple[BosonicMode, complex]]]) -> FockState:
    # each photon is rewritten through `images`; modes absent from it pass through
    out: dict[tuple[BosonicMode, ...], complex] = defaultdict(complex)
    for occ, amp in state.terms.items():
        photons = []
        norm = 1.0
        for mode, n in zip(state.modes, occ):
            photons += [mode] * n
            norm *= math.factorial(n)
        choices = [images.get(m, [(m, 1.0)]) for m in photons]
        base = amp / math.sqrt(norm)
        for combo in itertools.product(*choices):
            coeff = base
            for _, c in combo:
                coeff *= c
            if coeff != 0:
                out[tuple(sorted(m for m, _ in combo))] += coeff
    new_modes = {m for m in state.modes if m not in images}
    new_modes |= {m for imgs in images.values() for m, _ in imgs}
    new_modes = tuple(sorted(new_modes))
    terms = {}
    for key, coeff in out.items():
        occ = tuple(key.count(m) for m in new_modes)
        amp = coeff * math.sqrt(math.prod(math.factorial(k) for k in occ))
        if abs(amp) > _PRUNE:
            terms[occ] = amp
    return FockState(new_modes, terms)


def evolve_fock(state: FockState, transform: ModeTransform) -> FockState:
    """Push a Fock state through a linear-optical mode transform.

    Photons in modes whose spatial id is not an input of the transform are
    left untouched. A photon in an input spatial mode that the transform does
    not cover is an error.
    """
    in_spatial = {m.spatial for m in transform.in_modes}
    covered = set(transform.in_modes)
    occupied = {m for occ in state.terms for m, k in zip(state.modes, occ) if k}
    for mode in occupied:
        if mode.spatial in in_spatial and mode not in covered:
            raise ValueError(f"transform does not cover occupied mode {mode}")
    images = {m: transform.image(m) for m in transform.in_modes}
    return _apply_mode_map(state, images)


def set_distinguishability(state: FockState, spatial: int, xi: float) -> FockState:
    """Split photons of one spatial mode between the matched and orthogonal bins.

    Each matched-bin photon in `spatial` becomes ``xi`` matched plus
    ``sqrt(1 - xi**2)`` orthogonal, so ``xi**2`` is the overlap probability
    with photons that stay in the matched bin.
    """
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"overlap xi={xi} outside [0, 1]")
    if xi == 1.0:
        return state
    s = math.sqrt(1.0 - xi * xi)
    images = {}
    for pol in POLARIZATIONS:
        m = BosonicMode(spatial, pol, MATCHED)
        o = BosonicMode(spatial, pol, ORTHOGONAL)
        images[m] = [(m, xi), (o, s)] if xi > 0 else [(o, 1.0)]
    return _apply_mode_map(state, images)


def post_select_components(state: FockState,
                           spatial_modes: Iterable[int]) -> dict[tuple[str, ...], StateVector]:
    """Project onto exactly one photon per listed spatial mode.

    Returns one unnormalized polarization ket per temporal-bin pattern of the
    detected photons; the patterns are mutually orthogonal.
    """
    spatial_modes = tuple(sorted(set(spatial_modes)))
    if state.terms and state.photon_number != len(spatial_modes):
        raise ValueError(
            f"{state.photon_number} photons cannot occupy {len(spatial_modes)} modes one each")
    n = len(spatial_modes)
    pos = {s: i for i, s in enumerate(spatial_modes)}
    parts: dict[tuple[str, ...], np.ndarray] = {}
    for occ, amp in state.terms.items():
        seen = [None] * n
        ok = True
        for mode, k in zip(state.modes, occ):
            if k == 0:
                continue
            i = pos.get(mode.spatial)
            if i is None or k > 1 or seen[i] is not None:
                ok = False
                break
            seen[i] = mode
        if not ok or any(m is None for m in seen):
            continue
        pattern = tuple(m.temporal_bin for m in seen)
        index = 0
        for m in seen:
            index = 2 * index + (m.polarization == "V")
        vec = parts.setdefault(pattern, np.zeros(2 ** n, dtype=complex))
        vec[index] += amp
    return {p: StateVector(spatial_modes, v, normalized=False)
            for p, v in sorted(parts.items())}


def post_select_one_per_mode(state: FockState, spatial_modes: Iterable[int]):
    """Keep only events with one photon in each listed spatial mode.

    Returns ``(state, success_weight)``. The state is an unnormalized
    StateVector when at most one temporal-bin pattern survives, otherwise the
    bins are traced out and an unnormalized DensityMatrix is returned.
    """
    spatial_modes = tuple(sorted(set(spatial_modes)))
    parts = post_select_components(state, spatial_modes)
    weight = float(sum(p.norm() ** 2 for p in parts.values()))
    if len(parts) == 0:
        empty = np.zeros(2 ** len(spatial_modes), dtype=complex)
        return StateVector(spatial_modes, empty, normalized=False), 0.0
    if len(parts) == 1:
        return next(iter(parts.values())), weight
    rho = sum(np.outer(p.amplitudes, p.amplitudes.conj()) for p in parts.values())
    return DensityMatrix(spatial_modes, rho, normalized=False), weight


def hom_width_sigma(l_c: float) -> float:
    """Gaussian sigma of the overlap so the dip's full width at half depth is ``l_c``."""
    return l_c / (2.0 * math.sqrt(math.log(2.0)))


def hom_overlap(delay: float, l_c: float, xi0: float) -> float:
    sigma = hom_width_sigma(l_c)
    return xi0 * math.exp(-delay * delay / (2.0 * sigma * sigma))


def coincidence_rate(xi: float, tau: float = 0.5, polarization: str = "V") -> float:
    """Probability of one photon in each of modes 5 and 6 for two same-polarization inputs."""
    photons = [BosonicMode(2, polarization), BosonicMode(3, polarization)]
    state = FockState.from_photons(photons)
    state = set_distinguishability(state, 3, xi)
    out = evolve_fock(state, pdbs_transform(tau, tau))
    _, weight = post_select_one_per_mode(out, PDBS_OUTPUTS)
    return weight


def hom_scan(delays: Sequence[float], l_c: float, xi0: float = 1.0,
             tau: float = 0.5) -> np.ndarray:
    """Two-photon coincidence probability as a function of optical delay."""
    if l_c <= 0:
        raise ValueError("coherence length must be positive")
    if not 0.0 <= xi0 <= 1.0:
        raise ValueError(f"xi0={xi0} outside [0, 1]")
    delays = np.asarray(delays, dtype=float)
    if delays.size == 0:
        raise ValueError("empty delay scan")
    return np.array([coincidence_rate(hom_overlap(d, l_c, xi0), tau) for d in delays])


def visibility(rates: Sequence[float]) -> float:
    rates = np.asarray(rates, dtype=float)
    top = rates.max()
    if top <= 0:
        raise ValueError("coincidence curve is identically zero")
    return float((top - rates.min()) / top)
