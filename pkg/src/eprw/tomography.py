"""Polarization state tomography from single-projector coincidence counts.

Every setting is one product projector (one waveplate/PBS choice per photon)
and yields one count. The overall flux is unknown, so likelihoods are built
from counts relative to their sum. The product projectors of a scheme do
not sum to the identity, and the R rho R iteration is corrected for that by
the inverse of their sum ``G``::

    rho <- N[ G^-1 R(rho) rho R(rho) G^-1 ],   R = sum_i n_i / p_i  P_i

which is the plain iteration for the equivalent POVM ``G^-1/2 P_i G^-1/2``.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .qstate import (
    DensityMatrix,
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    POSITIVITY_SLACK,
    maximally_mixed,
    projector,
)

PROBABILITY_FLOOR = 1e-12
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITERATIONS = 10000
DEFAULT_ACQUISITION_TIME = 5800.0
# stop once the likelihood gained less than the tolerance over this many iterations
STALL_WINDOW = 10
NEWTON_HALVINGS = 30
FACTOR_MAX_ITERATIONS = 200

SCHEMES = {
    "standard16": (2, "HVDR"),
    "standard64": (3, "HVDR"),
    "standard": (None, "HVDR"),
    "overcomplete": (None, "HVDRL"),
}


@dataclass(frozen=True)
class MeasurementSetting:
    """One projector per photon, e.g. labels (1, 4, 6) with choices "HDR"."""

    labels: tuple
    choices: str

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.choices):
            raise ValueError("one projector choice per label")
        order = sorted(range(len(self.labels)), key=lambda i: self.labels[i])
        object.__setattr__(self, "labels", tuple(self.labels[i] for i in order))
        object.__setattr__(self, "choices", "".join(self.choices[i] for i in order))

    def operator(self) -> np.ndarray:
        return projector(self.choices)


@dataclass(frozen=True)
class CountRecord:
    setting: MeasurementSetting
    counts: float
    acquisition_time: float = DEFAULT_ACQUISITION_TIME
    total_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.counts < 0:
            raise ValueError("negative counts")


@dataclass
class ReconstructionResult:
    rho: DensityMatrix
    log_likelihood: float
    iterations: int
    converged: bool
    history: list[float] = field(default_factory=list, repr=False)
    flux: float = 0.0


def enumerate_settings(labels: Sequence, scheme: str = "standard") -> list[MeasurementSetting]:
    """Product settings of a scheme, first label varying slowest.

    ``standard16``/``standard64`` use {H, V, D, R} on each of 2/3 photons;
    ``standard`` picks by label count and ``overcomplete`` adds L.
    """
    labels = tuple(sorted(labels))
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    arity, alphabet = SCHEMES[scheme]
    if arity is not None and len(labels) != arity:
        raise ValueError(f"scheme {scheme} needs {arity} qubits, got {len(labels)}")
    if not labels:
        raise ValueError("no qubits to measure")
    return [MeasurementSetting(labels, "".join(c))
            for c in itertools.product(alphabet, repeat=len(labels))]


def _common_labels(records: Sequence[CountRecord]) -> tuple:
    if not records:
        raise ValueError("no count records")
    labels = records[0].setting.labels
    if any(r.setting.labels != labels for r in records):
        raise ValueError("records measure different qubit sets")
    return labels


def simulate_counts(rho: DensityMatrix, settings: Iterable[MeasurementSetting],
                    total_scale: float, rng_seed: int | None = None,
                    noise: str = "poisson",
                    acquisition_time: float = DEFAULT_ACQUISITION_TIME) -> list[CountRecord]:
    """Expected (``noise="exact"``) or Poisson-sampled counts per setting."""
    if noise not in ("exact", "poisson"):
        raise ValueError(f"unknown noise model {noise!r}")
    if noise == "poisson" and rng_seed is None:
        raise ValueError("poisson counts need an explicit seed")
    rng = np.random.default_rng(rng_seed)
    records = []
    for setting in settings:
        if setting.labels != rho.labels:
            raise ValueError(f"setting labels {setting.labels} differ from state {rho.labels}")
        p = max(float(np.real(np.trace(setting.operator() @ rho.matrix))), 0.0)
        mean = total_scale * p
        counts = mean if noise == "exact" else int(rng.poisson(mean))
        records.append(CountRecord(setting, counts, acquisition_time, total_scale))
    return records


def _stack(records: Sequence[CountRecord]) -> tuple[np.ndarray, np.ndarray]:
    ops = np.array([r.setting.operator() for r in records])
    counts = np.array([float(r.counts) for r in records])
    return ops, counts


def _pauli_basis(n: int) -> np.ndarray:
    singles = [np.eye(2, dtype=complex), PAULI_X, PAULI_Y, PAULI_Z]
    out = []
    for combo in itertools.product(singles, repeat=n):
        m = np.array([[1.0]], dtype=complex)
        for s in combo:
            m = np.kron(m, s)
        out.append(m)
    return np.array(out)


@dataclass
class LinearInversionResult:
    rho: DensityMatrix
    flux: float
    positive: bool


def linear_inversion(records: Sequence[CountRecord]) -> LinearInversionResult:
    """Least-squares fit of ``counts ~ flux * Tr(P rho)``, then unit trace.

    The fitted unnormalized matrix absorbs the flux; positivity is not
    enforced and is reported in ``positive``.
    """
    labels = _common_labels(records)
    n = len(labels)
    ops, counts = _stack(records)
    basis = _pauli_basis(n)
    design = np.real(np.einsum("sij,kji->sk", ops, basis)) / 2 ** n
    if np.linalg.matrix_rank(design) < 4 ** n:
        raise ValueError("settings are not informationally complete")
    coeffs, *_ = np.linalg.lstsq(design, counts, rcond=None)
    flux = float(coeffs[0])
    if flux <= 0:
        raise ValueError("fitted flux is not positive")
    mat = np.einsum("k,kij->ij", coeffs / flux, basis) / 2 ** n
    mat = (mat + mat.conj().T) / 2
    rho = DensityMatrix(labels, mat)
    return LinearInversionResult(rho, flux, rho.min_eigenvalue() >= -POSITIVITY_SLACK)


def log_likelihood(rho: DensityMatrix, records: Sequence[CountRecord]) -> float:
    ops, counts = _stack(records)
    return _log_likelihood(_probabilities(ops, rho.matrix), counts)


def _probabilities(ops: np.ndarray, rho: np.ndarray) -> np.ndarray:
    p = np.real(np.einsum("sij,ji->s", ops, rho))
    return np.maximum(p, PROBABILITY_FLOOR)


def _log_likelihood(p: np.ndarray, counts: np.ndarray) -> float:
    # flux profiled out, measured against the saturated model p_i / sum p = f_i;
    # near zero at a good fit, which keeps small gains resolvable
    seen = counts > 0
    freqs = counts[seen] / counts.sum()
    return float(np.dot(counts[seen], np.log(p[seen] / (p.sum() * freqs))))


def project_to_density(mat: np.ndarray) -> np.ndarray:
    """Closest unit-trace positive matrix in Frobenius norm (eigenvalue simplex projection)."""
    mat = (mat + mat.conj().T) / 2
    vals, vecs = np.linalg.eigh(mat)
    desc = vals[::-1]
    cumulative = np.cumsum(desc) - 1.0
    k = np.arange(1, desc.size + 1)
    last = np.nonzero(desc - cumulative / k > 0)[0][-1]
    shift = cumulative[last] / (last + 1)
    clipped = np.maximum(vals - shift, 0.0)
    return (vecs * clipped) @ vecs.conj().T


class _Likelihood:
    """Profile log-likelihood; Hermitian unit-trace matrices in Pauli coordinates.

    ``rho = (I + sum_k x_k P_k) / d`` makes every probability affine in ``x``.
    """

    def __init__(self, ops: np.ndarray, counts: np.ndarray, n_qubits: int):
        self.ops = ops
        self.counts = counts
        self.total = counts.sum()
        self.freqs = counts / self.total
        self.g_inv = np.linalg.inv(ops.sum(axis=0))
        self.dim = 2 ** n_qubits
        self.basis = _pauli_basis(n_qubits)[1:]
        self.slopes = np.real(np.einsum("sij,kji->sk", ops, self.basis)) / self.dim

    def value(self, rho: np.ndarray) -> tuple[float, np.ndarray]:
        p = _probabilities(self.ops, rho)
        return _log_likelihood(p, self.counts), p

    def rrr_step(self, rho: np.ndarray, p: np.ndarray) -> np.ndarray:
        r_op = np.einsum("s,sij->ij", self.freqs / p, self.ops)
        step = self.g_inv @ r_op
        rho = step @ rho @ step.conj().T
        rho = (rho + rho.conj().T) / 2
        return rho / np.real(np.trace(rho))

    def coordinates(self, rho: np.ndarray) -> np.ndarray:
        return np.real(np.einsum("kij,ji->k", self.basis, rho))

    def matrix(self, x: np.ndarray) -> np.ndarray:
        return (np.eye(self.dim) + np.einsum("k,kij->ij", x, self.basis)) / self.dim

    def gradient(self, p: np.ndarray) -> np.ndarray:
        grad = np.einsum("s,sij->ij", self.counts / p, self.ops)
        return grad - self.total / p.sum() * self.ops.sum(axis=0)

    def newton_direction(self, p: np.ndarray, slopes: np.ndarray | None = None) -> np.ndarray:
        """Newton step for coordinates in which every probability is affine with `slopes`."""
        slopes = self.slopes if slopes is None else slopes
        s = slopes.sum(axis=0)
        total_p = p.sum()
        w = self.counts / p
        grad = slopes.T @ w - self.total * s / total_p
        hess = -(slopes.T * (w / p)) @ slopes + self.total * np.outer(s, s) / total_p ** 2
        direction, *_ = np.linalg.lstsq(hess, -grad, rcond=None)
        return direction


def _factor_step(lik: _Likelihood, rho: np.ndarray, ll: float):
    """Quasi-Newton polish over ``rho = A A^dagger / Tr``, started from the eigen-factor of rho.

    Zero eigenvalues stay zero, but the support can rotate, which is the
    direction a projected step handles worst near a rank-deficient optimum.
    """
    vals, vecs = np.linalg.eigh(rho)
    a0 = vecs * np.sqrt(np.maximum(vals, 0.0))
    d = lik.dim
    total = lik.total
    op_sum = lik.ops.sum(axis=0)

    def objective(x):
        a = (x[:d * d] + 1j * x[d * d:]).reshape(d, d)
        r = a @ a.conj().T
        p = _probabilities(lik.ops, r)
        value = lik.counts @ np.log(p) - total * math.log(p.sum())
        grad = 2.0 * (np.einsum("s,sij->ij", lik.counts / p, lik.ops) - total / p.sum() * op_sum) @ a
        return -value, -np.concatenate([grad.real.ravel(), grad.imag.ravel()])

    x0 = np.concatenate([a0.real.ravel(), a0.imag.ravel()])
    result = minimize(objective, x0, jac=True, method="L-BFGS-B",
                      options={"maxiter": FACTOR_MAX_ITERATIONS, "ftol": 1e-15, "gtol": 1e-12})
    a = (result.x[:d * d] + 1j * result.x[d * d:]).reshape(d, d)
    trial = a @ a.conj().T
    trial = (trial + trial.conj().T) / 2
    trial /= np.real(np.trace(trial))
    ll_trial, p_trial = lik.value(trial)
    return (trial, ll_trial, p_trial) if ll_trial > ll else None


def _newton_step(lik: _Likelihood, rho: np.ndarray, ll: float, p: np.ndarray):
    """Projected Newton step with step halving; None when no trial improves."""
    x = lik.coordinates(rho)
    direction = lik.newton_direction(p)
    t = 1.0
    for _ in range(NEWTON_HALVINGS):
        trial = project_to_density(lik.matrix(x + t * direction))
        ll_trial, p_trial = lik.value(trial)
        if ll_trial > ll:
            return trial, ll_trial, p_trial
        t /= 2.0
    return None


def _gradient_step(lik: _Likelihood, rho: np.ndarray, ll: float, p: np.ndarray,
                   step_size: float):
    """Projected-gradient step with Armijo backtracking; returns (result or None, step)."""
    grad = lik.gradient(p)
    for _ in range(40):
        trial = project_to_density(rho + step_size * grad)
        ll_trial, p_trial = lik.value(trial)
        ascent = np.real(np.vdot(grad, trial - rho))
        if ll_trial > ll and ll_trial >= ll + 1e-4 * ascent:
            return (trial, ll_trial, p_trial), step_size
        step_size /= 2.0
    return None, step_size


def iml_reconstruct(records: Sequence[CountRecord],
                    max_iterations: int = DEFAULT_MAX_ITERATIONS,
                    convergence_tol: float = DEFAULT_TOL,
                    method: str = "rrr+newton") -> ReconstructionResult:
    """Iterative maximum-likelihood estimate starting from the maximally mixed state.

    ``method="rrr"`` runs the bare R rho R map, which slows to a ``1/k`` rate
    when the optimum is rank deficient (pure-state data). The default
    ``"rrr+newton"`` follows each R rho R step with a projected Newton step.
    When Newton cannot improve, it tries a quasi-Newton polish over the
    factor of rho (boundary optima), then a projected-gradient step (outcomes
    of zero probability at the optimum). Extra steps are kept only when they
    raise the likelihood, so the likelihood never decreases.
    """
    if method not in ("rrr", "rrr+newton"):
        raise ValueError(f"unknown method {method!r}")
    labels = _common_labels(records)
    ops, counts = _stack(records)
    if counts.sum() <= 0:
        raise ValueError("zero total counts")
    lik = _Likelihood(ops, counts, len(labels))
    rho = maximally_mixed(labels).matrix
    ll, p = lik.value(rho)
    history = [ll]
    converged = False
    iterations = 0
    step_size = 1.0 / lik.total
    for iterations in range(1, max_iterations + 1):
        rho_next = lik.rrr_step(rho, p)
        ll_next, p_next = lik.value(rho_next)
        if method == "rrr+newton":
            if ll_next < ll:
                rho_next, ll_next, p_next = rho, ll, p
            polished = _newton_step(lik, rho_next, ll_next, p_next)
            if polished is None:
                polished = _factor_step(lik, rho_next, ll_next)
            if polished is None:
                polished, step_size = _gradient_step(lik, rho_next, ll_next, p_next,
                                                     4.0 * step_size)
            if polished is not None:
                rho_next, ll_next, p_next = polished
        if not math.isfinite(ll_next):
            raise FloatingPointError(f"non-finite log-likelihood at iteration {iterations}")
        rho, ll, p = rho_next, ll_next, p_next
        history.append(ll)
        if history[-1] - history[max(0, len(history) - 1 - STALL_WINDOW)] < convergence_tol:
            converged = True
            break
    flux = float(lik.total / p.sum())
    return ReconstructionResult(DensityMatrix(labels, rho), ll, iterations, converged,
                                history, flux)


def monte_carlo_uncertainty(records: Sequence[CountRecord],
                            metric: Callable[[DensityMatrix], float | Sequence[float]],
                            n_samples: int, rng_seed: int, resample: bool = True,
                            **iml_options):
    """Mean and sample standard deviation of `metric` over Poisson-resampled data.

    Sample ``i`` draws from its own generator spawned from `rng_seed`, so the
    result does not depend on evaluation order. `metric` may return a scalar
    or a sequence; the outputs have the same shape.
    """
    if n_samples < 2:
        raise ValueError("need at least two Monte Carlo samples")
    streams = np.random.SeedSequence(rng_seed).spawn(n_samples)
    values = []
    for i, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        if resample:
            sample = [CountRecord(r.setting, int(rng.poisson(r.counts)),
                                  r.acquisition_time, r.total_scale) for r in records]
        else:
            sample = list(records)
        try:
            rho = iml_reconstruct(sample, **iml_options).rho
            values.append(np.asarray(metric(rho), dtype=float))
        except Exception as exc:
            raise RuntimeError(f"Monte Carlo sample {i} failed: {exc}") from exc
    values = np.array(values)
    return values.mean(axis=0), values.std(axis=0, ddof=1)


def csv_header(n_qubits: int) -> list[str]:
    return [f"setting_q{i + 1}" for i in range(n_qubits)] + [
        "counts", "acquisition_time", "total_scale"]


def _format_number(x: float) -> str:
    if float(x).is_integer() and abs(x) < 2 ** 53:
        return str(int(x))
    return f"{x:.17g}"


def write_counts_csv(path: str | Path, records: Sequence[CountRecord]) -> None:
    labels = _common_labels(records)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(csv_header(len(labels)))
        for r in records:
            writer.writerow(list(r.setting.choices) + [
                _format_number(r.counts), _format_number(r.acquisition_time),
                _format_number(r.total_scale)])


def read_counts_csv(path: str | Path, labels: Sequence | None = None) -> list[CountRecord]:
    """Read records written by `write_counts_csv`; labels default to 1..n."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        columns = sorted((f for f in fields if f.startswith("setting_q")),
                         key=lambda f: int(f[len("setting_q"):]))
        if not columns or "counts" not in fields:
            raise ValueError(f"{path}: missing setting or counts columns")
        labels = tuple(labels) if labels is not None else tuple(range(1, len(columns) + 1))
        if len(labels) != len(columns):
            raise ValueError("label count does not match setting columns")
        records = []
        for row in reader:
            counts = float(row["counts"])
            records.append(CountRecord(
                MeasurementSetting(labels, "".join(row[c] for c in columns)),
                int(counts) if counts.is_integer() else counts,
                float(row.get("acquisition_time") or DEFAULT_ACQUISITION_TIME),
                float(row.get("total_scale") or 1.0),
            ))
    return records
