import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eprw.qstate import (
    PAULI_X,
    DensityMatrix,
    StateVector,
    apply_single_qubit,
    as_density,
    basis_ket,
    expectation,
    make_state,
    maximally_mixed,
    partial_trace,
    projector,
    relabel,
    tensor,
)

from strategies import random_density, random_ket, seeds


def loop_partial_trace(m, n, keep):
    """Index-by-index oracle for the reduced matrix."""
    kept = [i for i in range(n) if i in keep]
    traced = [i for i in range(n) if i not in keep]
    dk = 2 ** len(kept)
    out = np.zeros((dk, dk), dtype=complex)
    for r in itertools.product((0, 1), repeat=len(kept)):
        for c in itertools.product((0, 1), repeat=len(kept)):
            total = 0.0
            for t in itertools.product((0, 1), repeat=len(traced)):
                row = [0] * n
                col = [0] * n
                for i, b in zip(kept, r):
                    row[i] = b
                for i, b in zip(kept, c):
                    col[i] = b
                for i, b in zip(traced, t):
                    row[i] = col[i] = b
                ri = int("".join(map(str, row)), 2)
                ci = int("".join(map(str, col)), 2)
                total += m[ri, ci]
            out[int("".join(map(str, r)) or "0", 2), int("".join(map(str, c)) or "0", 2)] = total
    return out


def test_named_states():
    w = make_state((1, 4, 6), "W3")
    assert w.amplitude("HHV") == pytest.approx(1 / np.sqrt(3))
    assert w.amplitude("VVV") == 0
    epr = make_state((1, 2), "EPR")
    assert abs(epr.amplitude("HH")) ** 2 == pytest.approx(0.5)
    ghz = make_state((1, 2, 3), "GHZ3")
    assert ghz.amplitude("VVV") == pytest.approx(1 / np.sqrt(2))


def test_product_of_one_photon_states():
    d = make_state((1, 2), "D")
    assert np.allclose(d.amplitudes, np.full(4, 0.5))


def test_arity_mismatch_raises():
    with pytest.raises(ValueError):
        make_state((1, 2), "W3")


def test_custom_state_is_normalized():
    s = make_state((1,), amplitudes=[3, 4])
    assert s.norm() == pytest.approx(1.0)


def test_labels_are_sorted_on_construction():
    # amplitudes given in (3, 1) order: |H>_3 |V>_1
    s = StateVector((3, 1), basis_ket("HV"))
    assert s.labels == (1, 3)
    assert s.amplitude("VH") == 1


def test_unnormalized_flag_enforced():
    with pytest.raises(ValueError):
        StateVector((1,), np.array([1.0, 1.0]))
    assert StateVector((1,), np.array([1.0, 1.0]), normalized=False).norm() == pytest.approx(np.sqrt(2))


def test_density_rejects_non_hermitian():
    with pytest.raises(ValueError):
        DensityMatrix((1,), np.array([[0.5, 1.0], [0.0, 0.5]]))


def test_maximally_mixed_purity():
    assert maximally_mixed((1, 2, 3)).purity() == pytest.approx(1 / 8)


def test_tensor_rejects_overlap():
    with pytest.raises(ValueError):
        tensor(make_state((1,), "H"), make_state((1,), "V"))


def test_tensor_interleaves_labels():
    s = tensor(make_state((1, 4), "EPR"), make_state((2,), "V"))
    assert s.labels == (1, 2, 4)
    assert s.amplitude("HVH") == pytest.approx(1 / np.sqrt(2))
    assert s.amplitude("VVV") == pytest.approx(1 / np.sqrt(2))


def test_w_marginal():
    rho = partial_trace(make_state((1, 4, 6), "W3"), (1, 4))
    expected = np.array([[1, 0, 0, 0], [0, 1, 1, 0], [0, 1, 1, 0], [0, 0, 0, 0]]) / 3
    assert np.allclose(rho.matrix, expected)


@given(seeds, st.sets(st.integers(0, 2), min_size=1, max_size=3))
def test_partial_trace_matches_loop(seed, keep):
    rho = random_density(seed, (0, 1, 2))
    got = partial_trace(rho, keep).matrix
    assert np.allclose(got, loop_partial_trace(rho.matrix, 3, keep), atol=1e-12)


@given(seeds)
def test_partial_trace_preserves_trace(seed):
    rho = random_density(seed, (1, 4, 6))
    for keep in ((1,), (4, 6), (1, 4, 6)):
        assert partial_trace(rho, keep).trace() == pytest.approx(1.0, abs=1e-12)


def test_partial_trace_unknown_label():
    with pytest.raises(ValueError):
        partial_trace(make_state((1, 2), "EPR"), (3,))


@given(seeds)
def test_pure_state_density_is_rank_one(seed):
    rho = random_ket(seed, (1, 2, 3)).to_density()
    assert rho.purity() == pytest.approx(1.0)
    assert rho.is_positive()


def test_apply_single_qubit_does_not_renormalize():
    s = apply_single_qubit(make_state((1,), "D"), 1, np.diag([1.0, 0.0]))
    assert not s.normalized
    assert s.norm() ** 2 == pytest.approx(0.5)


def test_swap_on_one_qubit():
    s = apply_single_qubit(make_state((1, 2), "H"), 2, PAULI_X)
    assert s.amplitude("HV") == 1


def test_relabel_and_projector():
    s = relabel(make_state((1, 2), "EPR"), {2: 5})
    assert s.labels == (1, 5)
    assert expectation(s, projector("HH")).real == pytest.approx(0.5)
    assert expectation(as_density(s), projector("DD")).real == pytest.approx(0.5)
    # circular projectors on EPR: <RR> = 0, <RL> = 1/2
    assert expectation(s, projector("RR")).real == pytest.approx(0.0, abs=1e-15)
    assert expectation(s, projector("RL")).real == pytest.approx(0.5)


def test_circular_state_convention():
    assert np.allclose(make_state((5,), "R").amplitudes, np.array([1, -1j]) / np.sqrt(2))
    assert np.allclose(make_state((5,), "L").amplitudes, np.array([1, 1j]) / np.sqrt(2))


def test_two_epr_pairs():
    s = tensor(make_state((1, 2), "EPR"), make_state((3, 4), "EPR"))
    for bits in ("HHHH", "HHVV", "VVHH", "VVVV"):
        assert s.amplitude(bits) == pytest.approx(0.5)
    assert np.sum(np.abs(s.amplitudes) > 0) == 4


def test_epr_marginal_is_maximally_mixed():
    assert np.allclose(partial_trace(make_state((1, 2), "EPR"), (1,)).matrix, np.eye(2) / 2)


def test_w_marginal_on_46():
    rho = partial_trace(make_state((1, 4, 6), "W3"), (4, 6))
    psi_plus = (basis_ket("HV") + basis_ket("VH")) / np.sqrt(2)
    expected = np.outer(basis_ket("HH"), basis_ket("HH")) / 3 + 2 / 3 * np.outer(psi_plus, psi_plus)
    assert np.allclose(rho.matrix, expected, atol=1e-12)


def test_partial_trace_identity_case():
    rho = random_density(3, (1, 2, 3))
    assert np.allclose(partial_trace(rho, (1, 2, 3)).matrix, rho.matrix)


@given(seeds, seeds)
def test_tensor_then_trace_recovers_factor(s1, s2):
    a = random_density(s1, (1, 2))
    b = random_density(s2, (3,))
    assert np.allclose(partial_trace(tensor(a, b), (1, 2)).matrix, a.matrix, atol=1e-12)


@given(seeds, seeds)
def test_tensor_norm_multiplicative(s1, s2):
    a = StateVector((1,), random_ket(s1, (1,)).amplitudes * 2.0, normalized=False)
    b = StateVector((2, 3), random_ket(s2, (2, 3)).amplitudes * 0.5, normalized=False)
    assert tensor(a, b).norm() == pytest.approx(a.norm() * b.norm())


def test_phase_flip_is_involution_and_filter_projects():
    z = np.diag([1.0, -1.0])
    s = make_state((1, 4, 6), "W3")
    back = apply_single_qubit(apply_single_qubit(s, 4, z), 4, z)
    assert np.allclose(back.amplitudes, s.amplitudes)
    h = apply_single_qubit(make_state((1,), "D"), 1, np.diag([1.0, 0.0]))
    assert np.allclose(h.amplitudes, [1 / np.sqrt(2), 0])


def test_apply_unknown_label():
    with pytest.raises(ValueError):
        apply_single_qubit(make_state((1,), "H"), 2, PAULI_X)


@given(seeds, st.floats(0, 2 * np.pi), st.floats(0, np.pi))
def test_unitary_preserves_trace_and_norm(seed, phi, theta):
    u = np.array([[np.cos(theta), -np.exp(1j * phi) * np.sin(theta)],
                  [np.exp(-1j * phi) * np.sin(theta), np.cos(theta)]])
    psi = random_ket(seed, (1, 2, 3))
    assert apply_single_qubit(psi, 2, u).norm() == pytest.approx(1.0, abs=1e-12)
    assert apply_single_qubit(psi.to_density(), 3, u).trace() == pytest.approx(1.0, abs=1e-12)


@given(seeds)
def test_label_order_independence(seed):
    psi = random_ket(seed, (1, 2, 3))
    # same physical state written with its labels listed in another order
    t = psi.amplitudes.reshape(2, 2, 2).transpose(2, 0, 1).reshape(8)
    shuffled = StateVector((3, 1, 2), t)
    assert np.allclose(shuffled.amplitudes, psi.amplitudes)
    w = make_state((1, 2, 3), "W3")
    assert abs(expectation(shuffled, w.to_density().matrix)) == pytest.approx(
        abs(expectation(psi, w.to_density().matrix)))
