import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from eprw import protocol
from eprw.metrics import fidelity_to_pure, w_witness
from eprw.optics import FockState, evolve_fock, pdbs_transform, post_select_components
from eprw.protocol import (
    H5,
    V5,
    ConversionError,
    PdbsParams,
    conversion_amplitudes,
    convert,
    correction_filters,
    experiment_params,
    local_correction,
    optimal_params,
    run_conversion,
    success_probability,
    success_probability_grid,
    success_probability_v_branch_amplitudes,
    werner_epr,
)
from eprw.qstate import PAULI_X, DensityMatrix, apply_single_qubit, make_state, relabel, tensor

from strategies import interior, random_density, seeds

W3 = make_state((1, 4, 6), "W3")
EPR12 = make_state((1, 2), "EPR")
EPR34 = make_state((3, 4), "EPR")


# first-quantized oracle: photon 2 and photon 3 each pick an output port
def _single_photon(mu, nu):
    t = {0: mu, 1: nu}
    u2 = {(q, 5): math.sqrt(1 - t[q]) for q in (0, 1)} | {(q, 6): math.sqrt(t[q]) for q in (0, 1)}
    u3 = {(q, 5): math.sqrt(t[q]) for q in (0, 1)} | {(q, 6): -math.sqrt(1 - t[q]) for q in (0, 1)}
    return u2, u3


def which_path_maps(mu, nu):
    """(A, B): photon 2 -> 5 and 3 -> 6, or photon 2 -> 6 and 3 -> 5; qubits (1,2,3,4) -> (1,4,5,6)."""
    u2, u3 = _single_photon(mu, nu)
    a = np.zeros((16, 16))
    b = np.zeros((16, 16))
    for q1, q2, q3, q4 in itertools.product((0, 1), repeat=4):
        col = 8 * q1 + 4 * q2 + 2 * q3 + q4
        # A: mode 5 carries q2, mode 6 carries q3
        a[8 * q1 + 4 * q4 + 2 * q2 + q3, col] = u2[q2, 5] * u3[q3, 6]
        b[8 * q1 + 4 * q4 + 2 * q3 + q2, col] = u3[q3, 5] * u2[q2, 6]
    return a, b


def oracle_output(rho_in, mu, nu, xi, branch):
    a, b = which_path_maps(mu, nu)
    s = a + b
    out = xi ** 2 * s @ rho_in @ s.T + (1 - xi ** 2) * (a @ rho_in @ a.T + b @ rho_in @ b.T)
    bit = 0 if branch == H5 else 1
    keep = [i for i in range(16) if (i >> 1) & 1 == bit]
    sub = out[np.ix_(keep, keep)]  # qubits (1, 4, 6) remain in order
    rho = DensityMatrix((1, 4, 6), sub, normalized=False)
    for label in ((6,) if branch == H5 else (1, 4)):
        rho = apply_single_qubit(rho, label, PAULI_X)
    return rho


def eq1_ket(p):
    """Six-term post-selected ket on (1, 4, 5, 6) for EPR x EPR inputs."""
    amp = conversion_amplitudes(p)
    terms = {"HHHH": amp.c, "HVHV": amp.b, "VHHV": amp.a,
             "VVVV": amp.d, "HVVH": amp.a, "VHVH": amp.b}
    vec = np.zeros(16)
    for bits, x in terms.items():
        vec[int(bits.replace("H", "0").replace("V", "1"), 2)] = x
    return vec


def test_optimal_amplitudes_equal():
    amp = conversion_amplitudes(optimal_params())
    target = 1 / (2 * math.sqrt(5))
    for x in (amp.a, amp.b, amp.c, amp.d):
        assert abs(x) == pytest.approx(target, abs=1e-14)
    assert amp.b < 0


def test_balanced_amplitudes():
    amp = conversion_amplitudes(PdbsParams(0.5, 0.5))
    assert (amp.a, amp.b, amp.c, amp.d) == pytest.approx((0.25, -0.25, 0.0, 0.0))
    assert success_probability(PdbsParams(0.5, 0.5), H5) == 0.0


def test_experiment_point_amplitudes():
    amp = conversion_amplitudes(experiment_params())
    assert amp.b ** 2 == pytest.approx((9 - math.sqrt(17)) / 128, abs=1e-15)
    assert amp.c ** 2 == pytest.approx((9 - math.sqrt(17)) / 128, abs=1e-15)
    assert amp.d == 0.0


def test_success_probabilities():
    opt = optimal_params()
    assert success_probability(opt, H5) == pytest.approx(0.15, abs=1e-14)
    assert success_probability(opt, V5) == pytest.approx(0.15, abs=1e-14)
    assert success_probability_v_branch_amplitudes(opt) == pytest.approx(0.15, abs=1e-14)
    exp = experiment_params()
    assert success_probability(exp, H5) == pytest.approx(3 * (9 - math.sqrt(17)) / 128, abs=1e-15)
    assert success_probability(exp, V5) == 0.0


def test_params_validated():
    with pytest.raises(ValueError):
        PdbsParams(1.1, 0.5)
    with pytest.raises(ValueError):
        success_probability(optimal_params(), "X")


@given(interior, interior)
def test_grid_matches_scalar(mu, nu):
    p = PdbsParams(mu, nu)
    for branch in (H5, V5):
        assert success_probability_grid(mu, nu, branch) == pytest.approx(success_probability(p, branch))


@given(interior, interior)
def test_kept_subspace_weight_at_most_one(mu, nu):
    amp = conversion_amplitudes(PdbsParams(mu, nu))
    assert 2 * amp.a ** 2 + 2 * amp.b ** 2 + amp.c ** 2 + amp.d ** 2 <= 1 + 1e-12


def test_brute_force_grid_bound():
    g = np.linspace(0, 1, 1001)
    mu, nu = np.meshgrid(g, g, indexing="ij")
    p = success_probability_grid(mu, nu, H5)
    assert p.max() <= 0.15 + 1e-9
    i, j = np.unravel_index(np.argmax(p), p.shape)
    opt = optimal_params()
    candidates = [(opt.mu, opt.nu), (opt.nu, opt.mu)]
    assert min(max(abs(g[i] - m), abs(g[j] - n)) for m, n in candidates) <= 1e-3


def test_nu_half_slice_maximum():
    res = minimize_scalar(lambda m: -success_probability(PdbsParams(m, 0.5), H5),
                          bounds=(0.5, 1.0), method="bounded", options={"xatol": 1e-12})
    assert res.x == pytest.approx((7 + math.sqrt(17)) / 16, abs=1e-6)


@given(interior, interior)
@settings(max_examples=30)
def test_fock_engine_reproduces_six_terms(mu, nu):
    p = PdbsParams(mu, nu)
    fock = FockState.from_qubits(tensor(EPR12, EPR34))
    parts = post_select_components(evolve_fock(fock, pdbs_transform(mu, nu)), (1, 4, 5, 6))
    (ket,) = parts.values()
    assert np.allclose(ket.amplitudes, eq1_ket(p), atol=1e-12)


@given(seeds, seeds, interior, interior, st.floats(0, 1), st.sampled_from([H5, V5]))
@settings(max_examples=25)
def test_convert_matches_first_quantized_oracle(s1, s2, mu, nu, xi, branch):
    rho1 = random_density(s1, (1, 2))
    rho2 = random_density(s2, (3, 4))
    out = convert(rho1, rho2, PdbsParams(mu, nu), branch, xi)
    expected = oracle_output(np.kron(rho1.matrix, rho2.matrix), mu, nu, xi, branch)
    assert out.success_probability == pytest.approx(expected.trace(), abs=1e-12)
    assert np.allclose(out.state.matrix, expected.normalize().matrix, atol=1e-10)


def test_ideal_heralded_state_h5():
    p = optimal_params()
    out = convert(EPR12.to_density(), EPR34.to_density(), p, H5)
    ideal = protocol.ideal_branch_state(p, H5)
    assert out.success_probability == pytest.approx(ideal.norm() ** 2)
    assert fidelity_to_pure(out.state, ideal.normalize()) == pytest.approx(1.0, abs=1e-12)
    assert out.corrections == ((6, "swap_HV"),)


@pytest.mark.parametrize("params", [optimal_params(), experiment_params()])
def test_ideal_end_to_end(params):
    rho, prob = run_conversion(params)
    assert fidelity_to_pure(rho, W3) == pytest.approx(1.0, abs=1e-10)
    assert w_witness(rho) == pytest.approx(-1 / 3, abs=1e-10)
    assert prob == pytest.approx(success_probability(params, H5), abs=1e-12)


def test_v5_branch_at_optimum():
    rho, prob = run_conversion(optimal_params(), branch=V5)
    assert fidelity_to_pure(rho, W3) == pytest.approx(1.0, abs=1e-10)
    assert prob == pytest.approx(0.15, abs=1e-12)


def test_v5_branch_fails_at_experiment_point():
    with pytest.raises(ConversionError):
        run_conversion(experiment_params(), branch=V5)


def test_balanced_splitter_fails():
    with pytest.raises(ConversionError):
        correction_filters(PdbsParams(0.5, 0.5), H5)


def test_filters_at_experiment_point_attenuate_alice_only():
    p = experiment_params()
    f = correction_filters(p, H5)
    amp = conversion_amplitudes(p)
    assert f[1][1, 1] == pytest.approx(abs(amp.c) / abs(amp.a))
    assert f[4][1, 1] == pytest.approx(-1.0)  # phase flip carries b's sign
    assert f[6][1, 1] == pytest.approx(1.0)


def test_optimal_point_needs_no_attenuation():
    f = correction_filters(optimal_params(), H5)
    assert [abs(op[1, 1]) for op in f.values()] == pytest.approx([1, 1, 1])


def test_product_inputs_stay_separable():
    hh12 = make_state((1, 2), "H").to_density()
    hh34 = make_state((3, 4), "H").to_density()
    out = convert(hh12, hh34, optimal_params(), H5)
    assert fidelity_to_pure(out.state, make_state((1, 4, 6), amplitudes=np.eye(8)[1])) == pytest.approx(1.0)


@pytest.mark.parametrize("perm", list(itertools.permutations((1, 4, 6))))
def test_ideal_output_permutation_symmetric(perm):
    rho, _ = run_conversion(optimal_params())
    moved = relabel(rho, dict(zip((1, 4, 6), perm)))
    assert fidelity_to_pure(moved, W3) == pytest.approx(1.0, abs=1e-10)


def test_fidelity_monotone_in_overlap():
    p = experiment_params()
    fids = [fidelity_to_pure(run_conversion(p, xi=xi)[0], W3) for xi in np.linspace(1, 0, 11)]
    assert all(x >= y - 1e-12 for x, y in zip(fids, fids[1:]))


@given(st.floats(0.25, 1.0))
def test_werner_fidelity(f):
    rho = werner_epr((1, 2), f)
    assert fidelity_to_pure(rho, EPR12) == pytest.approx(f, abs=1e-12)


def test_mismatch_rung_frozen():
    # frozen from the first-quantized oracle
    rho, _ = run_conversion(experiment_params(), xi=math.sqrt(0.885))
    assert fidelity_to_pure(rho, W3) == pytest.approx(0.8895935375711808, abs=1e-12)


def test_combined_rung_frozen():
    rho, _ = run_conversion(experiment_params(), 0.967, 0.976, math.sqrt(0.885))
    assert fidelity_to_pure(rho, W3) == pytest.approx(0.8425183326923377, abs=1e-12)


def test_combined_rung_matches_oracle():
    p = experiment_params()
    rho_in = np.kron(werner_epr((1, 2), 0.967).matrix, werner_epr((3, 4), 0.976).matrix)
    rho = oracle_output(rho_in, p.mu, p.nu, math.sqrt(0.885), H5).normalize()
    for label, op in correction_filters(p, H5).items():
        rho = apply_single_qubit(rho, label, op)
    assert fidelity_to_pure(rho.normalize(), W3) == pytest.approx(0.8425183326923377, abs=1e-12)


def test_source_label_checks():
    with pytest.raises(ValueError):
        convert(EPR34, EPR12, optimal_params())
    with pytest.raises(ValueError):
        convert(EPR12, EPR34, optimal_params(), xi=1.5)
