"""Simulator checks against analytic cases and a dense matrix-chain oracle."""

import math

import numpy as np
import pytest

from qasa import qsim
from qasa.selftest import oracle_apply, random_circuit, random_state
from tests.conftest import random_statevector


def test_zero_state_and_expectations():
    s = qsim.zero_state(3)
    assert s.amplitudes[0] == 1.0
    for q in range(3):
        assert qsim.expectation_z(s, q) == 1.0


def test_amplitude_encode_basis_state():
    s = qsim.amplitude_encode([1, 0, 0, 0])
    np.testing.assert_array_equal(s.amplitudes, [1, 0, 0, 0])
    assert s.n_qubits == 2


def test_amplitude_encode_normalizes():
    s = qsim.amplitude_encode([3, 4])
    np.testing.assert_allclose(s.amplitudes, [0.6, 0.8], atol=1e-15)


def test_amplitude_encode_pads_to_power_of_two():
    s = qsim.amplitude_encode([1, 1, 1])
    want = np.array([1, 1, 1, 0]) / math.sqrt(3)
    np.testing.assert_allclose(s.amplitudes, want, atol=1e-15)


def test_amplitude_encode_rejects_zero_vector():
    with pytest.raises(ValueError, match="zero vector"):
        qsim.amplitude_encode([0.0, 0.0])


def test_ry_identity_and_flip(kernel_backend):
    s = qsim.zero_state(1)
    np.testing.assert_allclose(qsim.apply_ry(s, 0, 0.0).amplitudes, s.amplitudes)
    flipped = qsim.apply_ry(s, 0, math.pi)
    np.testing.assert_allclose(flipped.amplitudes, [0, 1], atol=1e-15)
    half = qsim.apply_ry(s, 0, math.pi / 2)
    np.testing.assert_allclose(half.amplitudes, [1 / math.sqrt(2)] * 2, atol=1e-15)


def test_ry_expectation_matches_cosine(kernel_backend):
    rng = np.random.default_rng(5)
    for theta in rng.uniform(-2 * math.pi, 2 * math.pi, 50):
        s = qsim.apply_ry(qsim.zero_state(1), 0, theta)
        assert abs(qsim.expectation_z(s, 0) - math.cos(theta)) < 1e-12


def test_rz_leaves_z_expectations(kernel_backend):
    rng = np.random.default_rng(6)
    s = qsim.Statevector(random_statevector(rng, 2), 2)
    before = [qsim.expectation_z(s, q) for q in range(2)]
    rotated = qsim.apply_rz(s, 0, 1.234)
    after = [qsim.expectation_z(rotated, q) for q in range(2)]
    np.testing.assert_allclose(before, after, atol=1e-14)


def test_rz_phases_on_superposition():
    plus = qsim.apply_ry(qsim.zero_state(1), 0, math.pi / 2)
    rotated = qsim.apply_rz(plus, 0, math.pi)
    want = np.array([np.exp(-0.5j * math.pi), np.exp(0.5j * math.pi)]) / math.sqrt(2)
    np.testing.assert_allclose(rotated.amplitudes, want, atol=1e-15)


def test_cnot_truth_table():
    # qubit 0 is the most significant bit: |10> flips to |11>
    s10 = qsim.apply_ry(qsim.zero_state(2), 0, math.pi)
    out = qsim.apply_cnot(s10, 0, 1)
    np.testing.assert_allclose(np.abs(out.amplitudes), [0, 0, 0, 1], atol=1e-15)
    s00 = qsim.zero_state(2)
    np.testing.assert_array_equal(qsim.apply_cnot(s00, 0, 1).amplitudes, s00.amplitudes)


def test_cnot_is_involution(kernel_backend):
    rng = np.random.default_rng(7)
    s = qsim.Statevector(random_statevector(rng, 3), 3)
    twice = qsim.apply_cnot(qsim.apply_cnot(s, 1, 2), 1, 2)
    np.testing.assert_allclose(twice.amplitudes, s.amplitudes, atol=1e-15)


def test_cnot_rejects_equal_indices():
    with pytest.raises(ValueError):
        qsim.apply_cnot(qsim.zero_state(2), 1, 1)


def test_run_circuit_empty_is_identity():
    rng = np.random.default_rng(8)
    s = qsim.Statevector(random_statevector(rng, 2), 2)
    np.testing.assert_array_equal(qsim.run_circuit(s, []).amplitudes, s.amplitudes)


def test_run_circuit_matches_matrix_oracle(kernel_backend):
    rng = np.random.default_rng(9)
    for _ in range(60):
        n = int(rng.integers(1, 4))
        state = random_state(rng, n)
        ops = random_circuit(rng, n, int(rng.integers(1, 31)))
        got = qsim.run_circuit(state, ops).amplitudes
        want = oracle_apply(state.amplitudes, ops, n)
        np.testing.assert_allclose(got, want, atol=1e-10)


def test_norm_preserved_after_many_gates(kernel_backend):
    rng = np.random.default_rng(10)
    state = random_state(rng, 3)
    ops = random_circuit(rng, 3, 1000)
    out = qsim.run_circuit(state, ops)
    assert abs(np.linalg.norm(out.amplitudes) - 1.0) < 1e-10


def test_expectation_bounds_on_random_states():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(1, 5))
        s = qsim.Statevector(random_statevector(rng, n), n)
        for q in range(n):
            assert -1.0 <= qsim.expectation_z(s, q) <= 1.0


def test_qubit_ordering_round_trip():
    # amplitude index 0b01 on 2 qubits means qubit 1 set: <Z_0>=+1, <Z_1>=-1
    s = qsim.amplitude_encode([0, 1, 0, 0])
    assert qsim.expectation_z(s, 0) == 1.0
    assert qsim.expectation_z(s, 1) == -1.0


def test_sampled_expectation_converges():
    rng = np.random.default_rng(12)
    s = qsim.apply_ry(qsim.zero_state(1), 0, 1.0)
    est = qsim.expectation_z_sampled(s, 0, shots=200_000, rng=rng)
    assert abs(est - math.cos(1.0)) < 0.01


def test_statevector_validates_norm():
    with pytest.raises(ValueError, match="norm"):
        qsim.Statevector(np.array([1.0, 1.0]), 1)
