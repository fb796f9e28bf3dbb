"""Pauli-string assembly, state containers, and expectation values."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dwsim.operators import (
    BasisMismatchError,
    DimensionMismatchError,
    HermitianOperator,
    PauliTerm,
    QuantumState,
    apply_to_state,
    assemble_operator,
    basis_state,
    expectation_value,
    pure_state,
)

I2 = np.eye(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)


def embed(mat_1q, qubit, n_qubits):
    """Reference embedding: qubit 1 is the least significant bit."""
    out = np.array([[1.0]], dtype=complex)
    for q in range(n_qubits, 0, -1):
        out = np.kron(out, mat_1q if q == qubit else I2)
    return out


class TestPauliTerm:
    def test_duplicate_qubit_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            PauliTerm(1.0, ((1, "Z"), (1, "X")))

    def test_unknown_axis_rejected(self):
        with pytest.raises(ValueError, match="axis"):
            PauliTerm(1.0, ((1, "Q"),))

    def test_zero_based_index_rejected(self):
        with pytest.raises(ValueError, match="out of range"):
            PauliTerm(1.0, ((0, "Z"),))

    def test_nonfinite_coefficient_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            PauliTerm(float("nan"), ((1, "Z"),))


class TestAssemble:
    def test_z_sign_convention(self):
        # sigma^z |0> = +|0>: the diagonal entry at index 0 is +1
        op = assemble_operator([PauliTerm(1.0, ((1, "Z"),))], 1)
        assert np.allclose(op.dense(), Z)

    def test_qubit_one_is_least_significant_bit(self):
        op = assemble_operator([PauliTerm(1.0, ((1, "Z"),))], 2)
        assert np.allclose(np.diag(op.dense()), [1, -1, 1, -1])
        op = assemble_operator([PauliTerm(1.0, ((2, "Z"),))], 2)
        assert np.allclose(np.diag(op.dense()), [1, 1, -1, -1])

    def test_matches_reference_kron(self):
        terms = [
            PauliTerm(0.5, ((1, "Z"), (2, "Z"))),
            PauliTerm(0.3, ((3, "X"),)),
            PauliTerm(-0.2, ((2, "Y"), (3, "Y"))),
        ]
        op = assemble_operator(terms, 3)
        ref = (
            0.5 * embed(Z, 1, 3) @ embed(Z, 2, 3)
            + 0.3 * embed(X, 3, 3)
            - 0.2 * embed(Y, 2, 3) @ embed(Y, 3, 3)
        )
        assert np.allclose(op.dense(), ref)

    def test_plain_tuples_accepted(self):
        op = assemble_operator([(1.5, ((1, "X"),))], 1)
        assert np.allclose(op.dense(), 1.5 * X)

    def test_register_cap(self):
        with pytest.raises(ValueError, match="cap"):
            assemble_operator([], 21)

    def test_out_of_register_qubit(self):
        with pytest.raises(ValueError, match="out of range"):
            assemble_operator([PauliTerm(1.0, ((3, "Z"),))], 2)

    def test_deterministic_layout(self):
        terms = [PauliTerm(1.0, ((1, "X"),)), PauliTerm(0.5, ((2, "Z"),))]
        a = assemble_operator(terms, 2).sparse()
        b = assemble_operator(terms, 2).sparse()
        assert np.array_equal(a.indptr, b.indptr)
        assert np.array_equal(a.indices, b.indices)
        assert np.array_equal(a.data, b.data)


class TestHermitianOperator:
    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError, match="Hermitian"):
            HermitianOperator(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_add_requires_same_basis(self):
        a = HermitianOperator(np.eye(2), basis_tag="a")
        b = HermitianOperator(np.eye(2), basis_tag="b")
        with pytest.raises(BasisMismatchError):
            a + b

    def test_scalar_multiply(self):
        a = HermitianOperator(np.diag([1.0, 2.0]))
        assert np.allclose((3 * a).dense(), np.diag([3.0, 6.0]))


class TestStates:
    def test_pure_state_normalizes(self):
        s = pure_state([3.0, 4.0])
        assert np.allclose(np.abs(s.amplitudes), [0.6, 0.8])

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError, match="zero"):
            pure_state([0.0, 0.0])

    def test_unnormalized_pure_rejected(self):
        with pytest.raises(ValueError, match="normalized"):
            QuantumState("pure", np.array([1.0, 1.0]))

    def test_mixed_validation(self):
        with pytest.raises(ValueError, match="trace"):
            QuantumState("mixed", np.diag([1.0, 1.0]))
        with pytest.raises(ValueError, match="negative eigenvalue"):
            QuantumState("mixed", np.diag([1.5, -0.5]))

    def test_basis_state(self):
        s = basis_state(2, 4)
        assert s.amplitudes[2] == 1.0 and abs(s.amplitudes).sum() == 1.0


class TestExpectation:
    def test_pure_and_mixed_agree(self):
        rng = np.random.default_rng(3)
        op = assemble_operator(
            [PauliTerm(0.7, ((1, "Z"),)), PauliTerm(0.2, ((1, "X"), (2, "X")))], 2
        )
        amp = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi = pure_state(amp)
        rho = QuantumState("mixed", np.outer(psi.amplitudes, psi.amplitudes.conj()))
        assert expectation_value(op, psi) == pytest.approx(expectation_value(op, rho), abs=1e-12)

    def test_basis_mismatch(self):
        op = HermitianOperator(np.eye(2), basis_tag="other")
        with pytest.raises(BasisMismatchError):
            expectation_value(op, basis_state(0, 2))

    def test_dimension_mismatch(self):
        op = HermitianOperator(np.eye(4))
        with pytest.raises(DimensionMismatchError):
            expectation_value(op, basis_state(0, 2))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=7), st.integers(min_value=0, max_value=10**6))
    def test_identity_expectation_is_one(self, index, seed):
        rng = np.random.default_rng(seed)
        amp = rng.normal(size=8) + 1j * rng.normal(size=8)
        amp[index] += 1.0  # guard against a zero draw
        psi = pure_state(amp)
        op = HermitianOperator(np.eye(8))
        assert expectation_value(op, psi) == pytest.approx(1.0, abs=1e-10)


class TestApply:
    def test_apply_marks_unnormalized(self):
        op = assemble_operator([PauliTerm(2.0, ((1, "X"),))], 1)
        out = apply_to_state(op, basis_state(0, 2))
        assert not out.normalized
        assert np.allclose(out.amplitudes, [0.0, 2.0])

    def test_apply_mixed_conjugates(self):
        op = assemble_operator([PauliTerm(1.0, ((1, "Y"),))], 1)
        rho = QuantumState("mixed", np.diag([0.25, 0.75]))
        out = apply_to_state(op, rho)
        assert np.allclose(out.amplitudes, np.diag([0.75, 0.25]))
