"""Sparse Pauli-string algebra over an n-qubit register.

Conventions used throughout the package:

* Qubits are numbered 1..n.  Basis index ``i`` stores qubit ``k`` in bit
  ``k - 1`` of ``i`` (least significant bit = qubit 1).
* ``sigma^z |0> = +|0>``, ``sigma^z |1> = -|1>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

REGISTER_CAP = 20
# below this dimension dense storage is fine; purely a performance knob
DENSE_DIM_MAX = 64

FULL_REGISTER = "full-register"

_PAULI = {
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


class BasisMismatchError(ValueError):
    """Operator and state live on different bases."""


class DimensionMismatchError(ValueError):
    """Operator and state dimensions are incompatible."""


@dataclass(frozen=True)
class PauliTerm:
    """A single weighted Pauli string, e.g. ``-5.0 * Z_1 Z_2``."""

    coefficient: float
    factors: tuple

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple((int(q), str(a)) for q, a in self.factors))
        if not np.isfinite(self.coefficient):
            raise ValueError("coefficient must be finite")
        qubits = [q for q, _ in self.factors]
        if len(set(qubits)) != len(qubits):
            raise ValueError(f"duplicate qubit in term: {qubits}")
        for q, axis in self.factors:
            if q < 1:
                raise ValueError(f"qubit index {q} out of range (1-based)")
            if axis not in _PAULI:
                raise ValueError(f"unknown Pauli axis {axis!r}")


def _single_qubit(axis, qubit, n_qubits):
    """Pauli ``axis`` on ``qubit`` embedded in the n-qubit register."""
    left = sp.identity(2 ** (n_qubits - qubit), format="csr", dtype=complex)
    right = sp.identity(2 ** (qubit - 1), format="csr", dtype=complex)
    return sp.kron(left, sp.kron(sp.csr_matrix(_PAULI[axis]), right, format="csr"), format="csr")


@dataclass(frozen=True)
class HermitianOperator:
    """Sparse (or small dense) Hermitian matrix tagged with its basis."""

    matrix: object
    basis_tag: str = FULL_REGISTER

    def __post_init__(self):
        m = self.matrix
        if sp.issparse(m):
            dev = abs(m - m.conj().T)
            scale = max(abs(m).max(), 1.0) if m.nnz else 1.0
            dev = dev.max() if dev.nnz else 0.0
        else:
            m = np.asarray(m)
            object.__setattr__(self, "matrix", m)
            scale = max(np.abs(m).max(), 1.0) if m.size else 1.0
            dev = np.abs(m - m.conj().T).max() if m.size else 0.0
        if dev > 1e-12 * scale:
            raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e})")

    @property
    def dimension(self):
        return self.matrix.shape[0]

    def dense(self):
        m = self.matrix
        return m.toarray() if sp.issparse(m) else np.asarray(m)

    def sparse(self):
        m = self.matrix
        return m if sp.issparse(m) else sp.csr_matrix(m)

    def __add__(self, other):
        if self.basis_tag != other.basis_tag:
            raise BasisMismatchError(f"{self.basis_tag} vs {other.basis_tag}")
        return HermitianOperator(self.matrix + other.matrix, self.basis_tag)

    def __mul__(self, c):
        return HermitianOperator(self.matrix * float(c), self.basis_tag)

    __rmul__ = __mul__


@dataclass(frozen=True)
class QuantumState:
    """Pure state (unit vector) or mixed state (density matrix)."""

    kind: str  # "pure" | "mixed"
    amplitudes: np.ndarray
    basis_tag: str = FULL_REGISTER
    normalized: bool = True

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        object.__setattr__(self, "amplitudes", amp)
        if self.kind == "pure":
            if amp.ndim != 1:
                raise ValueError("pure state must be a vector")
            if self.normalized and abs(np.vdot(amp, amp).real - 1.0) > 1e-10:
                raise ValueError("pure state is not normalized")
        elif self.kind == "mixed":
            if amp.ndim != 2 or amp.shape[0] != amp.shape[1]:
                raise ValueError("mixed state must be a square matrix")
            if self.normalized:
                if abs(np.trace(amp).real - 1.0) > 1e-8:
                    raise ValueError("density matrix trace differs from 1")
                if np.abs(amp - amp.conj().T).max() > 1e-10:
                    raise ValueError("density matrix is not Hermitian")
                if np.linalg.eigvalsh(amp).min() < -1e-8:
                    raise ValueError("density matrix has a negative eigenvalue")
        else:
            raise ValueError(f"unknown state kind {self.kind!r}")

    @property
    def dimension(self):
        return self.amplitudes.shape[0]


def pure_state(amplitudes, basis_tag=FULL_REGISTER):
    amp = np.asarray(amplitudes, dtype=complex)
    nrm = np.linalg.norm(amp)
    if nrm == 0:
        raise ValueError("zero vector is not a state")
    return QuantumState("pure", amp / nrm, basis_tag)


def basis_state(index, dimension, basis_tag=FULL_REGISTER):
    amp = np.zeros(dimension, dtype=complex)
    amp[index] = 1.0
    return QuantumState("pure", amp, basis_tag)


def assemble_operator(terms, n_qubits):
    """Assemble ``sum_k c_k P_k`` as a sparse Hermitian operator.

    Terms are summed in the order given; the result is stored as CSR with
    sorted indices, so the entry layout is deterministic.
    """
    if n_qubits > REGISTER_CAP:
        raise ValueError(f"register cap exceeded: {n_qubits} > {REGISTER_CAP}")
    if n_qubits < 1:
        raise ValueError("need at least one qubit")
    dim = 2**n_qubits
    total = sp.csr_matrix((dim, dim), dtype=complex)
    for term in terms:
        if not isinstance(term, PauliTerm):
            term = PauliTerm(*term)
        part = sp.identity(dim, format="csr", dtype=complex)
        for q, axis in term.factors:
            if q > n_qubits:
                raise ValueError(f"qubit {q} out of range for {n_qubits}-qubit register")
            part = part @ _single_qubit(axis, q, n_qubits)
        total = total + term.coefficient * part
    total = total.tocsr()
    total.eliminate_zeros()
    total.sort_indices()
    return HermitianOperator(total)


def _check_compatible(op, state):
    if op.basis_tag != state.basis_tag:
        raise BasisMismatchError(f"{op.basis_tag} vs {state.basis_tag}")
    if op.dimension != state.dimension:
        raise DimensionMismatchError(f"{op.dimension} vs {state.dimension}")


def expectation_value(op, state):
    """<psi|O|psi> for pure states, Tr(rho O) for mixed ones."""
    _check_compatible(op, state)
    m = op.matrix
    if state.kind == "pure":
        val = np.vdot(state.amplitudes, m @ state.amplitudes)
    else:
        if sp.issparse(m):
            val = (m.multiply(state.amplitudes.T)).sum()
        else:
            val = np.sum(m * state.amplitudes.T)
    val = complex(val)
    assert abs(val.imag) <= 1e-10 * max(1.0, abs(val.real)), "non-real expectation value"
    return val.real


def apply_to_state(op, state):
    """Apply the operator; the result is flagged unnormalized."""
    _check_compatible(op, state)
    m = op.matrix
    if state.kind == "pure":
        out = m @ state.amplitudes
    else:
        out = m @ state.amplitudes @ m.conj().T if sp.issparse(m) else m @ state.amplitudes @ m.conj().T
    return QuantumState(state.kind, np.asarray(out), state.basis_tag, normalized=False)
