"""Domain-wall encoding of fermion chains into Ising chains.

A chain of N sites maps to N-1 qubits (open boundary).  A particle on
site n is a domain wall between qubits n-1 and n of the extended string
(v_L, q_1, ..., q_{N-1}, v_R), where the virtual spins are fixed to
v_L = 0 and v_R = 1 (odd particle-number parity) or v_R = 0 (even).

Periodic chains are realized by doubling: the parameter lists are tiled
twice and the 2N qubits close into a ring with no virtual spins.

The encoded Ising Hamiltonian reproduces the fermionic M-particle block
exactly up to the constant ``(n_sites - 2M) J - sum(v)/4 - sum(eps)/2``;
the mapping error of dynamics comes only from the off-block elements.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.sparse as sp

from .chains import FermiChainSpec, occupation_basis
from .operators import FULL_REGISTER, HermitianOperator, PauliTerm, QuantumState, assemble_operator


@dataclass(frozen=True)
class IsingChainSpec:
    """Fields and couplings of the encoding Ising chain.

    ``h``/``Jnn``/``Jnnn`` follow the qubit chain; for the doubled ring
    Jnn[i] couples (i, i+1 mod L) and Jnnn[i] couples (i, i+2 mod L).
    ``constant`` collects virtual-virtual coupler terms (nonzero only for
    two-site chains).  The originating fermi spec is kept so the chain
    can be re-encoded after parameter rescaling.
    """

    n_qubits: int
    h: tuple
    Jnn: tuple
    Jnnn: tuple
    tx: tuple
    J: float
    gauge: str = "ferro"
    parity: str = "odd"
    boundary: str = "open"  # "open" | "periodic_doubled"
    constant: float = 0.0
    source: FermiChainSpec = None

    def __post_init__(self):
        for name in ("h", "Jnn", "Jnnn", "tx"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        nq = self.n_qubits
        if self.boundary == "open":
            lengths = (nq, max(nq - 1, 0), max(nq - 2, 0), nq)
        else:
            lengths = (nq, nq, nq, nq)
        actual = (len(self.h), len(self.Jnn), len(self.Jnnn), len(self.tx))
        if actual != lengths:
            raise ValueError(f"coefficient list lengths {actual} do not match topology {lengths}")

    @property
    def n_sites(self):
        return self.n_qubits + 1 if self.boundary == "open" else self.n_qubits


@dataclass(frozen=True)
class SubspaceIndex:
    """Register basis indices spanning the M-domain-wall sector.

    ``basis[k]`` is the image of the k-th occupation bitstring (in the
    ordering of :func:`dwsim.chains.occupation_basis`), so projected
    blocks line up entry-by-entry with ``assemble_fermi`` output.
    """

    N: int
    M: int
    basis: tuple
    parity: str = "odd"
    boundary: str = "open"

    def __post_init__(self):
        if len(self.basis) != comb(self.N, self.M):
            raise ValueError("basis size does not match binomial(N, M)")

    @property
    def n_qubits(self):
        return self.N - 1 if self.boundary == "open" else self.N

    @property
    def dimension(self):
        return len(self.basis)


def _right_virtual(parity):
    if parity == "odd":
        return 1
    if parity == "even":
        return 0
    raise ValueError(f"unknown parity {parity!r}")


def encode_ising(spec, J, parity=None, gauge="ferro", virtual_left=0):
    """Map a fermi chain onto Ising fields and couplings.

    Odd parity fixes the right virtual spin to 1, even to 0; switching
    parity flips the sign of every field term the right virtual spin
    induces.  ``virtual_left`` is exposed for symmetry tests only.
    """
    if parity is None:
        parity = spec.parity
    if gauge not in ("ferro", "antiferro"):
        raise ValueError(f"unknown gauge {gauge!r}")
    if spec.N < 2:
        raise ValueError("chain must have at least two sites")
    if abs(J) < 3.0 * spec.energy_scale:
        warnings.warn(
            f"|J|={abs(J):.3g} is below 3x the model energy scale {spec.energy_scale:.3g}; "
            "the domain-wall approximation will be poor",
            stacklevel=2,
        )

    if spec.boundary == "periodic":
        ising = _encode_ring(spec, J, parity)
    else:
        ising = _encode_open(spec, J, parity, virtual_left)
    if gauge == "antiferro":
        h = list(ising.h)
        for k in range(1, ising.n_qubits, 2):  # flip qubits 2, 4, ... (1-based)
            h[k] = -h[k]
        ising = IsingChainSpec(
            ising.n_qubits, tuple(h), tuple(-c for c in ising.Jnn), ising.Jnnn,
            ising.tx, J, "antiferro", parity, ising.boundary, ising.constant, spec,
        )
    return ising


def _encode_open(spec, J, parity, virtual_left):
    N = spec.N
    nq = N - 1
    if N == 2 and any(spec.v):
        # interaction coupler would tie the two virtual spins together
        raise ValueError("two-site chains cannot carry an interaction term")
    eps, v = spec.eps, spec.v
    sL = 1.0 - 2.0 * virtual_left  # sigma^z of the left virtual spin
    sR = 1.0 - 2.0 * _right_virtual(parity)
    h = np.zeros(nq)
    constant = 0.0

    # bond couplers J - eps_{site}/2 - v/4 adjustments; bond b (0-based)
    # couples qubits b, b+1 and hosts site b+1 (1-based site b+2)
    def bond_coeff(b):
        c = J - eps[b + 1] / 2.0
        c -= v[b] / 4.0
        if b + 1 < len(v):
            c -= v[b + 1] / 4.0
        return c

    Jnn = tuple(bond_coeff(b) for b in range(nq - 1))

    # boundary bonds against the virtual spins become fields
    left = J - eps[0] / 2.0 - (v[0] / 4.0 if v else 0.0)
    right = J - eps[N - 1] / 2.0 - (v[N - 2] / 4.0 if v else 0.0)
    h[0] += sL * left
    h[nq - 1] += sR * right

    # interaction v_n: NNN coupler v_n/4 on qubits (n-1, n+1); the two
    # boundary interactions reach a virtual spin and reduce to fields
    Jnnn = np.zeros(max(nq - 2, 0))
    for n in range(1, N):  # v index 1-based
        vn = v[n - 1]
        if vn == 0.0:
            continue
        ql, qr = n - 1, n + 1  # 1-based qubit labels, 0 and N are virtual
        if ql == 0 and qr == N:
            constant += sL * sR * vn / 4.0
        elif ql == 0:
            h[qr - 1] += sL * vn / 4.0
        elif qr == N:
            h[ql - 1] += sR * vn / 4.0
        else:
            Jnnn[ql - 1] += vn / 4.0
    return IsingChainSpec(
        nq, tuple(h), Jnn, tuple(Jnnn), spec.t, J, "ferro", parity, "open", constant, spec
    )


def _encode_ring(spec, J, parity):
    """Doubled-chain encoding of a periodic spec: 2N qubits on a ring."""
    N = spec.N
    L = 2 * N
    t = spec.t * 2
    eps = spec.eps * 2
    v = spec.v * 2
    Jnn = [J - eps[(b + 1) % L] / 2.0 - v[b] / 4.0 - v[(b + 1) % L] / 4.0 for b in range(L)]
    Jnnn = [v[(b + 1) % L] / 4.0 for b in range(L)]
    doubled = FermiChainSpec(L, t, eps, v, "periodic", "even")
    return IsingChainSpec(
        L, (0.0,) * L, tuple(Jnn), tuple(Jnnn), t, J, "ferro", parity, "periodic_doubled", 0.0, doubled
    )


def assemble_ising(ising, tx=None):
    """Build the encoding Hamiltonian matrix from an :class:`IsingChainSpec`."""
    nq = ising.n_qubits
    ring = ising.boundary == "periodic_doubled"
    terms = []
    if tx is None:
        tx = ising.tx
    for k in range(nq):
        if tx[k]:
            terms.append(PauliTerm(-tx[k], ((k + 1, "X"),)))
    for k in range(nq):
        if ising.h[k]:
            terms.append(PauliTerm(ising.h[k], ((k + 1, "Z"),)))
    for b, c in enumerate(ising.Jnn):
        if c:
            terms.append(PauliTerm(c, ((b + 1, "Z"), ((b + 1) % nq + 1, "Z"))))
    for b, c in enumerate(ising.Jnnn):
        if c:
            q2 = (b + 2) % nq + 1 if ring else b + 3
            terms.append(PauliTerm(c, ((b + 1, "Z"), (q2, "Z"))))
    op = assemble_operator(terms, nq)
    if ising.constant:
        op = HermitianOperator(op.matrix + ising.constant * sp.identity(2**nq, format="csr"), op.basis_tag)
    return op


def sector_offset(spec, J, M):
    """Constant by which the encoded M-block is shifted against the fermi block."""
    n_sites = 2 * spec.N if spec.boundary == "periodic" else spec.N
    v_sum = 2 * sum(spec.v) if spec.boundary == "periodic" else sum(spec.v)
    eps_sum = 2 * sum(spec.eps) if spec.boundary == "periodic" else sum(spec.eps)
    return (n_sites - 2 * M) * J - v_sum / 4.0 - eps_sum / 2.0


def count_domain_walls(basis_index, n_qubits, parity="odd", boundary="open"):
    """Number of unequal adjacent pairs in the (virtually extended) spin string."""
    x = int(basis_index)
    if not 0 <= x < 2**n_qubits:
        raise ValueError("basis index out of range")
    if boundary == "open":
        ext = x << 1  # prepend v_L = 0 as bit 0
        ext |= _right_virtual(parity) << (n_qubits + 1)
        flips = ext ^ (ext >> 1)
        return bin(flips & ((1 << (n_qubits + 1)) - 1)).count("1")
    rotated = ((x >> 1) | (x << (n_qubits - 1))) & ((1 << n_qubits) - 1)
    return bin(x ^ rotated).count("1")


def wall_counts(n_qubits, parity="odd", boundary="open"):
    """Vector of domain-wall counts for every register basis index."""
    x = np.arange(2**n_qubits, dtype=np.uint32)
    if boundary == "open":
        ext = (x.astype(np.uint64) << np.uint64(1)) | (
            np.uint64(_right_virtual(parity)) << np.uint64(n_qubits + 1)
        )
        flips = (ext ^ (ext >> np.uint64(1))) & np.uint64((1 << (n_qubits + 1)) - 1)
        n_pairs = n_qubits + 1
    else:
        mask = np.uint32((1 << n_qubits) - 1)
        rot = ((x >> np.uint32(1)) | (x << np.uint32(n_qubits - 1))) & mask
        flips = (x ^ rot).astype(np.uint64)
        n_pairs = n_qubits
    counts = np.zeros(x.shape, dtype=np.int64)
    for b in range(n_pairs):
        counts += ((flips >> np.uint64(b)) & np.uint64(1)).astype(np.int64)
    return counts


def fock_to_dw(occupations, parity=None, representative="standard", boundary="open"):
    """Register basis index whose domain walls sit on the occupied sites."""
    occ = [int(o) for o in occupations]
    M = sum(occ)
    if boundary == "open":
        if parity is None:
            parity = "odd" if M % 2 else "even"
        if M % 2 != (1 if parity == "odd" else 0):
            raise ValueError(f"{M} particles violate parity {parity}")
        n_bits = len(occ) - 1
    else:
        if M % 2:
            raise ValueError("odd particle number cannot close a ring; double the pattern")
        n_bits = len(occ)
    index = 0
    cur = 0
    for k in range(n_bits):
        cur ^= occ[k]
        index |= cur << k
    if representative == "flipped":
        index ^= (1 << n_bits) - 1
    elif representative != "standard":
        raise ValueError(f"unknown representative {representative!r}")
    return index


def dw_to_fock(basis_index, n_qubits, parity="odd", boundary="open"):
    """Occupation bitstring read off the domain-wall positions."""
    x = int(basis_index)
    if boundary == "open":
        ext = [0] + [(x >> k) & 1 for k in range(n_qubits)] + [_right_virtual(parity)]
        return tuple(ext[k] ^ ext[k + 1] for k in range(n_qubits + 1))
    bits = [(x >> k) & 1 for k in range(n_qubits)]
    # wall for site k sits between qubits k-1 and k, wrapping around
    return tuple(bits[k - 1] ^ bits[k] for k in range(n_qubits))


def enumerate_m_subspace(N, M, parity="odd", boundary="open"):
    """The M-wall sector, ordered in lockstep with the occupation basis."""
    if boundary == "open" and M % 2 != (1 if parity == "odd" else 0):
        raise ValueError(f"M={M} inconsistent with parity {parity}")
    if boundary != "open" and M % 2:
        raise ValueError("ring sectors have even wall count")
    basis = tuple(
        fock_to_dw(occ, parity=parity if boundary == "open" else None, boundary=boundary)
        for occ in occupation_basis(N, M)
    )
    return SubspaceIndex(N, M, basis, parity, boundary)


def project_to_block(op, sub):
    """Dense M-sector block of a full-register operator, fermi-basis ordered.

    On a ring every wall pattern is realized by a spin-flip pair of basis
    states; the sector vectors are the symmetric combinations, which picks
    up the wrap-around bond that single representatives would miss.
    """
    if op.dimension != 2**sub.n_qubits:
        raise ValueError(f"operator dimension {op.dimension} does not match register")
    idx = np.array(sub.basis)
    mat = op.sparse()
    block = mat[np.ix_(idx, idx)].toarray()
    if sub.boundary != "open":
        mask = 2**sub.n_qubits - 1
        block = block + mat[np.ix_(idx, idx ^ mask)].toarray()
    return HermitianOperator(block, basis_tag=f"fermi:N={sub.N},M={sub.M}")


def embed_block_state(amplitudes, sub):
    """Lift an M-sector state vector onto the full register."""
    amp = np.asarray(amplitudes, dtype=complex)
    out = np.zeros(2**sub.n_qubits, dtype=complex)
    idx = np.array(sub.basis)
    if sub.boundary == "open":
        out[idx] = amp
    else:
        mask = 2**sub.n_qubits - 1
        out[idx] = amp / np.sqrt(2.0)
        out[idx ^ mask] += amp / np.sqrt(2.0)
    return QuantumState("pure", out, FULL_REGISTER, normalized=bool(abs(np.vdot(amp, amp).real - 1) < 1e-10))


def sector_projector_weights(state, sub):
    """Probability weight of a register state inside the M-wall sector."""
    idx = np.array(sub.basis)
    if sub.boundary != "open":
        mask = 2**sub.n_qubits - 1
        idx = np.concatenate([idx, idx ^ mask])
    if state.kind == "pure":
        return float(np.sum(np.abs(state.amplitudes[idx]) ** 2))
    return float(np.real(np.trace(state.amplitudes[np.ix_(idx, idx)])))


def _z_diagonals(state):
    """Expectation of sigma^z on every qubit plus nearest ZZ correlators."""
    if state.kind == "pure":
        prob = np.abs(state.amplitudes) ** 2
    else:
        prob = np.real(np.diag(state.amplitudes))
    dim = prob.size
    nq = dim.bit_length() - 1
    bits = ((np.arange(dim)[:, None] >> np.arange(nq)[None, :]) & 1).astype(float)
    z = 1.0 - 2.0 * bits
    z_exp = prob @ z
    zz_exp = prob @ (z[:, :-1] * z[:, 1:])
    return z_exp, zz_exp


def site_occupations(state, N, parity="odd", boundary="open"):
    """Site occupation probabilities p_n read from Z and ZZ expectations."""
    z, zz = _z_diagonals(state)
    if boundary == "open":
        p = np.empty(N)
        p[0] = 0.5 - 0.5 * z[0]
        sR = 1.0 - 2.0 * _right_virtual(parity)
        p[N - 1] = 0.5 - 0.5 * sR * z[N - 2]
        p[1 : N - 1] = 0.5 - 0.5 * zz
    else:
        bits = None
        # ring: p_s = (1 - <Z_{s-1} Z_s>)/2 with wraparound correlator
        if state.kind == "pure":
            prob = np.abs(state.amplitudes) ** 2
        else:
            prob = np.real(np.diag(state.amplitudes))
        dim = prob.size
        nq = dim.bit_length() - 1
        bits = ((np.arange(dim)[:, None] >> np.arange(nq)[None, :]) & 1).astype(float)
        zmat = 1.0 - 2.0 * bits
        p = np.empty(nq)
        for s in range(nq):
            p[s] = 0.5 - 0.5 * float(prob @ (zmat[:, s - 1] * zmat[:, s]))
    bad = (p < -1e-10) | (p > 1 + 1e-10)
    if bad.any():
        raise ValueError("occupation probability outside [0, 1]")
    return np.clip(p, 0.0, 1.0)


def _number_operator(i, N, parity, as_hole=False, boundary="open"):
    """n_i (or 1 - n_i) on the register, with virtual-spin boundary forms.

    On a ring every site maps to a wraparound ZZ pair; the single-Z
    boundary forms apply only to open chains, where the virtual spins
    are fixed.
    """
    nq = N - 1 if boundary == "open" else N
    dim = 2**nq
    if boundary != "open":
        q1 = (i - 2) % N + 1
        op = assemble_operator([PauliTerm(-0.5, ((q1, "Z"), (i, "Z")))], nq).sparse()
    elif i == 1:
        op = assemble_operator([PauliTerm(-0.5, ((1, "Z"),))], nq).sparse()
    elif i == N:
        sR = 1.0 - 2.0 * _right_virtual(parity)
        op = assemble_operator([PauliTerm(-0.5 * sR, ((nq, "Z"),))], nq).sparse()
    else:
        op = assemble_operator([PauliTerm(-0.5, ((i - 1, "Z"), (i, "Z")))], nq).sparse()
    op = op + 0.5 * sp.identity(dim, format="csr")
    if as_hole:
        op = sp.identity(dim, format="csr") - op
    return op


def _flip_string(i, j, N, boundary="open"):
    # moving the wall from site i to site j flips the qubits in between;
    # the same 1-based labels apply on open chains and rings
    nq = N - 1 if boundary == "open" else N
    lo, hi = min(i, j), max(i, j)
    factors = tuple((n, "X") for n in range(lo, hi))
    if not factors:
        return sp.identity(2**nq, format="csr", dtype=complex)
    return assemble_operator([PauliTerm(1.0, factors)], nq).sparse()


def map_string_operator_raw(string, N, parity="odd", boundary="open"):
    """Register image of a (possibly non-Hermitian) even sigma+/- string."""
    if len(string) % 2:
        raise ValueError("parity superselection admits only even-length strings")
    dim = 2 ** (N - 1) if boundary == "open" else 2**N
    total = sp.identity(dim, format="csr", dtype=complex)
    for k in range(0, len(string), 2):
        (i, si), (j, sj) = string[k], string[k + 1]
        if not (1 <= i <= N and 1 <= j <= N):
            raise ValueError("site index out of range")
        left = _number_operator(i, N, parity, as_hole=(si == "-"), boundary=boundary)
        right = _number_operator(j, N, parity, as_hole=(sj == "+"), boundary=boundary)
        total = total @ (left @ _flip_string(i, j, N, boundary) @ right)
    return total


def map_even_string_operator(string, N, parity="odd", boundary="open"):
    """Hermitian part of the mapped string: (image + image^dagger)/2."""
    raw = map_string_operator_raw(string, N, parity, boundary)
    return HermitianOperator(0.5 * (raw + raw.conj().T))


def spin_inversion_operator(n_qubits):
    """Global spin flip Pi = prod_n sigma^x_n as a permutation matrix."""
    dim = 2**n_qubits
    idx = np.arange(dim)
    mat = sp.csr_matrix((np.ones(dim), (idx ^ (dim - 1), idx)), shape=(dim, dim), dtype=complex)
    return HermitianOperator(mat)
