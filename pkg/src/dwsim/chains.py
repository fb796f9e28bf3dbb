"""Model builders: programmable fermion chains and their sector matrices.

A :class:`FermiChainSpec` describes

    H = -sum_n t_n (c_{n+1}^+ c_n + h.c.) + sum_n eps_n c_n^+ c_n
        + sum_n v_n c_n^+ c_n c_{n+1}^+ c_{n+1}

on N sites.  ``assemble_fermi`` produces the exact M-particle block in the
occupation-bitstring basis (site 1 = most significant bit, lexicographic
order), which is the reference every domain-wall result is compared to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .operators import HermitianOperator

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class FermiChainSpec:
    """Spinless-fermion chain: hoppings t, on-site energies eps, interactions v."""

    N: int
    t: tuple
    eps: tuple
    v: tuple
    boundary: str = "open"  # "open" | "periodic"
    parity: str = "odd"  # target particle-number parity

    def __post_init__(self):
        object.__setattr__(self, "t", tuple(float(x) for x in self.t))
        object.__setattr__(self, "eps", tuple(float(x) for x in self.eps))
        object.__setattr__(self, "v", tuple(float(x) for x in self.v))
        n_bond = self.N if self.boundary == "periodic" else self.N - 1
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"unknown boundary {self.boundary!r}")
        if self.parity not in ("odd", "even"):
            raise ValueError(f"unknown parity {self.parity!r}")
        if len(self.t) != n_bond or len(self.v) != n_bond or len(self.eps) != self.N:
            raise ValueError("parameter list lengths do not match the chain topology")
        for name in ("t", "eps", "v"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite entry in {name}")

    @property
    def energy_scale(self):
        return max(map(abs, self.t + self.eps + self.v), default=0.0)


@dataclass(frozen=True)
class SpinChainParams:
    """XY spin chain with ZZ couplings and Z fields (hard-core boson picture)."""

    t: tuple
    v_tilde: tuple
    eps_tilde: tuple

    def __post_init__(self):
        object.__setattr__(self, "t", tuple(float(x) for x in self.t))
        object.__setattr__(self, "v_tilde", tuple(float(x) for x in self.v_tilde))
        object.__setattr__(self, "eps_tilde", tuple(float(x) for x in self.eps_tilde))
        n = len(self.eps_tilde)
        if len(self.t) != n - 1 or len(self.v_tilde) != n - 1:
            raise ValueError("length mismatch: need N-1 hoppings/couplings for N fields")

    @property
    def N(self):
        return len(self.eps_tilde)


@dataclass(frozen=True)
class DriveSpec:
    """Two-harmonic periodic modulation of the bond hoppings.

    t_n(T) = t0_n + t1_n cos(w T + phi1_n) + t2_n cos(2 w T + phi2_n)
    with angular frequency w = 2 pi / tau.
    """

    t0: tuple
    t1: tuple
    phi1: tuple
    t2: tuple
    phi2: tuple
    tau: float

    def __post_init__(self):
        for name in ("t0", "t1", "phi1", "t2", "phi2"):
            object.__setattr__(self, name, tuple(float(x) for x in getattr(self, name)))
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        n = len(self.t0)
        if any(len(getattr(self, name)) != n for name in ("t1", "phi1", "t2", "phi2")):
            raise ValueError("drive parameter lists must all have the same length")

    @property
    def omega(self):
        """Angular frequency of the fundamental harmonic."""
        return 2.0 * math.pi / self.tau

    def hoppings_at(self, T):
        t0 = np.array(self.t0)
        t1 = np.array(self.t1)
        t2 = np.array(self.t2)
        w = self.omega
        return t0 + t1 * np.cos(w * T + np.array(self.phi1)) + t2 * np.cos(2 * w * T + np.array(self.phi2))


def ssh_spec(v, w, N):
    """Alternating-hopping chain; v on odd bonds, w on even bonds."""
    if N % 2 != 0 or N < 4:
        raise ValueError("N must be even and at least 4 (two-site unit cell)")
    t = tuple(v if n % 2 == 1 else w for n in range(1, N))
    return FermiChainSpec(N, t, (0.0,) * N, (0.0,) * (N - 1))


def aubry_andre_spec(lam, beta, phi, mu, N):
    """Quasiperiodic on-site energies and, optionally, quasiperiodic hoppings."""
    if N < 2:
        raise ValueError("need at least two sites")
    eps = tuple(lam * math.cos(2 * math.pi * beta * n + phi) for n in range(1, N + 1))
    t = tuple(1.0 + mu * math.cos(2 * math.pi * beta * (n + 0.5) + phi) for n in range(1, N))
    return FermiChainSpec(N, t, eps, (0.0,) * (N - 1))


def xxz_spec(t, Delta, theta, N):
    """Inhomogeneous XXZ chain and its fermionic image.

    The chain is sum_n 2t (s+_n s-_{n+1} + h.c.) + Delta_n sz_n sz_{n+1}
    with a linear anisotropy ramp Delta_n = Delta + theta (2n - N)/(N - 2).
    Returns (SpinChainParams, FermiChainSpec); both assemble to the same
    M-sector spectra up to the constant sum(v~_n) - sum(eps~_n).
    """
    if N < 3:
        raise ValueError("need N >= 3 (anisotropy ramp divides by N - 2)")
    delta = [Delta + theta * (2 * n - N) / (N - 2) for n in range(1, N)]
    spin = SpinChainParams(t=(-2.0 * t,) * (N - 1), v_tilde=tuple(delta), eps_tilde=(0.0,) * N)
    return spin, spin_to_fermi(spin)


def spin_to_fermi(spin):
    """Invert the eps/v parameter map of the spin-chain correspondence."""
    N = spin.N
    vt = spin.v_tilde
    et = spin.eps_tilde
    eps = []
    for n in range(1, N + 1):
        val = et[n - 1]
        if n > 1:
            val -= vt[n - 2]
        if n < N:
            val -= vt[n - 1]
        eps.append(2.0 * val)
    v = tuple(4.0 * x for x in vt)
    return FermiChainSpec(N, spin.t, tuple(eps), v)


def floquet_nnn_drive(K1, K2, tau, N):
    """Drive signal whose stroboscopic generator carries imaginary NNN hopping."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    n_bond = N - 1
    t0 = (-3.0 * K1 * tau / (4.0 * math.pi),) * n_bond
    t1 = (math.sqrt(abs(K2)),) * n_bond
    # the phase sign pairs with the overall minus on the hopping terms
    phi1 = tuple(n * math.pi / 2.0 for n in range(1, N))
    t2 = tuple(2.0 * x for x in t1)
    phi2 = tuple(p + math.pi for p in phi1)
    return DriveSpec(t0, t1, phi1, t2, phi2, tau)


def occupation_basis(N, M):
    """All M-particle occupation bitstrings.

    Ordered lexicographically by the tuple of occupied sites, so for M=1
    the basis index n corresponds to a particle on site n+1.
    """
    if not 0 <= M <= N:
        raise ValueError(f"invalid particle number M={M} for N={N}")
    configs = []
    for sites in combinations(range(N), M):
        occ = [0] * N
        for s in sites:
            occ[s] = 1
        configs.append(tuple(occ))
    return configs


def _occupation_index(configs):
    return {occ: i for i, occ in enumerate(configs)}


def assemble_fermi(spec, M, check_parity=False):
    """Exact M-particle block of the chain Hamiltonian (occupation basis)."""
    N = spec.N
    if not 0 <= M <= N:
        raise ValueError(f"M={M} out of range for N={N}")
    if check_parity and M % 2 != (1 if spec.parity == "odd" else 0):
        raise ValueError(f"M={M} violates target parity {spec.parity}")
    periodic = spec.boundary == "periodic"
    configs = occupation_basis(N, M)
    index = _occupation_index(configs)
    dim = len(configs)
    rows, cols, vals = [], [], []
    n_bond = N if periodic else N - 1
    for j, occ in enumerate(configs):
        diag = sum(spec.eps[s] for s in range(N) if occ[s])
        for b in range(n_bond):
            s1, s2 = b, (b + 1) % N
            if occ[s1] and occ[s2]:
                diag += spec.v[b]
        rows.append(j)
        cols.append(j)
        vals.append(diag)
        for b in range(n_bond):
            s1, s2 = b, (b + 1) % N
            if occ[s1] != occ[s2]:
                hopped = list(occ)
                hopped[s1], hopped[s2] = occ[s2], occ[s1]
                i = index[tuple(hopped)]
                rows.append(i)
                cols.append(j)
                vals.append(-spec.t[b])
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim), dtype=complex)
    mat.sum_duplicates()
    mat.sort_indices()
    return HermitianOperator(mat, basis_tag=f"fermi:N={N},M={M}")


def assemble_spin(spin, M):
    """M-excitation block of the spin chain, in the same occupation basis.

    Equal to ``assemble_fermi(spin_to_fermi(spin), M)`` plus the constant
    sum(v~_n) - sum(eps~_n); kept as an independent construction so the
    parameter map can be cross-checked spectrally.
    """
    N = spin.N
    configs = occupation_basis(N, M)
    index = _occupation_index(configs)
    dim = len(configs)
    mat = np.zeros((dim, dim))
    for j, occ in enumerate(configs):
        diag = 0.0
        for n in range(N):
            z = 1.0 - 2.0 * occ[n]  # sz = +1 on unoccupied
            diag += spin.eps_tilde[n] * z
        for b in range(N - 1):
            diag += spin.v_tilde[b] * (1.0 - 2.0 * occ[b]) * (1.0 - 2.0 * occ[b + 1])
        mat[j, j] = diag
        for b in range(N - 1):
            if occ[b] != occ[b + 1]:
                hopped = list(occ)
                hopped[b], hopped[b + 1] = occ[b + 1], occ[b]
                mat[index[tuple(hopped)], j] += -spin.t[b]
    return HermitianOperator(mat.astype(complex), basis_tag=f"fermi:N={N},M={M}")


def nnn_effective_operator(K1, K2, N, M):
    """H = sum_n K1 c_{n+1}^+ c_n + i K2 c_{n+2}^+ c_n + h.c. in the M-sector.

    Jordan-Wigner signs enter through the occupation of the intermediate
    site on the next-nearest-neighbor hops.
    """
    if not 0 <= M <= N:
        raise ValueError(f"M={M} out of range for N={N}")
    configs = occupation_basis(N, M)
    index = _occupation_index(configs)
    dim = len(configs)
    mat = np.zeros((dim, dim), dtype=complex)
    for j, occ in enumerate(configs):
        for s in range(N - 1):
            # K1 c_{s+1}^+ c_s moves a particle from site s to s+1
            if occ[s] and not occ[s + 1]:
                hopped = list(occ)
                hopped[s], hopped[s + 1] = 0, 1
                mat[index[tuple(hopped)], j] += K1
            if occ[s + 1] and not occ[s]:
                hopped = list(occ)
                hopped[s], hopped[s + 1] = 1, 0
                mat[index[tuple(hopped)], j] += K1
        for s in range(N - 2):
            sign = -1.0 if occ[s + 1] else 1.0
            if occ[s] and not occ[s + 2]:
                hopped = list(occ)
                hopped[s], hopped[s + 2] = 0, 1
                mat[index[tuple(hopped)], j] += 1j * K2 * sign
            if occ[s + 2] and not occ[s]:
                hopped = list(occ)
                hopped[s], hopped[s + 2] = 1, 0
                mat[index[tuple(hopped)], j] += -1j * K2 * sign
    return HermitianOperator(mat, basis_tag=f"fermi:N={N},M={M}")


def driven_nn_operator(spec, drive, M, T):
    """Instantaneous M-sector matrix of the chain with drive-modulated hoppings."""
    t = drive.hoppings_at(T)
    inst = FermiChainSpec(spec.N, tuple(t), spec.eps, spec.v, spec.boundary, spec.parity)
    return assemble_fermi(inst, M)


def single_particle_matrix(spec):
    """The N x N one-particle hopping matrix (convenience wrapper)."""
    return assemble_fermi(spec, 1)
