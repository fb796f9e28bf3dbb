"""Sector decomposition and second-order effective Hamiltonians."""

import warnings

import numpy as np
import pytest

from dwsim.chains import FermiChainSpec, assemble_fermi
from dwsim.encoding import encode_ising
from dwsim.operators import HermitianOperator
from dwsim.sw import (
    block_decompose,
    dressed_spectrum,
    operator_fidelity,
    sw_effective_hamiltonian,
)


def make_dec(spec, J, parity="odd"):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return block_decompose(encode_ising(spec, J, parity=parity))


def random_spec(rng, N, scale=1.0):
    return FermiChainSpec(
        N,
        tuple(scale * rng.normal(size=N - 1)),
        tuple(scale * rng.normal(size=N)),
        tuple(scale * np.abs(rng.normal(size=N - 1))),
    )


class TestBlockDecompose:
    def test_blocks_equal_model_sectors(self):
        rng = np.random.default_rng(0)
        spec = random_spec(rng, 6)
        for parity, sectors in (("odd", (1, 3, 5)), ("even", (0, 2, 4, 6))):
            dec = make_dec(spec, -25.0, parity)
            assert dec.sectors == list(sectors)
            for M in sectors:
                ref = assemble_fermi(spec, M).dense()
                assert np.abs(dec.blocks[M].dense() - ref).max() < 1e-10

    def test_offsets_step_by_two_j(self):
        rng = np.random.default_rng(1)
        spec = random_spec(rng, 5)
        dec = make_dec(spec, -20.0, "odd")
        assert dec.offsets[3] - dec.offsets[1] == pytest.approx(-2 * -20.0 * 2)
        assert dec.offsets[1] - dec.offsets[3] == pytest.approx(4 * -20.0)

    def test_couplings_are_adjoint_pairs(self):
        rng = np.random.default_rng(2)
        spec = random_spec(rng, 6)
        dec = make_dec(spec, -25.0, "odd")
        # V(1->3) has shape (dim 1-sector, dim 3-sector)
        assert dec.couplings[(1, 3)].shape == (6, 20)
        assert dec.couplings[(3, 5)].shape == (20, 6)

    def test_coupling_strength_follows_hoppings(self):
        # with a single hopping bond only that wall pair can be created
        spec = FermiChainSpec(4, (0.7, 0.0, 0.0), (0.0,) * 4, (0.0,) * 3)
        dec = make_dec(spec, -10.0, "odd")
        V = dec.couplings[(1, 3)]
        assert np.abs(V).max() == pytest.approx(0.7)

    def test_missing_source_rejected(self):
        rng = np.random.default_rng(3)
        spec = random_spec(rng, 4)
        ising = encode_ising(spec, -20.0)
        stripped = type(ising)(
            ising.n_qubits, ising.h, ising.Jnn, ising.Jnnn, ising.tx,
            ising.J, ising.gauge, ising.parity, ising.boundary, ising.constant, None,
        )
        with pytest.raises(ValueError, match="source"):
            block_decompose(stripped)

    def test_antiferro_gauge_rejected(self):
        rng = np.random.default_rng(4)
        spec = random_spec(rng, 4)
        with pytest.raises(ValueError, match="ferro"):
            block_decompose(encode_ising(spec, -20.0, gauge="antiferro"))


class TestEffectiveHamiltonian:
    def test_reduces_to_block_at_strong_coupling(self):
        rng = np.random.default_rng(5)
        spec = random_spec(rng, 5, scale=0.3)
        dec = make_dec(spec, -1e6, "odd")
        H_eff = sw_effective_hamiltonian(dec, 3).dense()
        assert np.abs(H_eff - dec.blocks[3].dense()).max() < 1e-6

    def test_correction_scales_inverse_j(self):
        rng = np.random.default_rng(6)
        spec = random_spec(rng, 5, scale=0.3)
        diffs = []
        for J in (-50.0, -100.0):
            dec = make_dec(spec, J, "odd")
            d = sw_effective_hamiltonian(dec, 1).dense() - dec.blocks[1].dense()
            diffs.append(np.linalg.norm(d))
        assert diffs[0] / diffs[1] == pytest.approx(2.0, rel=0.05)

    def test_matches_exact_sector_energies(self):
        # second order in t/J: eigenvalue error of the corrected block
        # shrinks as J^-3 while the bare block stalls at J^-1
        rng = np.random.default_rng(7)
        spec = random_spec(rng, 5, scale=0.3)
        J = -60.0
        ising = encode_ising(spec, J)
        dec = block_decompose(ising)
        from dwsim.encoding import assemble_ising, sector_offset, wall_counts

        H = assemble_ising(ising).dense()
        w = np.linalg.eigvalsh(H)
        counts = wall_counts(4, parity="odd")
        # 1-wall sector sits lowest for J < 0: take the bottom five levels
        exact = np.sort(w)[:5] - sector_offset(spec, J, 1)
        bare = np.sort(np.linalg.eigvalsh(dec.blocks[1].dense()))
        eff = np.sort(np.linalg.eigvalsh(sw_effective_hamiltonian(dec, 1).dense()))
        assert np.abs(eff - exact).max() < np.abs(bare - exact).max() / 50

    def test_absent_sector_rejected(self):
        rng = np.random.default_rng(8)
        spec = random_spec(rng, 5)
        dec = make_dec(spec, -30.0, "odd")
        with pytest.raises(ValueError, match="absent"):
            sw_effective_hamiltonian(dec, 2)

    def test_degeneracy_guard_trips(self):
        # onsite energy 4|J| pushes a 1-wall level onto the 3-wall band
        spec = FermiChainSpec(4, (1e-4,) * 3, (4.0, 0.0, 0.0, 0.0), (0.0,) * 3)
        dec = make_dec(spec, -1.0, "odd")
        with pytest.raises(ValueError, match="near-degenerate"):
            sw_effective_hamiltonian(dec, 1)


class TestDressedSpectrum:
    def test_values_match_effective_hamiltonian(self):
        rng = np.random.default_rng(9)
        spec = random_spec(rng, 5, scale=0.3)
        dec = make_dec(spec, -40.0, "odd")
        ds = dressed_spectrum(dec, (1,))
        eff = np.linalg.eigvalsh(sw_effective_hamiltonian(dec, 1).dense()) + dec.offsets[1]
        assert np.allclose(np.sort(ds.dressed_values), np.sort(eff), atol=1e-10)

    def test_amplitude_block_structure(self):
        rng = np.random.default_rng(10)
        spec = random_spec(rng, 5, scale=0.3)
        dec = make_dec(spec, -40.0, "odd")
        ds = dressed_spectrum(dec, (1, 3, 5))
        n1, n3 = 5, 10
        same = ds.correction_amplitudes[:n1, :n1]
        skip = ds.correction_amplitudes[:n1, n1 + n3 :]
        direct = ds.correction_amplitudes[:n1, n1 : n1 + n3]
        assert np.abs(same).max() > 0
        assert np.abs(skip).max() > 0
        assert np.abs(direct).max() == 0.0  # adjacent sectors mix at first order only

    def test_amplitude_scaling_orders(self):
        rng = np.random.default_rng(11)
        spec = random_spec(rng, 5, scale=0.3)
        ratios_same, ratios_skip = [], []
        vals = {}
        for J in (-80.0, -160.0):
            dec = make_dec(spec, J, "odd")
            ds = dressed_spectrum(dec, (1, 3, 5))
            vals[J] = (
                np.abs(ds.correction_amplitudes[:5, :5]).max(),
                np.abs(ds.correction_amplitudes[:5, 15:]).max(),
            )
        assert vals[-80.0][0] / vals[-160.0][0] == pytest.approx(2.0, rel=0.1)
        # the sector ladder is equispaced in 4|J| steps, so the leading
        # part of the numerator cancels and the skip amplitude falls as J^-3
        assert vals[-80.0][1] / vals[-160.0][1] == pytest.approx(8.0, rel=0.1)

    def test_bare_and_sector_labels(self):
        rng = np.random.default_rng(12)
        spec = random_spec(rng, 4, scale=0.3)
        dec = make_dec(spec, -40.0, "even")
        ds = dressed_spectrum(dec, (0, 2))
        assert ds.sectors == (0, 2)
        assert list(ds.sector_of) == [0] + [2] * 6
        assert ds.bare[0] == pytest.approx(dec.offsets[0])


class TestOperatorFidelity:
    def test_identical_operators(self):
        rng = np.random.default_rng(13)
        m = rng.normal(size=(6, 6))
        op = HermitianOperator(m + m.T)
        assert operator_fidelity(op, op) == pytest.approx(1.0)

    def test_scaling_invariance(self):
        rng = np.random.default_rng(14)
        m = rng.normal(size=(4, 4))
        a = HermitianOperator(m + m.T)
        b = HermitianOperator(3.7 * (m + m.T))
        assert operator_fidelity(a, b) == pytest.approx(1.0)

    def test_orthogonal_operators(self):
        a = HermitianOperator(np.diag([1.0, -1.0]))
        b = HermitianOperator(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert operator_fidelity(a, b) == pytest.approx(0.0)

    def test_zero_operator_rejected(self):
        a = HermitianOperator(np.zeros((2, 2)))
        b = HermitianOperator(np.eye(2))
        with pytest.raises(ValueError, match="zero"):
            operator_fidelity(a, b)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            operator_fidelity(HermitianOperator(np.eye(2)), HermitianOperator(np.eye(4)))
