"""Observables and statistics on simulated states and spectra.

Fidelities compare an exactly evolved sector state against the encoded
register evolution; spectral tools cover consecutive-gap ratios and
polynomial unfolding with a Poisson vs Wigner-Dyson classification.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .encoding import embed_block_state, sector_projector_weights


@dataclass(frozen=True)
class SpectralReport:
    """Gap ratios, unfolded spacings, and the spacing-law classification."""

    eigenvalues: np.ndarray
    gap_ratios: np.ndarray
    mean_ratio: float
    unfolded_spacings: np.ndarray
    histogram: tuple  # (bin edges, counts), bin width 1/8
    classification: str  # "Poisson" | "WignerDyson"
    log_likelihoods: dict
    discarded: int
    skipped_zero_spacings: int = 0


@dataclass(frozen=True)
class FidelityTrace:
    """Fidelity samples on the model-time and wall-time axes."""

    times: np.ndarray
    state_fidelity: np.ndarray
    subspace_fidelity: np.ndarray
    wall_times: np.ndarray


def state_fidelity(exact, dw, sub):
    """Overlap of the register state with the sector-exact reference.

    ``exact`` lives in the occupation basis of ``sub``; it is lifted onto
    the register before the inner product.
    """
    if exact.kind != "pure":
        raise ValueError("the reference state must be pure")
    ref = embed_block_state(exact.amplitudes, sub)
    if ref.dimension != dw.dimension:
        raise ValueError("register dimensions differ")
    if dw.kind == "pure":
        val = abs(np.vdot(ref.amplitudes, dw.amplitudes)) ** 2
    else:
        val = np.real(np.vdot(ref.amplitudes, dw.amplitudes @ ref.amplitudes))
    return _clip_unit(val)


def subspace_fidelity(dw, sub):
    """Probability weight remaining inside the wall sector."""
    return _clip_unit(sector_projector_weights(dw, sub))


def _clip_unit(val):
    if val < -1e-10 or val > 1 + 1e-10:
        raise ValueError(f"probability {val} outside [0, 1]")
    return float(min(max(val, 0.0), 1.0))


def participation_entropy(state, sub):
    """Second participation entropy over the sector basis states.

    The state is projected into the sector and renormalized; losing more
    than half the weight aborts, as the sector label no longer applies.
    """
    idx = np.array(sub.basis)
    if state.kind == "pure":
        probs = np.abs(state.amplitudes[idx]) ** 2
        if sub.boundary != "open":
            mask = 2**sub.n_qubits - 1
            flipped = state.amplitudes[idx ^ mask]
            probs = np.abs((state.amplitudes[idx] + flipped) / np.sqrt(2.0)) ** 2
    else:
        rho = state.amplitudes
        probs = np.real(np.diag(rho)[idx])
        if sub.boundary != "open":
            raise NotImplementedError("mixed-state sector projection on rings")
    weight = probs.sum()
    if weight < 0.5:
        raise ValueError(f"only {weight:.3f} of the state remains in the sector")
    probs = probs / weight
    return float(-np.log(np.sum(probs**2)))


def time_average(series, T0, T1):
    """Trapezoidal mean of a sampled time series over [T0, T1]."""
    pts = sorted((float(t), float(v)) for t, v in series)
    if T1 <= T0:
        raise ValueError("empty averaging window")
    t = np.array([p[0] for p in pts])
    v = np.array([p[1] for p in pts])
    if T0 < t[0] or T1 > t[-1]:
        raise ValueError("window extends beyond the sampled range")
    grid = np.unique(np.concatenate([[T0, T1], t[(t > T0) & (t < T1)]]))
    vals = np.interp(grid, t, v)
    return float(np.trapezoid(vals, grid) / (T1 - T0))


def survival_probability(psi0, psiT):
    """Return probability of the initial state, |<psi0|psi(T)>|^2."""
    if psi0.kind != "pure":
        raise ValueError("survival probability needs pure states")
    if psiT.kind == "pure":
        return _clip_unit(abs(np.vdot(psi0.amplitudes, psiT.amplitudes)) ** 2)
    return _clip_unit(np.real(np.vdot(psi0.amplitudes, psiT.amplitudes @ psi0.amplitudes)))


def rate_function(psi0, psiT, N):
    """Dynamical free-energy density r = -ln(P)/N of the return probability."""
    P = survival_probability(psi0, psiT)
    if P < 1e-300:
        return float("inf")
    return float(-np.log(P) / N)


def gap_ratio_statistics(eigenvalues):
    """Consecutive-gap ratios and the mean of min(r, 1/r)."""
    E = np.sort(np.asarray(eigenvalues, dtype=float))
    if E.size < 4:
        raise ValueError("need at least four eigenvalues")
    gaps = np.diff(E)
    keep = gaps > 0
    skipped = int(np.count_nonzero(~keep))
    if skipped:
        warnings.warn(f"skipped {skipped} zero spacings", stacklevel=2)
    g = gaps[keep]
    r = g[1:] / g[:-1]
    mean = float(np.mean(np.minimum(r, 1.0 / r)))
    return r, mean


def poisson_levels(n, rng):
    """Synthetic spectrum with i.i.d. exponential spacings."""
    return np.cumsum(rng.exponential(size=n))


def goe_levels(n, rng):
    """Eigenvalues of a random real symmetric Gaussian matrix."""
    A = rng.normal(size=(n, n))
    return np.linalg.eigvalsh((A + A.T) / np.sqrt(2.0))


def _spacing_loglik(s):
    s = np.asarray(s)
    ll_p = float(np.sum(-s))
    with np.errstate(divide="ignore"):
        ll_wd = float(np.sum(np.log(np.pi * s / 2.0) - np.pi * s**2 / 4.0))
    return {"Poisson": ll_p, "WignerDyson": ll_wd}


def unfold_and_classify(eigenvalues, discard=200, poly_order=12, bin_width=0.125):
    """Polynomial unfolding of a spectrum and spacing-law classification.

    The cumulative spectral function is fit with a polynomial on energies
    affinely rescaled to [-1, 1]; spacings of the unfolded interior are
    compared against the Poisson and Wigner-Dyson laws by log-likelihood.
    """
    E = np.sort(np.asarray(eigenvalues, dtype=float))
    n = E.size
    if n < poly_order + 4:
        raise ValueError("too few eigenvalues for the unfolding fit")
    discard = int(min(discard, n // 10))
    counts = np.arange(1, n + 1, dtype=float)
    # Polynomial.fit maps the energy window onto [-1, 1] internally,
    # which keeps the high-order fit conditioned
    fit = Polynomial.fit(E, counts, poly_order)
    unfolded = fit(E)
    lo, hi = discard, n - discard
    s = np.diff(unfolded[lo:hi])
    s = s[s > 0]
    edges = np.arange(0.0, s.max() + bin_width, bin_width)
    hist, edges = np.histogram(s, bins=edges)
    ll = _spacing_loglik(s)
    label = max(ll, key=ll.get)
    gaps = np.diff(E)
    keep = gaps > 0
    g = gaps[keep]
    ratios = g[1:] / g[:-1]
    mean_ratio = float(np.mean(np.minimum(ratios, 1.0 / ratios)))
    return SpectralReport(
        eigenvalues=E,
        gap_ratios=ratios,
        mean_ratio=mean_ratio,
        unfolded_spacings=s,
        histogram=(edges, hist),
        classification=label,
        log_likelihoods=ll,
        discarded=discard,
        skipped_zero_spacings=int(np.count_nonzero(~keep)),
    )


def infidelity_norm_diagnostics(U_exact, U_approx, probes):
    """Worst-probe infidelity and spectral-norm distance of two propagators.

    When the error operator is diagonal up to a global phase, the probe
    infidelity is checked against the quadratic phase bound.
    """
    U_exact = np.asarray(U_exact)
    U_approx = np.asarray(U_approx)
    if U_exact.shape != U_approx.shape:
        raise ValueError("propagator shapes differ")
    W = U_exact.conj().T @ U_approx
    eps_norm = float(np.linalg.norm(U_exact - U_approx, 2))

    phases = np.angle(np.diag(W))
    phases = phases - phases.min()
    phi_max = float(phases.max())

    eps = 0.0
    diag_err = np.abs(W - np.diag(np.diag(W))).max()
    for amp in probes:
        amp = np.asarray(amp, dtype=complex)
        amp = amp / np.linalg.norm(amp)
        fid = abs(np.vdot(amp, W @ amp)) ** 2
        this_eps = 1.0 - fid
        eps = max(eps, this_eps)
        if diag_err < 1e-10:
            weights = np.abs(amp) ** 4
            bound = 2.0 * phi_max**2 * (1.0 - weights.sum()) + 1e-8
            if this_eps > bound:
                raise AssertionError(
                    f"phase-diagonal infidelity {this_eps:.3e} exceeds bound {bound:.3e}"
                )
    return {"epsilon": float(eps), "epsilon_norm": eps_norm, "phi_max": phi_max}
