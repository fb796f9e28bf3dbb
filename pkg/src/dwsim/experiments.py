"""Experiment orchestration shared by the CLI and the test suite.

Each experiment kind builds chain specs, runs the encoded and reference
evolutions, and returns rows for the CSV schemas plus summary scalars.
Everything is deterministic given (config, seed).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.sparse.linalg import expm_multiply

from . import analysis, chains, encoding, evolution, sw
from .operators import basis_state, pure_state

SCHEMAS = {
    "occupations": ("T_evol", "T_wall", "site", "p"),
    "fidelity": ("T_evol", "T_wall", "state_fidelity", "subspace_fidelity"),
    "spectral": ("index", "eigenvalue", "r_eta", "s_n"),
    "entropy": ("T_evol", "T_wall", "s2pe"),
    "phase_diagram": ("lambda", "mu", "s2pe_mean"),
    "rate": ("T_evol", "T_wall", "r_exact", "r_dw"),
}

KINDS = (
    "ssh_static",
    "aa_single",
    "aa_half_filling",
    "aa_dqpt",
    "xxz_statistics",
    "xxz_dynamics",
    "floquet_nnn",
    "custom",
)

# quasiperiodic phase operating points for single-particle quenches;
# homogeneous hopping, phases set by the onsite strength alone
AA_PHASE_POINTS = {
    "localized": (4.0, 0.0),
    "critical": (2.0, 0.0),
    "extended": (0.5, 0.0),
}


class ValidationError(ValueError):
    """Config rejected before any computation starts."""


def _require(cfg, field, kind):
    if field not in cfg:
        raise ValidationError(f"kind {kind!r} requires field {field!r}")
    return cfg[field]


def sample_times(cfg):
    times = cfg.get("times")
    if times is None:
        raise ValidationError("missing 'times'")
    if isinstance(times, dict):
        t_max = float(_require(times, "t_max", "times"))
        n = int(_require(times, "samples", "times"))
        if t_max <= 0 or n < 1:
            raise ValidationError("times.t_max must be > 0 and times.samples >= 1")
        return tuple(np.linspace(t_max / n, t_max, n))
    return tuple(float(t) for t in times)


def noise_from_config(cfg):
    noise = cfg.get("noise")
    if not noise:
        return None
    channels = []
    if "relax" in noise:
        channels.append(("relax", float(noise["relax"])))
    if "dephase" in noise:
        channels.append(("dephase", float(noise["dephase"])))
    if not channels:
        raise ValidationError("noise block has neither 'relax' nor 'dephase'")
    return evolution.NoiseSpec(tuple(channels))


def resolve_policy(cfg):
    block = cfg.get("rescale")
    if not block:
        return evolution.RescalePolicy(1.0)
    return evolution.RescalePolicy(block.get("alpha", "standard"))


def fock_initial_state(occ, parity, n_qubits):
    index = encoding.fock_to_dw(occ, parity=parity)
    return basis_state(index, 2**n_qubits)


def sector_trace(spec, J, occ0, times, policy=None, noise=None, with_occupations=True):
    """Evolve an initial Fock state on the register and in the exact sector.

    Returns per-sample dictionaries with both fidelities, site occupation
    probabilities read from the register state, and the wall-time axis.
    """
    M = sum(occ0)
    parity = "odd" if M % 2 else "even"
    policy = policy or evolution.RescalePolicy(1.0)
    scaled_spec, wall_times, alpha = evolution.rescale(spec, times, policy)

    ising = encoding.encode_ising(scaled_spec, J, parity=parity)
    H = encoding.assemble_ising(ising)
    sub = encoding.enumerate_m_subspace(spec.N, M, parity)
    psi0 = fock_initial_state(occ0, parity, ising.n_qubits)
    req = evolution.EvolutionRequest(H, psi0, tuple(wall_times), noise=noise)
    if noise is None:
        dw_states = evolution.evolve_unitary(req)
    else:
        dw_states = evolution.evolve_lindblad(req)

    # the reference evolution runs unscaled in the occupation basis
    block = chains.assemble_fermi(spec, M).sparse()
    k0 = sub.basis.index(encoding.fock_to_dw(occ0, parity=parity))
    v = np.zeros(sub.dimension, dtype=complex)
    v[k0] = 1.0
    exact = []
    prev = 0.0
    for T in times:
        if T != prev:
            v = expm_multiply(-1j * (T - prev) * block, v)
        prev = T
        exact.append(pure_state(v.copy(), basis_tag=f"fermi:N={spec.N},M={M}"))

    out = []
    for T, Tw, psi_e, psi_dw in zip(times, wall_times, exact, dw_states):
        rec = {
            "T_evol": T,
            "T_wall": Tw,
            "state_fidelity": analysis.state_fidelity(psi_e, psi_dw, sub),
            "subspace_fidelity": analysis.subspace_fidelity(psi_dw, sub),
            "exact": psi_e,
            "dw": psi_dw,
        }
        if with_occupations:
            rec["p"] = encoding.site_occupations(psi_dw, spec.N, parity)
        out.append(rec)
    return out, sub, alpha


def _fidelity_rows(trace):
    return [
        [r["T_evol"], r["T_wall"], r["state_fidelity"], r["subspace_fidelity"]] for r in trace
    ]


def _occupation_rows(trace):
    rows = []
    for r in trace:
        for site, p in enumerate(r["p"], start=1):
            rows.append([r["T_evol"], r["T_wall"], site, p])
    return rows


def _spectral_rows(eigenvalues):
    E = np.sort(np.asarray(eigenvalues, dtype=float))
    ratios, _ = analysis.gap_ratio_statistics(E)
    rep = analysis.unfold_and_classify(E) if E.size >= 16 else None
    s = rep.unfolded_spacings if rep is not None else np.array([])
    rows = []
    for i, e in enumerate(E):
        r = ratios[i - 1] if 1 <= i <= ratios.size else math.nan
        sp = s[i] if i < s.size else math.nan
        rows.append([i, e, r, sp])
    return rows, rep


def run_ssh_static(cfg):
    model = cfg.get("model", {})
    N = int(model.get("N", 14))
    v = float(model.get("v", 0.3))
    w = float(model.get("w", 1.0))
    J_values = cfg.get("J_sweep") or [cfg.get("J", -16.0)]
    spec = chains.ssh_spec(v, w, N)
    files = {}
    summary = {"f_op": {}}
    exact_single = np.sort(np.linalg.eigvalsh(chains.single_particle_matrix(spec).dense()))
    for J in J_values:
        J = float(J)
        ising = encoding.encode_ising(spec, J, parity="odd")
        dec = sw.block_decompose(ising)
        E = np.sort(np.linalg.eigvalsh(dec.blocks[1].dense()))
        rows = [[i, e, math.nan, math.nan] for i, e in enumerate(E)]
        files[f"spectrum_J{J:g}.csv"] = ("spectral", rows)
        Heff = sw.sw_effective_hamiltonian(dec, 1)
        summary["f_op"][f"{J:g}"] = sw.operator_fidelity(chains.assemble_fermi(spec, 1), Heff)
        summary.setdefault("max_spectrum_error", {})[f"{J:g}"] = float(
            np.abs(E - exact_single).max()
        )
    files["spectrum_exact.csv"] = (
        "spectral",
        [[i, e, math.nan, math.nan] for i, e in enumerate(exact_single)],
    )
    return files, summary


def run_aa_single(cfg):
    model = cfg.get("model", {})
    N = int(model.get("N", 13))
    J = float(cfg.get("J", -5.0))
    site = int(model.get("site", 7))
    beta = float(model.get("beta", (1 + math.sqrt(5)) / 2))
    phi = float(model.get("phi", 0.0))
    phases = model.get("phases", list(AA_PHASE_POINTS))
    times = sample_times(cfg)
    policy = resolve_policy(cfg)
    occ0 = [0] * N
    occ0[site - 1] = 1
    files = {}
    summary = {}
    for phase in phases:
        lam, mu = AA_PHASE_POINTS[phase]
        spec = chains.aubry_andre_spec(lam, beta, phi, mu, N)
        trace, _, _ = sector_trace(spec, J, occ0, times, policy=policy)
        files[f"occupations_{phase}.csv"] = ("occupations", _occupation_rows(trace))
        files[f"fidelity_{phase}.csv"] = ("fidelity", _fidelity_rows(trace))
        summary[phase] = {
            "final_state_fidelity": trace[-1]["state_fidelity"],
            "min_subspace_fidelity": min(r["subspace_fidelity"] for r in trace),
        }
    return files, summary


def half_filling_states(N, count, rng):
    """Random localized product states with 1 <= M <= ceil(N/2) particles.

    M is drawn uniformly, then the occupied sites are drawn uniformly
    without replacement; repeats of the full pattern are rejected.
    """
    M_max = (N + 1) // 2
    seen = set()
    out = []
    while len(out) < count:
        M = int(rng.integers(1, M_max + 1))
        sites = tuple(sorted(rng.choice(N, size=M, replace=False)))
        if sites in seen:
            continue
        seen.add(sites)
        occ = [0] * N
        for s in sites:
            occ[s] = 1
        out.append(tuple(occ))
    return out


def run_aa_half_filling(cfg):
    model = cfg.get("model", {})
    N = int(model.get("N", 11))
    J = float(cfg.get("J", -5.0))
    beta = float(model.get("beta", (1 + math.sqrt(5)) / 2))
    phi = float(model.get("phi", 0.0))
    times = sample_times(cfg)
    window = cfg.get("window", {})
    T0 = float(window.get("T0", times[len(times) // 2]))
    T1 = float(window.get("T1", times[-1]))
    ens = cfg.get("ensemble", {})
    count = int(ens.get("count", 1))
    if count > 1 and "seed" not in ens:
        raise ValidationError("ensemble.count > 1 requires ensemble.seed")
    rng = np.random.default_rng(int(ens.get("seed", 0)))
    inits = half_filling_states(N, count, rng)

    sweep = cfg.get("sweep") or {"lambda": [2.0], "mu": [1.5]}
    lams = [float(x) for x in sweep.get("lambda", [2.0])]
    mus = [float(x) for x in sweep.get("mu", [1.5])]
    policy = resolve_policy(cfg)
    files = {}
    grid_rows = []
    for lam in lams:
        for mu in mus:
            spec = chains.aubry_andre_spec(lam, beta, phi, mu, N)
            mean_series = np.zeros(len(times))
            for occ0 in inits:
                trace, sub, _ = sector_trace(
                    spec, J, list(occ0), times, policy=policy, with_occupations=False
                )
                s2 = [analysis.participation_entropy(r["dw"], sub) for r in trace]
                mean_series += np.array(s2)
            mean_series /= len(inits)
            rows = [[T, r["T_wall"], s] for T, r, s in zip(times, trace, mean_series)]
            files[f"entropy_lam{lam:g}_mu{mu:g}.csv"] = ("entropy", rows)
            avg = analysis.time_average(list(zip(times, mean_series)), T0, T1)
            grid_rows.append([lam, mu, avg])
    files["phase_diagram.csv"] = ("phase_diagram", grid_rows)
    summary = {"window": [T0, T1], "grid": {f"{r[0]:g},{r[1]:g}": r[2] for r in grid_rows}}
    return files, summary


def run_aa_dqpt(cfg):
    model = cfg.get("model", {})
    N = int(model.get("N", 11))
    J = float(cfg.get("J", -5.0))
    lam = float(model.get("lambda", 2.0))
    mu = float(model.get("mu", 1.5))
    beta = float(model.get("beta", (1 + math.sqrt(5)) / 2))
    phi = float(model.get("phi", 0.0))
    times = sample_times(cfg)
    noise = noise_from_config(cfg)
    policy = resolve_policy(cfg)
    occ0 = [1 if n % 2 == 1 else 0 for n in range(N)]  # staggered |0101...>
    spec = chains.aubry_andre_spec(lam, beta, phi, mu, N)
    trace, sub, alpha = sector_trace(
        spec, J, occ0, times, policy=policy, noise=noise, with_occupations=False
    )
    M = sum(occ0)
    parity = "odd" if M % 2 else "even"
    psi0_dw = fock_initial_state(occ0, parity, N - 1)
    k0 = sub.basis.index(encoding.fock_to_dw(occ0, parity=parity))
    rows = []
    for r in trace:
        e0 = np.zeros(sub.dimension, dtype=complex)
        e0[k0] = 1.0
        p_exact = abs(r["exact"].amplitudes[k0]) ** 2
        r_exact = -math.log(max(p_exact, 1e-300)) / N
        p_dw = analysis.survival_probability(psi0_dw, r["dw"])
        r_dw = -math.log(max(p_dw, 1e-300)) / N
        rows.append([r["T_evol"], r["T_wall"], r_exact, r_dw])
    files = {"rate.csv": ("rate", rows)}
    dev = max(abs(row[2] - row[3]) for row in rows)
    return files, {"max_rate_deviation": dev, "alpha": alpha, "noisy": noise is not None}


def xxz_sector_spectra(N, M, Delta, theta, J, t=1.0):
    """Exact and second-order effective sector spectra of the ramped chain."""
    spin, fermi = chains.xxz_spec(t, Delta, theta, N)
    exact = np.sort(np.linalg.eigvalsh(chains.assemble_fermi(fermi, M).dense()))
    ising = encoding.encode_ising(fermi, J, parity="odd" if M % 2 else "even")
    dec = sw.block_decompose(ising)
    eff = np.sort(np.linalg.eigvalsh(sw.sw_effective_hamiltonian(dec, M).dense()))
    return exact, eff


def run_xxz_statistics(cfg):
    model = cfg.get("model", {})
    N = int(model.get("N", 13))
    M = int(model.get("M", 7))
    Delta = float(model.get("Delta", 1.0))
    J = float(cfg.get("J", -40.0))
    thetas = [float(x) for x in (cfg.get("sweep", {}).get("theta") or [0.5, 4.0])]
    files = {}
    summary = {}
    for theta in thetas:
        exact, eff = xxz_sector_spectra(N, M, Delta, theta, J)
        rows_e, rep_e = _spectral_rows(exact)
        rows_f, rep_f = _spectral_rows(eff)
        files[f"spectral_exact_theta{theta:g}.csv"] = ("spectral", rows_e)
        files[f"spectral_eff_theta{theta:g}.csv"] = ("spectral", rows_f)
        summary[f"theta={theta:g}"] = {
            "r_exact": analysis.gap_ratio_statistics(exact)[1],
            "r_eff": analysis.gap_ratio_statistics(eff)[1],
            "classification_exact": rep_e.classification if rep_e else None,
            "classification_eff": rep_f.classification if rep_f else None,
        }
    return files, summary


def run_xxz_dynamics(cfg):
    model = cfg.get("model", {})
    N = int(model.get("N", 9))
    Delta = float(model.get("Delta", 1.0))
    theta = float(model.get("theta", 1.0))
    J = float(cfg.get("J", -20.0))
    times = sample_times(cfg)
    policy = resolve_policy(cfg)
    _, fermi = chains.xxz_spec(1.0, Delta, theta, N)
    occ0 = [1 if n % 2 == 1 else 0 for n in range(N)]
    trace, _, _ = sector_trace(fermi, J, occ0, times, policy=policy)
    files = {
        "fidelity.csv": ("fidelity", _fidelity_rows(trace)),
        "occupations.csv": ("occupations", _occupation_rows(trace)),
    }
    return files, {"final_state_fidelity": trace[-1]["state_fidelity"]}


def run_floquet_nnn(cfg):
    model = cfg.get("model", {})
    N = int(model.get("N", 15))
    K1 = float(model.get("K1", 1.0))
    K2 = float(model.get("K2", 0.2))
    tau = float(model.get("tau", 0.5))
    J = float(cfg.get("J", -15.0))
    m_periods = int(model.get("periods", 126))
    steps_per_tau = int(model.get("steps_per_tau", 12))
    M_values = [int(m) for m in model.get("M_values", [1])]
    spec = chains.FermiChainSpec(N, (0.0,) * (N - 1), (0.0,) * N, (0.0,) * (N - 1))
    drive = chains.floquet_nnn_drive(K1, K2, tau, N)
    files = {}
    summary = {}
    for M in M_values:
        occ0 = floquet_initial_occupation(N, M)
        parity = "odd" if M % 2 else "even"
        ising = encoding.encode_ising(spec, J, parity=parity)
        sub = encoding.enumerate_m_subspace(N, M, parity)
        psi0 = fock_initial_state(occ0, parity, N - 1)
        strobe = [m * tau for m in range(1, m_periods + 1)]
        dw_states = stroboscopic_driven_states(ising, drive, psi0, strobe, steps_per_tau)
        Hn = chains.nnn_effective_operator(K1, K2, N, M).sparse()
        k0 = sub.basis.index(encoding.fock_to_dw(occ0, parity=parity))
        v = np.zeros(sub.dimension, dtype=complex)
        v[k0] = 1.0
        rows = []
        final_p = None
        for m, psi_dw in zip(range(1, m_periods + 1), dw_states):
            T_evol = 3.0 * tau**2 * m / (4.0 * math.pi)
            ve = expm_multiply(-1j * T_evol * Hn, v) if m == 1 else ve_step(Hn, ve, tau)
            psi_e = pure_state(ve, basis_tag=f"fermi:N={N},M={M}")
            F = analysis.state_fidelity(psi_e, psi_dw, sub)
            Fs = analysis.subspace_fidelity(psi_dw, sub)
            rows.append([T_evol, m * tau, F, Fs])
            final_p = encoding.site_occupations(psi_dw, N, parity)
        files[f"fidelity_M{M}.csv"] = ("fidelity", rows)
        files[f"occupations_M{M}.csv"] = (
            "occupations",
            [[rows[-1][0], rows[-1][1], s + 1, p] for s, p in enumerate(final_p)],
        )
        summary[f"M={M}"] = {"final_fidelity": rows[-1][2]}
    return files, summary


def ve_step(Hn, ve, tau):
    dT = 3.0 * tau**2 / (4.0 * math.pi)
    return expm_multiply(-1j * dT * Hn, ve)


def floquet_initial_occupation(N, M):
    """Centered single particle for M=1, evenly staggered pattern otherwise."""
    occ = [0] * N
    if M == 1:
        occ[N // 2] = 1
        return occ
    if 2 * M - 1 == N:
        for s in range(1, N, 2):
            occ[s] = 1
        return occ
    stride = max(N // M, 2)
    placed = 0
    s = (N - stride * (M - 1) - 1) // 2
    while placed < M:
        occ[min(s, N - 1)] = 1
        placed += 1
        s += stride
    if sum(occ) != M:
        raise ValidationError(f"cannot place M={M} staggered particles on N={N}")
    return occ


def stroboscopic_driven_states(ising, drive, psi0, strobe_times, steps_per_tau):
    """Fixed-step fourth-order propagation sampled at multiples of tau."""
    from .evolution import _driven_cache, _magnus_step

    cache = _driven_cache(ising)
    amp = psi0.amplitudes.copy()
    h = drive.tau / steps_per_tau
    out = []
    prev = 0.0
    for T in strobe_times:
        n = int(round((T - prev) / h))
        for s in range(n):
            amp = _magnus_step(ising, drive, cache, amp, prev + s * h, h)
        prev = T
        out.append(pure_state(amp.copy(), basis_tag=psi0.basis_tag))
    return out


def run_custom(cfg):
    model = _require(cfg, "model", "custom")
    N = int(_require(model, "N", "custom"))
    t = model.get("t", [1.0] * (N - 1))
    eps = model.get("eps", [0.0] * N)
    v = model.get("v", [0.0] * (N - 1))
    spec = chains.FermiChainSpec(N, tuple(t), tuple(eps), tuple(v))
    J = float(cfg.get("J", -10.0))
    occ0 = [int(x) for x in _require(model, "initial", "custom")]
    if len(occ0) != N:
        raise ValidationError("model.initial length must equal N")
    times = sample_times(cfg)
    noise = noise_from_config(cfg)
    trace, _, _ = sector_trace(
        spec, J, occ0, times, policy=resolve_policy(cfg), noise=noise
    )
    files = {
        "occupations.csv": ("occupations", _occupation_rows(trace)),
        "fidelity.csv": ("fidelity", _fidelity_rows(trace)),
    }
    return files, {"final_state_fidelity": trace[-1]["state_fidelity"]}


_RUNNERS = {
    "ssh_static": run_ssh_static,
    "aa_single": run_aa_single,
    "aa_half_filling": run_aa_half_filling,
    "aa_dqpt": run_aa_dqpt,
    "xxz_statistics": run_xxz_statistics,
    "xxz_dynamics": run_xxz_dynamics,
    "floquet_nnn": run_floquet_nnn,
    "custom": run_custom,
}


def validate_config(cfg):
    """Field-level checks that do not require running anything."""
    if not isinstance(cfg, dict):
        raise ValidationError("config root must be a mapping")
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise ValidationError(f"unknown kind {kind!r}; choose one of {', '.join(KINDS)}")
    if kind in ("aa_single", "aa_half_filling", "aa_dqpt", "xxz_dynamics", "custom"):
        sample_times(cfg)
    noise_from_config(cfg)
    resolve_policy(cfg)
    ens = cfg.get("ensemble") or {}
    if int(ens.get("count", 1)) > 1 and "seed" not in ens:
        raise ValidationError("ensemble.count > 1 requires ensemble.seed")
    if kind == "custom":
        model = _require(cfg, "model", kind)
        _require(model, "N", kind)
        _require(model, "initial", kind)
    return kind


def run_kind(cfg):
    kind = validate_config(cfg)
    return _RUNNERS[kind](cfg)
