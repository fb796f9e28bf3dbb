"""Figure rendering from the simulation CSV/JSON contracts.

Every figure kind reads one or more CSVs written by the simulation CLI,
never mutates its inputs, and writes a single image deterministically.
The time axis is always the model-time column T_evol.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
import yaml

DEFAULT_LR_VELOCITY = 3.02

SCHEMAS = {
    "occupations": ["T_evol", "T_wall", "site", "p"],
    "fidelity": ["T_evol", "T_wall", "state_fidelity", "subspace_fidelity"],
    "spectral": ["index", "eigenvalue", "r_eta", "s_n"],
    "entropy": ["T_evol", "T_wall", "s2pe"],
    "phase_diagram": ["lambda", "mu", "s2pe_mean"],
    "rate": ["T_evol", "T_wall", "r_exact", "r_dw"],
}


class RecipeError(ValueError):
    """Recipe or input-file problem reported before any image is written."""


def load_recipe(path):
    try:
        with open(path, encoding="utf-8") as fh:
            recipe = yaml.safe_load(fh)
    except OSError as exc:
        raise RecipeError(f"cannot read recipe {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise RecipeError(f"recipe {path} is not valid YAML: {exc}") from exc
    if not isinstance(recipe, dict):
        raise RecipeError("recipe root must be a mapping")
    base = Path(path).parent
    for key in ("input", "manifest"):
        if key in recipe and recipe[key] is not None:
            recipe[key] = str((base / recipe[key]).resolve())
    if "output" in recipe and recipe["output"] is not None:
        recipe["output"] = str((base / recipe["output"]).resolve())
    return recipe


def read_table(path, schema):
    columns = SCHEMAS[schema]
    try:
        frame = pd.read_csv(path)
    except OSError as exc:
        raise RecipeError(f"cannot read input {path}: {exc}") from exc
    except pd.errors.EmptyDataError as exc:
        raise RecipeError(f"input {path} is empty") from exc
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise RecipeError(f"input {path} lacks columns {missing} of schema {schema!r}")
    if frame.empty:
        raise RecipeError(f"input {path} has a header but no data rows")
    return frame


def _save(fig, output):
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, dpi=150)
    plt.close(fig)
    return str(output)


def _render_occupation_heatmap(recipe):
    frame = read_table(recipe["input"], "occupations")
    times = np.sort(frame["T_evol"].unique())
    sites = np.sort(frame["site"].unique()).astype(int)
    grid = frame.pivot_table(index="site", columns="T_evol", values="p")
    grid = grid.reindex(index=sites, columns=times)
    fig, ax = plt.subplots(figsize=(6, 4))
    mesh = ax.pcolormesh(times, sites, grid.to_numpy(), shading="nearest",
                         cmap=recipe.get("cmap", "viridis"), vmin=0.0, vmax=1.0)
    fig.colorbar(mesh, ax=ax, label="p")
    cone = recipe.get("cone")
    if cone is not None:
        cone = cone if isinstance(cone, dict) else {}
        v = float(cone.get("velocity", DEFAULT_LR_VELOCITY))
        origin = float(cone.get("origin_site", sites[len(sites) // 2]))
        t0 = float(cone.get("t0", 0.0))
        t = np.linspace(max(times.min(), t0), times.max(), 200)
        for sign in (+1, -1):
            ax.plot(t, origin + sign * v * (t - t0), color="white",
                    linestyle="--", linewidth=1.2, label="light cone" if sign > 0 else None)
        ax.set_ylim(sites.min() - 0.5, sites.max() + 0.5)
    ax.set_xlabel("T_evol")
    ax.set_ylabel("site")
    ax.set_title(recipe.get("title", "site occupations"))
    return _save(fig, recipe["output"])


def _render_fidelity_trace(recipe):
    frame = read_table(recipe["input"], "fidelity")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(frame["T_evol"], frame["state_fidelity"], marker="o", label="state fidelity")
    ax.plot(frame["T_evol"], frame["subspace_fidelity"], marker="s", label="subspace fidelity")
    ax.set_xlabel("T_evol")
    ax.set_ylabel("fidelity")
    ax.set_ylim(0.0, 1.02)
    ax.legend()
    ax.set_title(recipe.get("title", "fidelity trace"))
    return _save(fig, recipe["output"])


def _render_phase_diagram(recipe):
    frame = read_table(recipe["input"], "phase_diagram")
    lams = np.sort(frame["lambda"].unique())
    mus = np.sort(frame["mu"].unique())
    grid = frame.pivot_table(index="mu", columns="lambda", values="s2pe_mean")
    grid = grid.reindex(index=mus, columns=lams)
    fig, ax = plt.subplots(figsize=(5, 4))
    mesh = ax.pcolormesh(lams, mus, grid.to_numpy(), shading="nearest",
                         cmap=recipe.get("cmap", "magma"))
    fig.colorbar(mesh, ax=ax, label="mean S2PE")
    ax.set_xlabel("lambda")
    ax.set_ylabel("mu")
    ax.set_title(recipe.get("title", "participation-entropy phase diagram"))
    return _save(fig, recipe["output"])


def _render_rate_panel(recipe):
    frame = read_table(recipe["input"], "rate")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(frame["T_evol"], frame["r_exact"], marker="o", label="exact")
    ax.plot(frame["T_evol"], frame["r_dw"], marker="s", label="encoded")
    ax.set_xlabel("T_evol")
    ax.set_ylabel("rate function")
    ax.legend()
    ax.set_title(recipe.get("title", "return-probability rate function"))
    return _save(fig, recipe["output"])


def _classification(recipe):
    label = recipe.get("classification")
    manifest = recipe.get("manifest")
    if label is None and manifest:
        try:
            with open(manifest, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise RecipeError(f"cannot read manifest {manifest}: {exc}") from exc
        text = json.dumps(data.get("summary", {}))
        if "WignerDyson" in text:
            label = "WignerDyson"
        elif "Poisson" in text:
            label = "Poisson"
    return label


def _render_spacing_histogram(recipe):
    frame = read_table(recipe["input"], "spectral")
    s = frame["s_n"].dropna().to_numpy()
    s = s[np.isfinite(s)]
    if s.size == 0:
        raise RecipeError("spectral input carries no unfolded spacings")
    width = float(recipe.get("bin_width", 0.125))
    edges = np.arange(0.0, s.max() + width, width)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(s, bins=edges, density=True, alpha=0.6, label="unfolded spacings")
    label = _classification(recipe)
    if label is not None:
        grid = np.linspace(0.0, max(3.0, s.max()), 300)
        if label == "Poisson":
            ax.plot(grid, np.exp(-grid), "k-", label="P_P(s)")
        elif label == "WignerDyson":
            ax.plot(grid, 0.5 * math.pi * grid * np.exp(-math.pi * grid**2 / 4),
                    "k-", label="P_WD(s)")
        else:
            raise RecipeError(f"unknown classification {label!r}")
    ax.set_xlabel("s")
    ax.set_ylabel("P(s)")
    ax.legend()
    ax.set_title(recipe.get("title", "level-spacing distribution"))
    return _save(fig, recipe["output"])


def _render_spectrum_panel(recipe):
    frame = read_table(recipe["input"], "spectral")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(frame["index"], frame["eigenvalue"], marker=".", linestyle="none")
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    ax.set_title(recipe.get("title", "spectrum"))
    return _save(fig, recipe["output"])


def _render_floquet_bars(recipe):
    frame = read_table(recipe["input"], "occupations")
    final_T = frame["T_evol"].max()
    snap = frame[frame["T_evol"] == final_T].sort_values("site")
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(snap["site"].astype(int), snap["p"])
    ax.set_xlabel("site")
    ax.set_ylabel("p")
    ax.set_ylim(0.0, 1.0)
    ax.set_title(recipe.get("title", f"occupations at T_evol = {final_T:g}"))
    return _save(fig, recipe["output"])


KINDS = {
    "occupation_heatmap": _render_occupation_heatmap,
    "fidelity_trace": _render_fidelity_trace,
    "phase_diagram": _render_phase_diagram,
    "rate_panel": _render_rate_panel,
    "spacing_histogram": _render_spacing_histogram,
    "spectrum_panel": _render_spectrum_panel,
    "floquet_bars": _render_floquet_bars,
}


def render_figure(recipe):
    """Render one recipe mapping and return the written image path."""
    kind = recipe.get("kind")
    if kind not in KINDS:
        raise RecipeError(f"unknown figure kind {kind!r}; choose one of {', '.join(KINDS)}")
    if not recipe.get("input"):
        raise RecipeError("recipe needs an 'input' CSV path")
    if not recipe.get("output"):
        raise RecipeError("recipe needs an 'output' image path")
    return KINDS[kind](recipe)
