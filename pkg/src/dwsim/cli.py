"""Command-line entry point: run experiment configs and emit CSV/JSON.

Exit codes: 0 on success, 1 on config validation failure, 2 on runtime
failure.  CSVs are written atomically (temp file + rename) and the JSON
manifest is written last, so a manifest always describes complete files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from importlib import metadata
from pathlib import Path

import yaml

from .experiments import KINDS, SCHEMAS, ValidationError, run_kind, validate_config


def _format_value(x):
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def write_csv(path, schema, rows):
    columns = SCHEMAS[schema]
    tmp = path.with_name(path.name + ".tmp")
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                if len(row) != len(columns):
                    raise ValueError(f"row width {len(row)} != schema {schema!r}")
                fh.write(",".join(_format_value(x) for x in row) + "\n")
        os.replace(tmp, path)
    except OSError as exc:
        raise RuntimeError(f"cannot write {path}: {exc}") from exc
    finally:
        tmp.unlink(missing_ok=True)
    return len(rows)


def _toolkit_version():
    try:
        return metadata.version("dwsim")
    except metadata.PackageNotFoundError:
        return "unknown"


def run_config(cfg, out_dir):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    started = time.time()
    files, summary = run_kind(cfg)
    records = []
    written = []
    try:
        for name, (schema, rows) in files.items():
            t0 = time.time()
            path = out_dir / name
            n = write_csv(path, schema, rows)
            written.append(path)
            records.append(
                {"file": name, "schema": schema, "rows": n, "wall_clock": time.time() - t0}
            )
    except Exception:
        for path in written:
            path.unlink(missing_ok=True)
        raise
    manifest = {
        "config": cfg,
        "toolkit_version": _toolkit_version(),
        "records": records,
        "summary": summary,
        "total_wall_clock": time.time() - started,
    }
    tmp = out_dir / "manifest.json.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    os.replace(tmp, out_dir / "manifest.json")
    return manifest


def _load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ValidationError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError("config root must be a mapping")
    return cfg


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dwsim", description="Fermion-chain simulation via Ising encodings"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to the YAML config")
    p_run.add_argument("--output-dir", help="override the config output directory")
    p_run.add_argument("--seed", type=int, help="override ensemble.seed")
    p_run.add_argument("--threads", type=int, default=1, help="worker count (reduction order is fixed)")

    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config", help="path to the YAML config")

    sub.add_parser("list-kinds", help="print the supported experiment kinds")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list-kinds":
        for kind in KINDS:
            print(kind)
        return 0
    try:
        cfg = _load_config(args.config)
        if args.command == "validate":
            validate_config(cfg)
            print("ok")
            return 0
        if args.seed is not None:
            cfg.setdefault("ensemble", {})["seed"] = args.seed
        out_dir = args.output_dir or cfg.get("output", "results")
        manifest = run_config(cfg, out_dir)
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(manifest['records'])} files to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
