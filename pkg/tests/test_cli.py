"""CLI behavior, config validation, and output file contracts."""

import csv
import json
import math

import numpy as np
import pytest
import yaml

from dwsim import cli, experiments
from dwsim.cli import main, run_config, write_csv
from dwsim.experiments import (
    KINDS,
    SCHEMAS,
    ValidationError,
    floquet_initial_occupation,
    half_filling_states,
    sample_times,
    sector_trace,
    validate_config,
)


def write_yaml(path, cfg):
    path.write_text(yaml.safe_dump(cfg))
    return str(path)


CUSTOM_CFG = {
    "kind": "custom",
    "J": -12.0,
    "model": {"N": 4, "initial": [0, 1, 0, 0]},
    "times": [0.5, 1.0],
}


class TestWriteCsv:
    def test_header_and_full_precision(self, tmp_path):
        path = tmp_path / "out.csv"
        rows = [[0.1, 0.2, 1, 1 / 3]]
        n = write_csv(path, "occupations", rows)
        assert n == 1
        lines = path.read_text().splitlines()
        assert lines[0] == "T_evol,T_wall,site,p"
        assert "0.33333333333333331" in lines[1]
        assert float(lines[1].split(",")[3]) == 1 / 3

    def test_row_width_enforced(self, tmp_path):
        path = tmp_path / "out.csv"
        with pytest.raises(ValueError, match="row width"):
            write_csv(path, "fidelity", [[1.0, 2.0]])
        assert not path.exists()
        assert not path.with_name("out.csv.tmp").exists()


class TestValidateConfig:
    def test_unknown_kind(self):
        with pytest.raises(ValidationError, match="unknown kind"):
            validate_config({"kind": "mystery"})

    def test_all_kinds_listed(self):
        assert set(experiments._RUNNERS) == set(KINDS)

    def test_missing_times(self):
        with pytest.raises(ValidationError, match="times"):
            validate_config({"kind": "custom", "model": {"N": 4, "initial": [1, 0, 0, 0]}})

    def test_times_block_expansion(self):
        t = sample_times({"times": {"t_max": 2.0, "samples": 4}})
        assert np.allclose(t, [0.5, 1.0, 1.5, 2.0])

    def test_bad_times_block(self):
        with pytest.raises(ValidationError):
            sample_times({"times": {"t_max": -1.0, "samples": 4}})

    def test_ensemble_needs_seed(self):
        cfg = {
            "kind": "aa_half_filling",
            "times": [1.0],
            "ensemble": {"count": 3},
        }
        with pytest.raises(ValidationError, match="seed"):
            validate_config(cfg)

    def test_noise_block(self):
        cfg = dict(CUSTOM_CFG)
        cfg["noise"] = {"relax": 0.01}
        assert validate_config(cfg) == "custom"
        cfg["noise"] = {"other": 1.0}
        with pytest.raises(ValidationError, match="noise"):
            validate_config(cfg)

    def test_custom_requires_initial(self):
        with pytest.raises(ValidationError, match="initial"):
            validate_config({"kind": "custom", "times": [1.0], "model": {"N": 4}})


class TestCliCommands:
    def test_list_kinds(self, capsys):
        assert main(["list-kinds"]) == 0
        out = capsys.readouterr().out.split()
        assert out == list(KINDS)

    def test_validate_ok(self, tmp_path, capsys):
        cfg_path = write_yaml(tmp_path / "cfg.yaml", CUSTOM_CFG)
        assert main(["validate", cfg_path]) == 0
        assert capsys.readouterr().out.strip() == "ok"

    def test_validate_bad_config_exit_1(self, tmp_path, capsys):
        cfg_path = write_yaml(tmp_path / "cfg.yaml", {"kind": "nope"})
        assert main(["validate", cfg_path]) == 1
        assert "config error" in capsys.readouterr().err

    def test_missing_file_exit_1(self, capsys):
        assert main(["validate", "/nonexistent/cfg.yaml"]) == 1

    def test_non_mapping_config(self, tmp_path):
        p = tmp_path / "cfg.yaml"
        p.write_text("- a\n- b\n")
        assert main(["validate", str(p)]) == 1

    def test_runtime_failure_exit_2(self, tmp_path, capsys):
        bad = dict(CUSTOM_CFG)
        # interaction on a two-site chain fails inside the encoder at runtime
        bad["model"] = {"N": 2, "initial": [1, 0], "v": [1.0]}
        cfg_path = write_yaml(tmp_path / "cfg.yaml", bad)
        assert main(["run", cfg_path, "--output-dir", str(tmp_path / "out")]) == 2
        assert "runtime error" in capsys.readouterr().err

    def test_run_custom_end_to_end(self, tmp_path, capsys):
        cfg_path = write_yaml(tmp_path / "cfg.yaml", CUSTOM_CFG)
        out_dir = tmp_path / "results"
        assert main(["run", cfg_path, "--output-dir", str(out_dir)]) == 0

        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["config"]["kind"] == "custom"
        assert {r["file"] for r in manifest["records"]} == {
            "occupations.csv",
            "fidelity.csv",
        }
        for rec in manifest["records"]:
            assert rec["schema"] in SCHEMAS
            assert rec["rows"] > 0
            assert rec["wall_clock"] >= 0
        assert 0.0 <= manifest["summary"]["final_state_fidelity"] <= 1.0

        with open(out_dir / "fidelity.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [float(r["T_evol"]) for r in rows] == [0.5, 1.0]
        # strong coupling: the encoded dynamics track the exact sector
        assert all(float(r["state_fidelity"]) > 0.99 for r in rows)

        with open(out_dir / "occupations.csv") as fh:
            occ = list(csv.DictReader(fh))
        assert len(occ) == 2 * 4
        by_time = {}
        for r in occ:
            by_time.setdefault(r["T_evol"], []).append(float(r["p"]))
        for vals in by_time.values():
            # total occupation deviates from M only by sector leakage
            assert sum(vals) == pytest.approx(1.0, abs=0.01)

    def test_seed_override(self, tmp_path):
        cfg = {
            "kind": "aa_half_filling",
            "J": -8.0,
            "model": {"N": 5},
            "times": [1.0, 2.0],
            "sweep": {"lambda": [1.0], "mu": [0.0]},
            "ensemble": {"count": 2, "seed": 1},
            "window": {"T0": 1.0, "T1": 2.0},
        }
        cfg_path = write_yaml(tmp_path / "cfg.yaml", cfg)
        a = tmp_path / "a"
        b = tmp_path / "b"
        assert main(["run", cfg_path, "--output-dir", str(a), "--seed", "7"]) == 0
        assert main(["run", cfg_path, "--output-dir", str(b), "--seed", "7"]) == 0
        assert (a / "phase_diagram.csv").read_text() == (b / "phase_diagram.csv").read_text()
        ma = json.loads((a / "manifest.json").read_text())
        assert ma["config"]["ensemble"]["seed"] == 7


class TestExperimentHelpers:
    def test_half_filling_states_distinct_and_valid(self):
        rng = np.random.default_rng(0)
        states = half_filling_states(7, 10, rng)
        assert len(set(states)) == 10
        for occ in states:
            assert 1 <= sum(occ) <= 4
            assert len(occ) == 7

    def test_floquet_initial_occupation(self):
        assert floquet_initial_occupation(15, 1)[7] == 1
        occ = floquet_initial_occupation(15, 7)
        assert sum(occ) == 7
        assert occ == [0, 1] * 7 + [0]

    def test_sector_trace_unitary_reference(self):
        # strongly coupled short chain: both fidelities near one
        from dwsim.chains import FermiChainSpec

        spec = FermiChainSpec(4, (1.0,) * 3, (0.0,) * 4, (0.0,) * 3)
        trace, sub, alpha = sector_trace(spec, -60.0, [1, 0, 0, 0], (0.5, 1.5))
        assert alpha == 1.0
        assert len(trace) == 2
        for r in trace:
            assert r["state_fidelity"] > 0.999
            assert r["subspace_fidelity"] > 0.999
            assert r["p"].sum() == pytest.approx(1.0, abs=1e-3)

    def test_run_kind_rejects_before_running(self):
        with pytest.raises(ValidationError):
            experiments.run_kind({"kind": "custom", "times": [1.0]})
