"""Experiment runner: spec validation, determinism, exit codes, catalog."""

import json
import math
from pathlib import Path

import pytest

from nadqec import cli
from nadqec.cli import (
    CATALOG,
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_OK,
    ConfigError,
    ExperimentSpec,
    list_experiments,
)


def write_spec(tmp_path: Path, payload: dict) -> Path:
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(payload))
    return path


def multiqec_payload(tmp_path: Path) -> dict:
    return {
        "kind": "multiqec",
        "seed": 3,
        "output": str(tmp_path / "out.csv"),
        "params": {"theta": math.pi, "max_delay": 30.0,
                   "total_free": [30.0, 60.0], "t1": 220.0, "t2": 440.0},
    }


class TestSpecLoading:
    def test_valid_spec(self, tmp_path):
        spec = ExperimentSpec.load(write_spec(tmp_path, multiqec_payload(tmp_path)))
        assert spec.kind == "multiqec"
        assert spec.seed == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            ExperimentSpec.load(tmp_path / "nope.json")

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"kind": "multiqec",\n  broken\n}')
        with pytest.raises(ConfigError, match=r":2:"):
            ExperimentSpec.load(path)

    def test_unknown_kind(self, tmp_path):
        payload = multiqec_payload(tmp_path)
        payload["kind"] = "frobnicate"
        with pytest.raises(ConfigError, match="unknown kind"):
            ExperimentSpec.load(write_spec(tmp_path, payload))

    def test_missing_field_named(self, tmp_path):
        payload = multiqec_payload(tmp_path)
        del payload["params"]["t1"]
        with pytest.raises(ConfigError, match="t1"):
            ExperimentSpec.load(write_spec(tmp_path, payload))


class TestRun:
    def test_multiqec_writes_csv_and_manifest(self, tmp_path):
        path = write_spec(tmp_path, multiqec_payload(tmp_path))
        assert cli.main(["run", str(path)]) == EXIT_OK
        out = tmp_path / "out.csv"
        lines = out.read_text().splitlines()
        assert lines[0].startswith("total_evolution_us,fidelity")
        assert len(lines) == 3
        manifest = json.loads((tmp_path / "out.csv.manifest.json").read_text())
        assert manifest["kind"] == "multiqec"
        assert manifest["seed"] == 3
        assert manifest["rng"] == "PCG64"
        assert "version" in manifest and "wall_time_s" in manifest

    def test_byte_identical_reruns(self, tmp_path):
        path = write_spec(tmp_path, multiqec_payload(tmp_path))
        cli.main(["run", str(path)])
        first = (tmp_path / "out.csv").read_bytes()
        cli.main(["run", str(path)])
        assert (tmp_path / "out.csv").read_bytes() == first

    def test_config_error_exit_code(self, tmp_path):
        payload = multiqec_payload(tmp_path)
        del payload["params"]["max_delay"]
        path = write_spec(tmp_path, payload)
        assert cli.main(["run", str(path)]) == EXIT_CONFIG

    def test_numerical_error_exit_code(self, tmp_path):
        payload = multiqec_payload(tmp_path)
        payload["params"]["t1"] = -5.0
        path = write_spec(tmp_path, payload)
        assert cli.main(["run", str(path)]) == EXIT_NUMERICAL

    def test_delay_sweep(self, tmp_path):
        payload = {
            "kind": "delay-sweep",
            "output": str(tmp_path / "sweep.csv"),
            "params": {"delays": [10.0, 30.0], "total_free": [60.0, 120.0],
                       "t1": 220.0, "t2": 440.0},
        }
        assert cli.main(["run", str(write_spec(tmp_path, payload))]) == EXIT_OK
        rows = (tmp_path / "sweep.csv").read_text().splitlines()
        assert len(rows) == 1 + 4

    def test_crosstalk_toy(self, tmp_path):
        payload = {
            "kind": "crosstalk-toy",
            "output": str(tmp_path / "toy.csv"),
            "params": {"t1": 100.0, "t_final": 16.0, "cycles": 2,
                       "steps_per_interval": 40},
        }
        assert cli.main(["run", str(write_spec(tmp_path, payload))]) == EXIT_OK
        text = (tmp_path / "toy.csv").read_text()
        assert "probe,sequence,time_us" in text.splitlines()[0]
        assert "chadd" in text and "free" in text

    def test_gain_surface(self, tmp_path):
        payload = {
            "kind": "gain-surface",
            "output": str(tmp_path / "gain.csv"),
            "params": {"t1_range": [150.0, 250.0], "emeas_range": [0.0, 0.01],
                       "delay_range": [20.0, 40.0]},
        }
        assert cli.main(["run", str(write_spec(tmp_path, payload))]) == EXIT_OK
        rows = (tmp_path / "gain.csv").read_text().splitlines()
        assert rows[0] == "T1_us,E_meas,delay_us,gain,F_qec,F_bare,p_success,seed"
        assert len(rows) == 1 + 8

    def test_oracle_check(self, tmp_path):
        payload = {
            "kind": "oracle-check",
            "output": str(tmp_path / "oracle.csv"),
            "params": {"theta_points": 4, "gamma_points": 4},
        }
        assert cli.main(["run", str(write_spec(tmp_path, payload))]) == EXIT_OK
        rows = (tmp_path / "oracle.csv").read_text().splitlines()
        assert len(rows) == 1 + 16
        worst = max(float(r.split(",")[4]) for r in rows[1:])
        assert worst < 1e-10

    def test_ten_digit_precision(self, tmp_path):
        path = write_spec(tmp_path, multiqec_payload(tmp_path))
        cli.main(["run", str(path)])
        row = (tmp_path / "out.csv").read_text().splitlines()[1]
        fid = row.split(",")[1]
        assert len(fid.replace(".", "").replace("-", "").lstrip("0")) <= 10


class TestCatalog:
    def test_seven_kinds(self):
        assert len(CATALOG) == 7

    def test_listing_mentions_figures_and_fields(self):
        text = list_experiments()
        for kind, entry in CATALOG.items():
            assert kind in text
            assert entry.figure in text

    def test_json_listing(self):
        data = json.loads(list_experiments(as_json=True))
        assert set(data) == set(CATALOG)
        for entry in data.values():
            assert {"required", "figure", "description"} <= set(entry)

    def test_list_command(self, capsys):
        assert cli.main(["list"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "multiqec" in out


class TestCheck:
    def test_check_command(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert cli.main(["check"]) == EXIT_OK
        assert (tmp_path / "oracle_check.csv").exists()

    def test_thread_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NADQEC_THREADS", "2")
        payload = {
            "kind": "gain-surface",
            "output": str(tmp_path / "gain.csv"),
            "params": {"t1_range": [200.0], "emeas_range": [0.0, 0.01],
                       "delay_range": [30.0]},
        }
        assert cli.main(["run", str(write_spec(tmp_path, payload))]) == EXIT_OK
        rows = (tmp_path / "gain.csv").read_text().splitlines()
        assert len(rows) == 3

    def test_bad_thread_env_var(self, tmp_path, monkeypatch):
        monkeypatch.setenv("NADQEC_THREADS", "lots")
        payload = {
            "kind": "gain-surface",
            "output": str(tmp_path / "gain.csv"),
            "params": {"t1_range": [200.0], "emeas_range": [0.0],
                       "delay_range": [30.0]},
        }
        assert cli.main(["run", str(write_spec(tmp_path, payload))]) == EXIT_CONFIG
