import csv
import json

import numpy as np
import pytest

from permdecomp import config
from permdecomp.cli import main
from permdecomp.errors import ConfigError


def write_config(path, data):
    path.write_text(json.dumps(data))
    return path


def report_of(out):
    return json.loads((out / "report.json").read_text())


class TestConfig:
    def test_defaults_per_kind(self):
        assert config.defaults("gaussian").thresholds.w_momentum_reference == 4.6e-23
        sc = config.defaults("scattering")
        assert (sc.grid.n_cells, sc.grid.box_length, sc.packet.p0) == (16384, 2048.0, 2.0)
        with pytest.raises(ConfigError):
            config.defaults("lattice")

    @pytest.mark.parametrize("data", [{"scenario": "gaussian", "sead": 1},
                                      {"scenario": "gaussian", "grid": {"cells": 64}},
                                      {"scenario": "verify", "verify": {"trails": 3}}])
    def test_unknown_keys_rejected(self, tmp_path, data):
        with pytest.raises(ConfigError, match="unknown key"):
            config.load_file(write_config(tmp_path / "c.json", data))

    @pytest.mark.parametrize("data, match", [
        ({"scenario": "gaussian", "seed": "7"}, "integer"),
        ({"scenario": "gaussian", "time": {"n_samples": 1}}, "n_samples"),
        ({"scenario": "gaussian", "packet": {"sigma_p": 0}}, "positive"),
        ({"scenario": "gaussian", "fail_fast": 1}, "true or false"),
        ({"seed": 1}, "scenario"),
    ])
    def test_invalid_values(self, tmp_path, data, match):
        with pytest.raises(ConfigError, match=match):
            config.resolve(path=write_config(tmp_path / "c.json", data), environ={})

    def test_nonfinite_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"scenario": "gaussian", "packet": {"p0": Infinity}}')
        with pytest.raises(ConfigError, match="finite"):
            config.resolve(path=path, environ={})

    def test_precedence(self, tmp_path):
        path = write_config(tmp_path / "c.json",
                            {"scenario": "gaussian", "seed": 1, "time": {"t_max": 5.0},
                             "grid": {"n_cells": 2048}, "out_dir": "from-file"})
        env = {"PERMDECOMP_SEED": "2", "PERMDECOMP_T_MAX": "6.5", "PERMDECOMP_OUT_DIR": ""}
        cfg = config.resolve(path=path, cli={"seed": 3}, environ=env)
        assert cfg.seed == 3                       # command line beats environment
        assert cfg.time.t_max == 6.5               # environment beats file
        assert cfg.grid.n_cells == 2048            # file beats defaults
        assert cfg.out_dir == "from-file"          # empty variables are ignored
        assert cfg.packet.p0 == 10.0               # untouched default

    def test_bad_environment_value(self):
        with pytest.raises(ConfigError, match="PERMDECOMP_GRID_N"):
            config.resolve("gaussian", environ={"PERMDECOMP_GRID_N": "lots"})

    def test_kind_must_match_file(self, tmp_path):
        path = write_config(tmp_path / "c.json", {"scenario": "verify"})
        with pytest.raises(ConfigError, match="not 'gaussian'"):
            config.resolve("gaussian", path, environ={})

    def test_trials_override_sets_all_suites(self):
        cfg = config.resolve("verify", cli={"trials": 4}, environ={})
        v = cfg.verify
        assert (v.finite_trials, v.tree_trials, v.partition_trials) == (4, 4, 4)


@pytest.mark.usefixtures("clean_env")
class TestCli:
    def test_gaussian_passes(self, tmp_path):
        out = tmp_path / "g"
        assert main(["gaussian", "--out-dir", str(out)]) == 0
        rep = report_of(out)
        assert rep["status"] == "pass" and rep["exit_code"] == 0
        names = {f["name"] for f in rep["files"]}
        assert {"w_curve.csv", "tree.json", "trajectories.csv",
                "gaussian_summary.json"} <= names

    def test_zero_momentum_never_branches(self, tmp_path):
        out = tmp_path / "p0"
        path = write_config(tmp_path / "c.json", {
            "scenario": "gaussian", "packet": {"p0": 0.0},
            "thresholds": {"w_momentum_reference": None}, "out_dir": str(out)})
        code = main(["run", "--config", str(path)])
        rep = report_of(out)
        with open(out / "w_curve.csv") as fh:
            w = np.array([float(r["w_position_grid"]) for r in csv.DictReader(fh)])
        assert np.abs(w - 1.0).max() <= 1e-3
        assert any("no branching time" in m for m in rep["warnings"])
        status = {c["name"]: c["status"] for c in rep["checks"]}
        assert status["branches.count"] == "skip"
        assert code == 0 and "fail" not in status.values()

    def test_injected_fault_exits_2(self, tmp_path, capsys):
        out = tmp_path / "v"
        code = main(["verify", "--trials", "3", "--inject-fault", "tree.branch-prefix",
                     "--out-dir", str(out)])
        assert code == 2
        failed = [c["name"] for c in report_of(out)["checks"] if c["status"] == "fail"]
        assert failed == ["tree.branch-prefix"]
        assert "FAIL  tree.branch-prefix" in capsys.readouterr().out

    def test_zero_trials_exit_5(self, tmp_path):
        out = tmp_path / "v0"
        assert main(["verify", "--trials", "0", "--out-dir", str(out)]) == 5
        rep = report_of(out)
        assert rep["status"] == "skipped"
        assert {c["status"] for c in rep["checks"]} == {"skip"}

    def test_unknown_fault_is_config_error(self, tmp_path):
        out = tmp_path / "vf"
        assert main(["verify", "--trials", "1", "--inject-fault", "nope",
                     "--out-dir", str(out)]) == 3
        assert "nope" in report_of(out)["error"]

    @pytest.mark.parametrize("n", ["100", "64"])
    def test_bad_grid_exit_3(self, tmp_path, n, capsys):
        # 100 is not a power of two; 64 cells cannot resolve the packet
        out = tmp_path / f"bad{n}"
        assert main(["gaussian", "--grid-n", n, "--out-dir", str(out)]) == 3
        assert report_of(out)["exit_code"] == 3
        assert "configuration error" in capsys.readouterr().err

    def test_config_file_error_exit_3(self, tmp_path):
        path = write_config(tmp_path / "c.json", {"scenario": "gaussian", "colour": "red"})
        assert main(["run", "--config", str(path)]) == 3

    def test_too_many_bound_states_exit_4(self, tmp_path):
        out = tmp_path / "deep"
        path = write_config(tmp_path / "c.json", {
            "scenario": "scattering", "grid": {"n_cells": 2048, "box_length": 64.0},
            "scattering": {"lanes": ["well"], "well_depth": 200.0}, "out_dir": str(out)})
        assert main(["run", "--config", str(path)]) == 4
        assert "ResourceLimitError" in report_of(out)["error"]

    def test_environment_reaches_cli(self, tmp_path, monkeypatch):
        out = tmp_path / "env"
        monkeypatch.setenv("PERMDECOMP_OUT_DIR", str(out))
        monkeypatch.setenv("PERMDECOMP_T_MAX", "4.0")
        assert main(["verify", "--trials", "2"]) == 0
        assert report_of(out)["config"]["time"]["t_max"] == 4.0

    def test_custom_tree(self, tmp_path):
        out = tmp_path / "ct"
        assert main(["custom-tree", "--out-dir", str(out)]) == 0
        summary = json.loads((out / "custom_tree_summary.json").read_text())
        assert len(summary["branches"]) >= 2
        assert sum(b["probability"] for b in summary["branches"]) == pytest.approx(1.0)

    def test_missing_subcommand(self):
        with pytest.raises(SystemExit):
            main([])
