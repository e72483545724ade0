import json

import pytest

from vqanoise.cli import main
from vqanoise.instances import read_csv


def write_cfg(tmp_path, **fields):
    data = {"schema": 1, **fields}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    return path


class TestOptimize:
    def test_search_accepted(self, tmp_path):
        cfg = write_cfg(tmp_path, problem="search", n=4, depth=4, restarts=3)
        assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o"), "--threads", "1"]) == 0
        res = json.loads((tmp_path / "o" / "optimize.json").read_text())["results"][0]
        assert res["bounds"]["accepted"] and res["bounds"]["lower"] > 0
        assert {"params_star", "E_star", "sigma_threshold"} <= set(res)

    def test_malformed_json(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["optimize", "--config", str(bad), "--out", str(tmp_path)]) != 0
        assert "invalid JSON" in capsys.readouterr().err

    def test_schema_error(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"schema": 7, "problem": "search", "n": 2, "depth": 1}))
        assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path)]) != 0
        assert "schema" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["optimize", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) != 0

    def test_byte_identical_with_seed_and_threads(self, tmp_path):
        cfg = write_cfg(tmp_path, problem="maxcut", n=4, depth=2, instance_count=2, restarts=2)
        outs = []
        for k, threads in enumerate(("1", "2", "1")):
            out = tmp_path / f"o{k}"
            assert main(["optimize", "--config", str(cfg), "--seed", "5", "--out", str(out), "--threads", threads]) == 0
            outs.append((out / "optimize.json").read_bytes())
        assert outs[0] == outs[1] == outs[2]


class TestSigmaSweep:
    def test_zero_grid(self, tmp_path):
        cfg = write_cfg(tmp_path, problem="search", n=3, depth=1, sigma_grid=[0.0], restarts=2)
        assert main(["sigma-sweep", "--config", str(cfg), "--out", str(tmp_path), "--samples", "10"]) == 0
        rows = read_csv(tmp_path / "sigma_sweep.csv")
        assert rows == [{"sigma": 0.0, "mean_dE": 0.0, "stderr": 0.0, "exact_dE": 0.0, "q": 10, "n": 3}]

    def test_columns_and_script(self, tmp_path):
        cfg = write_cfg(tmp_path, problem="ising", n=2, depth=1, instance_count=2, restarts=2,
                        sigma_grid=[0.0, 0.05, 0.1, 0.15, 0.2], n_samples=200)
        out = tmp_path / "o"
        assert main(["sigma-sweep", "--config", str(cfg), "--out", str(out), "--gnuplot-script",
                     "--max-dm-qubits", "1"]) == 0
        rows = read_csv(out / "sigma_sweep.csv")
        assert list(rows[0]) == ["sigma", "mean_dE", "stderr", "exact_dE", "q", "n"]
        assert all(r["exact_dE"] is None for r in rows)  # above the density-matrix cap
        assert len(read_csv(out / "sigma_sweep_instances.csv")) == 10
        assert (out / "sigma_sweep.gp").exists()
        summary = json.loads((out / "sigma_sweep_summary.json").read_text())
        assert len(summary["instances"]) == 2 and summary["ensemble_fit"]["c"] > 0


class TestParamSweep:
    def test_zero_delta_is_e_star(self, tmp_path):
        cfg = write_cfg(tmp_path, problem="maxcut", n=4, depth=2, restarts=2, delta_grid=[-0.1, 0.0, 0.1])
        assert main(["param-sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        rows = read_csv(tmp_path / "param_sweep.csv")
        rank = json.loads((tmp_path / "param_sweep_ranking.json").read_text())
        zero = [r["energy"] for r in rows if r["delta"] == 0.0]
        assert len(zero) == 4 and all(e == pytest.approx(rank["E_star"], abs=1e-12) for e in zero)
        assert len(rank["ranking"]) == 4
        sens = [r["sensitivity"] for r in rank["ranking"]]
        assert sens == sorted(sens)


class TestTimeScan:
    def test_scan_outputs(self, tmp_path):
        cfg = write_cfg(tmp_path, problem="search", n=3, depth=2, restarts=2, p_range=[1, 2],
                        t_max_grid=[0.0, 1.0, 2.0])
        assert main(["time-scan", "--config", str(cfg), "--out", str(tmp_path), "--gnuplot-script"]) == 0
        rows = read_csv(tmp_path / "time_scan.csv")
        assert list(rows[0]) == ["p", "t_max", "E_star", "t_exec", "overlap", "converged"]
        zero = {r["E_star"] for r in rows if r["t_max"] == 0.0}
        assert len(zero) == 1
        assert set(json.loads((tmp_path / "time_scan_plateaus.json").read_text())) == {"1", "2"}

    def test_rejects_vqe_problem(self, tmp_path):
        cfg = write_cfg(tmp_path, problem="ising", n=2, depth=1)
        assert main(["time-scan", "--config", str(cfg), "--out", str(tmp_path)]) != 0


def test_bad_threads(tmp_path):
    cfg = write_cfg(tmp_path, problem="search", n=2, depth=1)
    assert main(["optimize", "--config", str(cfg), "--threads", "0", "--out", str(tmp_path)]) != 0
