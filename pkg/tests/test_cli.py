from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from halfspace_jump_lab import cli
from halfspace_jump_lab.errors import UsageError

KERNEL = {"alpha": 1.5, "d": 1, "beta": [0.5, 0.3, 0.0, 0.0]}


@pytest.fixture
def outdir(tmp_path, monkeypatch):
    out = tmp_path / "out"
    monkeypatch.setenv("HJL_OUT", str(out))
    return out


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_constant_zero_flag_and_partial_failure(tmp_path, outdir):
    # alpha + beta1 = 2, so p = 2.5 is out of range and recorded per row
    cfg = {"kernel": KERNEL, "constant": {"p_grid": [0.0, 0.3, 0.5, 1.2, 2.5]}}
    assert cli.main(["constant", "--config", write(tmp_path, cfg)]) == 0
    rows = read_rows(outdir / "constant.csv")
    flags = {float(r["p"]): r["flag"] for r in rows}
    assert flags[0.0] == "zero" and flags[0.5] == "zero"
    assert flags[0.3] == "negative" and flags[1.2] == "positive"
    assert flags[2.5] == "error" and rows[-1]["error_message"]
    summary = json.loads((outdir / "constant.json").read_text())
    assert summary["results"]["n_errors"] == 1
    assert summary["version"] and summary["config"]["kernel"]["alpha"] == 1.5


def test_empty_grid_is_usage_error(tmp_path, outdir):
    path = write(tmp_path, {"kernel": KERNEL, "constant": {"p_grid": []}})
    with pytest.raises(UsageError):
        cli.run(["constant", "--config", path])
    assert cli.main(["constant", "--config", path]) == 2


def test_simulate_zero_paths(tmp_path, outdir):
    cfg = {"kernel": {"alpha": 1.5, "d": 1}, "simulate": {"x0": [0.5], "domain": {"kind": "halfspace"},
                                                           "n_paths": 0}}
    with pytest.raises(UsageError):
        cli.run(["simulate", "--config", write(tmp_path, cfg)])


def test_corrupted_config_names_schema_path(tmp_path, outdir):
    cfg = {"kernel": {"alpha": "fast", "d": 1}, "constant": {"p_grid": [0.1]}}
    with pytest.raises(UsageError, match="kernel/alpha"):
        cli.run(["constant", "--config", write(tmp_path, cfg)])
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(UsageError):
        cli.run(["constant", "--config", str(bad)])
    with pytest.raises(UsageError):
        cli.run(["constant", "--config", write(tmp_path, {"kernel": KERNEL, "bogus": 1})])


def test_pvop_harmonic_power_below_tolerance(tmp_path, outdir):
    cfg = {"kernel": {"alpha": 1.5, "d": 1}, "pvop": {"profile": {"kind": "power", "p": 0.5},
                                                       "x_d_grid": [0.25, 0.5, 1.0, 2.0]}}
    assert cli.main(["pvop", "--config", write(tmp_path, cfg)]) == 0
    rows = read_rows(outdir / "pvop.csv")
    assert len(rows) == 4
    assert all(abs(float(r["value"])) <= float(r["tolerance"]) for r in rows)
    assert all(r["within_tolerance"] == "True" for r in rows)


def sim_cfg(out=None):
    cfg = {"kernel": {"alpha": 1.5, "d": 2, "beta": [0.5, 0.0, 0.0, 0.0]},
           "sim": {"delta": 0.1, "seed": 11},
           "simulate": {"x0": [0.0, 0.2], "domain": {"kind": "strip", "r": 1.0}, "n_paths": 300,
                        "functional": "indicator", "target": {"kind": "strip", "r": 5.0},
                        "dump_paths": "paths.csv.gz", "trace_steps": 20}}
    if out:
        cfg["output_dir"] = str(out)
    return cfg


def test_simulate_reruns_are_byte_identical(tmp_path, outdir):
    path = write(tmp_path, sim_cfg())
    assert cli.main(["simulate", "--config", path]) == 0
    first = {f: (outdir / f).read_bytes() for f in ("simulate.csv", "simulate.json")}
    assert cli.main(["simulate", "--config", path, "--threads", "2"]) == 0
    for f, data in first.items():
        assert (outdir / f).read_bytes() == data
    assert b"\r\n" not in first["simulate.csv"]
    assert (outdir / "paths.csv.gz").exists()
    assert cli.main(["simulate", "--config", path, "--seed", "12"]) == 0
    assert (outdir / "simulate.csv").read_bytes() != first["simulate.csv"]


def test_output_dir_from_config_and_env(tmp_path, monkeypatch):
    monkeypatch.delenv("HJL_OUT", raising=False)
    cfg_out = tmp_path / "from_config"
    path = write(tmp_path, sim_cfg(cfg_out))
    assert cli.main(["simulate", "--config", path, "--quick"]) == 0
    assert len(read_rows(cfg_out / "simulate.csv")) == 30
    env_out = tmp_path / "from_env"
    monkeypatch.setenv("HJL_OUT", str(env_out))
    assert cli.main(["simulate", "--config", path, "--quick"]) == 0
    assert (env_out / "simulate.csv").exists()


def test_green_and_occupation_commands(tmp_path, outdir):
    cfg = {"kernel": {"alpha": 1.5, "d": 2}, "sim": {"delta": 0.1, "seed": 2},
           "green": {"pairs": [[[0.0, 1.0], [0.6, 1.8]]], "n_paths": 500},
           "occupation": {"gamma": 0.0, "x_d_grid": [0.05, 0.1, 0.2, 0.4], "n_paths": 200, "R": 1.0}}
    path = write(tmp_path, cfg)
    assert cli.main(["green", "--config", path]) == 0
    g = read_rows(outdir / "green.csv")
    assert len(g) == 1 and float(g[0]["green_estimate"]) > 0
    assert cli.main(["occupation", "--config", path]) == 0
    occ = json.loads((outdir / "occupation.json").read_text())
    assert "fit" in occ["results"] and len(read_rows(outdir / "occupation.csv")) == 4
    cfg["occupation"]["gamma"] = -1.5
    assert cli.main(["occupation", "--config", write(tmp_path, cfg)]) == 1


def test_verify_subset_summary(tmp_path, outdir):
    path = write(tmp_path, {"verify": {"criteria": [1, 6]}})
    assert cli.main(["verify", "--config", path, "--quick"]) == 0
    summary = json.loads((outdir / "verify.json").read_text())
    ids = [r["criterion_id"] for r in summary["results"]]
    assert ids == [1, 6]
    for r in summary["results"]:
        assert r["status"] in ("pass", "fail", "inconclusive")
        assert {"measured", "budget"} <= set(r)
        assert "runtime_s" not in r


def test_console_entry_point(tmp_path, outdir):
    res = subprocess.run([sys.executable, "-m", "halfspace_jump_lab.cli", "constant"],
                         capture_output=True, text=True)
    assert res.returncode == 2 and "needs --config" in res.stderr
