import json
import math

import numpy as np
import pytest

from hypbill.cli import EXIT_INCONCLUSIVE, EXIT_INPUT, EXIT_OK, run
from hypbill.io import read_csv, sha256


def manifest_of(out):
    return json.loads(out.with_name(out.name + ".manifest.json").read_text())


def test_scenarios_list(capsys):
    assert run(["scenarios", "list"]) == EXIT_OK
    names = [line.split("\t")[0] for line in capsys.readouterr().out.splitlines()]
    for n in ("sinai-two-disk", "sinai-one-disk", "flat-empty", "curved-bump"):
        assert n in names


def test_scenarios_show_round_trips(tmp_path, capsys):
    assert run(["scenarios", "show", "sinai-one-disk"]) == EXIT_OK
    f = tmp_path / "t.toml"
    f.write_text(capsys.readouterr().out)
    out = tmp_path / "h.json"
    assert run(["horizon", "--table", str(f), "--directions", "36", "--origins", "4", "--cap", "5",
                "--out", str(out), "--no-figures"]) == EXIT_OK
    assert json.loads(out.read_text())["capped"] > 0
    assert run(["scenarios", "show", "nope"]) == EXIT_INPUT


def test_simulate_straight_line(tmp_path, capsys):
    out = tmp_path / "traj.csv"
    code = run(["simulate", "--table", "flat-empty", "--x0", "0", "--y0", "0", "--angle0", "0",
                "--duration", "3", "--out", str(out)])
    assert code == EXIT_OK
    header, data = read_csv(out)
    row = dict(zip(header, data[-1]))
    assert row["t"] == 3.0
    assert math.remainder(row["x"] - 3.0, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert row["y"] == 0.0
    assert (tmp_path / "traj.png").stat().st_size > 0
    printed = capsys.readouterr().out
    assert printed.startswith("---\n") and "collisions: 0" in printed
    m = manifest_of(out)
    assert m["status"] == "complete" and set(m["outputs"]) == {"traj.csv", "traj.collisions.csv", "traj.png"}


def test_rerun_reproduces_checksums(tmp_path):
    args = ["lyapunov", "--table", "sinai-two-disk", "--ensemble", "3", "--duration", "20", "--seed", "5"]
    sums = []
    for d in ("a", "b"):
        out = tmp_path / d / "l.json"
        assert run(args + ["--out", str(out)]) == EXIT_OK
        sums.append(manifest_of(out)["outputs"])
    assert sums[0] == sums[1]
    m = manifest_of(tmp_path / "a" / "l.json")
    assert m["config"]["seed"] == 5 and "table_definition" in m["config"]


def test_jobs_do_not_change_results(tmp_path, monkeypatch):
    args = ["certify", "--table", "sinai-four-disk", "--mode", "sinai", "--ensemble", "3", "--duration", "10",
            "--probe-directions", "360", "--probe-origins", "10", "--no-figures"]
    monkeypatch.setenv("HYPB_JOBS", "1")
    assert run(args + ["--out", str(tmp_path / "s.json")]) == EXIT_OK
    monkeypatch.setenv("HYPB_JOBS", "2")
    assert run(args + ["--out", str(tmp_path / "p.json")]) == EXIT_OK
    assert sha256(tmp_path / "s.json") == sha256(tmp_path / "p.json")
    monkeypatch.setenv("HYPB_JOBS", "zero")
    assert run(args + ["--out", str(tmp_path / "x.json")]) == EXIT_INPUT


def test_riccati_csv_columns(tmp_path):
    out = tmp_path / "r.csv"
    assert run(["riccati", "--table", "flat-empty", "--x0", "0", "--y0", "0", "--angle0", "0.3", "--u0", "-1",
                "--duration", "2", "--out", str(out), "--no-figures"]) == EXIT_OK
    header, data = read_csv(out)
    assert header == ["t", "u", "y", "ydot", "blowup_flag", "collision_flag"]
    assert data[:, 4].sum() == 1


def test_certify_exit_codes(tmp_path):
    base = ["--ensemble", "2", "--no-figures"]
    flat = ["certify", "--table", "flat-empty", "--mode", "thm3", "--duration", "3", "--c", "0.2", "--C", "1"]
    assert run(flat + base + ["--out", str(tmp_path / "a.json")]) == EXIT_INCONCLUSIVE
    assert json.loads((tmp_path / "a.json").read_text())["verdict"] == "inconclusive"
    one = ["certify", "--table", "sinai-one-disk", "--mode", "sinai", "--duration", "5",
           "--probe-directions", "360", "--probe-origins", "10"]
    assert run(one + base + ["--out", str(tmp_path / "b.json")]) == EXIT_INCONCLUSIVE
    assert json.loads((tmp_path / "b.json").read_text())["verdict"] == "infinite-horizon-candidate"
    thm1 = ["certify", "--table", "flat-empty", "--mode", "thm1", "--duration", "1"]
    assert run(thm1 + base + ["--out", str(tmp_path / "c.json")]) == EXIT_INCONCLUSIVE


def test_input_errors_exit_4_and_name_the_key(tmp_path, capsys):
    assert run(["certify", "--table", "sinai-two-disk", "--mode", "bogus"]) == EXIT_INPUT
    assert "--mode" in capsys.readouterr().err
    bad = tmp_path / "bad.toml"
    bad.write_text('[[walls]]\ntype = "circle"\ncenter = [0.5, 0.5]\n')
    out = tmp_path / "o.csv"
    code = run(["simulate", "--table", str(bad), "--x0", "0", "--y0", "0", "--angle0", "0", "--duration", "1",
                "--out", str(out)])
    assert code == EXIT_INPUT
    assert "radius" in capsys.readouterr().err
    m = manifest_of(out)
    assert m["status"] == "failed" and "radius" in m["error"]
    assert run(["simulate", "--table", "flat-empty", "--x0", "0", "--y0", "0", "--angle0", "0",
                "--duration", "-1"]) == EXIT_INPUT


def test_cones_command(tmp_path):
    cf = tmp_path / "c.csv"
    rows = "\n".join(["a,b,c,d"] + ["2,1,1,1"] * 60)
    cf.write_text(rows + "\n")
    out = tmp_path / "cones.json"
    assert run(["cones", "--cocycle", str(cf), "--epsilon", "0.3", "--out", str(out), "--no-figures"]) == EXIT_OK
    rep = json.loads(out.read_text())
    assert rep["passed"] == 60 and rep["contracting"]
    header, data = read_csv(tmp_path / "cones.csv")
    unstable = math.atan2((math.sqrt(5) - 1) / 2, 1.0)
    assert data[40, header.index("unstable_angle")] == pytest.approx(unstable, abs=1e-6)
    cf.write_text("a,b,c,d\n1,0,0,1\n")
    assert run(["cones", "--cocycle", str(cf), "--epsilon", "0.3", "--out", str(out), "--no-figures"]) == EXIT_INCONCLUSIVE
    cf.write_text("a,b,c,d\n2,0,0,2\n")
    assert run(["cones", "--cocycle", str(cf), "--epsilon", "0.3", "--out", str(out), "--no-figures"]) == EXIT_INPUT
    assert run(["cones", "--cocycle", str(cf), "--epsilon", "1.5", "--out", str(out)]) == EXIT_INPUT


def test_default_output_location(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(["horizon", "--table", "sinai-four-disk", "--directions", "36", "--origins", "3",
                "--no-figures"]) == EXIT_OK
    assert (tmp_path / "runs" / "horizon" / "horizon.json").is_file()
    assert (tmp_path / "runs" / "horizon" / "horizon.json.manifest.json").is_file()
    assert np.isfinite(json.loads((tmp_path / "runs" / "horizon" / "horizon.json").read_text())["max_free_time"])
