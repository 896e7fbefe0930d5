"""Command-line interface: exit codes, report plumbing, config precedence."""

import csv
import json

import pytest

from chaconlab import __version__
from chaconlab.chacon import build_system, tower_heights
from chaconlab.cli import (
    EXIT_CENSORED,
    EXIT_FAIL,
    EXIT_OK,
    EXIT_USAGE,
    main,
)
from chaconlab.cocycle import FinAbGroup, cocycle_spec_to_json, zero_cocycle


def run_json(capsys, argv):
    """Run main() and parse its stdout as a single JSON document."""
    rc = main(argv)
    out = capsys.readouterr().out
    return rc, json.loads(out)


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_build_chacon_stdout_is_pure_json(capsys):
    rc, doc = run_json(capsys, ["build-chacon", "--n-max", "2"])
    assert rc == EXIT_OK
    assert doc["heights"] == tower_heights(2)
    system = build_system(2)
    assert doc["covered"] == [str(system.covered.lo), str(system.covered.hi)]
    assert len(doc["towers"]) == len(system.towers)
    assert doc["run_config"]["command"] == "build-chacon"
    assert doc["version"] == __version__


def test_build_chacon_out_writes_json_csv_and_table(tmp_path, capsys):
    out = tmp_path / "towers.json"
    rc = main(["build-chacon", "--n-max", "2", "--out", str(out)])
    assert rc == EXIT_OK
    doc = json.loads(out.read_text())
    assert doc["heights"] == [1, 8]
    with open(tmp_path / "towers.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [int(r["order"]) for r in rows] == [t.order for t in build_system(2).towers]
    assert rows[1]["height"] == "8"
    # the human-readable table still lands on the screen
    assert "order 1: height 1" in capsys.readouterr().out


def test_build_chacon_rejects_bad_depth():
    with pytest.raises(SystemExit) as exc:
        main(["build-chacon", "--n-max", "0"])
    assert exc.value.code == EXIT_USAGE


def test_check_cocycle_bundled_passes(capsys):
    rc, doc = run_json(capsys, ["check-cocycle"])
    assert rc == EXIT_OK
    assert doc["holds"] is True
    assert doc["condition_i"]["holds"] is True
    assert doc["n_scan"] == doc["condition_i"]["n_scanned"]
    assert set(doc["condition_ii"]) == {str(n) for n in range(1, doc["n_scan"] + 1)}
    assert all(rep["holds"] for rep in doc["condition_ii"].values())


def test_check_cocycle_zero_spec_fails(tmp_path, capsys):
    spec = zero_cocycle(FinAbGroup((2,)))
    path = tmp_path / "zero.json"
    path.write_text(json.dumps(cocycle_spec_to_json(spec)))
    rc, doc = run_json(capsys, ["check-cocycle", "--spec", str(path)])
    assert rc == EXIT_FAIL
    assert doc["holds"] is False
    assert doc["condition_i"]["holds"] is False


def test_check_cocycle_missing_spec_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["check-cocycle", "--spec", str(tmp_path / "nope.json")])
    assert exc.value.code == EXIT_USAGE


def test_check_cocycle_malformed_spec_is_usage_error(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{oops")
    with pytest.raises(SystemExit) as exc:
        main(["check-cocycle", "--spec", str(path)])
    assert exc.value.code == EXIT_USAGE


def test_verify_poisson_small_run_passes(capsys):
    rc, doc = run_json(
        capsys, ["verify", "poisson", "--samples", "400", "--seed", "1"]
    )
    assert rc == EXIT_OK
    assert doc["holds"] is True
    assert doc["run_config"]["samples"] == 400
    assert doc["run_config"]["suite"] == "poisson"
    assert all(t["passed"] for t in doc["suites"]["poisson"]["tests"].values())


def test_verify_rejects_unknown_suite():
    with pytest.raises(SystemExit) as exc:
        main(["verify", "bogus"])
    assert exc.value.code == EXIT_USAGE


def test_verify_rejects_bad_k():
    with pytest.raises(SystemExit) as exc:
        main(["verify", "suspension", "--k", "1,x"])
    assert exc.value.code == EXIT_USAGE


def test_verify_suspension_below_floor_fails(capsys):
    # 60 samples cannot reach the 500-uncensored floor, but censoring stays low
    rc, doc = run_json(
        capsys, ["verify", "suspension", "--samples", "60", "--seed", "0"]
    )
    assert rc == EXIT_FAIL
    rep = doc["suites"]["suspension"]
    for per_k in rep["per_k"].values():
        assert per_k["censored_fraction"] < 0.5
        assert per_k["conjugacy_failures"] == 0
        assert per_k["return_time_mismatches"] == 0
    assert doc["holds"] is False


def test_verify_suspension_heavy_censoring_sets_exit_code(capsys):
    # a window of 1/4 leaves most samples with no atoms at all
    rc, doc = run_json(
        capsys,
        ["verify", "suspension", "--samples", "60", "--seed", "0",
         "--window", "1/4", "--k", "1"],
    )
    assert rc == EXIT_CENSORED
    per_k = doc["suites"]["suspension"]["per_k"]["1"]
    assert per_k["censored_fraction"] >= 0.5
    assert per_k["censored"].get("TooFewAtoms", 0) > 0


def test_verify_out_writes_csv_rows_and_keeps_stdout_quiet(tmp_path, capsys):
    out = tmp_path / "poisson.json"
    rc = main(
        ["verify", "poisson", "--samples", "300", "--seed", "2", "--out", str(out)]
    )
    assert rc == EXIT_OK
    assert capsys.readouterr().out == ""
    doc = json.loads(out.read_text())
    assert doc["holds"] is True
    with open(tmp_path / "poisson.csv") as fh:
        rows = list(csv.DictReader(fh))
    names = {r["test"] for r in rows}
    assert "t1_exponential" in names
    assert "superposition_counts" in names
    for r in rows:
        float(r["p_value"])  # every row carries a parseable p-value


def test_config_file_fills_defaults_but_flags_win(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"samples": 250, "seed": 9}))
    rc, doc = run_json(
        capsys,
        ["verify", "poisson", "--config", str(cfg), "--samples", "300"],
    )
    assert rc == EXIT_OK
    assert doc["run_config"]["samples"] == 300  # flag beats file
    assert doc["run_config"]["seed"] == 9  # file beats default


def test_config_file_must_be_object(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text("[1, 2]")
    with pytest.raises(SystemExit) as exc:
        main(["verify", "poisson", "--config", str(cfg)])
    assert exc.value.code == EXIT_USAGE


def test_same_run_config_reruns_byte_identical(tmp_path):
    argv = ["verify", "joining", "--samples", "120", "--window", "12",
            "--seed", "5"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(argv + ["--out", str(a)]) == EXIT_OK
    assert main(argv + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_verify_all_runs_every_suite(capsys):
    # tiny sample count: poisson and joining pass, suspension misses its floor
    rc, doc = run_json(
        capsys, ["verify", "all", "--samples", "60", "--seed", "0"]
    )
    assert rc == EXIT_FAIL
    assert set(doc["suites"]) == {"poisson", "suspension", "joining"}
    assert doc["suites"]["poisson"]["holds"] is True
    assert doc["suites"]["suspension"]["holds"] is False


def test_starved_statistics_report_as_usage_error():
    # a unit window rarely yields 6 atoms, so the gap test has no data
    with pytest.raises(SystemExit) as exc:
        main(["verify", "poisson", "--samples", "40", "--window", "1"])
    assert exc.value.code == EXIT_USAGE
