#!/usr/bin/env python3
"""
Tests for the command-line surface (app.py)
"""

import json

import numpy as np
import pandas as pd
import pytest

from app import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, dispatch, main
from models import ConfigError, ReportCollector, RunConfig
from scripts.verify_catalog import SWEEP, CatalogSweep
from utils import DEFAULT_TOLERANCES, load_tolerances


def _records(capsys):
    return json.loads(capsys.readouterr().out)


def test_count_branches_passes(capsys):
    """🧪 c = 1 on the C = 8 bundle has three global branches"""
    assert main(["dhym", "count-branches", "--c", "1", "--cone-param", "8"]) == EXIT_PASS
    (row,) = _records(capsys)
    assert row["count"] == 3
    assert row["oracle"] == 3
    assert row["passed"]


def test_count_branches_several_constants(capsys):
    """🧪 A comma list gives one record per c"""
    assert main(["dhym", "count-branches", "--c", "1,20", "--cone-param", "8"]) == EXIT_PASS
    assert [row["count"] for row in _records(capsys)] == [3, 1]


@pytest.mark.parametrize("argv", [
    ["dhym", "count-branches", "--bogus"],
    ["verify-structure", "--family", "K3"],
    ["dhym"],
    ["no-such-command"],
])
def test_usage_errors(argv):
    """🧪 Bad flags, families and commands exit with 2"""
    assert main(argv) == EXIT_USAGE


def test_grid_points_must_be_positive():
    """🧪 --grid-points 0 is a usage error"""
    assert main(["slag", "verify", "--grid-points", "0"]) == EXIT_USAGE


def test_domain_errors_exit_with_usage():
    """🧪 Geometry errors raised by a handler map to exit 2"""
    assert main(["spectrum", "--manifold", "R4"]) == EXIT_USAGE


def test_run_from_config_file(tmp_path, capsys):
    """🧪 --config replays a stored RunConfig"""
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"command": "dhym count-branches", "seed": 3,
                                  "options": {"c": "1", "cone_param": 8.0}}))
    assert main(["dhym", "count-branches", "--config", str(config)]) == EXIT_PASS
    assert _records(capsys)[0]["C"] == 8.0


@pytest.mark.parametrize("text", ["{not json", json.dumps({"seed": 1}),
                                  json.dumps({"command": "dhym plot", "colour": "red"})])
def test_bad_config_files(tmp_path, text):
    """🧪 Malformed or unknown configuration is rejected"""
    config = tmp_path / "run.json"
    config.write_text(text)
    assert main(["dhym", "plot", "--config", str(config)]) == EXIT_USAGE


def test_unknown_tolerance_key(tmp_path):
    """🧪 Tolerance files may only name known checks"""
    path = tmp_path / "tolerances.json"
    path.write_text(json.dumps({"hym": 1e-6, "vibes": 1.0}))
    with pytest.raises(ConfigError):
        load_tolerances(str(path))
    assert main(["dhym", "count-branches", "--tolerances", str(path)]) == EXIT_USAGE


def test_tolerance_overrides_merge(tmp_path):
    """🧪 Overrides replace single entries and keep the rest"""
    path = tmp_path / "tolerances.json"
    path.write_text(json.dumps({"hym": 1e-6}))
    tolerances = load_tolerances(str(path))
    assert tolerances["hym"] == 1e-6
    assert tolerances["dhym"] == DEFAULT_TOLERANCES["dhym"]


def test_same_seed_same_output(capsys):
    """🧪 Fixed seed and grid give byte-identical reports"""
    argv = ["slag", "verify", "--y", "0.3", "--cone-param", "1", "--grid-points", "3", "--seed", "2"]
    assert main(argv) == EXIT_PASS
    first = capsys.readouterr().out
    assert main(argv) == EXIT_PASS
    assert capsys.readouterr().out == first


def test_tolerance_flag_overrides_every_check(capsys):
    """🧪 --tolerance is recorded on every row"""
    argv = ["slag", "verify", "--y", "0.3", "--grid-points", "3", "--tolerance", "1e-30",
            "--family", "canonical_S2xS2"]
    assert main(argv) in (EXIT_PASS, EXIT_FAIL)
    records = _records(capsys)
    assert all(row["tolerance"] == 1e-30 for row in records)


def test_branch_samples_csv(tmp_path, capsys):
    """🧪 dhym plot writes the (c, H, branch, kappa) table"""
    output = tmp_path / "branches.csv"
    argv = ["dhym", "plot", "--c", "0,1,8", "--H-max", "2", "--grid-points", "5", "--output", str(output)]
    assert main(argv) == EXIT_PASS
    frame = pd.read_csv(output)
    assert list(frame.columns) == ["c", "H", "branch", "kappa"]
    assert set(frame["branch"]) <= {"upper", "middle", "lower"}
    assert len(_records(capsys)) == len(frame)


def test_branch_samples_use_configured_tolerance(tmp_path, monkeypatch, capsys):
    """🧪 dhym plot judges its cubic residual with --tolerance and tolerance files"""
    monkeypatch.setattr("commands.deformed.cubic_residual", lambda c, H, kappa: np.full(len(H), 0.5))
    argv = ["dhym", "plot", "--c", "1", "--H-max", "2", "--grid-points", "3"]
    assert main(argv) == EXIT_FAIL
    assert main(argv + ["--tolerance", "1.0"]) == EXIT_PASS
    path = tmp_path / "tolerances.json"
    path.write_text(json.dumps({"dhym_cubic": 1.0}))
    assert main(argv + ["--tolerances", str(path)]) == EXIT_PASS
    capsys.readouterr()


def test_dispatch_writes_json(tmp_path, capsys):
    """🧪 dispatch() honours RunConfig.output"""
    output = tmp_path / "count.json"
    config = RunConfig(command="dhym count-branches", output=str(output),
                       options={"c": "20", "cone_param": 8.0})
    assert dispatch(config) == EXIT_PASS
    assert json.loads(output.read_text()) == _records(capsys)


def test_collector_skips_output_on_error(tmp_path):
    """🧪 Nothing is written when the run raises"""
    output = tmp_path / "partial.json"
    with pytest.raises(RuntimeError):
        with ReportCollector(str(output)) as collector:
            collector.add({"check": "x", "passed": True})
            raise RuntimeError("boom")
    assert not output.exists()


def test_collector_verdicts():
    """🧪 Explicit verdicts win; bare residuals are compared to the tolerance"""
    collector = ReportCollector()
    collector.add({"check": "a", "sup_residual": 1e-3})
    assert collector.all_passed()
    assert not collector.all_passed(1e-6)
    collector.add({"check": "b", "sup_residual": 1.0, "passed": True})
    assert collector.all_passed(1e-2)
    collector.add({"check": "c", "passed": False})
    assert not collector.all_passed()


def test_catalog_sweep_entries():
    """🧪 The sweep records verdicts and turns geometry errors into failed rows"""
    sweep = CatalogSweep(grid_points=5, seed=0)
    ok = sweep.run_entry("counts", "dhym count-branches", {"c": "1,9", "cone_param": 8.0})
    assert ok["passed"] and ok["error"] is None
    bad = sweep.run_entry("no spectrum", "spectrum", {"manifold": "R4"})
    assert not bad["passed"]
    assert bad["error"].startswith("SpectrumError")
    assert {label for label, _, _ in SWEEP} >= {"dHYM branch counts", "sLag leaves on CP²"}


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
