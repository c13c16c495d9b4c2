"""Config loading, table output and the CLI."""

import json
import math

import numpy as np
import pytest
import scipy.sparse as sp

from lisl_hjb.harness import (ExperimentConfig, Table, config_from_dict, load_config, render,
                              resolve_dt, run_convergence)
from lisl_hjb.harness.cli import main
from lisl_hjb.harness.config import OUTPUT_ENV, ConfigError, dump_config
from lisl_hjb.harness.emit import BENCH_COLUMNS, CONVERGENCE_COLUMNS, format_value, to_json
from lisl_hjb.harness.experiments import bench_table, convergence_table, rates, run_solver_bench
from scipy.io import mmwrite


# ---------------------------------------------------------------------------
# emit


def test_convergence_csv_header():
    text = render(Table(CONVERGENCE_COLUMNS, []), "csv")
    assert text == "N_x,error_full,rate_full,error_interior,rate_interior,diverged\n"


@pytest.mark.parametrize("fmt", ["csv", "json", "markdown"])
def test_empty_table_renders(fmt):
    text = render(Table(CONVERGENCE_COLUMNS, []), fmt)
    if fmt == "json":
        assert json.loads(text) == []
    elif fmt == "markdown":
        assert len(text.strip().splitlines()) == 2
    else:
        assert text.count("\n") == 1


@pytest.mark.parametrize("value,expected", [
    (True, "true"), (False, "false"), (None, ""), (math.nan, "nan"), (math.inf, "inf"),
    (-math.inf, "-inf"), (0.0324821, "0.0324821"), (1.23456789e-7, "1.23457e-07"), (41, "41"),
])
def test_format_value(value, expected):
    assert format_value(value) == expected


def test_json_nan_and_inf():
    t = Table(("a", "b", "c"), [{"a": math.nan, "b": math.inf, "c": 1.5}])
    assert json.loads(to_json(t)) == [{"a": None, "b": "inf", "c": 1.5}]


def test_unknown_format_rejected():
    with pytest.raises(ValueError):
        render(Table(("a",), []), "xml")


# ---------------------------------------------------------------------------
# config


def test_config_defaults_validate():
    cfg = ExperimentConfig().validate()
    assert cfg.seed == 42 and cfg.solver.name == "agmg"


@pytest.mark.parametrize("bad", [
    {"kind": "nope"}, {"theta": 1.5}, {"dt": "dx_cubed"}, {"dt": -0.1}, {"meshes": [2]},
    {"n_alpha": 0}, {"boundary_mode": "mirror"}, {"scheme": 7},
    {"output": {"formats": ["xml"]}}, {"unknown_key": 1}, {"solver": {"nam": "gs"}},
])
def test_invalid_config(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_yaml_round_trip(tmp_path):
    cfg = config_from_dict({"kind": "stability", "theta": 0.0, "dt": 0.01, "meshes": [21, 41],
                            "solver": {"name": "gs", "tol": 1e-7}})
    path = tmp_path / "c.yaml"
    dump_config(cfg, path)
    back = load_config(path)
    assert back == cfg and back.dt == 0.01


def test_load_config_rejects_non_mapping(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(path)


@pytest.mark.parametrize("rule,expected", [
    ("T", 0.5), ("dx", 0.1), ("dx_over_4", 0.025), ("dx_1p5", 0.1**1.5), ("dx_sq", 0.01), (0.3, 0.3),
])
def test_resolve_dt(rule, expected):
    assert resolve_dt(rule, 0.1, 0.5) == pytest.approx(expected)


def test_shipped_configs_load():
    from pathlib import Path

    files = sorted((Path(__file__).parent.parent / "configs").glob("*.yaml"))
    assert files
    for f in files:
        load_config(f)


def test_output_dir_env(monkeypatch, tmp_path):
    cfg = ExperimentConfig()
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    assert cfg.output.resolved_dir() == tmp_path


# ---------------------------------------------------------------------------
# experiments


def test_rates():
    r = rates([0.4, 0.2, 0.1], [False, False, False])
    assert math.isnan(r[0]) and r[1:] == pytest.approx([1.0, 1.0])
    r = rates([0.4, math.inf, 0.1], [False, True, False])
    assert all(math.isnan(v) for v in r)
    assert math.isnan(rates([0.0, 0.1], [False, False])[1])


def test_single_mesh_convergence_table():
    cfg = config_from_dict({"problem": "ProblemB", "meshes": [21], "n_alpha": 8})
    rows = run_convergence(cfg)
    assert len(rows) == 1 and math.isnan(rows[0].rate_full) and not rows[0].diverged
    assert 0 < rows[0].error_interior <= rows[0].error_full < 0.2
    csv_lines = render(convergence_table(rows), "csv").splitlines()
    assert len(csv_lines) == 2 and csv_lines[1].split(",")[2] == "nan"


def test_problem_b_rate_dt_dx():
    """Implicit truncated Problem B with dt = dx converges at first order."""
    cfg = config_from_dict({"problem": "ProblemB", "meshes": [41, 81], "dt": "dx"})
    rows = run_convergence(cfg)
    assert rows[-1].rate_full >= 0.85


def test_explicit_corner_blowup_reported():
    cfg = config_from_dict({"kind": "stability", "problem": "ProblemA_shifted", "theta": 0.0,
                            "meshes": [41, 81], "dt": "dx_1p5"})
    rows = run_convergence(cfg)
    assert rows[0].error_full < 0.1
    assert rows[1].error_full > 1e3 and rows[1].error_interior < 0.1


def test_bench_json_records():
    cfg = config_from_dict({"kind": "solver_bench",
                            "bench": {"model": "lisl2d", "sigmas": [2.0], "levels": [4],
                                      "solvers": ["agmg", "gmg"],
                                      "solver_params": {"gmg": {"n_levels": 3}}}})
    recs = json.loads(render(bench_table(run_solver_bench(cfg)), "json"))
    assert isinstance(recs, list) and len(recs) == 2
    assert set(recs[0]) == set(BENCH_COLUMNS)
    for r in recs:
        assert r["converged"] and r["rho"] < 0.5 and r["n"] == 17 * 17


def test_bench_seed_determinism():
    cfg = config_from_dict({"kind": "solver_bench",
                            "bench": {"levels": [4], "solvers": ["agmg", "bicgstab"]}})
    a = render(bench_table(run_solver_bench(cfg)), "csv")
    b = render(bench_table(run_solver_bench(cfg)), "csv")
    assert a == b


def test_bench_identity_matrix_market(tmp_path):
    path = tmp_path / "eye.mtx"
    mmwrite(str(path), sp.identity(50, format="csr"))
    cfg = config_from_dict({"kind": "solver_bench",
                            "bench": {"model": "matrix_market", "matrix_path": str(path),
                                      "solvers": ["gs", "bicgstab", "gcr", "agmg"]}})
    for r in run_solver_bench(cfg):
        assert r["converged"], r
        assert r["iterations"] <= 1


def test_bench_failure_is_recorded():
    cfg = config_from_dict({"kind": "solver_bench",
                            "bench": {"model": "laplace2d", "levels": [3], "solvers": ["gmg"],
                                      "solver_params": {"gmg": {"n_levels": 9}}}})
    (rec,) = run_solver_bench(cfg)
    assert rec["status"].startswith("failed")


# ---------------------------------------------------------------------------
# CLI


def test_cli_lfa(capsys, tmp_path):
    field = tmp_path / "field.csv"
    assert main(["lfa", "--m1", "1", "--m2", "1", "--resolution", "64",
                 "--field-csv", str(field)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("m1,m2,gamma1")
    assert float(lines[1].split(",")[6]) == pytest.approx(0.5, abs=1e-3)
    assert field.exists() and len(field.read_text().splitlines()) > 64


def test_cli_spectrum_json(capsys):
    assert main(["spectrum", "--N", "7", "12", "--m", "2", "--emit", "json"]) == 0
    recs = json.loads(capsys.readouterr().out)
    assert len(recs) == 2
    assert all(r["max_eigenvalue_error"] < 1e-10 for r in recs)


def test_cli_converge_progress_and_export(tmp_path):
    out, prog, mtx = tmp_path / "t.md", tmp_path / "p.jsonl", tmp_path / "a.mtx"
    rc = main(["converge", "--problem", "B", "--meshes", "21", "--n-alpha", "8", "--emit",
               "markdown", "--output", str(out), "--progress", str(prog), "--export-mtx", str(mtx)])
    assert rc == 0
    assert out.read_text().startswith("| N_x |")
    events = [json.loads(line)["event"] for line in prog.read_text().splitlines()]
    assert events[0] == "mesh_start" and events[-1] == "mesh_done" and "step" in events
    from lisl_hjb.linsolve import read_matrix_market

    assert read_matrix_market(mtx).shape == (441, 441)


def test_cli_run_config(monkeypatch, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("kind: spectrum\nspectrum: {cases: [[12, 3]]}\n"
                   "output: {name: spec, formats: [csv, json]}\n")
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "out"))
    assert main(["run", str(cfg)]) == 0
    assert (tmp_path / "out" / "spec.csv").exists()
    assert json.loads((tmp_path / "out" / "spec.json").read_text())[0]["N"] == 12


def test_cli_run_deterministic(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("kind: solver_bench\nbench: {levels: [4], solvers: [agmg, gcr-ilu0]}\n")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["run", str(cfg), "--output", str(a)]) == 0
    assert main(["run", str(cfg), "--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_bad_config_returns_2(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("kind: convergence\ntheta: 3\n")
    assert main(["run", str(cfg)]) == 2
    assert "theta" in capsys.readouterr().err


def test_cli_bad_dt_exits():
    with pytest.raises(SystemExit):
        main(["converge", "--dt", "huge"])


def test_cli_timings_flag(capsys):
    assert main(["bench-solvers", "--levels", "3", "--solvers", "agmg", "--timings"]) == 0
    header = capsys.readouterr().out.splitlines()[0].split(",")
    assert header[-1] == "time"
    assert main(["bench-solvers", "--levels", "3", "--solvers", "agmg"]) == 0
    assert "time" not in capsys.readouterr().out.splitlines()[0]
