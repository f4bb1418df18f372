import csv
import io
import json
import subprocess
import sys

import jsonschema
import numpy as np
import pytest

from vemspectra import experiments as ex
from vemspectra import report
from vemspectra.cli import main
from vemspectra.mesh import PolyMesh


@pytest.fixture(scope="module")
def small_test1():
    cfg = ex.preset("test1-trapezoid")
    cfg.sizes = [2, 4, 6]
    cfg.name = "small"
    return ex.run_test1(cfg)


@pytest.fixture(scope="module")
def small_test2():
    cfg = ex.preset("test2-vessel")
    cfg.max_dofs = 600
    cfg.name = "vessel-small"
    return ex.run_test2(cfg)


def read(path):
    return path.read_bytes()


# --- formatting ----------------------------------------------------------


def test_fmt_six_significant_digits():
    assert report.fmt(2944.38712) == "2944.39"
    assert report.fmt(1.6432e-1) == "0.16432"
    assert report.fmt(2.7951234e-5) == "2.79512e-05"
    assert report.fmt(136) == "136"
    assert report.fmt(None) == ""
    assert report.fmt("adaptive-vem") == "adaptive-vem"


def test_empty_adaptive_table_is_header_only():
    text = report.adaptive_table([])
    assert text == ",".join(report.ADAPTIVE_COLUMNS) + "\n"


def test_adaptive_table_has_eight_columns_in_order(small_test2):
    text = report.adaptive_table(small_test2.runs[0].rows())
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["N", "omega_h1", "error", "R2", "theta2", "J2", "eta2", "effectivity"]
    assert all(len(r) == 8 for r in rows)
    assert rows[1][0] == "136"


# --- emission ------------------------------------------------------------


def test_test1_files_are_byte_stable(small_test1, tmp_path):
    a = report.emit_report(small_test1, tmp_path / "a")
    b = report.emit_report(small_test1, tmp_path / "b")
    assert [p.name for p in a] == [p.name for p in b]
    assert {p.name for p in a} == {"small_frequencies.csv", "small_convergence.svg", "small.json"}
    for pa, pb in zip(a, b):
        assert read(pa) == read(pb), pa.name


def test_rerun_gives_identical_files(tmp_path):
    cfg = ex.preset("test2-vessel")
    cfg.max_dofs = 400
    cfg.refinement = ["adaptive-vem"]
    first = report.emit_report(ex.run(cfg), tmp_path / "a")
    second = report.emit_report(ex.run(cfg), tmp_path / "b")
    for pa, pb in zip(first, second):
        assert read(pa) == read(pb), pa.name


def test_test2_files(small_test2, tmp_path):
    files = {p.name for p in report.emit_report(small_test2, tmp_path)}
    assert "vessel-small_adaptive-vem.csv" in files
    assert "vessel-small_rates.csv" in files
    assert "vessel-small_error_curves.svg" in files
    svg = (tmp_path / "vessel-small_error_curves.svg").read_text()
    assert svg.lstrip().startswith("<?xml") and "<svg" in svg


def test_json_round_trip_through_schema(small_test1, small_test2, tmp_path):
    for result in (small_test1, small_test2):
        doc = report.document(result)
        report.emit_document(doc, tmp_path, ("json",))
        back = report.load_document(tmp_path / f"{doc['name']}.json")
        assert back == json.loads(report.dumps(doc))


def test_schema_rejects_malformed_document(small_test2, tmp_path):
    doc = json.loads(report.dumps(report.document(small_test2)))
    del doc["runs"][0]["steps"][0]["eta2"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(jsonschema.ValidationError):
        report.load_document(path)


def test_unknown_format_and_unwritable_directory(small_test1, tmp_path):
    with pytest.raises(ValueError):
        report.emit_report(small_test1, tmp_path, ("pdf",))
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        report.emit_report(small_test1, blocker / "sub")


# --- configuration ---------------------------------------------------------


def test_config_round_trip_and_nested_material(tmp_path):
    cfg = ex.preset("test1-hexagon")
    path = tmp_path / "c.json"
    data = cfg.to_dict()
    data["material"] = {"rho": data.pop("rho"), "young": data.pop("young"), "poisson": data.pop("poisson")}
    path.write_text(json.dumps(data))
    assert ex.ExperimentConfig.load(path) == cfg


@pytest.mark.parametrize(
    "change",
    [{"poisson": 0.5}, {"sizes": []}, {"family": "voronoi"}, {"refinement": ["bisect"]}, {"mark_fraction": 0}],
)
def test_config_validation(change):
    with pytest.raises(ex.ConfigError):
        ex.ExperimentConfig.from_dict({**ex.preset("test1-trapezoid").to_dict(), **change}).validate()


def test_config_rejects_unknown_keys_and_bad_json(tmp_path):
    with pytest.raises(ex.ConfigError, match="colour"):
        ex.ExperimentConfig.from_dict({"colour": "red"})
    path = tmp_path / "broken.json"
    path.write_text("{")
    with pytest.raises(ex.ConfigError):
        ex.ExperimentConfig.load(path)


def test_thread_cap(monkeypatch):
    monkeypatch.setenv(ex.THREADS_ENV, "2")
    assert ex.max_workers(8) == 2
    assert ex.max_workers(1) == 1
    for bad in ("zero", "0"):
        monkeypatch.setenv(ex.THREADS_ENV, bad)
        with pytest.raises(ex.ConfigError):
            ex.max_workers(4)


# --- command line ----------------------------------------------------------


def test_mesh_gen_and_solve(tmp_path, capsys):
    path = tmp_path / "m.json"
    assert main(["mesh", "gen", "--family", "trapezoid", "--n", "4", "--out", str(path)]) == 0
    assert PolyMesh.load(path).num_elements == 16
    capsys.readouterr()
    assert main(["solve", "--mesh", str(path), "--num-modes", "3", "--json"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert len(rec["frequencies"]) == 3
    assert rec["frequencies"] == sorted(rec["frequencies"])


def test_solve_dumps_matrices(tmp_path, capsys):
    out = tmp_path / "mats"
    assert main(["solve", "--family", "vessel", "--num-modes", "1", "--rho", "1", "--young", "1",
                 "--dump-matrices", str(out)]) == 0
    assert capsys.readouterr().out.startswith("N = 136")
    assert sorted(p.name for p in out.iterdir())


def test_adapt_writes_rows(tmp_path, capsys):
    assert main(["adapt", "--strategy", "vem", "--max-dofs", "300", "--out", str(tmp_path)]) == 0
    printed = capsys.readouterr().out.splitlines()
    assert printed[0] == "step,N,omega_h1,eta2,effectivity"
    assert printed[1].startswith("0,136,")
    rows = list(csv.reader((tmp_path / "vessel_vem_adaptive-vem.csv").open()))
    assert rows[0] == list(report.ADAPTIVE_COLUMNS)


def test_report_with_config_file(tmp_path, capsys):
    cfg = ex.preset("test1-trapezoid")
    cfg.sizes = [2, 3, 4]
    cfg.num_modes = 2
    cfg.output_dir = str(tmp_path / "out")
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert main(["report", "--config", str(path), "--format", "csv"]) == 0
    table = (tmp_path / "out" / "test1-trapezoid_frequencies.csv").read_text().splitlines()
    assert table[0].startswith("mode,n=2,n=3,n=4,order")
    assert len(table) == 3


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--mesh", "/nonexistent/mesh.json"],
        ["solve", "--family", "trapezoid", "--n", "2", "--poisson", "0.5"],
        ["report", "--config", "/nonexistent.json"],
    ],
)
def test_errors_exit_nonzero_with_diagnostic(argv, capsys):
    assert main(argv) == 1
    err = capsys.readouterr().err
    assert err.startswith(f"vemspectra {argv[0]}: error:")


def test_bad_thread_env_fails_report(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(ex.THREADS_ENV, "-3")
    assert main(["report", "--preset", "test1-trapezoid", "--sizes", "2", "3", "4", "--out", str(tmp_path)]) == 1
    assert ex.THREADS_ENV in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "vemspectra", "solve", "--family", "bogus"],
                          capture_output=True, text=True)
    assert proc.returncode != 0
    proc = subprocess.run([sys.executable, "-m", "vemspectra", "solve", "--family", "trapezoid", "--n", "2",
                           "--num-modes", "2"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1] == "mode,omega,lambda,residual"
    assert np.isfinite(float(proc.stdout.splitlines()[2].split(",")[1]))
