import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from ipsketch.cli import main
from ipsketch.serialization import load


@pytest.fixture
def tables(tmp_path):
    rng = np.random.default_rng(0)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    xs = rng.uniform(-1, 1, 600)
    with open(a, "w") as fh:
        fh.write("key,val\n")
        for i in range(400):
            fh.write(f"k{i},{xs[i]}\n")
    with open(b, "w") as fh:
        fh.write("key,val\n")
        for i in range(200, 600):
            y = 0.9 * xs[i] + 0.1 * rng.uniform(-1, 1) if i < 400 else rng.uniform(-1, 1)
            fh.write(f"k{i},{y}\n")
    return a, b


def run(capsys, *argv):
    code = main([str(x) for x in argv])
    return code, capsys.readouterr().out


def test_sketch_then_estimate(tables, tmp_path, capsys):
    a, b = tables
    for src, dst in ((a, "a.ipsk"), (b, "b.json")):
        code, _ = run(capsys, "sketch", "--input", src, "--out", tmp_path / dst, "--m", 500, "--seed", 4)
        assert code == 0
    code, out = run(capsys, "estimate", "--sketch-a", tmp_path / "a.ipsk", "--sketch-b", tmp_path / "b.json")
    rep = json.loads(out)
    assert code == 0 and rep["matched_count"] == 200
    # saturated sketches give the exact inner product
    from ipsketch.sparse_vector import exact_inner_product, read_csv_vector

    assert rep["estimate"] == pytest.approx(exact_inner_product(read_csv_vector(str(a)), read_csv_vector(str(b))))


@pytest.mark.parametrize("method", ["jl", "cs", "mh", "ts-uniform"])
def test_other_methods_round_trip(method, tables, tmp_path, capsys):
    a, b = tables
    for src, dst in ((a, "a.ipsk"), (b, "b.ipsk")):
        run(capsys, "sketch", "--input", src, "--out", tmp_path / dst, "--m", 64, "--method", method)
    code, out = run(capsys, "estimate", "--sketch-a", tmp_path / "a.ipsk", "--sketch-b", tmp_path / "b.ipsk")
    assert code == 0 and isinstance(json.loads(out)["estimate"], float)


def test_corr_from_tables_and_sketch_files(tables, tmp_path, capsys):
    a, b = tables
    code, out = run(capsys, "corr", "--table-a", a, "--table-b", b, "--method", "ps-weighted", "--budget", 900)
    rep = json.loads(out)
    assert code == 0 and rep["defined"] and rep["rho"] > 0.9
    for src, dst in ((a, "ga.ipsk"), (b, "gb.ipsk")):
        run(capsys, "sketch", "--input", src, "--out", tmp_path / dst, "--m", 600, "--correlation")
    code, out = run(capsys, "corr", "--sketch-a", tmp_path / "ga.ipsk", "--sketch-b", tmp_path / "gb.ipsk")
    assert json.loads(out)["rho"] == pytest.approx(rep["rho"])


def test_corr_disjoint_tables_report_no_overlap(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    a.write_text("x,1\ny,2\nz,3\n")
    b.write_text("p,1\nq,2\nr,3\n")
    code, out = run(capsys, "corr", "--table-a", a, "--table-b", b)
    assert code == 1 and json.loads(out)["reason"] == "no-overlap"


def test_ingest_counts(tmp_path, capsys):
    src = tmp_path / "orders.csv"
    src.write_text("customer\nann\nbob\nann\n")
    code, out = run(capsys, "ingest", "--input", src, "--out", tmp_path / "v.npz", "--value-column", "count",
                    "--header")
    assert code == 0 and json.loads(out)["nnz"] == 2
    code, _ = run(capsys, "sketch", "--input", tmp_path / "v.npz", "--out", tmp_path / "v.ipsk", "--m", 5)
    sk = load(tmp_path / "v.ipsk")
    assert sorted(sk.values.tolist()) == [1.0, 2.0]


def test_bench_writes_csvs(tmp_path, capsys):
    out, summ, timing = tmp_path / "r.csv", tmp_path / "s.csv", tmp_path / "t.csv"
    code, text = run(capsys, "bench-ip", "--methods", "ps-weighted,jl", "--budgets", "90", "--trials", 2,
                     "--seed", 1, "--out", out, "--summary", summ, "--timing", timing)
    assert code == 0 and "ps-weighted" in text
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 4 * 2 * 2 and "wall_time_sketch" not in rows[0]
    assert summ.exists() and timing.exists()


def test_bench_config_file(tmp_path, capsys):
    cfg = tmp_path / "grid.json"
    cfg.write_text(json.dumps({"experiment": "joinsize", "methods": ["ts-weighted"], "budgets": [60],
                               "trials": 2, "rows_a": 500, "rows_b": 500, "key_domain": 1000}))
    code, _ = run(capsys, "run-grid", "--config", cfg, "--out", tmp_path / "r.csv")
    assert code == 0
    code, _ = run(capsys, "bench-ip", "--config", cfg, "--out", tmp_path / "r2.csv")
    assert code == 2


def test_bench_unknown_method(tmp_path, capsys):
    code = main(["bench-corr", "--methods", "nope", "--out", str(tmp_path / "r.csv")])
    assert code == 2
    assert "valid:" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ipsketch.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for sub in ("sketch", "estimate", "corr", "bench-ip", "bench-binary", "bench-corr", "bench-joinsize", "ingest"):
        assert sub in proc.stdout
