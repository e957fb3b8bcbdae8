import csv
import json

import numpy as np
import pytest

from oracles import naive_dbscan
from ecotraj.cli import main
from ecotraj.engine import snapshots
from ecotraj.io import parse_records


@pytest.fixture
def stream(tmp_path):
    path = tmp_path / "stream.csv"
    assert main(["generate", "--groups", "3", "--objects-per-group", "10", "--steps", "6", "--seed", "4", "--out", str(path)]) == 0
    return path


def _jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_run_without_input_is_usage_error(capsys):
    assert main(["run"]) == 1
    assert "--input" in capsys.readouterr().err


def test_unknown_flag_is_usage_error():
    assert main(["run", "--input", "x.csv", "--bogus"]) == 1


def test_missing_file_is_data_error(tmp_path):
    assert main(["run", "--input", str(tmp_path / "nope.csv")]) == 2


def test_bad_parameter_is_usage_error(stream):
    assert main(["run", "--input", str(stream), "--planar", "--delta", "900", "--eps", "500"]) == 1


def test_generate_is_deterministic(tmp_path, stream):
    again = tmp_path / "again.csv"
    main(["generate", "--groups", "3", "--objects-per-group", "10", "--steps", "6", "--seed", "4", "--out", str(again)])
    assert again.read_bytes() == stream.read_bytes()


def test_run_outputs(tmp_path, stream):
    out, metrics, assign = tmp_path / "o.jsonl", tmp_path / "m.csv", tmp_path / "a.csv"
    rc = main([
        "run", "--input", str(stream), "--planar", "--eps", "500", "--min-pts", "8", "--delta", "400",
        "--rho", "6", "--alpha", "0.9", "--mu", "30", "--delta-t", "10",
        "--out", str(out), "--metrics-out", str(metrics), "--assignments-out", str(assign),
    ])
    assert rc == 0
    steps = _jsonl(out)
    assert [s["step"] for s in steps] == list(range(6))
    assert list(steps[0]) == ["step", "eps", "clusters", "dissolved", "outliers", "qs", "nmi", "smoothed", "ms"]
    assert steps[0]["nmi"] is None
    rows = list(csv.DictReader(metrics.open()))
    assert len(rows) == 6 and rows[0]["nmi"] == ""

    # evaluate reproduces the run's own metrics exactly
    per_step = tmp_path / "e.csv"
    assert main(["evaluate", "--input", str(assign), "--out", str(per_step)]) == 0
    ev = list(csv.DictReader(per_step.open()))
    assert [float(r["qs"]) for r in ev] == [s["qs"] for s in steps]
    assert [float(r["nmi"]) if r["nmi"] else None for r in ev] == [s["nmi"] for s in steps]


def test_disabled_smoothing_matches_naive_dbscan(tmp_path, stream):
    out, assign = tmp_path / "o.jsonl", tmp_path / "a.csv"
    rc = main([
        "run", "--input", str(stream), "--planar", "--disable-smoothing", "--alpha", "0",
        "--out", str(out), "--assignments-out", str(assign),
    ])
    assert rc == 0
    steps = _jsonl(out)
    raw = list(snapshots(sorted(parse_records(stream).records, key=lambda r: r.timestamp), 10.0))
    for rec, snap in zip(steps, raw):
        ids, xy, _ = snap.arrays()
        _, labels = naive_dbscan(xy, rec["eps"], 8)
        want = {frozenset(np.asarray(ids)[labels == c].tolist()) for c in set(labels.tolist()) - {-1}}
        assert {frozenset(c["members"]) for c in rec["clusters"]} == want
        assert sorted(rec["outliers"]) == sorted(np.asarray(ids)[labels < 0].tolist())
        assert rec["smoothed"] == 0


def test_two_blob_round_trip(tmp_path, capsys):
    path = tmp_path / "blob.csv"
    assert main(["generate", "--two-blob", "--out", str(path)]) == 0
    args = ["run", "--input", str(path), "--planar", "--eps", "15", "--min-pts", "3", "--delta", "10",
            "--rho", "3", "--alpha", "20", "--mu", "10", "--delta-eps", "0.001", "--init-max-iters", "1"]
    assert main(args + ["--out", str(tmp_path / "eco.jsonl")]) == 0
    assert main(args + ["--disable-smoothing", "--out", str(tmp_path / "plain.jsonl")]) == 0
    assert [len(s["clusters"]) for s in _jsonl(tmp_path / "eco.jsonl")] == [2, 2, 2]
    assert [len(s["clusters"]) for s in _jsonl(tmp_path / "plain.jsonl")] == [2, 3, 2]


def test_evaluate_repeated_partition(tmp_path, capsys):
    path = tmp_path / "a.csv"
    path.write_text("step,object_id,x,y,cluster\n" + "".join(f"{k},{i},{i},0,{i % 2}\n" for k in range(3) for i in range(6)))
    assert main(["evaluate", "--input", str(path)]) == 0
    assert json.loads(capsys.readouterr().out)["mean_nmi"] == 1.0


def test_sweep(tmp_path, stream):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--input", str(stream), "--planar", "--param", "alpha", "--values", "0,0.9", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["value"] for r in rows] == ["0.0", "0.9"]
    assert all(int(r["steps"]) == 6 for r in rows)
    assert main(["sweep", "--input", str(stream), "--planar", "--param", "alpha", "--values", "x"]) == 1


def test_malformed_input_is_reported(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("1,0,0,0\n2,0,1,0\n3,0\n")
    assert main(["run", "--input", str(path), "--planar", "--min-pts", "2", "--delta", "1", "--eps", "5"]) == 0
    assert "skipped 1 malformed" in capsys.readouterr().err
    assert main(["run", "--input", str(path), "--planar", "--strict"]) == 2
