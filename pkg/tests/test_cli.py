import csv
import io
import json
import subprocess
import sys

import pytest

from afsl.cli import main


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "afsl", *args], capture_output=True, text=True)


@pytest.fixture
def dataset(tmp_path):
    path = tmp_path / "ds.jsonl"
    assert main(["synth", "--classes", "4", "--dim", "2", "--sigma", "1.0", "--sep", "6.0",
                 "--counts", "30", "--val-counts", "2", "--test-counts", "10", "-o", str(path)]) == 0
    return path


def test_stats(tmp_path, capsys):
    path = tmp_path / "pol.jsonl"
    recs = [{"label_set": ["negative", "positive"], "multi_label": False}]
    sid = 0
    for split, neg, pos in (("train", 2050, 2455), ("validation", 511, 612), ("test", 639, 765)):
        for name, count in (("negative", neg), ("positive", pos)):
            for _ in range(count):
                recs.append({"id": sid, "text": "", "labels": [name], "split": split})
                sid += 1
    path.write_text("".join(json.dumps(r) + "\n" for r in recs))
    assert main(["stats", str(path)]) == 0
    out = capsys.readouterr().out
    assert "|L|: 2" in out
    assert "train: 4505" in out and "validation: 1123" in out and "test: 1404" in out
    # 3200 negative / 3832 positive overall
    assert "U%: 9.0\n" in out


def test_synth_writes_dataset(dataset):
    lines = dataset.read_text().splitlines()
    assert len(lines) == 1 + 4 * (30 + 2 + 10)


def test_run_and_report(dataset, tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(f"dataset = {dataset}\nfirst_strategy = rep-en\nlater_strategy = un\n"
                   f"m = 5\niterations = 3\nseeds = 0, 1\noutput_dir = {tmp_path / 'runs'}\n")
    assert main(["run", "--config", str(cfg)]) == 0
    record = tmp_path / "runs" / "rep-en+un" / "record.json"
    assert record.exists()
    assert (tmp_path / "runs" / "rep-en+un" / "bands_micro_f1.csv").exists()
    capsys.readouterr()
    assert main(["report", str(record), "--metric", "macro_f1"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# metric=macro_f1")
    rows = list(csv.DictReader(line for line in io.StringIO(out) if not line.startswith("#")))
    assert [r["K"] for r in rows] == ["5", "10", "15"]
    assert set(rows[0]) == {"strategy", "K", "mean", "stddev"}
    assert rows[0]["strategy"] == "rep-en+un"


def test_run_rejects_uncertainty_first(dataset, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(f"dataset = {dataset}\nfirst_strategy = un\n")
    res = run_cli("run", "--config", str(cfg))
    assert res.returncode == 2
    assert "first iteration" in res.stderr


def test_sweep(dataset, tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(f"dataset = {dataset}\nm = 4\niterations = 2\nseeds = 0\n"
                   f"output_dir = {tmp_path / 'runs'}\n")
    assert main(["sweep", "--config", str(cfg), "--alpha", "1,2,5"]) == 0
    table = (tmp_path / "runs" / "alpha_sweep.csv").read_text()
    assert "rep-en+unrep(alpha=5)" in table
    assert table.count("\n") == 2 + 3 * 2


def test_trainer_synthetic_subcommand(dataset, tmp_path):
    from afsl.protocol import TrainRequest, read_response, write_request

    req = TrainRequest("q", 0, ["c0", "c1", "c2", "c3"], [], [0, 1], [], [], dataset=str(dataset))
    path = write_request(req, tmp_path / "iter_0" / "request")
    res = run_cli("trainer-synthetic", str(path))
    assert res.returncode == 0
    line = [l for l in res.stdout.splitlines() if l.startswith("RESPONSE ")][0]
    resp = read_response(line.split(" ", 1)[1])
    assert [p.id for p in resp.pool] == [0, 1]
