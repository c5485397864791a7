import json
import random
import subprocess
import sys

import pytest

from distforest.cli import main
from distforest.formats import parse_forest, write_dist, write_newick
from distforest.metric_space import path_metric

from helpers import random_weighted

PARAMS = ["--eps", "0.1", "--cap", "100", "--f", "0.5", "--g", "2"]


def write_truth(tmp_path, n=12, seed=0):
    wt = random_weighted(n, random.Random(seed))
    truth = tmp_path / "truth.nwk"
    truth.write_text(write_newick(wt) + "\n")
    dist = tmp_path / "truth.dist"
    dist.write_text(write_dist(path_metric(wt)))
    return wt, truth, dist


def test_help_and_usage_codes(capsys):
    assert main(["--help"]) == 0
    assert main([]) == 2
    assert main(["forest"]) == 2
    assert main(["bound", "--n", "10", "--eps", "0.1", "--cap", "5", "--f", "1", "--g", "1", "--jobs", "0"]) == 2
    capsys.readouterr()


def test_missing_file_is_usage_error(tmp_path, capsys):
    assert main(["forest", "--dist", str(tmp_path / "nope.dist")] + PARAMS) == 2
    assert "error" in capsys.readouterr().err


def test_bound_output(capsys):
    assert main(["bound", "--n", "16", "--eps", "0.25", "--cap", "2", "--f", "0.6", "--g", "1"]) == 0
    out = dict(line.split() for line in capsys.readouterr().out.splitlines())
    assert out["sample_size"] == "4837"
    assert float(out["radius"]) == pytest.approx((2 - 7 * 0.25) / 6)


def test_forest_and_verify_roundtrip(tmp_path, capsys):
    wt, truth, dist = write_truth(tmp_path)
    out = tmp_path / "forest.nwk"
    assert main(["forest", "--dist", str(dist), "--out", str(out)] + PARAMS) == 0
    trees = parse_forest(out.read_text())
    assert len(trees) == 1 and trees[0].labels == wt.labels
    assert main(["verify", "--truth", str(truth), "--forest", str(out)] + PARAMS) == 0
    assert "verification passed" in capsys.readouterr().out


def test_verify_failure_exit_code(tmp_path, capsys):
    wt, truth, dist = write_truth(tmp_path, n=6)
    bad = tmp_path / "bad.nwk"
    labs = sorted(wt.labels)
    # a caterpillar in label order, almost surely not the random truth
    text = f"({labs[0]}:1,{labs[1]}:1)"
    for lab in labs[2:]:
        text = f"({text}:1,{lab}:1)"
    bad.write_text(text + ";\n")
    code = main(["verify", "--truth", str(truth), "--forest", str(bad)] + PARAMS)
    out = capsys.readouterr().out
    assert code == 1
    assert "FAIL " in out


def test_malformed_matrix_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.dist"
    bad.write_text("2\na 0 1\nb 2 0\n")
    assert main(["forest", "--dist", str(bad)] + PARAMS) == 2
    assert "line 2" in capsys.readouterr().err


def test_ambiguity_exit_code(tmp_path, capsys):
    star = tmp_path / "star.dist"
    star.write_text("4\na 0 2 2 2\nb 2 0 2 2\nc 2 2 0 2\nd 2 2 2 0\n")
    assert main(["forest", "--dist", str(star)] + PARAMS) == 1
    assert main(["forest", "--dist", str(star), "--best-effort"] + PARAMS) == 0
    capsys.readouterr()


def test_lowerbound_then_forest(tmp_path, capsys):
    prefix = str(tmp_path / "lb")
    assert main(["lowerbound", "--levels", "3", "--cap-levels", "1", "--out-prefix", prefix]) == 0
    out = dict(line.split() for line in capsys.readouterr().out.splitlines())
    assert out == {"n": "12", "cap": "2.0", "classes": "6"}
    forest = tmp_path / "lb.forest"
    args = ["--eps", "0.01", "--cap", "2", "--f", "1", "--g", "1"]
    assert main(["forest", "--dist", prefix + ".dist", "--out", str(forest)] + args) == 0
    trees = parse_forest(forest.read_text())
    assert sum(len(t.labels) for t in trees) == 12
    assert main(["verify", "--truth", prefix + ".nwk", "--forest", str(forest)] + args) == 0
    capsys.readouterr()


def test_pipeline_from_sequences_is_deterministic(tmp_path, capsys):
    wt, truth, _ = write_truth(tmp_path, n=8, seed=3)
    lens = {e: 0.1 + 0.2 * (i % 3) / 2 for i, e in enumerate(sorted(wt.lengths))}
    truth.write_text(write_newick(type(wt)(wt.tree, lens)) + "\n")
    outputs = []
    for run in range(2):
        seqs = tmp_path / f"s{run}.fa"
        dist = tmp_path / f"d{run}.dist"
        forest = tmp_path / f"f{run}.nwk"
        report = tmp_path / f"r{run}.json"
        assert main(["simulate", "--tree", str(truth), "--sites", "3000", "--seed", "7", "--out", str(seqs)]) == 0
        assert main(["dist", "--seqs", str(seqs), "--eps", "0.1", "--cap", "10", "--out", str(dist)]) == 0
        assert main(["forest", "--dist", str(dist), "--eps", "0.02", "--cap", "10", "--f", "0.05", "--g", "1",
                     "--best-effort", "--jobs", str(run + 1), "--out", str(forest), "--report", str(report)]) == 0
        outputs.append((seqs.read_bytes(), dist.read_bytes(), forest.read_bytes(), report.read_text()))
    assert outputs[0][:3] == outputs[1][:3]
    reps = [json.loads(o[3]) for o in outputs]
    assert list(reps[0]) == sorted(reps[0])
    for r in reps:
        r.pop("timing")
        r.pop("argv")
        r["parameters"].pop("jobs", None)
    assert reps[0] == reps[1]
    capsys.readouterr()


def test_simulate_needs_lengths(tmp_path, capsys):
    t = tmp_path / "t.nwk"
    t.write_text("((a,b),(c,d));\n")
    assert main(["simulate", "--tree", str(t), "--sites", "10"]) == 2
    capsys.readouterr()


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "distforest", "bound", "--n", "8", "--eps", "0.1",
                          "--cap", "7", "--f", "0.5", "--g", "1"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0].startswith("radius ")
