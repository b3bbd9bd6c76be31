import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from faceqa import cli
from faceqa.core import Dataset, load_jsonl, save_jsonl
from faceqa.gallery import partition
from faceqa.labeler import load_labels
from faceqa.metrics import PairSet, build_pairs
from faceqa.synth import SynthSpec, generate, lfw_shaped_spec
from faceqa.trainer import RegressionHead, load_model, predict, save_model
from oracles import brute_label, brute_rates, sweep_eer


@pytest.fixture
def small(tmp_path):
    ds, _ = generate(SynthSpec(6, 4, 8, 0.05, 0.5, 1.0, seed=3))
    path = tmp_path / "emb.jsonl"
    save_jsonl(ds, path)
    return ds, path


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_partition_lfw_shaped(tmp_path):
    ds, _ = generate(lfw_shaped_spec(dim=2, seed=1))
    emb = tmp_path / "lfw.jsonl"
    save_jsonl(ds, emb)
    assert run("partition", "--embeddings", emb, "--out", tmp_path / "m.json") == 0
    man = json.loads((tmp_path / "m.json").read_text())
    assert len(man["templates"]) == 5749 and len(man["probes"]) == 7484


def test_partition_missing_input(tmp_path, capsys):
    missing = tmp_path / "nope.jsonl"
    code = run("partition", "--embeddings", missing, "--out", tmp_path / "m.json")
    assert code == cli.EXIT_DATA
    assert str(missing) in capsys.readouterr().err


def test_partition_same_seed_same_bytes(small, tmp_path):
    _, emb = small
    for name in ("a.json", "b.json"):
        assert run("partition", "--embeddings", emb, "--policy", "random", "--seed", 5,
                   "--out", tmp_path / name) == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_bad_policy_is_usage_error(small, tmp_path):
    _, emb = small
    assert run("partition", "--embeddings", emb, "--policy", "best",
               "--out", tmp_path / "m.json") == cli.EXIT_USAGE


def test_label_matches_oracle(small, tmp_path):
    ds, emb = small
    run("partition", "--embeddings", emb, "--out", tmp_path / "m.json")
    assert run("label", "--embeddings", emb, "--manifest", tmp_path / "m.json",
               "--out", tmp_path / "l.csv") == 0
    labels = load_labels(tmp_path / "l.csv")
    part = partition(ds)
    assert len(labels) == len(part.probes) == 18
    tmpl = [(s, r.vector) for s, r in part.templates.items()]
    for lab, probe in zip(labels, part.probes):
        exp = brute_label(probe, tmpl)
        got = (lab.genuine_dist, lab.impostor_mean, lab.impostor_std, lab.z_score, lab.target)
        assert np.max(np.abs(np.subtract(got, exp))) <= 1e-12


def test_label_empty_probes(tmp_path):
    ds = Dataset.from_arrays(["a", "b", "c"], ["1", "1", "1"], np.eye(3))
    save_jsonl(ds, tmp_path / "e.jsonl")
    run("partition", "--embeddings", tmp_path / "e.jsonl", "--out", tmp_path / "m.json")
    assert run("label", "--embeddings", tmp_path / "e.jsonl", "--manifest",
               tmp_path / "m.json", "--out", tmp_path / "l.csv") == 0
    assert (tmp_path / "l.csv").read_text() == "subject,image,genuine_dist,imp_mean,imp_std,z,target\n"


def test_label_degenerate_is_numeric_failure(tmp_path):
    ds = Dataset.from_arrays(["a", "a", "b", "c"], ["1", "2", "1", "1"],
                             [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [-1.0, 0.0]])
    save_jsonl(ds, tmp_path / "e.jsonl")
    run("partition", "--embeddings", tmp_path / "e.jsonl", "--out", tmp_path / "m.json")
    assert run("label", "--embeddings", tmp_path / "e.jsonl", "--manifest",
               tmp_path / "m.json", "--out", tmp_path / "l.csv") == cli.EXIT_NUMERIC


def _labelled(small, tmp_path):
    _, emb = small
    run("partition", "--embeddings", emb, "--out", tmp_path / "m.json")
    run("label", "--embeddings", emb, "--manifest", tmp_path / "m.json", "--out", tmp_path / "l.csv")
    return emb, tmp_path / "l.csv"


def test_train_defaults_in_model_config(small, tmp_path):
    emb, labels = _labelled(small, tmp_path)
    assert run("train", "--embeddings", emb, "--labels", labels, "--out", tmp_path / "t") == 0
    obj = json.loads((tmp_path / "t" / "model.json").read_text())
    cfg = obj["config"]
    assert cfg["learning_rate"] == 0.001 and cfg["momentum"] == 0.99
    assert cfg["weight_decay"] == 1e-5 and cfg["batch_size"] == 64
    assert cfg["epochs"] == 30 and cfg["train_fraction"] == 0.7
    assert obj["dim"] == 8 and len(obj["weights"]) == 8
    hist = (tmp_path / "t" / "history.csv").read_text().splitlines()
    assert hist[0] == "epoch,train_loss,test_loss" and len(hist) == 31


def test_train_epochs_zero_is_usage_error(tmp_path, capsys):
    # inputs need not exist: validation happens before any file is read
    code = run("train", "--embeddings", tmp_path / "x", "--labels", tmp_path / "y",
               "--epochs", 0, "--out", tmp_path / "t")
    assert code == cli.EXIT_USAGE
    assert "epochs" in capsys.readouterr().err
    assert not (tmp_path / "t").exists()


def test_train_deterministic_files(small, tmp_path):
    emb, labels = _labelled(small, tmp_path)
    for d in ("r1", "r2"):
        run("train", "--embeddings", emb, "--labels", labels, "--seed", 4,
            "--epochs", 5, "--out", tmp_path / d)
    for f in ("model.json", "history.csv"):
        assert (tmp_path / "r1" / f).read_bytes() == (tmp_path / "r2" / f).read_bytes()


def test_score_zero_model(small, tmp_path):
    _, emb = small
    save_model(RegressionHead.zeros(8), tmp_path / "m.json")
    assert run("score", "--model", tmp_path / "m.json", "--embeddings", emb,
               "--out", tmp_path / "s.csv") == 0
    rows = list(csv.DictReader((tmp_path / "s.csv").open()))
    assert len(rows) == 24 and all(float(r["quality"]) == 0.5 for r in rows)


def test_score_matches_library(tmp_path):
    r = np.random.default_rng(17)
    ds = Dataset.from_arrays([f"s{i // 4}" for i in range(100)], [f"i{i % 4}" for i in range(100)],
                             r.standard_normal((100, 8)) * 3)
    save_jsonl(ds, tmp_path / "e.jsonl")
    head = RegressionHead(r.standard_normal(8), 0.7)
    save_model(head, tmp_path / "m.json")
    run("score", "--model", tmp_path / "m.json", "--embeddings", tmp_path / "e.jsonl",
        "--out", tmp_path / "s.csv")
    rows = list(csv.DictReader((tmp_path / "s.csv").open()))
    assert [(x["subject"], x["image"]) for x in rows] == [rec.key for rec in ds]
    got = np.array([float(x["quality"]) for x in rows])
    assert np.max(np.abs(got - predict(head, ds.matrix()))) <= 1e-12
    assert np.all((got > 0) & (got < 1))


def test_eval_outputs(small, tmp_path):
    ds, emb = small
    assert run("eval", "--embeddings", emb, "--grid-size", 128, "--bins", 16,
               "--out", tmp_path / "ev") == 0
    pairs = build_pairs(ds)
    rows = list(csv.DictReader((tmp_path / "ev" / "curve.csv").open()))
    assert len(rows) == 128
    assert (float(rows[0]["far"]), float(rows[-1]["far"])) == (0.0, 1.0)
    assert float(rows[-1]["frr"]) == 0.0
    for row in rows[::9]:
        far, frr = brute_rates(pairs.same_dist, pairs.diff_dist, float(row["threshold"]))
        assert float(row["far"]) == far and float(row["frr"]) == frr
    rep = json.loads((tmp_path / "ev" / "eer.json").read_text())
    assert set(rep) == {"eer", "threshold", "n_same", "n_diff"}
    assert (rep["n_same"], rep["n_diff"]) == (pairs.n_same, pairs.n_diff)
    ref, ref_thr = sweep_eer(pairs.same_dist, pairs.diff_dist)
    step = float(rows[1]["threshold"]) - float(rows[0]["threshold"])
    assert abs(rep["threshold"] - ref_thr) <= step
    hist = list(csv.DictReader((tmp_path / "ev" / "hist.csv").open()))
    assert len(hist) == 16
    assert sum(int(h["intra_count"]) for h in hist) == pairs.n_same
    assert sum(int(h["inter_count"]) for h in hist) == pairs.n_diff


def test_eval_quality_stats_with_model(small, tmp_path):
    _, emb = small
    save_model(RegressionHead.zeros(8), tmp_path / "m.json")
    run("eval", "--embeddings", emb, "--model", tmp_path / "m.json", "--out", tmp_path / "ev")
    stats = json.loads((tmp_path / "ev" / "quality_stats.json").read_text())
    assert stats["mean"] == 0.5 and stats["n"] == 24


def test_simulate(tmp_path):
    assert run("simulate", "--subjects", 3, "--images-per-subject", 2, "--dim", 4,
               "--noise-low", 0.1, "--noise-high", 0.2, "--centroid-scale", 2.0,
               "--seed", 1, "--out", tmp_path / "sim") == 0
    ds = load_jsonl(tmp_path / "sim" / "embeddings.jsonl")
    ref, _ = generate(SynthSpec(3, 2, 4, 0.1, 0.2, 2.0, seed=1))
    assert np.array_equal(ds.matrix(), ref.matrix())
    truth = (tmp_path / "sim" / "truth.csv").read_text().splitlines()
    assert truth[0] == "subject,image,tau" and len(truth) == 7
    assert run("simulate", "--subjects", 1, "--out", tmp_path / "bad") == cli.EXIT_USAGE


def test_pipeline_with_external_embeddings(small, tmp_path):
    _, emb = small
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 2, "embeddings": emb.name,
                               "train": {"epochs": 3}, "out": "out"}))
    assert run("pipeline", cfg) == 0
    for f in ("partition.json", "labels.csv", "model.json", "history.csv", "scores.csv",
              "curve.csv", "eer.json", "hist.csv", "quality_stats.json"):
        assert (tmp_path / "out" / f).is_file()
    assert not (tmp_path / "out" / "embeddings.jsonl").exists()
    assert json.loads((tmp_path / "out" / "model.json").read_text())["seed"] == 2


@pytest.mark.parametrize("body", ['{"bogus": 1}', '{"train": {"epochs": 0}}', "not json"])
def test_pipeline_bad_config(tmp_path, body):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(body)
    assert run("pipeline", cfg, "--out", tmp_path / "o") == cli.EXIT_USAGE


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "faceqa.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("partition", "label", "train", "score", "eval", "simulate", "pipeline"):
        assert cmd in proc.stdout
