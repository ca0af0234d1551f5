import json

import numpy as np
import pytest

from nlgad.cli import main
from nlgad.config import RunConfig
from nlgad.graph import load_graph

QUICK = ["--t-select", "3", "--t-refine", "2", "--rounds", "2",
         "--hidden-dim", "8", "--batch-size", "16", "--total-anomalies", "6",
         "--clique-size", "3", "--candidate-pool-size", "5"]


def run_synth(tmp_path, n=40, seed=0):
    out = tmp_path / "synth"
    assert main(["synth", "--out", str(out), "--nodes", str(n), "--blocks", "4",
                 "--dim", "4", "--seed", str(seed)]) == 0
    return out


def run_inject(tmp_path, synth_dir):
    out = tmp_path / "inject"
    assert main(["inject", "--edges", str(synth_dir / "edges.txt"),
                 "--features", str(synth_dir / "features.txt"),
                 "--out", str(out)] + QUICK) == 0
    return out


def run_train(tmp_path, inject_dir, extra=()):
    out = tmp_path / "train"
    assert main(["train", "--edges", str(inject_dir / "edges.txt"),
                 "--features", str(inject_dir / "features.txt"),
                 "--out", str(out)] + QUICK + list(extra)) == 0
    return out


def test_synth_writes_loadable_graph(tmp_path):
    out = run_synth(tmp_path)
    g = load_graph(out / "edges.txt", out / "features.txt")
    assert g.n == 40 and g.d == 4


def test_inject_outputs(tmp_path):
    out = run_inject(tmp_path, run_synth(tmp_path))
    g = load_graph(out / "edges.txt", out / "features.txt", out / "labels.txt")
    assert int(g.labels.sum()) == 6
    assert (out / "graph.bin").exists()
    assert (out / "config.txt").exists()


def test_train_score_eval_chain(tmp_path):
    inject_dir = run_inject(tmp_path, run_synth(tmp_path))
    train_dir = run_train(tmp_path, inject_dir)
    assert (train_dir / "model_phase1.ckpt").exists()
    assert (train_dir / "model_phase2.ckpt").exists()
    assert (train_dir / "selection_report.tsv").exists()

    score_dir = tmp_path / "score"
    assert main(["score", "--edges", str(inject_dir / "edges.txt"),
                 "--features", str(inject_dir / "features.txt"),
                 "--labels", str(inject_dir / "labels.txt"),
                 "--checkpoint", str(train_dir / "model_phase2.ckpt"),
                 "--out", str(score_dir)] + QUICK) == 0
    metrics = json.loads((score_dir / "metrics.json").read_text())
    assert metrics["auc"] is not None and 0.0 <= metrics["auc"] <= 1.0
    assert (score_dir / "roc.csv").exists()

    eval_dir = tmp_path / "eval"
    assert main(["eval", "--scores", str(score_dir / "scores.tsv"),
                 "--labels", str(inject_dir / "labels.txt"),
                 "--out", str(eval_dir)] + QUICK) == 0
    eval_metrics = json.loads((eval_dir / "metrics.json").read_text())
    assert eval_metrics["auc"] == pytest.approx(metrics["auc"], abs=1e-12)


def test_score_without_labels_emits_null_auc(tmp_path):
    inject_dir = run_inject(tmp_path, run_synth(tmp_path))
    train_dir = run_train(tmp_path, inject_dir)
    score_dir = tmp_path / "score_nolabel"
    assert main(["score", "--edges", str(inject_dir / "edges.txt"),
                 "--features", str(inject_dir / "features.txt"),
                 "--checkpoint", str(train_dir / "model_phase2.ckpt"),
                 "--out", str(score_dir)] + QUICK) == 0
    metrics = json.loads((score_dir / "metrics.json").read_text())
    assert metrics["auc"] is None
    assert "label" in metrics["auc_null_reason"]
    assert not (score_dir / "roc.csv").exists()


def test_score_rejects_mismatched_config_hash(tmp_path, capsys):
    inject_dir = run_inject(tmp_path, run_synth(tmp_path))
    train_dir = run_train(tmp_path, inject_dir)
    code = main(["score", "--edges", str(inject_dir / "edges.txt"),
                 "--features", str(inject_dir / "features.txt"),
                 "--checkpoint", str(train_dir / "model_phase2.ckpt"),
                 "--out", str(tmp_path / "bad")] + QUICK + ["--alpha", "0.5"])
    assert code == 2
    assert "hash" in capsys.readouterr().err


def test_train_osp_mode_has_no_phase2(tmp_path):
    inject_dir = run_inject(tmp_path, run_synth(tmp_path))
    train_dir = run_train(tmp_path, inject_dir, extra=["--mode", "osp"])
    assert (train_dir / "model_phase1.ckpt").exists()
    assert not (train_dir / "model_phase2.ckpt").exists()
    assert not (train_dir / "selection_report.tsv").exists()


def test_train_dump_subgraphs(tmp_path):
    inject_dir = run_inject(tmp_path, run_synth(tmp_path))
    dump = tmp_path / "subgraphs.txt"
    run_train(tmp_path, inject_dir, extra=["--dump-subgraphs", str(dump)])
    text = dump.read_text()
    assert text.startswith("target 0:")


def test_config_file_and_flag_merge(tmp_path):
    cfg = RunConfig(t_select=3, t_refine=2, rounds=2, hidden_dim=8,
                    batch_size=16, total_anomalies=6, clique_size=3,
                    candidate_pool_size=5, alpha=0.7)
    cfg_path = tmp_path / "config.txt"
    cfg.save(cfg_path)
    synth_dir = run_synth(tmp_path)
    out = tmp_path / "inject_cfg"
    assert main(["inject", "--edges", str(synth_dir / "edges.txt"),
                 "--features", str(synth_dir / "features.txt"),
                 "--out", str(out), "--config", str(cfg_path),
                 "--alpha", "0.65"]) == 0
    saved = RunConfig.load(out / "config.txt")
    assert saved.alpha == 0.65       # flag overrides file
    assert saved.hidden_dim == 8     # file overrides default


def test_exit_code_2_on_bad_config(tmp_path, capsys):
    synth_dir = run_synth(tmp_path)
    code = main(["train", "--edges", str(synth_dir / "edges.txt"),
                 "--features", str(synth_dir / "features.txt"),
                 "--out", str(tmp_path / "t")] + QUICK + ["--alpha", "1.5"])
    assert code == 2
    assert "config error" in capsys.readouterr().err


def test_exit_code_3_on_bad_data(tmp_path, capsys):
    bad_edges = tmp_path / "edges.txt"
    bad_edges.write_text("0 0\n")  # self-loop
    feats = tmp_path / "features.txt"
    feats.write_text("1.0\n2.0\n")
    code = main(["train", "--edges", str(bad_edges), "--features", str(feats),
                 "--out", str(tmp_path / "t")] + QUICK)
    assert code == 3
    assert "data error" in capsys.readouterr().err


def test_exit_code_3_on_missing_file(tmp_path):
    code = main(["train", "--edges", str(tmp_path / "nope.txt"),
                 "--features", str(tmp_path / "nope2.txt"),
                 "--out", str(tmp_path / "t")] + QUICK)
    assert code == 3


def test_eval_exit_code_3_on_single_class(tmp_path):
    scores = tmp_path / "scores.tsv"
    scores.write_text("node\tscore\n0\t0.5\n1\t0.9\n")
    labels = tmp_path / "labels.txt"
    labels.write_text("0\n0\n")
    code = main(["eval", "--scores", str(scores), "--labels", str(labels),
                 "--out", str(tmp_path / "e")])
    assert code == 3


def test_run_all_determinism_byte_identical(tmp_path):
    args = ["run-all"] + QUICK + ["--seed", "1"]
    # tiny graph via explicit files to keep runtime small
    synth_dir = run_synth(tmp_path, n=40, seed=1)
    base = args + ["--edges", str(synth_dir / "edges.txt"),
                   "--features", str(synth_dir / "features.txt")]
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(base + ["--out", str(out1)]) == 0
    assert main(base + ["--out", str(out2)]) == 0
    for name in ("scores.tsv", "metrics.json", "roc.csv", "labels.txt"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_run_all_generates_graph_when_no_input(tmp_path):
    out = tmp_path / "ra"
    assert main(["run-all", "--out", str(out), "--t-select", "2",
                 "--t-refine", "1", "--rounds", "2", "--hidden-dim", "8",
                 "--batch-size", "64"]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["auc"] is not None
    scores = (out / "scores.tsv").read_text().splitlines()
    assert len(scores) == 500 + 1  # header + default benchmark size
