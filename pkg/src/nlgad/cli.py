"""Command-line front end: inject -> train -> score -> eval, plus synth.

Every output directory receives the serialized RunConfig that produced it;
checkpoints embed the config's content hash and scoring refuses a
checkpoint whose hash does not match the active config.

Exit codes: 0 success, 2 config error, 3 data error, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields

import numpy as np

from . import model as md
from . import pipeline as pl
from . import scoring as sc
from . import synth
from .config import RunConfig
from .errors import ConfigError, DataError, InternalError, NlgadError
from .graph import load_graph, save_graph_binary, save_graph_text
from .injection import InjectionConfig, inject_combined
from .sampler import SamplerConfig, sample_subgraph

_INJECT_STREAM = 0x17EC


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", metavar="FILE",
                        help="flat key=value config file; flags override it")
    types = {"int": int, "float": float, "str": str}
    for f in fields(RunConfig):
        parser.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name,
                            type=types[f.type], default=None,
                            help=f"override {f.name} (default {f.default})")


def _build_config(args) -> RunConfig:
    base = RunConfig.load(args.config) if args.config else RunConfig()
    values = {f.name: getattr(base, f.name) for f in fields(RunConfig)}
    for f in fields(RunConfig):
        override = getattr(args, f.name, None)
        if override is not None:
            values[f.name] = override
    return RunConfig(**values)


def _add_graph_args(parser, labels=False):
    parser.add_argument("--edges", required=True, help="edge list file")
    parser.add_argument("--features", required=True, help="node feature file")
    if labels:
        parser.add_argument("--labels", default=None, help="node label file")


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write_metrics(path, cfg: RunConfig, auc_value, reason=None):
    obj = {
        "auc": auc_value,
        "auc_null_reason": reason,
        "rounds": cfg.rounds,
        "seed": cfg.seed,
        "config_hash": cfg.content_hash(),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, sort_keys=True, indent=2)
        f.write("\n")


def _write_scores(path, table: sc.AnomalyScoreTable):
    mean, std = table.mean, table.std
    with open(path, "w", encoding="utf-8") as f:
        f.write("node\tfinal\tmean\tstd\n")
        for v in range(len(table.final)):
            f.write(f"{v}\t{table.final[v]:.17g}\t{mean[v]:.17g}\t{std[v]:.17g}\n")


def _read_scores(path) -> np.ndarray:
    vals = {}
    try:
        f = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}")
    with f:
        header = f.readline()
        if not header.startswith("node\t"):
            raise DataError(f"{path}: not a scores TSV")
        for line in f:
            toks = line.split("\t")
            vals[int(toks[0])] = float(toks[1])
    return np.array([vals[v] for v in range(len(vals))])


def _write_roc(path, curve: sc.RocCurve):
    with open(path, "w", encoding="utf-8") as f:
        f.write("fpr,tpr\n")
        for x, y in zip(curve.fpr, curve.tpr):
            f.write(f"{x:.17g},{y:.17g}\n")


def _read_labels(path, n) -> np.ndarray:
    vals = []
    try:
        f = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}")
    with f:
        for line in f:
            line = line.strip()
            if line and not line.startswith("#"):
                vals.append(int(line))
    if len(vals) != n:
        raise DataError(f"{path}: {len(vals)} labels for {n} scored nodes")
    return np.array(vals, dtype=np.int8)


# ---------------------------------------------------------------------------
# subcommands

def cmd_synth(args):
    out = _outdir(args)
    graph = synth.generate_sbm(n=args.nodes, blocks=args.blocks, dim=args.dim,
                               intra_p=args.intra_p, inter_p=args.inter_p,
                               feature_noise=args.feature_noise, seed=args.seed)
    save_graph_text(graph, os.path.join(out, "edges.txt"),
                    os.path.join(out, "features.txt"))
    print(f"synth: n={graph.n} m={graph.num_edges} d={graph.d} -> {out}")


def cmd_inject(args):
    cfg = _build_config(args)
    out = _outdir(args)
    graph = load_graph(args.edges, args.features)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _INJECT_STREAM]))
    icfg = InjectionConfig(candidate_pool_size=cfg.candidate_pool_size,
                           clique_size=cfg.clique_size, rng_seed=cfg.seed)
    injected, labeled = inject_combined(graph, cfg.total_anomalies, icfg, rng)
    if injected.labels is None:
        injected = injected.with_labels(np.zeros(graph.n, dtype=np.int8))
    save_graph_text(injected, os.path.join(out, "edges.txt"),
                    os.path.join(out, "features.txt"),
                    os.path.join(out, "labels.txt"))
    save_graph_binary(injected, os.path.join(out, "graph.bin"))
    cfg.save(os.path.join(out, "config.txt"))
    print(f"inject: {len(labeled)} anomalies -> {out}")


def _dump_subgraphs(graph, cfg: RunConfig, path, count=20):
    sampler_cfg = SamplerConfig(subgraph_size=cfg.subgraph_size,
                                restart_prob=cfg.restart_prob, rng_seed=cfg.seed)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xD0B6]))
    with open(path, "w", encoding="utf-8") as f:
        for v in range(min(count, graph.n)):
            s = sample_subgraph(graph, v, sampler_cfg, rng)
            f.write(f"target {v}: nodes {s.nodes.tolist()}\n")
            for row in s.raw_adjacency.astype(int):
                f.write("  " + " ".join(str(x) for x in row) + "\n")


def cmd_train(args):
    cfg = _build_config(args)
    out = _outdir(args)
    graph = load_graph(args.edges, args.features)
    if args.dump_subgraphs:
        _dump_subgraphs(graph, cfg, args.dump_subgraphs)
    result = pl.run_training(graph, cfg, snapshot_phase1=True)
    chash = cfg.content_hash()
    md.save_checkpoint(result.phase1_params, os.path.join(out, "model_phase1.ckpt"), chash)
    if result.pseudo_labels is not None:
        md.save_checkpoint(result.params, os.path.join(out, "model_phase2.ckpt"), chash)
        pl.write_selection_report(result.pool, result.pseudo_labels,
                                  os.path.join(out, "selection_report.tsv"))
    cfg.save(os.path.join(out, "config.txt"))
    final = result.params is not None and result.pseudo_labels is not None
    print(f"train: mode={cfg.mode} phase1 steps={len(result.selection_losses)}"
          f" refine steps={len(result.refine_losses)}"
          f" -> {out} ({'phase1+phase2' if final else 'phase1 only'})")


def cmd_score(args):
    cfg = _build_config(args)
    out = _outdir(args)
    graph = load_graph(args.edges, args.features, args.labels)
    params, chash = md.load_checkpoint(args.checkpoint)
    if chash != cfg.content_hash():
        raise ConfigError(
            f"checkpoint config hash {chash[:12]}... does not match the active "
            f"config {cfg.content_hash()[:12]}...")
    table = pl.score_with_config(params, graph, cfg)
    _write_scores(os.path.join(out, "scores.tsv"), table)
    if graph.labels is not None:
        value = sc.auc(table.final, graph.labels)
        _write_roc(os.path.join(out, "roc.csv"), sc.roc_points(table.final, graph.labels))
        _write_metrics(os.path.join(out, "metrics.json"), cfg, value)
        print(f"score: auc={value:.4f} -> {out}")
    else:
        _write_metrics(os.path.join(out, "metrics.json"), cfg, None,
                       reason="no ground-truth labels supplied")
        print(f"score: no labels, auc omitted -> {out}")
    cfg.save(os.path.join(out, "config.txt"))


def cmd_eval(args):
    cfg = _build_config(args)
    out = _outdir(args)
    scores = _read_scores(args.scores)
    labels = _read_labels(args.labels, len(scores))
    value = sc.auc(scores, labels)
    _write_roc(os.path.join(out, "roc.csv"), sc.roc_points(scores, labels))
    _write_metrics(os.path.join(out, "metrics.json"), cfg, value)
    cfg.save(os.path.join(out, "config.txt"))
    print(f"eval: auc={value:.4f} -> {out}")


def cmd_run_all(args):
    cfg = _build_config(args)
    out = _outdir(args)
    if args.edges and args.features:
        graph = load_graph(args.edges, args.features)
    else:
        graph = synth.generate_sbm(seed=cfg.seed)

    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _INJECT_STREAM]))
    icfg = InjectionConfig(candidate_pool_size=cfg.candidate_pool_size,
                           clique_size=cfg.clique_size, rng_seed=cfg.seed)
    injected, _ = inject_combined(graph, cfg.total_anomalies, icfg, rng)
    if injected.labels is None:
        injected = injected.with_labels(np.zeros(graph.n, dtype=np.int8))
    save_graph_text(injected, os.path.join(out, "edges.txt"),
                    os.path.join(out, "features.txt"),
                    os.path.join(out, "labels.txt"))

    result = pl.run_training(injected, cfg, snapshot_phase1=True)
    chash = cfg.content_hash()
    md.save_checkpoint(result.phase1_params, os.path.join(out, "model_phase1.ckpt"), chash)
    if result.pseudo_labels is not None:
        md.save_checkpoint(result.params, os.path.join(out, "model_phase2.ckpt"), chash)
        pl.write_selection_report(result.pool, result.pseudo_labels,
                                  os.path.join(out, "selection_report.tsv"))

    table = pl.score_with_config(result.params, injected, cfg)
    _write_scores(os.path.join(out, "scores.tsv"), table)
    value = sc.auc(table.final, injected.labels)
    _write_roc(os.path.join(out, "roc.csv"), sc.roc_points(table.final, injected.labels))
    _write_metrics(os.path.join(out, "metrics.json"), cfg, value)
    cfg.save(os.path.join(out, "config.txt"))
    print(f"run-all: mode={cfg.mode} auc={value:.4f} -> {out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nlgad",
        description="Normality-learning graph anomaly detection pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic benchmark graph")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodes", type=int, default=synth.DEFAULT_NODES)
    p.add_argument("--blocks", type=int, default=synth.DEFAULT_BLOCKS)
    p.add_argument("--dim", type=int, default=synth.DEFAULT_DIM)
    p.add_argument("--intra-p", type=float, default=synth.DEFAULT_INTRA_P)
    p.add_argument("--inter-p", type=float, default=synth.DEFAULT_INTER_P)
    p.add_argument("--feature-noise", type=float, default=synth.DEFAULT_FEATURE_NOISE)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("inject", help="inject contextual + structural anomalies")
    _add_graph_args(p)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("train", help="two-phase training, writes checkpoints")
    _add_graph_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-subgraphs", metavar="FILE",
                   help="debug: dump sampled subgraphs as text before training")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="multi-round scoring from a checkpoint")
    _add_graph_args(p, labels=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="AUC/ROC from a scores TSV and labels")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run-all", help="inject, train, score, and evaluate")
    p.add_argument("--edges", default=None)
    p.add_argument("--features", default=None)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_run_all)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except (InternalError, NlgadError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
