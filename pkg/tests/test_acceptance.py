"""Acceptance gate: one test per release criterion, each printing a
PASS/FAIL line (run with -s to see them).

Criterion 8 (full Cora-scale check) is documented in the README and runs
only when NLGAD_CORA_DIR points at user-supplied data; it is not CI-gated.
"""

import itertools
import json
import math
import os
import time
from fractions import Fraction

import numpy as np
import pytest

from nlgad import autodiff as ad
from nlgad import model as md
from nlgad import pipeline as pl
from nlgad.autodiff import Tape, backward
from nlgad.cli import main as cli_main
from nlgad.config import RunConfig
from nlgad.graph import from_edges, load_graph
from nlgad.injection import InjectionConfig, inject_combined
from nlgad.sampler import SamplerConfig, sample_subgraph
from nlgad.scoring import auc, roc_points
from nlgad.synth import generate_sbm

_INJECT_STREAM = 0x17EC


def report(name, ok, detail):
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# 1. gradient correctness on the full two-branch loss

def random_instance(rng):
    n = int(rng.integers(6, 12))
    dim = int(rng.integers(2, 6))
    edges = {(int(a), int(b)) for a, b in rng.integers(0, n, size=(3 * n, 2))
             if a != b}
    edges.add((0, 1))  # avoid an entirely empty edge set
    g = from_edges(n, edges, rng.normal(size=(n, dim)))
    params = md.init_params(dim, hidden_dim=int(rng.integers(3, 7)),
                            gcn_layers=int(rng.integers(1, 3)), rng=rng)
    cfg = SamplerConfig(subgraph_size=int(rng.integers(2, 5)),
                        restart_prob=0.5, rng_seed=int(rng.integers(1 << 31)))
    nodes = rng.choice(n, size=int(rng.integers(2, 6)), replace=False)
    batch = md.ContrastBatch.sample(g, nodes, cfg, rng)
    alpha = float(rng.uniform(0.2, 0.8))
    return params, batch, alpha


def test_criterion_1_gradients():
    start = time.monotonic()
    rng = np.random.default_rng(42)
    worst = 0.0
    instances = 20
    for _ in range(instances):
        params, batch, alpha = random_instance(rng)

        def loss_value():
            return md.batch_loss(md.forward_batch(params, batch), alpha).item()

        with Tape() as tape:
            loss = md.batch_loss(md.forward_batch(params, batch), alpha)
            backward(loss, tape)
        grads = {name: t.grad.copy() for name, t in params.named_tensors()}
        for t in params.all_tensors():
            t.zero_grad()

        # eps balances truncation against cancellation noise: the loss is
        # O(1), so the central difference carries ~1e-12 absolute noise and
        # the 1e-4 denominator floor keeps that from dominating the relative
        # error on near-zero gradients
        eps = 1e-4
        for name, t in params.named_tensors():
            # probe a few random entries of every parameter matrix
            for _ in range(3):
                i = int(rng.integers(t.shape[0]))
                j = int(rng.integers(t.shape[1]))
                orig = t.values[i, j]
                t.values[i, j] = orig + eps
                f_plus = loss_value()
                t.values[i, j] = orig - eps
                f_minus = loss_value()
                t.values[i, j] = orig
                fd = (f_plus - f_minus) / (2 * eps)
                g = grads[name][i, j]
                rel = abs(fd - g) / max(1e-4, abs(fd), abs(g))
                worst = max(worst, rel)
    elapsed = time.monotonic() - start
    report("1-gradients",
           worst < 1e-5 and elapsed < 30,
           f"max rel err {worst:.3e} over {instances} instances, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 2. restart-walk sampler vs exact enumeration

def exact_membership_distribution(graph, target, c, restart_prob, budget):
    """Exact distribution over collected first-visit sets, via DP over
    (current node, collected set) states with rational probabilities."""
    want = c - 1
    start = (target, frozenset())
    states = {start: Fraction(1)}
    absorbed = {}
    p = Fraction(restart_prob).limit_denominator(10**6)
    for _ in range(budget):
        nxt = {}
        for (cur, got), prob in states.items():
            nbrs = graph.neighbors(cur)
            restart_state = (target, got)
            nxt[restart_state] = nxt.get(restart_state, Fraction(0)) + prob * p
            move_p = (1 - p) / len(nbrs)
            for u in nbrs:
                u = int(u)
                got2 = got if (u == target or u in got) else got | {u}
                if len(got2) == want:
                    absorbed[got2] = absorbed.get(got2, Fraction(0)) + prob * move_p
                else:
                    key = (u, got2)
                    nxt[key] = nxt.get(key, Fraction(0)) + prob * move_p
        states = nxt
        if not states:
            break
    for (_, got), prob in states.items():  # budget exhausted mid-walk
        absorbed[got] = absorbed.get(got, Fraction(0)) + prob
    return {k: float(v) for k, v in absorbed.items()}


def tv_distance(sampler_counts, exact, total):
    keys = set(sampler_counts) | set(exact)
    return 0.5 * sum(abs(sampler_counts.get(k, 0) / total - exact.get(k, 0.0))
                     for k in keys)


def test_criterion_2_rwr_oracle():
    start = time.monotonic()
    n_samples = 100_000
    c, restart = 4, 0.5
    path = from_edges(5, [(0, 1), (1, 2), (2, 3), (3, 4)], np.zeros((5, 1)))
    star = from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4)], np.zeros((5, 1)))
    results = []
    for name, g, target in (("path", path, 1), ("star", star, 1)):
        cfg = SamplerConfig(subgraph_size=c, restart_prob=restart, rng_seed=0)
        exact = exact_membership_distribution(g, target, c, restart,
                                              cfg.step_budget)
        rng = np.random.default_rng(1234)
        counts = {}
        for _ in range(n_samples):
            s = sample_subgraph(g, target, cfg, rng)
            key = frozenset(int(v) for v in s.nodes[1:] if int(v) != target)
            counts[key] = counts.get(key, 0) + 1
        tv = tv_distance(counts, exact, n_samples)
        results.append((name, tv))
    elapsed = time.monotonic() - start
    worst = max(tv for _, tv in results)
    report("2-rwr-oracle",
           worst < 0.02 and elapsed < 60,
           ", ".join(f"{name} TV={tv:.4f}" for name, tv in results)
           + f", {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 3. schedule and pool bookkeeping

def test_criterion_3_schedule_pool():
    start = time.monotonic()
    rng = np.random.default_rng(7)
    trials = 25
    for _ in range(trials):
        n = int(rng.integers(10, 501))
        t_s = int(rng.integers(5, 51))
        sch = pl.SpeedSchedule(total_steps=t_s, node_count=n)
        speeds = [pl.speed(j, sch) for j in range(1, t_s + 1)]
        assert all(a <= b for a, b in zip(speeds, speeds[1:])), "not monotone"
        assert speeds[-1] == n, "final step must admit all nodes"

        pool = pl.NormalityPool(n)
        for j in range(1, t_s + 1):
            pl.pool_add(pool, rng.random(n), speeds[j - 1])
        assert pool.total_entries == sum(speeds), "pool totals mismatch"
        assert pool.counts.min() >= 1, "some node never pooled"
        labels = pl.finalize_pseudo_labels(pool, 0.8)
        assert len(labels.normal_set) == math.floor(0.8 * n), "normal set size"
    elapsed = time.monotonic() - start
    report("3-schedule-pool", elapsed < 10,
           f"{trials} random (n, steps) pairs, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 4. AUC oracle

def test_criterion_4_auc_oracle():
    start = time.monotonic()
    rng = np.random.default_rng(11)
    worst = 0.0
    instances = 100
    for _ in range(instances):
        n = int(rng.integers(4, 40))
        scores = np.round(rng.normal(size=n), 1)  # coarse grid forces ties
        labels = rng.integers(0, 2, size=n)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        pos = np.flatnonzero(labels == 1)
        neg = np.flatnonzero(labels == 0)
        wins = sum(1.0 if scores[i] > scores[j] else
                   0.5 if scores[i] == scores[j] else 0.0
                   for i, j in itertools.product(pos, neg))
        brute = wins / (len(pos) * len(neg))
        rank_auc = auc(scores, labels)
        curve = roc_points(scores, labels)
        trap = float(np.trapezoid(curve.tpr, curve.fpr))
        worst = max(worst, abs(rank_auc - brute), abs(trap - brute))
    elapsed = time.monotonic() - start
    report("4-auc-oracle", worst < 1e-12 and elapsed < 10,
           f"max deviation {worst:.2e} over {instances} instances, {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 5 + 6. end-to-end synthetic benchmark and ablation trend

SEEDS = (0, 1, 2, 3, 4)


def benchmark_auc(seed, mode):
    graph = generate_sbm(seed=seed)
    rng = np.random.default_rng(np.random.SeedSequence([seed, _INJECT_STREAM]))
    cfg = RunConfig(seed=seed, mode=mode)
    icfg = InjectionConfig(candidate_pool_size=cfg.candidate_pool_size,
                           clique_size=cfg.clique_size, rng_seed=seed)
    injected, _ = inject_combined(graph, cfg.total_anomalies, icfg, rng)
    result = pl.run_training(injected, cfg)
    table = pl.score_with_config(result.params, injected, cfg)
    return auc(table.final, injected.labels)


@pytest.fixture(scope="module")
def full_mode_runs():
    start = time.monotonic()
    aucs = [benchmark_auc(seed, "full") for seed in SEEDS]
    return aucs, time.monotonic() - start


def test_criterion_5_end_to_end(full_mode_runs):
    aucs, elapsed = full_mode_runs
    mean = float(np.mean(aucs))
    report("5-end-to-end", mean >= 0.75 and elapsed < 600,
           f"mean AUC {mean:.4f} over seeds {list(SEEDS)} "
           f"({['%.3f' % a for a in aucs]}), {elapsed:.0f}s")


def test_criterion_6_ablation_trend(full_mode_runs):
    osp = [benchmark_auc(seed, "osp") for seed in SEEDS]
    ols = [benchmark_auc(seed, "ols") for seed in SEEDS]
    m_full = float(np.mean(full_mode_runs[0]))
    m_osp = float(np.mean(osp))
    m_ols = float(np.mean(ols))
    report("6-ablation-trend", m_full >= m_osp and m_full >= m_ols,
           f"full {m_full:.4f} vs osp {m_osp:.4f} vs ols {m_ols:.4f}")


# ---------------------------------------------------------------------------
# 7. determinism of run-all artifacts

def test_criterion_7_determinism(tmp_path):
    flags = ["--t-select", "15", "--t-refine", "10", "--rounds", "8",
             "--hidden-dim", "16", "--seed", "3"]
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli_main(["run-all", "--out", str(out1)] + flags) == 0
    assert cli_main(["run-all", "--out", str(out2)] + flags) == 0
    same = all((out1 / f).read_bytes() == (out2 / f).read_bytes()
               for f in ("scores.tsv", "metrics.json"))
    report("7-determinism", same,
           "scores.tsv and metrics.json byte-identical across reruns")


# ---------------------------------------------------------------------------
# 8. optional full-data check (not CI-gated)

@pytest.mark.skipif("NLGAD_CORA_DIR" not in os.environ,
                    reason="full-data check needs NLGAD_CORA_DIR "
                           "(edges.txt/features.txt); see README")
def test_criterion_8_full_data_optional():
    data = os.environ["NLGAD_CORA_DIR"]
    graph = load_graph(os.path.join(data, "edges.txt"),
                       os.path.join(data, "features.txt"))
    cfg = RunConfig(seed=0, total_anomalies=150)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _INJECT_STREAM]))
    icfg = InjectionConfig(candidate_pool_size=cfg.candidate_pool_size,
                           clique_size=cfg.clique_size, rng_seed=cfg.seed)
    injected, _ = inject_combined(graph, cfg.total_anomalies, icfg, rng)
    result = pl.run_training(injected, cfg)
    table = pl.score_with_config(result.params, injected, cfg)
    value = auc(table.final, injected.labels)
    report("8-full-data", value >= 0.85, f"AUC {value:.4f}")
