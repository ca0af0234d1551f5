"""Two-phase training: normality selection, then normality learning.

Phase 1 trains on all nodes; after every full pass it pools the lowest
anomaly-degree estimates under a tan-shaped admission schedule. Averaged
pool entries then pseudo-label the lowest K fraction of nodes normal, and
phase 2 continues training on those nodes only.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import model as md
from .autodiff import Adam, Tape, backward
from .errors import ConfigError, InternalError
from .graph import AttributedGraph
from .sampler import SamplerConfig

POOL_MODES = ("dynamic", "all", "last", "none")


@dataclass(frozen=True)
class SpeedSchedule:
    """Pool-admission schedule over the selection phase."""

    total_steps: int
    node_count: int

    def __post_init__(self):
        if self.total_steps < 1:
            raise ConfigError("total_steps must be >= 1")
        if self.node_count < 1:
            raise ConfigError("node_count must be >= 1")


def speed(j: int, schedule: SpeedSchedule) -> int:
    """Number of estimates admitted to the pool at step j.

    floor(n * tan(pi/4 * j / T_s)); grows slowly from near 0 and reaches
    exactly n at the final step.
    """
    t_s, n = schedule.total_steps, schedule.node_count
    if not 1 <= j <= t_s:
        raise ConfigError(f"step {j} outside [1, {t_s}]")
    if j == t_s:
        return n  # tan(pi/4) == 1 exactly in the reals; avoid float undershoot
    return min(n, math.floor(n * math.tan(math.pi / 4.0 * j / t_s)))


def normalize_step_estimates(raw) -> np.ndarray:
    """Min-max normalize one step's estimates to [0, 1]; constant -> zeros."""
    raw = np.asarray(raw, dtype=np.float64)
    lo, hi = raw.min(), raw.max()
    if hi == lo:
        return np.zeros_like(raw)
    return (raw - lo) / (hi - lo)


class NormalityPool:
    """Per-node accumulated low-anomaly estimates with admission counts."""

    def __init__(self, n: int):
        self.n = n
        self.counts = np.zeros(n, dtype=np.int64)
        self.sums = np.zeros(n, dtype=np.float64)

    @property
    def total_entries(self) -> int:
        return int(self.counts.sum())

    def means(self) -> np.ndarray:
        if np.any(self.counts == 0):
            raise InternalError("normality pool has nodes with no entries")
        return self.sums / self.counts


def pool_add(pool: NormalityPool, step_estimates, count: int):
    """Admit the `count` lowest estimates, ties broken by ascending node index."""
    est = np.asarray(step_estimates, dtype=np.float64)
    if est.shape != (pool.n,):
        raise InternalError(f"expected estimates for all {pool.n} nodes")
    if count == 0:
        return
    chosen = np.argsort(est, kind="stable")[:count]
    pool.counts[chosen] += 1
    pool.sums[chosen] += est[chosen]


@dataclass(frozen=True)
class PseudoLabels:
    """Nodes pseudo-labeled normal: the lowest floor(K*n) mean estimates."""

    normal_set: np.ndarray  # sorted ascending node ids
    k: float


def finalize_pseudo_labels(pool: NormalityPool, k: float) -> PseudoLabels:
    if not 0.0 < k <= 1.0:
        raise ConfigError(f"K must be in (0, 1], got {k}")
    means = pool.means()
    size = math.floor(k * pool.n)
    order = np.argsort(means, kind="stable")
    normal = np.sort(order[:size])
    return PseudoLabels(normal_set=normal.astype(np.int64), k=k)


# ---------------------------------------------------------------------------
# training loops

def _make_batches(nodes: np.ndarray, batch_size: int, rng: np.random.Generator):
    """Shuffle and chunk; a trailing singleton is merged into the previous batch."""
    order = rng.permutation(nodes)
    batches = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
    if len(batches) > 1 and len(batches[-1]) < 2:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


def _train_epoch(params: md.ModelParams, graph: AttributedGraph, nodes, optimizer: Adam,
                 alpha: float, batch_size: int, sampler_cfg: SamplerConfig,
                 rng: np.random.Generator, estimates_out: np.ndarray | None = None):
    """One full pass over `nodes`; returns the summed loss of the pass.

    Estimates, when requested, come from the same pre-update forward pass
    that produces the loss.
    """
    total_loss = 0.0
    for batch_nodes in _make_batches(np.asarray(nodes, dtype=np.int64), batch_size, rng):
        batch = md.ContrastBatch.sample(graph, batch_nodes, sampler_cfg, rng)
        with Tape() as tape:
            scores = md.forward_batch(params, batch)
            loss = md.batch_loss(scores, alpha)
            backward(loss, tape)
        if estimates_out is not None:
            estimates_out[batch_nodes] = md.estimate_anomaly_batch(scores, alpha)
        optimizer.step()
        total_loss += loss.item()
    return total_loss


def selection_phase(params: md.ModelParams, graph: AttributedGraph, *, t_select: int,
                    batch_size: int, alpha: float, sampler_cfg: SamplerConfig,
                    rng: np.random.Generator, optimizer: Adam | None = None,
                    pool_mode: str = "dynamic", learning_rate: float = 0.001):
    """Train on all nodes for t_select passes while filling the normality pool.

    pool_mode: "dynamic" admits speed(j) lowest estimates per step, "all"
    admits every estimate every step, "last" admits all estimates of the
    final step only, "none" skips pooling (backbone-only training).
    Returns (optimizer, pool-or-None, per-step loss list).
    """
    if batch_size < 2:
        raise ConfigError("batch_size must be >= 2 (negatives need a partner)")
    if pool_mode not in POOL_MODES:
        raise ConfigError(f"pool_mode must be one of {POOL_MODES}, got {pool_mode!r}")
    n = graph.n
    if optimizer is None:
        optimizer = Adam(params.all_tensors(), learning_rate=learning_rate)
    schedule = SpeedSchedule(total_steps=t_select, node_count=n)
    pool = NormalityPool(n) if pool_mode != "none" else None
    nodes = np.arange(n, dtype=np.int64)
    losses = []
    estimates = np.zeros(n, dtype=np.float64)

    for j in range(1, t_select + 1):
        loss = _train_epoch(params, graph, nodes, optimizer, alpha, batch_size,
                            sampler_cfg, rng, estimates_out=estimates)
        losses.append(loss)
        if pool is None:
            continue
        normalized = normalize_step_estimates(estimates)
        if pool_mode == "dynamic":
            pool_add(pool, normalized, speed(j, schedule))
        elif pool_mode == "all":
            pool_add(pool, normalized, n)
        elif pool_mode == "last" and j == t_select:
            pool_add(pool, normalized, n)

    return optimizer, pool, losses


def learning_phase(params: md.ModelParams, graph: AttributedGraph,
                   normal_set: PseudoLabels | np.ndarray, *, t_refine: int,
                   batch_size: int, alpha: float, sampler_cfg: SamplerConfig,
                   rng: np.random.Generator, optimizer: Adam):
    """Continue training on pseudo-normal nodes only; no pooling.

    Parameters continue from the selection-phase model. Returns the per-step
    loss list.
    """
    nodes = normal_set.normal_set if isinstance(normal_set, PseudoLabels) else \
        np.asarray(normal_set, dtype=np.int64)
    if len(nodes) == 0:
        raise ConfigError("normal_set is empty")
    if len(nodes) < batch_size:
        warnings.warn(f"batch size {batch_size} clamped to |normal_set| = {len(nodes)}")
        batch_size = max(2, len(nodes))
    losses = []
    for _ in range(t_refine):
        losses.append(_train_epoch(params, graph, nodes, optimizer, alpha,
                                   batch_size, sampler_cfg, rng))
    return losses


# ---------------------------------------------------------------------------
# orchestration shared by the detector facade and the CLI

_INIT_STREAM = 0x1A17
_TRAIN_STREAM = 0x7A41
_SCORE_STREAM = 0x5C0E


@dataclass
class TrainResult:
    params: md.ModelParams
    pool: NormalityPool | None
    pseudo_labels: PseudoLabels | None
    selection_losses: list
    refine_losses: list
    phase1_params: md.ModelParams | None = None


def _snapshot(params: md.ModelParams) -> md.ModelParams:
    from .autodiff import Tensor

    def copy_stack(ts):
        return [Tensor(t.values.copy(), requires_grad=True) for t in ts]

    return md.ModelParams(copy_stack(params.sn_weights),
                          copy_stack([params.sn_bilinear])[0],
                          copy_stack(params.nn_gcn_weights),
                          copy_stack(params.nn_mlp_weights),
                          copy_stack([params.nn_bilinear])[0])


def run_training(graph: AttributedGraph, cfg, snapshot_phase1: bool = False) -> TrainResult:
    """Run the configured training scheme end to end.

    cfg is a RunConfig; its mode decides pooling and whether the refine
    phase runs. All randomness derives from cfg.seed via fixed stream tags,
    so identical configs reproduce identical results.
    """
    sampler_cfg = SamplerConfig(subgraph_size=cfg.subgraph_size,
                                restart_prob=cfg.restart_prob, rng_seed=cfg.seed)
    t_select = cfg.resolved_t_select(graph.n)
    t_refine = cfg.resolved_t_refine(graph.n)
    init_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _INIT_STREAM]))
    train_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _TRAIN_STREAM]))
    batch_size = min(cfg.batch_size, graph.n)

    params = md.init_params(graph.d, cfg.hidden_dim, cfg.gcn_layers, init_rng)
    t_phase1 = t_select + t_refine if cfg.mode == "snp" else t_select

    optimizer, pool, losses = selection_phase(
        params, graph, t_select=t_phase1, batch_size=batch_size, alpha=cfg.alpha,
        sampler_cfg=sampler_cfg, rng=train_rng, pool_mode=cfg.pool_mode,
        learning_rate=cfg.learning_rate)

    phase1_params = _snapshot(params) if snapshot_phase1 else None
    pseudo = None
    refine_losses = []
    if pool is not None:
        pseudo = finalize_pseudo_labels(pool, cfg.k_normal)
        refine_losses = learning_phase(
            params, graph, pseudo, t_refine=t_refine, batch_size=batch_size,
            alpha=cfg.alpha, sampler_cfg=sampler_cfg, rng=train_rng,
            optimizer=optimizer)

    return TrainResult(params=params, pool=pool, pseudo_labels=pseudo,
                       selection_losses=losses, refine_losses=refine_losses,
                       phase1_params=phase1_params)


def score_with_config(params: md.ModelParams, graph: AttributedGraph, cfg):
    """Multi-round scoring under cfg's sampler settings and seed stream."""
    from .scoring import score_rounds

    sampler_cfg = SamplerConfig(subgraph_size=cfg.subgraph_size,
                                restart_prob=cfg.restart_prob, rng_seed=cfg.seed)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _SCORE_STREAM]))
    return score_rounds(params, graph, cfg.rounds, cfg.alpha, sampler_cfg, rng,
                        batch_size=min(cfg.batch_size, graph.n))


def write_selection_report(pool: NormalityPool, labels: PseudoLabels, path):
    """TSV audit dump: node id, admission count, mean estimate, pseudo-label."""
    normal = set(labels.normal_set.tolist())
    means = pool.means()
    with open(path, "w", encoding="utf-8") as f:
        f.write("node\tpool_entries\tmean_estimate\tpseudo_normal\n")
        for v in range(pool.n):
            f.write(f"{v}\t{pool.counts[v]}\t{means[v]:.17g}\t{int(v in normal)}\n")
