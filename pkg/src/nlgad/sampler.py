"""Random-walk-with-restart subgraph sampling.

Each sample is a fixed-size, target-first node list with the induced
adjacency and a target-masked feature matrix, ready to feed the contrastive
branches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .graph import AttributedGraph


@dataclass(frozen=True)
class SamplerConfig:
    subgraph_size: int = 4       # c, nodes per sample including the target
    restart_prob: float = 0.5    # probability of jumping back to the target
    rng_seed: int = 0

    def __post_init__(self):
        if self.subgraph_size < 2:
            raise ConfigError("subgraph_size must be >= 2")
        if not 0.0 < self.restart_prob < 1.0:
            raise ConfigError("restart_prob must be in (0, 1)")

    @property
    def step_budget(self) -> int:
        # Bounds sampling time on near-isolated targets before padding.
        return 100 * self.subgraph_size


@dataclass
class SubgraphSample:
    """RWR-sampled subgraph around one target node.

    nodes[0] is the target; duplicates may appear via padding on
    low-connectivity targets. features_masked row 0 is zeroed; duplicate
    occurrences of the target keep their true features.
    """

    nodes: np.ndarray                     # (c,) parent-graph node ids, target first
    raw_adjacency: np.ndarray             # (c, c) binary, symmetric, zero diagonal
    features_masked: np.ndarray           # (c, d), row 0 all zeros
    features_unmasked_target: np.ndarray  # (1, d) true target features


def _walk_collect(graph: AttributedGraph, target: int, cfg: SamplerConfig,
                  rng: np.random.Generator) -> list[int]:
    """First-visited distinct non-target nodes, at most subgraph_size - 1."""
    want = cfg.subgraph_size - 1
    if graph.degree(target) == 0:
        return []
    collected: list[int] = []
    seen = {target}
    current = target
    indptr, indices = graph.indptr, graph.indices
    for _ in range(cfg.step_budget):
        if rng.random() < cfg.restart_prob:
            current = target
        else:
            lo, hi = indptr[current], indptr[current + 1]
            current = int(indices[lo + rng.integers(hi - lo)])
            if current not in seen:
                seen.add(current)
                collected.append(current)
                if len(collected) == want:
                    break
    return collected


def sample_subgraph(graph: AttributedGraph, target: int, cfg: SamplerConfig,
                    rng: np.random.Generator) -> SubgraphSample:
    """Sample one subgraph around target.

    The walk restarts at the target with probability restart_prob, otherwise
    moves to a uniform random neighbor. If fewer than subgraph_size - 1
    distinct nodes are reached within the step budget, the node list is padded
    by cycling the collected nodes (or the target itself when none exist).
    """
    c = cfg.subgraph_size
    collected = _walk_collect(graph, target, cfg, rng)
    nodes = [target] + collected
    pad_pool = collected if collected else [target]
    i = 0
    while len(nodes) < c:
        nodes.append(pad_pool[i % len(pad_pool)])
        i += 1
    nodes = np.asarray(nodes, dtype=np.int64)

    adj = np.zeros((c, c), dtype=np.float64)
    indptr, indices = graph.indptr, graph.indices
    for a in range(c):
        u = nodes[a]
        lo, hi = indptr[u], indptr[u + 1]
        row = indices[lo:hi]
        for b in range(a + 1, c):
            v = nodes[b]
            k = np.searchsorted(row, v)
            if k < len(row) and row[k] == v:
                adj[a, b] = adj[b, a] = 1.0

    feats = graph.features[nodes].copy()
    target_row = graph.features[target:target + 1].copy()
    feats[0, :] = 0.0
    return SubgraphSample(nodes, adj, feats, target_row)


def mask_target(sample: SubgraphSample) -> SubgraphSample:
    """Re-assert the masking contract: zero row 0, leave every other row."""
    sample.features_masked[0, :] = 0.0
    return sample


def normalized_adjacency(sample: SubgraphSample) -> np.ndarray:
    """Symmetric degree-normalized adjacency with self-loops.

    Returns D^{-1/2} (A + I) D^{-1/2} where D is the row-sum diagonal of
    A + I. Self-loops keep every row sum >= 1, so no division by zero.
    """
    a_tilde = sample.raw_adjacency + np.eye(sample.raw_adjacency.shape[0])
    inv_sqrt = 1.0 / np.sqrt(a_tilde.sum(axis=1))
    return a_tilde * inv_sqrt[:, None] * inv_sqrt[None, :]
