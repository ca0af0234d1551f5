"""Anomaly injection: contextual feature swaps and structural cliques.

Both operations return a new graph plus the set of nodes they labeled
anomalous; the input graph is never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ConfigError
from .graph import AttributedGraph, from_edges


@dataclass(frozen=True)
class InjectionConfig:
    candidate_pool_size: int = 50   # candidates considered per contextual target
    clique_size: int = 15           # nodes per structural clique
    rng_seed: int = 0

    def __post_init__(self):
        if self.clique_size < 2:
            raise ConfigError("clique_size must be >= 2")
        if self.candidate_pool_size < 1:
            raise ConfigError("candidate_pool_size must be >= 1")


def _unlabeled_nodes(graph: AttributedGraph) -> np.ndarray:
    if graph.labels is None:
        return np.arange(graph.n, dtype=np.int64)
    return np.flatnonzero(graph.labels == 0).astype(np.int64)


def inject_contextual(graph: AttributedGraph, count: int, cfg: InjectionConfig,
                      rng: np.random.Generator):
    """Replace each target's features with its most dissimilar candidate's.

    For every target, candidate_pool_size nodes are drawn uniformly without
    replacement (excluding the target) and the candidate at maximum Euclidean
    feature distance donates its feature row. Adjacency is unchanged.
    """
    if cfg.candidate_pool_size > graph.n - 1:
        raise CapacityError(
            f"candidate_pool_size {cfg.candidate_pool_size} exceeds n-1 = {graph.n - 1}")
    available = _unlabeled_nodes(graph)
    if count > len(available):
        raise CapacityError(
            f"cannot inject {count} contextual anomalies: only {len(available)} "
            f"unlabeled nodes available")
    if count == 0:
        return graph, set()

    targets = rng.choice(available, size=count, replace=False)
    features = graph.features.copy()
    all_nodes = np.arange(graph.n, dtype=np.int64)
    for v in targets:
        others = all_nodes[all_nodes != v]
        cands = rng.choice(others, size=cfg.candidate_pool_size, replace=False)
        dists = np.linalg.norm(graph.features[cands] - graph.features[v], axis=1)
        best = cands[int(np.argmax(dists))]
        features[v] = graph.features[best]

    labels = np.zeros(graph.n, dtype=np.int8) if graph.labels is None else graph.labels.copy()
    labels[targets] = 1
    out = graph.with_features(features).with_labels(labels)
    return out, set(int(v) for v in targets)


def inject_structural(graph: AttributedGraph, num_cliques: int, cfg: InjectionConfig,
                      rng: np.random.Generator):
    """Sample disjoint node groups of clique_size and make each fully connected.

    Existing edges inside a group are kept; features are unchanged.
    """
    needed = num_cliques * cfg.clique_size
    available = _unlabeled_nodes(graph)
    if needed > len(available):
        raise CapacityError(
            f"cannot form {num_cliques} cliques of {cfg.clique_size}: only "
            f"{len(available)} unlabeled nodes available")
    if num_cliques == 0:
        return graph, set()

    members = rng.choice(available, size=needed, replace=False)
    cliques = members.reshape(num_cliques, cfg.clique_size)

    rows = np.repeat(np.arange(graph.n, dtype=np.int64), np.diff(graph.indptr))
    edges = list(zip(rows.tolist(), graph.indices.tolist()))
    for group in cliques:
        for i in range(len(group)):
            for j in range(i + 1, len(group)):
                edges.append((int(group[i]), int(group[j])))

    labels = np.zeros(graph.n, dtype=np.int8) if graph.labels is None else graph.labels.copy()
    labels[members] = 1
    out = from_edges(graph.n, edges, graph.features, labels)
    return out, set(int(v) for v in members)


def inject_combined(graph: AttributedGraph, total_anomalies: int, cfg: InjectionConfig,
                    rng: np.random.Generator):
    """Inject an equal split of structural and contextual anomalies.

    total_anomalies/2 structural anomalies are formed as total/(2*clique_size)
    cliques, then total_anomalies/2 contextual anomalies are injected on the
    remaining nodes. The two label sets are disjoint.
    """
    if total_anomalies < 0:
        raise ConfigError("total_anomalies must be non-negative")
    if total_anomalies == 0:
        return graph, set()
    if total_anomalies % 2 != 0:
        raise ConfigError(f"total_anomalies must be even, got {total_anomalies}")
    half = total_anomalies // 2
    if half % cfg.clique_size != 0:
        raise ConfigError(
            f"total_anomalies/2 = {half} must be divisible by clique_size {cfg.clique_size}")
    if total_anomalies > graph.n:
        raise CapacityError(f"total_anomalies {total_anomalies} exceeds n = {graph.n}")

    g, structural = inject_structural(graph, half // cfg.clique_size, cfg, rng)
    g, contextual = inject_contextual(g, half, cfg, rng)
    return g, structural | contextual
