"""Synthetic stochastic-block-model benchmark graph.

Nodes split into equal blocks with dense intra-block and sparse inter-block
wiring; features are per-block Gaussian bundles, so feature-swapped and
clique-wired anomalies stand out from their neighborhoods. The defaults are
the fixed acceptance-benchmark parameters.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .graph import AttributedGraph, from_edges

DEFAULT_NODES = 500
DEFAULT_BLOCKS = 4
DEFAULT_DIM = 32
DEFAULT_INTRA_P = 0.08
DEFAULT_INTER_P = 0.005
DEFAULT_FEATURE_NOISE = 0.3


def generate_sbm(n: int = DEFAULT_NODES, blocks: int = DEFAULT_BLOCKS,
                 dim: int = DEFAULT_DIM, intra_p: float = DEFAULT_INTRA_P,
                 inter_p: float = DEFAULT_INTER_P,
                 feature_noise: float = DEFAULT_FEATURE_NOISE,
                 seed: int = 0) -> AttributedGraph:
    """Generate an unlabeled attributed SBM graph, deterministic in seed."""
    if n < blocks or blocks < 1:
        raise ConfigError(f"need n >= blocks >= 1, got n={n}, blocks={blocks}")
    if not (0.0 <= inter_p <= 1.0 and 0.0 <= intra_p <= 1.0):
        raise ConfigError("edge probabilities must be in [0, 1]")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5B1]))

    membership = np.arange(n) % blocks
    membership.sort()

    same = membership[:, None] == membership[None, :]
    prob = np.where(same, intra_p, inter_p)
    upper = np.triu(rng.random((n, n)) < prob, k=1)
    rows, cols = np.nonzero(upper)

    means = rng.normal(0.0, 1.0, size=(blocks, dim))
    features = means[membership] + feature_noise * rng.normal(0.0, 1.0, size=(n, dim))

    return from_edges(n, zip(rows.tolist(), cols.tolist()), features)
