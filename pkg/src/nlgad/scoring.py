"""Multi-round anomaly scoring and ROC/AUC evaluation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as md
from .errors import ConfigError, DataError
from .graph import AttributedGraph
from .sampler import SamplerConfig


@dataclass(frozen=True)
class AnomalyScoreTable:
    """Final per-node scores plus the raw per-round estimates behind them.

    final = mean + population standard deviation of the round scores, so a
    node is penalized both for looking anomalous on average and for scoring
    inconsistently across rounds.
    """

    final: np.ndarray        # (n,)
    round_scores: np.ndarray  # (rounds, n)

    @property
    def mean(self) -> np.ndarray:
        return self.round_scores.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self.round_scores.std(axis=0)  # population (divisor r)


def score_rounds(params: md.ModelParams, graph: AttributedGraph, rounds: int,
                 alpha: float, sampler_cfg: SamplerConfig,
                 rng: np.random.Generator, batch_size: int = 300) -> AnomalyScoreTable:
    """Score every node over `rounds` fresh sampling rounds.

    Each round draws new subgraphs and computes the weighted contrast-gap
    estimate per node; no gradients are recorded.
    """
    if rounds < 1:
        raise ConfigError(f"rounds must be >= 1, got {rounds}")
    n = graph.n
    if n < 2:
        raise ConfigError("scoring needs at least 2 nodes (cyclic negatives)")
    raw = np.zeros((rounds, n), dtype=np.float64)
    for k in range(rounds):
        # Shuffle so each node's cyclic negative partner is a random other
        # node, not an index neighbor.
        nodes = rng.permutation(n).astype(np.int64)
        for lo in range(0, n, batch_size):
            chunk = nodes[lo:lo + batch_size]
            if len(chunk) < 2:  # cyclic negatives need a partner
                chunk = nodes[lo - 1:lo + batch_size]
            batch = md.ContrastBatch.sample(graph, chunk, sampler_cfg, rng)
            raw[k, chunk] = md.estimate_anomaly_batch(md.forward_batch(params, batch), alpha)
    final = raw.mean(axis=0) + raw.std(axis=0)
    return AnomalyScoreTable(final=final, round_scores=raw)


def _check_labels(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DataError(f"scores {scores.shape} and labels {labels.shape} must be "
                        "1-D and equal length")
    pos = int((labels == 1).sum())
    neg = int((labels == 0).sum())
    if pos + neg != len(labels):
        raise DataError("labels must be 0 or 1")
    if pos == 0 or neg == 0:
        raise DataError("AUC undefined: both classes must be present")
    return scores, labels, pos, neg


def auc(scores, labels) -> float:
    """Probability a random anomaly outscores a random normal node.

    Rank-based Mann-Whitney statistic with half credit for ties; equal to the
    trapezoidal area under the ROC curve.
    """
    scores, labels, pos, neg = _check_labels(scores, labels)
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # midrank, 1-based
        i = j + 1
    rank_sum = ranks[labels == 1].sum()
    return float((rank_sum - pos * (pos + 1) / 2.0) / (pos * neg))


@dataclass(frozen=True)
class RocCurve:
    """Threshold-sweep ROC: (fpr, tpr) points from (0,0) to (1,1)."""

    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


def roc_points(scores, labels) -> RocCurve:
    """ROC curve over distinct score thresholds, descending.

    The trapezoidal area under the returned points equals auc() exactly up to
    floating-point roundoff.
    """
    scores, labels, pos, neg = _check_labels(scores, labels)
    order = np.argsort(-scores, kind="mergesort")
    s_sorted = scores[order]
    y_sorted = labels[order]
    tp = np.cumsum(y_sorted == 1)
    fp = np.cumsum(y_sorted == 0)
    # keep only the last index of each tied score run
    distinct = np.r_[s_sorted[1:] != s_sorted[:-1], True]
    tpr = np.r_[0.0, tp[distinct] / pos]
    fpr = np.r_[0.0, fp[distinct] / neg]
    area = float(np.trapezoid(tpr, fpr))
    return RocCurve(fpr=fpr, tpr=tpr, auc=area)
