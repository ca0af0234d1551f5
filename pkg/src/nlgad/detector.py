"""Estimator-style front end over the two-phase pipeline.

NLGADDetector follows the scikit-learn conventions (get_params/set_params,
fit, decision_function) so it composes with model-selection tooling, except
that X is an AttributedGraph rather than a feature matrix.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import pipeline as pl
from . import scoring as sc
from .config import RunConfig
from .errors import ConfigError
from .graph import AttributedGraph


class NLGADDetector(BaseEstimator):
    """Normality-learning graph anomaly detector.

    Trains the two-branch contrastive model on all nodes while pooling
    low-anomaly-degree estimates, pseudo-labels the lowest k_normal fraction
    of nodes normal, refines the model on those, and scores nodes by
    multi-round contrast gaps. Higher decision_function values mean more
    anomalous.

    t_select/t_refine of 0 resolve by graph size (200/500 below 5000 nodes,
    300/600 otherwise). mode selects the ablation variant: "full", "aas"
    (pool all estimates every step), "ols" (pool the last step only), "osp"
    (selection-phase training only), "snp" (plain training for
    t_select + t_refine steps, no selection or refinement).
    """

    def __init__(self, subgraph_size=4, hidden_dim=64, gcn_layers=1,
                 learning_rate=0.001, alpha=0.6, k_normal=0.8, t_select=0,
                 t_refine=0, batch_size=300, rounds=256, restart_prob=0.5,
                 mode="full", seed=0):
        self.subgraph_size = subgraph_size
        self.hidden_dim = hidden_dim
        self.gcn_layers = gcn_layers
        self.learning_rate = learning_rate
        self.alpha = alpha
        self.k_normal = k_normal
        self.t_select = t_select
        self.t_refine = t_refine
        self.batch_size = batch_size
        self.rounds = rounds
        self.restart_prob = restart_prob
        self.mode = mode
        self.seed = seed

    def _run_config(self) -> RunConfig:
        return RunConfig(subgraph_size=self.subgraph_size, hidden_dim=self.hidden_dim,
                         gcn_layers=self.gcn_layers, learning_rate=self.learning_rate,
                         alpha=self.alpha, k_normal=self.k_normal,
                         t_select=self.t_select, t_refine=self.t_refine,
                         batch_size=self.batch_size, rounds=self.rounds,
                         restart_prob=self.restart_prob, mode=self.mode,
                         seed=self.seed)

    def fit(self, X: AttributedGraph, y=None):
        """Run the configured training scheme on the graph. y is ignored."""
        result = pl.run_training(X, self._run_config())
        self.params_ = result.params
        self.pool_ = result.pool
        self.pseudo_labels_ = result.pseudo_labels
        self.selection_losses_ = result.selection_losses
        self.refine_losses_ = result.refine_losses
        self.n_features_in_ = X.d
        return self

    def decision_function(self, X: AttributedGraph) -> np.ndarray:
        """Per-node anomaly scores; deterministic in the seed."""
        if not hasattr(self, "params_"):
            raise NotFittedError("fit must be called before decision_function")
        table = pl.score_with_config(self.params_, X, self._run_config())
        self.score_table_ = table
        return table.final

    def fit_predict_scores(self, X: AttributedGraph) -> np.ndarray:
        return self.fit(X).decision_function(X)

    def score(self, X: AttributedGraph, y=None) -> float:
        """ROC AUC against y (or the graph's own labels when y is None)."""
        labels = y if y is not None else X.labels
        if labels is None:
            raise ConfigError("AUC needs ground-truth labels")
        return sc.auc(self.decision_function(X), np.asarray(labels))
