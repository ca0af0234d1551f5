"""Normality-learning graph anomaly detection via multi-scale contrastive networks."""

from .config import RunConfig
from .detector import NLGADDetector
from .graph import AttributedGraph, from_edges, load_graph
from .injection import InjectionConfig, inject_combined, inject_contextual, inject_structural
from .sampler import SamplerConfig, SubgraphSample, normalized_adjacency, sample_subgraph
from .scoring import AnomalyScoreTable, RocCurve, auc, roc_points, score_rounds
from .synth import generate_sbm

__all__ = [
    "AttributedGraph", "from_edges", "load_graph",
    "InjectionConfig", "inject_combined", "inject_contextual", "inject_structural",
    "SamplerConfig", "SubgraphSample", "normalized_adjacency", "sample_subgraph",
    "AnomalyScoreTable", "RocCurve", "auc", "roc_points", "score_rounds",
    "NLGADDetector", "RunConfig", "generate_sbm",
]

__version__ = "0.1.0"
