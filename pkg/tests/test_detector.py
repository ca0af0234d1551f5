import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from nlgad import NLGADDetector
from nlgad.errors import ConfigError
from nlgad.graph import from_edges
from nlgad.injection import InjectionConfig, inject_structural


def small_graph(n=24, dim=4, seed=0):
    rng = np.random.default_rng(seed)
    edges = [(i, (i + 1) % n) for i in range(n)] + [(i, (i + 3) % n) for i in range(n)]
    return from_edges(n, edges, rng.normal(size=(n, dim)))


def quick_detector(**kw):
    base = dict(t_select=3, t_refine=2, rounds=3, hidden_dim=8, batch_size=12,
                seed=0)
    base.update(kw)
    return NLGADDetector(**base)


def test_get_params_round_trip_and_clone():
    det = quick_detector(alpha=0.7)
    params = det.get_params()
    assert params["alpha"] == 0.7 and params["t_select"] == 3
    dup = clone(det)
    assert dup.get_params() == params
    det.set_params(alpha=0.5)
    assert det.get_params()["alpha"] == 0.5
    assert dup.get_params()["alpha"] == 0.7


def test_decision_function_requires_fit():
    with pytest.raises(NotFittedError):
        quick_detector().decision_function(small_graph())


def test_fit_sets_attributes_and_scores():
    g = small_graph()
    det = quick_detector().fit(g)
    assert det.n_features_in_ == g.d
    assert det.pseudo_labels_ is not None
    assert len(det.selection_losses_) == 3
    scores = det.decision_function(g)
    assert scores.shape == (g.n,)
    assert det.score_table_.round_scores.shape == (3, g.n)


def test_fit_predict_scores_deterministic():
    g = small_graph()
    a = quick_detector().fit_predict_scores(g)
    b = quick_detector().fit_predict_scores(g)
    assert np.array_equal(a, b)
    c = quick_detector(seed=5).fit_predict_scores(g)
    assert not np.array_equal(a, c)


def test_score_needs_labels():
    g = small_graph()
    det = quick_detector().fit(g)
    with pytest.raises(ConfigError):
        det.score(g)


def test_score_uses_graph_labels():
    g = small_graph(n=40)
    labeled, _ = inject_structural(g, num_cliques=1,
                                   cfg=InjectionConfig(clique_size=5, rng_seed=0),
                                   rng=np.random.default_rng(0))
    det = quick_detector(t_select=10, t_refine=5, rounds=8, batch_size=20)
    det.fit(labeled)
    a = det.score(labeled)
    b = det.score(labeled, labeled.labels)
    assert a == b
    assert 0.0 <= a <= 1.0


def test_invalid_hyperparameters_fail_at_fit():
    # sklearn convention: constructor stores params verbatim, fit validates
    det = NLGADDetector(alpha=2.0)
    with pytest.raises(ConfigError):
        det.fit(small_graph())
