import math

import numpy as np
import pytest

from demri_eval.classifiers import (
    ClinicalModel,
    fused_classify,
    knn_classify,
    logistic_loss,
    train_clinical_model,
    train_logistic,
    train_tree,
)
from demri_eval.clinical import ClinicalRecord
from demri_eval.errors import DegenerateTrainingError, SchemaError
from demri_eval.synthetic import clinical_population


def gd_oracle(X, y, step, epochs, l2):
    """Plain-Python full-batch gradient descent on the regularized log-loss."""
    n, d = len(X), len(X[0])
    w, b = [0.0] * d, 0.0
    for _ in range(epochs):
        resid = []
        for xi, yi in zip(X, y):
            z = sum(wj * xj for wj, xj in zip(w, xi)) + b
            resid.append(1 / (1 + math.exp(-z)) - yi)
        grad = [sum(r * xi[j] for r, xi in zip(resid, X)) / n + l2 * w[j] for j in range(d)]
        w = [wj - step * g for wj, g in zip(w, grad)]
        b -= step * sum(resid) / n
    return w, b


def test_logistic_matches_reference_gd():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 3))
    y = (X[:, 0] + 0.5 * rng.normal(size=40) > 0).astype(int)
    m = train_logistic(X, y, lr=0.1, epochs=50, l2=0.01)
    w, b = gd_oracle(X.tolist(), y.tolist(), m.step, 50, 0.01)
    np.testing.assert_allclose(m.weights, w, rtol=1e-10)
    assert m.bias == pytest.approx(b, rel=1e-10)


def test_logistic_separable_1d():
    X = np.array([[-3.0], [-2.0], [-1.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    m = train_logistic(X, y, lr=5.0, epochs=5000)
    assert (m.predict(X) == y).all()
    assert np.all(np.diff(m.loss_history) <= 1e-9)


def test_logistic_loss_monotone_even_with_large_lr():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(100, 5)) * [1, 10, 100, 1, 1]
    y = rng.integers(0, 2, 100)
    m = train_logistic(X, y, lr=1e3, epochs=300, l2=1e-3)
    assert np.all(np.diff(m.loss_history) <= 1e-9)
    assert m.loss_history[-1] == pytest.approx(logistic_loss(X, y.astype(float), m.weights, m.bias, 1e-3))


def test_logistic_large_l2_and_permutation():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(30, 4))
    y = rng.integers(0, 2, 30)
    assert np.linalg.norm(train_logistic(X, y, l2=1e4, epochs=500).weights) < 1e-3
    perm = rng.permutation(30)
    a, b = train_logistic(X, y, epochs=200), train_logistic(X[perm], y[perm], epochs=200)
    np.testing.assert_allclose(a.weights, b.weights, rtol=1e-9, atol=1e-12)


def test_logistic_single_class():
    with pytest.raises(DegenerateTrainingError):
        train_logistic(np.zeros((4, 2)), [1, 1, 1, 1])


def knn_oracle(X, y, x, k):
    dist = sorted((sum((a - b) ** 2 for a, b in zip(row, x)), i) for i, row in enumerate(X))
    votes = {}
    for rank, (_, i) in enumerate(dist[:k]):
        c, first = votes.get(y[i], (0, rank))
        votes[y[i]] = (c + 1, first)
    return max(votes, key=lambda lab: (votes[lab][0], -votes[lab][1]))


def test_knn_matches_oracle_200_queries():
    rng = np.random.default_rng(3)
    X = rng.integers(0, 4, size=(25, 2)).astype(float)  # coarse grid forces distance ties
    y = rng.integers(0, 2, 25)
    for _ in range(200):
        q = rng.integers(0, 4, size=2).astype(float)
        k = int(rng.choice([1, 3, 5]))
        assert knn_classify(X, y, q, k) == knn_oracle(X.tolist(), y.tolist(), q.tolist(), k)


def test_knn_examples():
    X = np.array([[0.0, 0.0], [1.0, 1.0], [5.0, 5.0]])
    assert knn_classify(X, [0, 1, 1], [1.0, 1.0], 1) == 1
    assert knn_classify(X, [7, 7, 7], [100.0, -3.0], 3) == 7
    with pytest.raises(ValueError):
        knn_classify(np.zeros((0, 2)), [], [0, 0], 1)


def test_tree_examples():
    X = np.array([[5.0, 1.0], [6.0, 0.0], [1.0, 1.0], [2.0, 0.0]])
    y = np.array([1, 1, 0, 0])
    t = train_tree(X, y)
    assert t.depth() == 1 and t.feature == 0 and t.threshold == 3.5
    assert (t.predict(X) == y).all()
    stump = train_tree(X, [1, 1, 1, 0], max_depth=0)
    assert stump.is_leaf and stump.prediction == 1


def test_tree_tie_prefers_lowest_feature():
    X = np.array([[0.0, 0.0], [1.0, 1.0]])
    t = train_tree(X, [0, 1])
    assert t.feature == 0


def test_tree_and_needs_depth_two():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]] * 3)
    y = np.array([0, 0, 0, 1] * 3)
    assert not (train_tree(X, y, max_depth=1).predict(X) == y).all()
    t = train_tree(X, y, max_depth=2)
    assert (t.predict(X) == y).all() and t.depth() == 2


def test_tree_stops_without_impurity_gain():
    X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    assert train_tree(X, [0, 1, 1, 0], max_depth=5).is_leaf


@pytest.fixture(scope="module")
def fused_model():
    records, volumes = clinical_population(np.random.default_rng(4), 600)
    return train_clinical_model(records, volumes, volume_source="truth")


BENIGN = ClinicalRecord("b", "F", 66, "former", True, True, False, False, False, 5.0, 1, 50.0, 1500.0)


def test_fused_examples(fused_model):
    assert fused_classify(BENIGN, 0.0, fused_model) is False
    assert fused_classify(BENIGN, 40.0, fused_model) is True
    assert fused_model.n_features == 15


def test_fused_model_json_roundtrip(tmp_path, fused_model):
    fused_model.save(tmp_path / "m.json")
    back = ClinicalModel.load(tmp_path / "m.json")
    np.testing.assert_array_equal(back.logistic.weights, fused_model.logistic.weights)
    assert back.volume_source == "truth"
    assert fused_classify(BENIGN, 40.0, back) is True
    (tmp_path / "bad.json").write_text('{"schema": "x"}')
    with pytest.raises(SchemaError):
        ClinicalModel.load(tmp_path / "bad.json")


def test_clinical_only_model_reaches_baseline():
    rng = np.random.default_rng(5)
    records, _ = clinical_population(rng, 1000)
    model = train_clinical_model(records[:700])
    acc = np.mean((model.predict_proba(records[700:]) >= 0.5) == np.array([r.label for r in records[700:]]))
    assert acc >= 0.75
    with pytest.raises(ValueError):
        fused_classify(records[0], 1.0, model)
