"""From-scratch classifiers for the normal/pathological decision.

Logistic regression (full-batch gradient descent), k-nearest neighbours and
a Gini decision tree, plus the fused clinical + scar-volume model and its
JSON serialization.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .clinical import ClinicalRecord, FeatureStats, encode_features
from .errors import DegenerateTrainingError, SchemaError

MODEL_SCHEMA = "demri-eval-model/1"
SCAR_VOLUME_FEATURE = "scar_volume_cm3"


def _check_binary(y) -> np.ndarray:
    y = np.asarray(y).astype(int).ravel()
    if not set(np.unique(y).tolist()) <= {0, 1}:
        raise ValueError("labels must be 0/1")
    return y


def _sigmoid(t):
    return np.where(t >= 0, 1 / (1 + np.exp(-np.abs(t))), np.exp(-np.abs(t)) / (1 + np.exp(-np.abs(t))))


@dataclass
class LogisticModel:
    weights: np.ndarray
    bias: float
    l2: float = 0.0
    step: float = 0.0
    loss_history: list = field(default_factory=list)

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return _sigmoid(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return self.predict_proba(X) >= 0.5


def logistic_loss(X, y, w, b, l2) -> float:
    """Mean log-loss plus ``l2/2 * |w|^2`` (bias unpenalized)."""
    z = X @ w + b
    # log(1 + e^z) - y z, computed stably
    return float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))


def train_logistic(X, y, lr: float = 0.5, epochs: int = 2000, l2: float = 0.0) -> LogisticModel:
    """Full-batch gradient descent on the L2-regularized log-loss.

    The step is capped at ``1/L`` (``L`` the gradient's Lipschitz bound) so
    the training loss never increases.
    """
    X = np.asarray(X, dtype=np.float64)
    y = _check_binary(y).astype(np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"X {X.shape} and y {y.shape} disagree")
    if X.shape[0] < 2:
        raise DegenerateTrainingError("need at least two samples")
    if len(np.unique(y)) < 2:
        raise DegenerateTrainingError("training labels contain a single class")
    n, d = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    lipschitz = 0.25 * np.linalg.eigvalsh(Xb.T @ Xb / n).max() + l2
    step = min(lr, 1.0 / lipschitz)
    w, b = np.zeros(d), 0.0
    history = [logistic_loss(X, y, w, b, l2)]
    for _ in range(epochs):
        resid = _sigmoid(X @ w + b) - y
        w = w - step * (X.T @ resid / n + l2 * w)
        b = b - step * float(resid.mean())
        history.append(logistic_loss(X, y, w, b, l2))
    return LogisticModel(w, float(b), l2, step, history)


def knn_classify(train_X, train_y, x, k: int = 3):
    """Majority label of the ``k`` Euclidean-nearest training points.

    Distance ties go to the lower sample index; vote ties go to the label
    whose nearest member ranks first.
    """
    train_X = np.asarray(train_X, dtype=np.float64)
    if train_X.ndim != 2 or train_X.shape[0] == 0:
        raise ValueError("training set is empty")
    train_y = np.asarray(train_y)
    if not 1 <= k <= len(train_X):
        raise ValueError(f"k must lie in 1..{len(train_X)}, got {k}")
    d2 = ((train_X - np.asarray(x, dtype=np.float64)) ** 2).sum(axis=1)
    nearest = np.argsort(d2, kind="stable")[:k]
    votes: dict = {}
    for rank, idx in enumerate(nearest):
        lab = train_y[idx].item()
        count, first = votes.get(lab, (0, rank))
        votes[lab] = (count + 1, first)
    return max(votes.items(), key=lambda kv: (kv[1][0], -kv[1][1]))[0]


@dataclass
class TreeNode:
    prediction: int
    n_samples: int
    gini: float
    feature: int | None = None
    threshold: float | None = None
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def predict_one(self, x) -> int:
        node = self
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.prediction

    def predict(self, X) -> np.ndarray:
        return np.array([self.predict_one(x) for x in np.asarray(X, dtype=np.float64)])


def _gini(counts) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - (p * p).sum())


def _best_split(X, y, min_leaf):
    n, d = X.shape
    parent = _gini(np.bincount(y, minlength=2))
    best = None  # (weighted impurity, feature, threshold)
    for f in range(d):
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], y[order]
        left_pos = np.cumsum(ys)
        total_pos = left_pos[-1]
        for i in range(min_leaf - 1, n - min_leaf):
            if xs[i] == xs[i + 1]:
                continue
            nl, nr = i + 1, n - i - 1
            pl, pr = left_pos[i], total_pos - left_pos[i]
            gl = 1.0 - (pl / nl) ** 2 - (1 - pl / nl) ** 2
            gr = 1.0 - (pr / nr) ** 2 - (1 - pr / nr) ** 2
            score = (nl * gl + nr * gr) / n
            thr = 0.5 * (xs[i] + xs[i + 1])
            if score < parent - 1e-12 and (best is None or score < best[0] - 1e-12):
                best = (score, f, thr)
    return best


def train_tree(X, y, max_depth: int = 3, min_leaf: int = 1) -> TreeNode:
    """Greedy Gini tree on axis-aligned thresholds (midpoints between values).

    Ties in impurity keep the lowest feature index, then the lowest threshold.
    """
    X = np.asarray(X, dtype=np.float64)
    y = _check_binary(y)
    if len(np.unique(y)) < 2:
        raise DegenerateTrainingError("training labels contain a single class")
    if max_depth < 0 or min_leaf < 1:
        raise ValueError("max_depth must be >= 0 and min_leaf >= 1")

    def grow(idx, depth):
        counts = np.bincount(y[idx], minlength=2)
        node = TreeNode(int(counts[1] > counts[0]), len(idx), _gini(counts))
        if depth >= max_depth or node.gini == 0.0 or len(idx) < 2 * min_leaf:
            return node
        split = _best_split(X[idx], y[idx], min_leaf)
        if split is None:
            return node
        _, f, thr = split
        go_left = X[idx, f] <= thr
        node.feature, node.threshold = f, float(thr)
        node.left = grow(idx[go_left], depth + 1)
        node.right = grow(idx[~go_left], depth + 1)
        return node

    return grow(np.arange(len(y)), 0)


@dataclass
class ClinicalModel:
    """Logistic model bound to its feature encoding.

    ``fused`` models expect the scar volume as one extra feature after the
    encoded clinical columns.
    """

    logistic: LogisticModel
    stats: FeatureStats
    fused: bool = False
    volume_source: str | None = None

    @property
    def n_features(self) -> int:
        return len(self.stats.feature_names)

    def encode(self, records, scar_volumes=None) -> np.ndarray:
        if self.fused:
            if scar_volumes is None:
                raise ValueError("fused model needs scar volumes")
            extra = np.asarray(scar_volumes, dtype=np.float64).reshape(-1, 1)
            return encode_features(records, self.stats, extra, (SCAR_VOLUME_FEATURE,)).X
        if scar_volumes is not None:
            raise ValueError("clinical-only model does not take scar volumes")
        return encode_features(records, self.stats).X

    def predict_proba(self, records, scar_volumes=None) -> np.ndarray:
        X = self.encode(records, scar_volumes)
        if X.shape[1] != self.logistic.weights.shape[0]:
            raise ValueError(f"feature dimension {X.shape[1]} != model dimension {self.logistic.weights.shape[0]}")
        return self.logistic.predict_proba(X)

    def to_dict(self) -> dict:
        return {
            "schema": MODEL_SCHEMA,
            "kind": "logistic",
            "fused": self.fused,
            "volume_source": self.volume_source,
            "feature_names": list(self.stats.feature_names),
            "weights": [float(f"{w:.17g}") for w in self.logistic.weights],
            "bias": self.logistic.bias,
            "l2": self.logistic.l2,
            "stats": self.stats.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClinicalModel":
        if not isinstance(d, dict) or d.get("schema") != MODEL_SCHEMA:
            raise SchemaError(f"model schema must be {MODEL_SCHEMA!r}")
        try:
            stats = FeatureStats.from_dict(d["stats"])
            lm = LogisticModel(np.asarray(d["weights"], dtype=np.float64), float(d["bias"]), float(d.get("l2", 0.0)))
            model = cls(lm, stats, bool(d["fused"]), d.get("volume_source"))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"malformed model: {exc}") from exc
        if list(stats.feature_names) != list(d.get("feature_names", stats.feature_names)):
            raise SchemaError("feature_names disagree with stored statistics")
        if len(lm.weights) != model.n_features:
            raise SchemaError(f"{len(lm.weights)} weights for {model.n_features} features")
        return model

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ClinicalModel":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not JSON ({exc})") from exc


def train_clinical_model(records: Sequence[ClinicalRecord], scar_volumes=None, volume_source=None,
                         lr: float = 0.5, epochs: int = 2000, l2: float = 1e-3) -> ClinicalModel:
    """Fit a clinical-only (or, with ``scar_volumes``, fused) logistic model."""
    labels = [r.label for r in records]
    if any(lab is None for lab in labels):
        raise ValueError("every training record needs a label")
    if scar_volumes is None:
        fm = encode_features(records)
    else:
        extra = np.asarray(scar_volumes, dtype=np.float64).reshape(-1, 1)
        fm = encode_features(records, extra=extra, extra_names=(SCAR_VOLUME_FEATURE,))
    lm = train_logistic(fm.X, np.asarray(labels, dtype=int), lr=lr, epochs=epochs, l2=l2)
    return ClinicalModel(lm, fm.stats, scar_volumes is not None, volume_source)


def fused_classify(record: ClinicalRecord, scar_volume_cm3: float, model: ClinicalModel) -> bool:
    """Pathological decision from one record plus its scar volume."""
    if not model.fused:
        raise ValueError("model was trained without the scar-volume feature")
    if not (math.isfinite(scar_volume_cm3) and scar_volume_cm3 >= 0):
        raise ValueError(f"scar volume must be a non-negative number, got {scar_volume_cm3}")
    return bool(model.predict_proba([record], [scar_volume_cm3])[0] >= 0.5)
