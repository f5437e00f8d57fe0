"""Forward-only loss functionals, class weighting, SE gating and activations.

Probability maps and one-hot targets carry the class axis last; every other
axis is treated as a pixel axis, so ``N`` is the total pixel count of the
evaluated tensor.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ZeroInstanceWarning

LOG_EPS = 1e-12
WEIGHT_MODES = ("inverse_count", "inverse_count_squared", "uniform")


@dataclass(frozen=True)
class ClassWeights:
    weights: np.ndarray
    mode: str

    def __len__(self):
        return len(self.weights)


def _flatten(p, r):
    p = np.asarray(p, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    if p.shape != r.shape:
        raise ValueError(f"prediction {p.shape} and target {r.shape} differ in shape")
    if p.ndim < 1:
        raise ValueError("inputs need a class axis")
    n_cls = p.shape[-1]
    return p.reshape(-1, n_cls), r.reshape(-1, n_cls)


def _weights(w, n_cls) -> np.ndarray:
    if w is None:
        return np.ones(n_cls)
    arr = np.asarray(w.weights if isinstance(w, ClassWeights) else w, dtype=np.float64)
    if arr.shape != (n_cls,):
        raise ValueError(f"expected {n_cls} class weights, got shape {arr.shape}")
    return arr


def class_weights(targets, mode: str = "inverse_count") -> ClassWeights:
    """Inverse-frequency class weights from one-hot training targets.

    ``inverse_count`` gives ``1/n_l`` (weighted cross entropy),
    ``inverse_count_squared`` gives ``1/n_l**2`` (generalized Dice).
    Classes that never occur get weight 0 and a :class:`ZeroInstanceWarning`.
    """
    if mode not in WEIGHT_MODES:
        raise ValueError(f"mode must be one of {WEIGHT_MODES}")
    t = np.asarray(targets, dtype=np.float64)
    t = t.reshape(-1, t.shape[-1])
    if t.shape[0] == 0:
        raise ValueError("targets hold no pixels")
    counts = t.sum(axis=0)
    if mode == "uniform":
        return ClassWeights(np.ones_like(counts), mode)
    power = 1 if mode == "inverse_count" else 2
    absent = counts <= 0
    if absent.any():
        warnings.warn(
            f"classes {np.flatnonzero(absent).tolist()} have no instances; weight set to 0",
            ZeroInstanceWarning,
            stacklevel=2,
        )
    w = np.zeros_like(counts)
    w[~absent] = 1.0 / counts[~absent] ** power
    return ClassWeights(w, mode)


def weighted_cross_entropy(p, r, w=None) -> float:
    """``-(1/N) sum_l w_l sum_n r_ln ln p_ln`` with ``p`` clamped at 1e-12."""
    p, r = _flatten(p, r)
    wt = _weights(w, p.shape[1])
    logp = np.log(np.clip(p, LOG_EPS, 1.0))
    per_class = -(r * logp).sum(axis=0)
    return float((wt * per_class).sum() / p.shape[0])


def generalized_dice_loss(p, r, w=None) -> float:
    """Class-weighted multi-class Dice loss.

    An all-zero denominator (empty target and prediction, or zero weights)
    yields 0 with a warning.
    """
    p, r = _flatten(p, r)
    wt = _weights(w, p.shape[1])
    num = (wt * (r * p).sum(axis=0)).sum()
    den = (wt * (r + p).sum(axis=0)).sum()
    if den <= 0:
        warnings.warn("generalized Dice denominator is zero; loss defined as 0", ZeroInstanceWarning, stacklevel=2)
        return 0.0
    return float(1.0 - 2.0 * num / den)


def combo_loss(p, r, w_ce=None, w_dice=None, mix: float = 0.5) -> float:
    """``mix * CE + (1 - mix) * GD``."""
    if not 0.0 <= mix <= 1.0:
        raise ValueError(f"mix must lie in [0, 1], got {mix}")
    return mix * weighted_cross_entropy(p, r, w_ce) + (1 - mix) * generalized_dice_loss(p, r, w_dice)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def relu(x):
    return np.maximum(x, 0.0)


def leaky_relu(x, alpha=0.01):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, x, alpha * x)


def elu(x, alpha=1.0):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, x, alpha * np.expm1(np.minimum(x, 0.0)))


def swish(x):
    x = np.asarray(x, dtype=np.float64)
    return x * sigmoid(x)


_ACTIVATIONS = {
    "sigmoid": sigmoid,
    "relu": relu,
    "leaky_relu": leaky_relu,
    "elu": elu,
    "swish": swish,
}


def activation(kind: str, x, alpha: float | None = None):
    if kind not in _ACTIVATIONS:
        raise ValueError(f"unknown activation {kind!r}; choose from {sorted(_ACTIVATIONS)}")
    if kind in ("leaky_relu", "elu"):
        if alpha is not None and alpha <= 0:
            raise ValueError("alpha must be positive")
        return _ACTIVATIONS[kind](x) if alpha is None else _ACTIVATIONS[kind](x, alpha)
    return _ACTIVATIONS[kind](x)


@dataclass(frozen=True)
class SEWeights:
    """Squeeze-and-excitation gate: ``w1`` is ``(C/r, C)``, ``w2`` is ``(C, C/r)``."""

    w1: np.ndarray
    w2: np.ndarray

    def __post_init__(self):
        w1 = np.atleast_2d(np.asarray(self.w1, dtype=np.float64))
        w2 = np.atleast_2d(np.asarray(self.w2, dtype=np.float64))
        hidden, channels = w1.shape
        if w2.shape != (channels, hidden):
            raise ValueError(f"w2 must be {(channels, hidden)} to match w1 {w1.shape}, got {w2.shape}")
        if channels % hidden:
            raise ValueError(f"reduction rate must divide C: C={channels}, C/r={hidden}")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)

    @property
    def channels(self) -> int:
        return self.w1.shape[1]

    @property
    def reduction(self) -> int:
        return self.w1.shape[1] // self.w1.shape[0]


def se_excitation(z, weights: SEWeights) -> np.ndarray:
    """Channel gate ``sigmoid(W2 relu(W1 z))`` for a length-C descriptor."""
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if z.shape[0] != weights.channels:
        raise ValueError(f"descriptor has {z.shape[0]} channels, weights expect {weights.channels}")
    return sigmoid(weights.w2 @ relu(weights.w1 @ z))


def squeeze(feature_map) -> np.ndarray:
    """Global average pool of an ``(H, W, C)`` feature map to a length-C descriptor."""
    fm = np.asarray(feature_map, dtype=np.float64)
    return fm.reshape(-1, fm.shape[-1]).mean(axis=0)
