"""Loss functions returning (scalar loss, gradient w.r.t. the prediction)."""

from __future__ import annotations

import numpy as np

_CLIP = 1e-7


def mean_bce(probs: np.ndarray, targets: np.ndarray,
             pos_weight: np.ndarray | None = None):
    """Mean binary cross-entropy over every element of a probability array.

    ``pos_weight`` optionally scales the positive term per output column.
    """
    p = np.clip(probs, _CLIP, 1.0 - _CLIP)
    y = targets
    w = 1.0 if pos_weight is None else np.asarray(pos_weight)
    loss = -(w * y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).mean()
    grad = (-(w * y / p) + (1.0 - y) / (1.0 - p)) / p.size
    grad = np.where((probs > _CLIP) & (probs < 1.0 - _CLIP), grad, 0.0)
    return loss, grad


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Cross-entropy of a softmax over logits against integer labels."""
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    n = len(labels)
    loss = -np.log(np.clip(p[np.arange(n), labels], _CLIP, None)).mean()
    grad = p.copy()
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def mse(pred: np.ndarray, target: np.ndarray):
    diff = pred - target
    return (diff * diff).mean(), 2.0 * diff / diff.size
