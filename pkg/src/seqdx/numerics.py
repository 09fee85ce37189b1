"""Small numerical helpers used throughout: stable softmax and clamped logs."""

from __future__ import annotations

import numpy as np


def softmax(scores: np.ndarray) -> np.ndarray:
    """Max-subtracted softmax over a 1-D score vector."""
    scores = np.asarray(scores, dtype=float)
    shifted = scores - scores.max()
    weights = np.exp(shifted)
    return weights / weights.sum()


def clamped_log(probs: np.ndarray, floor: float) -> np.ndarray:
    """log of probabilities with each entry clamped below by `floor`.

    Keeps zero-probability table entries from producing -inf factors.
    """
    return np.log(np.maximum(np.asarray(probs, dtype=float), floor))


def log_normalize(log_weights: np.ndarray) -> np.ndarray:
    """Normalize a log-weight vector so that exp of it sums to 1."""
    log_weights = np.asarray(log_weights, dtype=float)
    shifted = log_weights - log_weights.max()
    return shifted - np.log(np.exp(shifted).sum())
