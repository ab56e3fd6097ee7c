"""Prediction-head math on posteriors and logits.

Covers the expected-value age readout over the top-L posterior ages,

    age = sum_l a_l * p_l / sum_l p_l,

the class-weighted cross-entropy with weight w_y = max_c N_c / N_y and its
analytic gradient, plain binary cross-entropy, and the 8-to-7 emotion score
reduction that drops the contempt class and renormalizes.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    DegenerateError,
    EmptyInputError,
    NumericError,
    ParamError,
    ShapeError,
)


def softmax(z: np.ndarray) -> np.ndarray:
    """Stable softmax: exp(z - max z) / sum exp(z - max z)."""
    z = np.asarray(z, dtype=np.float64)
    if not np.isfinite(z).all():
        raise NumericError("logits must be finite")
    shifted = z - z.max()
    e = np.exp(shifted)
    return e / e.sum()


def _logsumexp(z: np.ndarray) -> float:
    m = z.max()
    return float(m + np.log(np.exp(z - m).sum()))


def expected_age(probs: np.ndarray, ages: np.ndarray, top_l: int) -> float:
    """Probability-weighted mean age over the top_l most probable ages.

    Ties in the posterior are broken toward the lower age index.  Raises
    DegenerateError when the selected probabilities sum to zero.
    """
    probs = np.asarray(probs, dtype=np.float64)
    ages = np.asarray(ages, dtype=np.float64)
    if probs.ndim != 1 or probs.shape != ages.shape:
        raise ShapeError(
            f"probs {probs.shape} and ages {ages.shape} must be equal-length vectors"
        )
    if not np.isfinite(probs).all() or (probs < 0).any():
        raise NumericError("posterior probabilities must be finite and non-negative")
    if not (np.diff(ages) > 0).all() or (ages <= 0).any():
        raise ParamError("ages must be strictly increasing positive values")
    if not 1 <= top_l <= probs.shape[0]:
        raise ParamError(f"top_l must be in 1..{probs.shape[0]}, got {top_l}")

    # stable argsort keeps the lower index first among equal probabilities
    selected = np.argsort(-probs, kind="stable")[:top_l]
    mass = probs[selected].sum()
    if mass == 0.0:
        raise DegenerateError("all selected probabilities are zero")
    return float((ages[selected] * probs[selected]).sum() / mass)


def class_weights(counts) -> np.ndarray:
    """w_y = max_c N_c / N_y; the majority class gets weight exactly 1."""
    counts = np.asarray(counts)
    if counts.size == 0:
        raise EmptyInputError("no class counts")
    if (counts < 1).any():
        raise ParamError("every class count must be >= 1")
    return counts.max() / counts.astype(np.float64)


def weighted_ce_loss(z: np.ndarray, y: int, weights) -> float:
    """-log softmax(z)_y * w_y, computed via logsumexp for stability."""
    z = np.asarray(z, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if z.shape != weights.shape:
        raise ShapeError(f"logits {z.shape} and weights {weights.shape} differ")
    if not np.isfinite(z).all():
        raise NumericError("logits must be finite")
    if (weights <= 0).any():
        raise ParamError("weights must be positive")
    if not 0 <= y < z.shape[0]:
        raise IndexError(f"label {y} out of range for {z.shape[0]} classes")
    return float(weights[y] * (_logsumexp(z) - z[y]))


def weighted_ce_grad(z: np.ndarray, y: int, weights) -> np.ndarray:
    """Gradient of weighted_ce_loss wrt z: w_y * (softmax(z) - onehot(y))."""
    z = np.asarray(z, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if z.shape != weights.shape:
        raise ShapeError(f"logits {z.shape} and weights {weights.shape} differ")
    if (weights <= 0).any():
        raise ParamError("weights must be positive")
    if not 0 <= y < z.shape[0]:
        raise IndexError(f"label {y} out of range for {z.shape[0]} classes")
    g = weights[y] * softmax(z)
    g[y] -= weights[y]
    return g


def reduce_scores_8_to_7(scores8: np.ndarray, contempt_index: int) -> np.ndarray:
    """Drop the contempt entry from an 8-class posterior and renormalize."""
    scores8 = np.asarray(scores8, dtype=np.float64)
    if scores8.shape != (8,):
        raise ShapeError(f"expected 8 scores, got shape {scores8.shape}")
    if not np.isfinite(scores8).all() or (scores8 < 0).any():
        raise NumericError("scores must be finite and non-negative")
    if not 0 <= contempt_index < 8:
        raise IndexError(f"contempt index {contempt_index} out of range")
    kept = np.delete(scores8, contempt_index)
    mass = kept.sum()
    if mass == 0.0:
        raise DegenerateError("remaining scores sum to zero")
    return kept / mass


def binary_ce(p: float, label: int) -> float:
    """-label*ln p - (1-label)*ln(1-p), with p clamped to [1e-7, 1-1e-7]."""
    if label not in (0, 1):
        raise ParamError(f"label must be 0 or 1, got {label}")
    if not math.isfinite(p):
        raise NumericError("probability must be finite")
    p = min(max(p, 1e-7), 1.0 - 1e-7)
    return -(label * math.log(p) + (1 - label) * math.log(1.0 - p))
