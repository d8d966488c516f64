"""Prediction metrics and the two-sided sign test."""

from __future__ import annotations

import numpy as np
from scipy import stats


def brier(probabilities: np.ndarray, labels: np.ndarray) -> float:
    """Mean over rows of ``sum_k (p_k - [y == k])^2``; labels are class codes 1..K."""
    P = np.atleast_2d(np.asarray(probabilities, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64)
    if P.shape[0] != len(y):
        raise ValueError(f"{P.shape[0]} probability rows for {len(y)} labels")
    if len(y) == 0:
        raise ValueError("no rows to score")
    onehot = np.zeros_like(P)
    onehot[np.arange(len(y)), y - 1] = 1.0
    return float(np.mean(np.sum((P - onehot) ** 2, axis=1)))


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Probability that a random positive outscores a random negative, ties
    counting one half. ``labels`` are truthy for positives."""
    s = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(labels).astype(bool)
    if len(s) != len(pos):
        raise ValueError(f"{len(s)} scores for {len(pos)} labels")
    n1 = int(pos.sum())
    n0 = len(pos) - n1
    if n1 == 0 or n0 == 0:
        raise ValueError("AUC needs both positive and negative labels")
    ranks = stats.rankdata(s)
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2) / (n1 * n0))


def separation_auc(positive: np.ndarray, negative: np.ndarray) -> float:
    """AUC of scores ``positive`` against ``negative``."""
    positive, negative = np.asarray(positive, float), np.asarray(negative, float)
    return auc(np.concatenate([positive, negative]),
               np.concatenate([np.ones(len(positive)), np.zeros(len(negative))]))


def accuracy(predicted: np.ndarray, labels: np.ndarray) -> float:
    predicted, labels = np.asarray(predicted), np.asarray(labels)
    if predicted.shape != labels.shape:
        raise ValueError(f"{len(predicted)} predictions for {len(labels)} labels")
    if len(labels) == 0:
        raise ValueError("no rows to score")
    return float(np.mean(predicted == labels))


def binomial_sign_test(wins: int, losses: int) -> float:
    """Exact two-sided binomial p-value for ``wins`` out of ``wins + losses``
    at success probability 1/2; ties are excluded by the caller. Returns 1.0
    when there is nothing to test."""
    wins, losses = int(wins), int(losses)
    if wins < 0 or losses < 0:
        raise ValueError("counts must be non-negative")
    if wins + losses == 0:
        return 1.0
    return float(stats.binomtest(wins, wins + losses, 0.5).pvalue)
