"""Evaluation metrics for a recommended list: DCG, serendipity, feature distance."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import TooFewItems, UndefinedMetric

RELEVANT_RATING = 4.0


@dataclass(frozen=True)
class EvaluationReport:
    user: int
    k: int
    dcg: float
    serendipity: float  # nan when undefined for this user
    feature_distance: float
    serendipity_excluded: int = 0


def ideal_dcg(k: int) -> float:
    return sum(1.0 / math.log2(p + 1) for p in range(1, k + 1))


def dcg_at_k(ranked: Sequence[int], relevant: Iterable[int], k: int) -> float:
    """Binary-gain DCG with discount 1/log2(position + 1), truncated at k."""
    relevant = set(relevant)
    return sum(
        1.0 / math.log2(p + 2) for p, item in enumerate(list(ranked)[:k]) if item in relevant
    )


def _unrated_counts(recommended, user_rated, counts):
    rated = set(user_rated)
    fresh = [i for i in recommended if i not in rated]
    if not fresh:
        raise UndefinedMetric("every recommended item is already rated by the user")
    c = np.asarray(counts, dtype=float)[fresh]
    used = c[c > 0]
    if used.size == 0:
        raise UndefinedMetric("no unrated recommended item has positive popularity")
    return used, int(c.size - used.size)


def serendipity_score(recommended: Sequence[int], user_rated: Iterable[int], counts) -> float:
    """Inverse mean popularity of the recommended items the user has not rated.

    ``counts`` is a per-item rating count (a PopularityTable or array).
    Items nobody rated are left out of the mean; see
    :func:`serendipity_excluded`.
    """
    used, _ = _unrated_counts(recommended, user_rated, getattr(counts, "counts", counts))
    return float(1.0 / used.mean())


def serendipity_excluded(recommended, user_rated, counts) -> int:
    return _unrated_counts(recommended, user_rated, getattr(counts, "counts", counts))[1]


def feature_distance(recommended: Sequence[int], features) -> float:
    """Mean Euclidean distance over all unordered pairs of recommended items."""
    idx = list(recommended)
    if len(idx) < 2:
        raise TooFewItems("feature distance needs at least two items")
    X = np.asarray(features, dtype=float)[idx]
    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    iu = np.triu_indices(len(idx), k=1)
    return float(dist[iu].mean())


def evaluate_list(
    user: int,
    ranked: Sequence[int],
    relevant: Iterable[int],
    user_rated: Iterable[int],
    counts,
    features,
    k: int,
) -> EvaluationReport:
    top = list(ranked)[:k]
    try:
        counts = getattr(counts, "counts", counts)
        used, excluded = _unrated_counts(top, user_rated, counts)
        ss = float(1.0 / used.mean())
    except UndefinedMetric:
        ss, excluded = math.nan, 0
    fd = feature_distance(top, features) if len(top) >= 2 else math.nan
    return EvaluationReport(user, k, dcg_at_k(top, relevant, k), ss, fd, excluded)
