"""Split -> factorize -> re-rank -> curvature -> metrics, over a lambda x k grid."""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .curvature import approximation_bound, total_curvature
from .data import (
    FactorModel,
    RatingsDataset,
    cosine_similarity,
    factorize_wnmf,
    popularity,
    predict_relevance,
    split_holdout,
    unobserved_items,
)
from .errors import SubmodrankError
from .greedy import greedy_maximize
from .metrics import RELEVANT_RATING, evaluate_list
from .objectives import build_objective

logger = logging.getLogger(__name__)

SWEEP_HEADER = ("split", "lambda", "alpha", "k", "dcg", "ss", "fd", "reason")


@dataclass
class SweepConfig:
    fraction: float = 0.05
    n_splits: int = 5
    split_seed: int = 0
    rank: int = 32
    reg: float = 0.1
    unobserved_weight: float = 0.05
    iters: int = 200
    wnmf_seed: int = 0
    algorithm: str = "interest-coverage"
    lambda_grid: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0)
    k_grid: Sequence[int] = (5, 10, 20)
    pool_size: Optional[int] = 100
    graph_neighbors: int = 10
    n_users: int = 200
    user_seed: int = 0


def coverage_matrix(similarity: np.ndarray, relevance: np.ndarray, neighbors: int) -> np.ndarray:
    """Items x nodes matrix of how much relevance each item spreads over the graph.

    Item j covers itself and its ``neighbors`` most similar items, in
    proportion to similarity, and hands out exactly rel(j) in total. Row
    sums therefore equal relevance, so a power-1 coverage objective is the
    plain relevance sum.
    """
    n = similarity.shape[0]
    W = np.zeros((n, n))
    for j in range(n):
        col = similarity[:, j].copy()
        col[j] = -np.inf
        nb = np.argsort(-col, kind="stable")[: min(neighbors, n - 1)]
        W[j, nb] = similarity[nb, j]
        W[j, j] = 1.0
    W /= W.sum(axis=1, keepdims=True)
    return W * np.asarray(relevance, dtype=float)[:, None]


@dataclass(frozen=True)
class UserContext:
    """Everything needed to re-rank for one user: the candidate pool and its inputs."""

    user: int
    pool: np.ndarray  # global item ids, ascending
    relevance: np.ndarray
    similarity: np.ndarray  # pool x pool cosine similarity of item factors
    interests: np.ndarray  # pool x pool coverage matrix

    def objective(self, algorithm: str, lam: float):
        if algorithm == "interest-coverage":
            return build_objective(algorithm, lam, interests=self.interests)
        if algorithm == "mmr":
            return build_objective("mmr", lam, relevance=self.relevance, similarity=self.similarity)
        if algorithm == "neighbour-coverage":
            return build_objective(
                algorithm, lam, relevance=self.relevance, coverage=self.interests
            )
        if algorithm == "intent-aware":
            return build_objective(algorithm, lam, intents=self.interests)
        raise SubmodrankError(f"algorithm {algorithm!r} is not wired to the factor model")


def user_context(
    model: FactorModel,
    train: RatingsDataset,
    user: int,
    pool_size: Optional[int] = 100,
    neighbors: int = 10,
) -> UserContext:
    """Candidate pool = the user's ``pool_size`` highest-scored unrated items."""
    cand = unobserved_items(train, user)
    scores = predict_relevance(model, user, cand).weights
    if pool_size is not None and cand.size > pool_size:
        top = np.lexsort((cand, -scores))[:pool_size]
        cand = np.sort(cand[top])
    rel = predict_relevance(model, user, cand).weights
    sim = cosine_similarity(model.item_factors[cand])
    return UserContext(user, cand, rel, sim, coverage_matrix(sim, rel, neighbors))


def sample_users(split, n_users: int, seed: int) -> np.ndarray:
    """Seeded sample among users with at least one relevant held-out rating."""
    test = split.test
    eligible = np.unique(test.users[test.ratings >= RELEVANT_RATING])
    if eligible.size <= n_users:
        return eligible
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(eligible, size=n_users, replace=False))


@dataclass
class _Accumulator:
    alpha: list = field(default_factory=list)
    dcg: list = field(default_factory=list)
    ss: list = field(default_factory=list)
    fd: list = field(default_factory=list)
    failures: Counter = field(default_factory=Counter)


@dataclass(frozen=True)
class SweepRow:
    split: int
    lam: float
    alpha: float
    k: int
    dcg: float
    ss: float
    fd: float
    reason: str = ""


def _mean(xs) -> float:
    xs = [x for x in xs if not math.isnan(x)]
    return float(np.mean(xs)) if xs else math.nan


def run_split(split_index: int, split, cfg: SweepConfig, model: Optional[FactorModel] = None) -> list:
    if model is None:
        model = factorize_wnmf(
            split.train, cfg.rank, cfg.reg, cfg.unobserved_weight, cfg.iters, cfg.wnmf_seed
        )
    pop = popularity(split.train)
    users = sample_users(split, cfg.n_users, cfg.user_seed + split_index)
    k_max = max(cfg.k_grid)
    acc = {(lam, k): _Accumulator() for lam in cfg.lambda_grid for k in cfg.k_grid}
    test = split.test
    for user in users:
        ctx = user_context(model, split.train, int(user), cfg.pool_size, cfg.graph_neighbors)
        relevant = set(test.items[(test.users == user) & (test.ratings >= RELEVANT_RATING)].tolist())
        rated = split.train.items_of(int(user))
        for lam in cfg.lambda_grid:
            try:
                obj = ctx.objective(cfg.algorithm, lam)
                alpha = total_curvature(obj, check_monotone=False).alpha
                trace = greedy_maximize(obj, None, min(k_max, ctx.pool.size))
            except SubmodrankError as exc:
                for k in cfg.k_grid:
                    acc[lam, k].failures[type(exc).__name__] += 1
                continue
            ranked = ctx.pool[trace.selected]
            for k in cfg.k_grid:
                report = evaluate_list(int(user), ranked, relevant, rated, pop, model.item_factors, k)
                a = acc[lam, k]
                a.alpha.append(alpha)
                a.dcg.append(report.dcg)
                a.ss.append(report.serendipity)
                a.fd.append(report.feature_distance)
    rows = []
    for (lam, k), a in acc.items():
        reason = "; ".join(f"{n} users failed: {e}" for e, n in sorted(a.failures.items()))
        rows.append(
            SweepRow(split_index, lam, _mean(a.alpha), k, _mean(a.dcg), _mean(a.ss), _mean(a.fd), reason)
        )
    return rows


def run_sweep(ds: RatingsDataset, cfg: SweepConfig) -> list:
    splits = split_holdout(ds, cfg.fraction, cfg.n_splits, cfg.split_seed)
    rows = []
    for s, split in enumerate(splits):
        logger.info("split %d: %d train / %d test ratings", s, len(split.train), len(split.test))
        rows.extend(run_split(s, split, cfg))
    return sorted(rows, key=lambda r: (r.split, r.lam, r.k))


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.6f}"


def sweep_rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow([r.split, _fmt(r.lam), _fmt(r.alpha), r.k, _fmt(r.dcg), _fmt(r.ss), _fmt(r.fd), r.reason])
    return buf.getvalue()


def aggregate_over_splits(rows: Sequence[SweepRow], k: int) -> list:
    """Per-lambda means over splits at budget ``k``: (lambda, alpha, dcg, ss, fd)."""
    out = []
    for lam in sorted({r.lam for r in rows}):
        sel = [r for r in rows if r.lam == lam and r.k == k]
        out.append(
            (
                lam,
                _mean([r.alpha for r in sel]),
                _mean([r.dcg for r in sel]),
                _mean([r.ss for r in sel]),
                _mean([r.fd for r in sel]),
            )
        )
    return out


def bound_for(alpha: float) -> float:
    return approximation_bound(min(1.0, max(0.0, alpha)))
