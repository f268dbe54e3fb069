"""Ratings ingestion, holdout splits and the weighted NMF relevance model."""

from __future__ import annotations

import csv
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BadParameter,
    EmptyDataset,
    FractionOutOfRange,
    NonFiniteLoss,
    ParseError,
    UnknownUser,
)
from .objectives import ModularFunction

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RatingsDataset:
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    n_users: int
    n_items: int
    user_labels: tuple = ()
    item_labels: tuple = ()
    duplicates_dropped: int = 0

    def __post_init__(self):
        for name in ("users", "items"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        object.__setattr__(self, "ratings", np.asarray(self.ratings, dtype=float))
        if not self.user_labels:
            object.__setattr__(self, "user_labels", tuple(str(u) for u in range(self.n_users)))
        if not self.item_labels:
            object.__setattr__(self, "item_labels", tuple(str(i) for i in range(self.n_items)))

    def __len__(self):
        return self.ratings.size

    def subset(self, idx) -> "RatingsDataset":
        return RatingsDataset(
            self.users[idx],
            self.items[idx],
            self.ratings[idx],
            self.n_users,
            self.n_items,
            self.user_labels,
            self.item_labels,
        )

    def matrix(self) -> np.ndarray:
        R = np.zeros((self.n_users, self.n_items))
        R[self.users, self.items] = self.ratings
        return R

    def mask(self) -> np.ndarray:
        M = np.zeros((self.n_users, self.n_items), dtype=bool)
        M[self.users, self.items] = True
        return M

    def items_of(self, user: int) -> np.ndarray:
        return self.items[self.users == user]

    def user_index(self, label) -> int:
        try:
            return self.user_labels.index(str(label))
        except ValueError:
            raise UnknownUser(f"unknown user {label!r}") from None


def _label_order(labels) -> list:
    uniq = set(labels)
    try:
        return sorted(uniq, key=int)
    except ValueError:
        return sorted(uniq)


def _from_records(records, source: str) -> RatingsDataset:
    if not records:
        raise EmptyDataset(f"no ratings in {source}")
    latest = {}
    for u, i, r in records:
        latest[(u, i)] = r
    dropped = len(records) - len(latest)
    if dropped:
        warnings.warn(f"{dropped} duplicate (user, item) pairs in {source}; kept the last")
    user_labels = _label_order(u for u, _ in latest)
    item_labels = _label_order(i for _, i in latest)
    uidx = {u: n for n, u in enumerate(user_labels)}
    iidx = {i: n for n, i in enumerate(item_labels)}
    keys = list(latest)
    return RatingsDataset(
        np.array([uidx[u] for u, _ in keys]),
        np.array([iidx[i] for _, i in keys]),
        np.array([latest[k] for k in keys]),
        len(user_labels),
        len(item_labels),
        tuple(user_labels),
        tuple(item_labels),
        dropped,
    )


def _rating(text: str, line: int) -> float:
    try:
        r = float(text)
    except ValueError:
        raise ParseError(f"rating {text!r} is not a number", line) from None
    if not 1.0 <= r <= 5.0:
        raise ParseError(f"rating {r} outside [1, 5]", line)
    return r


def load_ratings(path, format: str = "movielens-dat") -> RatingsDataset:
    """Read MovieLens ``user::item::rating::timestamp`` lines or a CSV with a
    ``user,item,rating[,timestamp]`` header.

    Labels are remapped to dense indices in sorted label order (numeric when
    every label is an integer).
    """
    path = Path(path)
    records = []
    if format == "movielens-dat":
        with path.open(encoding="latin-1") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                parts = line.split("::")
                if len(parts) != 4:
                    raise ParseError(f"expected 4 '::'-separated fields, got {len(parts)}", lineno)
                u, i, r, ts = parts
                for name, value in (("user", u), ("item", i), ("timestamp", ts)):
                    if not value.strip().isdigit():
                        raise ParseError(f"{name} {value!r} is not an integer", lineno)
                records.append((u.strip(), i.strip(), _rating(r, lineno)))
    elif format == "csv":
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise EmptyDataset(f"no ratings in {path}")
            header = [h.strip().lower() for h in header]
            if header[:3] != ["user", "item", "rating"] or len(header) > 4:
                raise ParseError("header must be user,item,rating[,timestamp]", 1)
            for lineno, row in enumerate(reader, start=2):
                if not row or not any(cell.strip() for cell in row):
                    continue
                if len(row) != len(header):
                    raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno)
                records.append((row[0].strip(), row[1].strip(), _rating(row[2], lineno)))
    else:
        raise BadParameter(f"unknown ratings format {format!r}")
    return _from_records(records, str(path))


def write_movielens(ds: RatingsDataset, path) -> None:
    order = np.lexsort((ds.items, ds.users))
    with Path(path).open("w") as fh:
        for n in order:
            u, i, r = ds.users[n], ds.items[n], ds.ratings[n]
            fh.write(f"{ds.user_labels[u]}::{ds.item_labels[i]}::{r:g}::{978300000 + n}\n")


# --------------------------------------------------------------------------
# holdout splits
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HoldoutSplit:
    train: RatingsDataset
    test: RatingsDataset
    seed: int
    fraction: float


def split_holdout(ds: RatingsDataset, fraction: float = 0.05, n_splits: int = 5, seed: int = 0) -> list:
    """Independent uniform holdout splits; split s is drawn with seed + s."""
    if not 0.0 < fraction < 1.0:
        raise FractionOutOfRange(f"test fraction must lie in (0, 1), got {fraction}")
    if n_splits < 1:
        raise BadParameter("n_splits must be at least 1")
    total = len(ds)
    n_test = int(np.floor(fraction * total + 0.5))
    splits = []
    for s in range(n_splits):
        perm = np.random.default_rng(seed + s).permutation(total)
        test_idx = np.sort(perm[:n_test])
        train_idx = np.sort(perm[n_test:])
        splits.append(HoldoutSplit(ds.subset(train_idx), ds.subset(test_idx), seed + s, fraction))
    return splits


# --------------------------------------------------------------------------
# weighted NMF
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FactorModel:
    user_factors: np.ndarray
    item_factors: np.ndarray
    loss_history: tuple
    params: dict = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return self.user_factors.shape[1]

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        np.savetxt(d / "U.csv", self.user_factors, delimiter=",", fmt="%.17g")
        np.savetxt(d / "V.csv", self.item_factors, delimiter=",", fmt="%.17g")
        meta = dict(self.params, rank=self.rank, loss_history=list(self.loss_history))
        (d / "model.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, directory) -> "FactorModel":
        d = Path(directory)
        meta = json.loads((d / "model.json").read_text())
        U = np.loadtxt(d / "U.csv", delimiter=",", ndmin=2)
        V = np.loadtxt(d / "V.csv", delimiter=",", ndmin=2)
        history = tuple(meta.pop("loss_history", ()))
        meta.pop("rank", None)
        return cls(U, V, history, meta)


def wnmf_loss(R, W, U, V, reg) -> float:
    resid = R - U @ V.T
    return float((W * resid * resid).sum() + reg * ((U * U).sum() + (V * V).sum()))


def factorize_wnmf(
    train: RatingsDataset,
    rank: int = 32,
    reg: float = 0.1,
    unobserved_weight: float = 0.05,
    iters: int = 200,
    seed: int = 0,
    *,
    callback=None,
) -> FactorModel:
    """Regularized weighted NMF by multiplicative updates.

    Minimizes sum_ui w_ui (r_ui - U_u.V_i)^2 + reg (|U|^2 + |V|^2), where
    unobserved cells have target 0 and weight ``unobserved_weight``.
    ``loss_history[0]`` is the loss at the random initialization.
    """
    if rank < 1 or iters < 1 or reg < 0 or not 0.0 <= unobserved_weight <= 1.0:
        raise BadParameter("need rank >= 1, iters >= 1, reg >= 0, 0 <= unobserved_weight <= 1")
    R = train.matrix()
    W = np.where(train.mask(), 1.0, unobserved_weight)
    WR = W * R
    rng = np.random.default_rng(seed)
    U = rng.uniform(size=(train.n_users, rank))
    V = rng.uniform(size=(train.n_items, rank))
    eps = 1e-300
    history = [wnmf_loss(R, W, U, V, reg)]
    for it in range(iters):
        U *= (WR @ V) / ((W * (U @ V.T)) @ V + reg * U + eps)
        V *= (WR.T @ U) / ((W * (U @ V.T)).T @ U + reg * V + eps)
        loss = wnmf_loss(R, W, U, V, reg)
        if not np.isfinite(loss):
            raise NonFiniteLoss(f"loss became {loss} at iteration {it}")
        history.append(loss)
        if callback is not None:
            callback(it, U, V, loss)
    params = {
        "reg": reg,
        "unobserved_weight": unobserved_weight,
        "iters": iters,
        "seed": seed,
    }
    return FactorModel(U, V, tuple(history), params)


# --------------------------------------------------------------------------
# derived inputs
# --------------------------------------------------------------------------


def predict_relevance(model: FactorModel, user: int, candidates: Optional[Sequence[int]] = None) -> ModularFunction:
    """Modular relevance over ``candidates`` (local positions), rel(i) = U_user . V_i."""
    if not 0 <= user < model.user_factors.shape[0]:
        raise UnknownUser(f"user index {user} out of range")
    V = model.item_factors if candidates is None else model.item_factors[list(candidates)]
    return ModularFunction(V @ model.user_factors[user])


def item_similarity(model: FactorModel) -> np.ndarray:
    """Cosine similarity of item factor rows; all-zero rows get similarity 0."""
    return cosine_similarity(model.item_factors)


def cosine_similarity(V: np.ndarray) -> np.ndarray:
    """Row-wise cosine similarity clipped to [0, 1], exactly symmetric."""
    V = np.asarray(V, dtype=float)
    norms = np.linalg.norm(V, axis=1)
    nz = norms > 0
    Vn = np.zeros_like(V)
    Vn[nz] = V[nz] / norms[nz, None]
    S = Vn @ Vn.T
    S = np.clip((S + S.T) / 2.0, 0.0, 1.0)
    S[np.diag_indices_from(S)] = np.where(nz, 1.0, 0.0)
    return S


@dataclass(frozen=True, eq=False)
class PopularityTable:
    counts: np.ndarray


def popularity(train: RatingsDataset) -> PopularityTable:
    return PopularityTable(np.bincount(train.items, minlength=train.n_items))


def unobserved_items(train: RatingsDataset, user: int) -> np.ndarray:
    seen = np.zeros(train.n_items, dtype=bool)
    seen[train.items_of(user)] = True
    return np.flatnonzero(~seen)


# --------------------------------------------------------------------------
# synthetic ratings
# --------------------------------------------------------------------------


def synthesize_ratings(
    n_users: int = 943,
    n_items: int = 1682,
    n_ratings: int = 100_000,
    n_genres: int = 18,
    min_per_user: int = 20,
    seed: int = 0,
) -> RatingsDataset:
    """MovieLens-100K-shaped ratings from a seeded genre/popularity model.

    Items carry one to three genres, a heavy-tailed popularity and a quality
    offset correlated with popularity. Users carry a sparse genre taste and
    a heavy-tailed activity level (at least ``min_per_user`` ratings). Which
    items a user rates depends on popularity and taste; the rating value on
    taste, quality and noise. Item labels are shuffled so that item ids
    carry no information.
    """
    if n_ratings < n_users * min_per_user or n_ratings > n_users * n_items:
        raise BadParameter("n_ratings incompatible with user count and minimum activity")
    rng = np.random.default_rng(seed)

    genres = np.zeros((n_items, n_genres))
    genre_share = rng.dirichlet(np.full(n_genres, 0.8))
    for i in range(n_items):
        m = rng.choice([1, 2, 3], p=[0.45, 0.4, 0.15])
        genres[i, rng.choice(n_genres, size=m, replace=False, p=genre_share)] = 1.0
    genres /= genres.sum(axis=1, keepdims=True)
    pop_z = rng.normal(size=n_items)
    log_pop = 2.1 * pop_z
    quality = 0.35 * pop_z + rng.normal(scale=0.35, size=n_items)

    taste = rng.dirichlet(np.full(n_genres, 0.25), size=n_users)
    activity = rng.lognormal(mean=0.0, sigma=1.2, size=n_users)
    extra = n_ratings - n_users * min_per_user
    counts = min_per_user + np.floor(extra * activity / activity.sum()).astype(int)
    cap = n_items // 2
    counts = np.minimum(counts, cap)
    while counts.sum() < n_ratings:
        room = np.flatnonzero(counts < cap)
        counts[rng.choice(room)] += 1

    user_bias = rng.normal(scale=0.45, size=n_users)
    users, items, ratings = [], [], []
    for u in range(n_users):
        affinity = genres @ taste[u]  # in [0, 1]
        keys = log_pop + 2.5 * np.log(0.03 + affinity) + rng.gumbel(size=n_items)
        chosen = np.argpartition(-keys, counts[u])[: counts[u]]
        latent = (
            3.15
            + 2.0 * (affinity[chosen] - affinity[chosen].mean())
            + quality[chosen]
            + user_bias[u]
            + rng.normal(scale=1.05, size=chosen.size)
        )
        users.append(np.full(chosen.size, u))
        items.append(chosen)
        ratings.append(np.clip(np.rint(latent), 1, 5))

    label_perm = rng.permutation(n_items)
    item_labels = tuple(str(label_perm[i] + 1) for i in range(n_items))
    # reindex items so that index order follows label order
    order = np.argsort(label_perm)
    remap = np.empty(n_items, dtype=np.int64)
    remap[order] = np.arange(n_items)
    items_arr = remap[np.concatenate(items)]
    return RatingsDataset(
        np.concatenate(users),
        items_arr,
        np.concatenate(ratings),
        n_users,
        n_items,
        tuple(str(u + 1) for u in range(n_users)),
        tuple(item_labels[i] for i in order),
    )
