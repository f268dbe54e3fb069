"""Set functions used by re-ranking diversifiers.

Every objective here is a concave (or linear) transform applied to one or
more modular functions, plus an optional modular relevance part::

    F(S) = f(S) + sum_t  lam_t * g_t(h_t(S))  -  F_raw(empty)

The one exception is MMR, whose redundancy penalty uses a max over the
selected set and is kept as its own type.

Objectives are immutable. ``evaluate`` and ``marginal_gain`` never mutate
state, so they can be shared freely across threads.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
from scipy.special import digamma

from .errors import (
    BadParameter,
    DomainError,
    DuplicateItem,
    MissingInput,
    TooLarge,
)

STRUCTURE_LIMIT = 12
EQUALITY_TOL = 1e-9


def as_items(S: Iterable[int], n: int) -> np.ndarray:
    """Validate ``S`` against a ground set of size ``n``; return sorted indices.

    Sorting makes F(S) bitwise independent of the order S was listed in.
    """
    idx = np.sort(np.fromiter((int(i) for i in S), dtype=np.int64))
    if idx.size:
        if idx[0] < 0 or idx[-1] >= n:
            raise IndexError(f"item outside ground set [0, {n})")
        if np.any(idx[1:] == idx[:-1]):
            raise DuplicateItem("set contains duplicate items")
    return idx


@dataclass(frozen=True)
class GroundSet:
    size: int
    labels: Optional[tuple] = None

    def __post_init__(self):
        if self.size < 1:
            raise BadParameter("ground set must hold at least one item")
        if self.labels is not None and len(self.labels) != self.size:
            raise BadParameter("labels must match ground set size")

    def items(self) -> range:
        return range(self.size)


# --------------------------------------------------------------------------
# set function base
# --------------------------------------------------------------------------


class SetFunction:
    """Value-oracle interface shared by all objectives.

    Subclasses implement ``evaluate``; gains fall back to differences of
    evaluations unless a faster ``marginal_gains`` is provided.
    """

    n: int

    def evaluate(self, S: Iterable[int]) -> float:
        raise NotImplementedError

    def __call__(self, S: Iterable[int]) -> float:
        return self.evaluate(S)

    def marginal_gains(self, S: Sequence[int], candidates: Sequence[int]) -> np.ndarray:
        S = list(S)
        members = set(S)
        base = self.evaluate(S)
        out = np.empty(len(candidates))
        for pos, j in enumerate(candidates):
            if j in members:
                raise DuplicateItem(f"item {j} already in the set")
            out[pos] = self.evaluate(S + [int(j)]) - base
        return out

    def marginal_gain(self, S: Sequence[int], j: int) -> float:
        if int(j) in set(int(i) for i in S):
            raise DuplicateItem(f"item {j} already in the set")
        return float(self.marginal_gains(S, [int(j)])[0])


class CallableObjective(SetFunction):
    """Wrap a plain Python callable ``fn(frozenset) -> float`` as a set function."""

    def __init__(self, n: int, fn: Callable[[frozenset], float], name: str = "callable"):
        self.n = int(n)
        self._fn = fn
        self.name = name

    def evaluate(self, S):
        idx = as_items(S, self.n)
        return float(self._fn(frozenset(idx.tolist())))

    def __repr__(self):
        return f"CallableObjective(n={self.n}, name={self.name!r})"


# --------------------------------------------------------------------------
# modular functions and scalar transforms
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModularFunction(SetFunction):
    weights: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1:
            raise BadParameter("modular weights must be one-dimensional")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def n(self) -> int:
        return self.weights.size

    def evaluate(self, S):
        idx = as_items(S, self.n)
        return self.offset + float(self.weights[idx].sum())

    def marginal_gains(self, S, candidates):
        cand = np.asarray(candidates, dtype=np.int64)
        if set(cand.tolist()) & set(int(i) for i in S):
            raise DuplicateItem("candidate already in the set")
        return self.weights[cand].copy()

    def scaled(self, factor: float) -> "ModularFunction":
        return ModularFunction(self.weights * factor, self.offset * factor)


_POSITIVE_DOMAIN = {"reciprocal", "log", "scaled_reciprocal"}
_NONNEG_DOMAIN = {"power", "saturation", "harmonic"}
_KINDS = _POSITIVE_DOMAIN | _NONNEG_DOMAIN | {"identity", "linear"}


@dataclass(frozen=True)
class ConcaveTransform:
    """Scalar g applied on top of a modular function.

    ``harmonic`` is the running sum of the scaled reciprocal: the m-th unit
    contributes 1/(lam*m), extended to real x through the digamma function.
    It is how the set-category objective uses the reciprocal row.
    """

    kind: str
    param: Optional[float] = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise BadParameter(f"unknown transform {self.kind!r}")
        p = self.param
        if self.kind in ("scaled_reciprocal", "linear", "harmonic"):
            if p is None or not p > 0:
                raise BadParameter(f"{self.kind} needs lambda > 0, got {p}")
        elif self.kind == "power":
            if p is None or not 0.0 <= p <= 1.0:
                raise BadParameter(f"power needs lambda in [0, 1], got {p}")
        elif p is not None:
            raise BadParameter(f"{self.kind} takes no parameter")

    def in_domain(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind in _POSITIVE_DOMAIN:
            return x > 0
        if self.kind in _NONNEG_DOMAIN:
            return x >= 0
        return np.isfinite(x)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(self.in_domain(x)):
            raise DomainError(f"{self} evaluated outside its domain at {x}")
        k, lam = self.kind, self.param
        if k == "identity":
            out = x.copy()
        elif k == "linear":
            out = lam * x
        elif k == "reciprocal":
            out = 1.0 / x
        elif k == "scaled_reciprocal":
            out = 1.0 / (lam * x)
        elif k == "log":
            out = np.log(x)
        elif k == "power":
            # 0**0 is taken as 0 so that lam=0 yields a coverage indicator
            pos = x > 0
            out = np.zeros_like(x)
            out[pos] = x[pos] ** lam
        elif k == "saturation":
            out = x / (1.0 + x)
        else:  # harmonic
            out = (digamma(x + 1.0) + np.euler_gamma) / lam
        return out if out.ndim else float(out)

    def __str__(self):
        return self.kind if self.param is None else f"{self.kind}({self.param:g})"


def identity() -> ConcaveTransform:
    return ConcaveTransform("identity")


def reciprocal() -> ConcaveTransform:
    return ConcaveTransform("reciprocal")


def log() -> ConcaveTransform:
    return ConcaveTransform("log")


def scaled_reciprocal(lam: float) -> ConcaveTransform:
    return ConcaveTransform("scaled_reciprocal", lam)


def power(lam: float) -> ConcaveTransform:
    return ConcaveTransform("power", lam)


def saturation() -> ConcaveTransform:
    return ConcaveTransform("saturation")


def linear(lam: float) -> ConcaveTransform:
    return ConcaveTransform("linear", lam)


def harmonic(lam: float = 1.0) -> ConcaveTransform:
    return ConcaveTransform("harmonic", lam)


# algorithm -> (objective builder name, transform factory taking lambda)
CATALOG = {
    "carbonell1998": ("mmr", lambda lam: identity()),
    "onuma2009": ("tangent", lambda lam: reciprocal()),
    "oh2011": ("ppt", lambda lam: log()),
    "su2013": ("set-category", lambda lam: scaled_reciprocal(lam)),
    "vargas2014": ("binom-coverage", lambda lam: power(lam)),
    "puthiya2016": ("interest-coverage", lambda lam: power(lam)),
    "wu2016": ("neighbour-coverage", lambda lam: saturation()),
    "wasilewski2018": ("intent-aware", lambda lam: linear(lam)),
}


# --------------------------------------------------------------------------
# composite objective
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DiversityTerm:
    weight: float
    transform: ConcaveTransform
    inner: ModularFunction


@dataclass(frozen=True, eq=False)
class _TermGroup:
    transform: ConcaveTransform
    weights: np.ndarray  # (T,)
    inner: np.ndarray  # (n, T)
    offsets: np.ndarray  # (T,)
    guarded: np.ndarray  # (T,) bool: h(empty) outside the domain -> term is 0 at empty

    def values(self, h: np.ndarray, empty: bool) -> np.ndarray:
        if empty and self.guarded.any():
            out = np.zeros_like(h)
            ok = ~self.guarded
            if ok.any():
                out[ok] = self.transform(h[ok])
            return out
        return np.atleast_1d(self.transform(h))


@dataclass(frozen=True, eq=False)
class CompositeObjective(SetFunction):
    """``f(S) + sum_t lam_t g_t(h_t(S))``, shifted so that F(empty) = 0.

    Terms whose inner value at the empty set lies outside the transform's
    domain (log or reciprocal of zero) contribute 0 at the empty set.
    """

    n: int
    relevance: Optional[ModularFunction] = None
    terms: tuple = ()
    normalization: float = field(init=False, default=0.0)

    def __post_init__(self):
        n = int(self.n)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.relevance is not None and self.relevance.n != n:
            raise BadParameter("relevance size does not match ground set")
        by_transform: dict = {}
        for t in self.terms:
            if t.inner.n != n:
                raise BadParameter("diversity term size does not match ground set")
            by_transform.setdefault(t.transform, []).append(t)
        groups = []
        for transform, ts in by_transform.items():
            offsets = np.array([t.inner.offset for t in ts])
            groups.append(
                _TermGroup(
                    transform=transform,
                    weights=np.array([t.weight for t in ts], dtype=float),
                    inner=np.column_stack([t.inner.weights for t in ts]),
                    offsets=offsets,
                    guarded=~transform.in_domain(offsets),
                )
            )
        object.__setattr__(self, "_groups", tuple(groups))
        object.__setattr__(self, "normalization", 0.0)
        object.__setattr__(self, "normalization", self._raw(np.empty(0, dtype=np.int64)))

    def _raw(self, idx: np.ndarray) -> float:
        total = 0.0
        if self.relevance is not None:
            total += self.relevance.offset + float(self.relevance.weights[idx].sum())
        empty = idx.size == 0
        for g in self._groups:
            h = g.offsets + g.inner[idx].sum(axis=0)
            total += float(g.weights @ g.values(h, empty))
        return total

    def evaluate(self, S):
        return self._raw(as_items(S, self.n)) - self.normalization

    def marginal_gains(self, S, candidates):
        idx = as_items(S, self.n)
        cand = np.asarray(candidates, dtype=np.int64)
        if np.intersect1d(idx, cand).size:
            raise DuplicateItem("candidate already in the set")
        gains = np.zeros(cand.size)
        if self.relevance is not None:
            gains += self.relevance.weights[cand]
        empty = idx.size == 0
        for g in self._groups:
            h = g.offsets + g.inner[idx].sum(axis=0)
            before = g.values(h, empty)
            after = g.transform(h[None, :] + g.inner[cand])
            # row-wise reduction keeps a candidate's gain independent of batch size
            gains += ((after - before[None, :]) * g.weights).sum(axis=1)
        return gains

    def __repr__(self):
        kinds = ", ".join(f"{len(g.weights)}x{g.transform}" for g in self._groups)
        rel = "yes" if self.relevance is not None else "no"
        return f"CompositeObjective(n={self.n}, relevance={rel}, terms=[{kinds}])"


# --------------------------------------------------------------------------
# MMR
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MmrObjective(SetFunction):
    """Sum over S of ``lam*rel(i) - (1-lam) * max_{j in S, j != i} sim(i, j)``.

    The max over an empty set is 0, so a lone item carries no penalty.
    """

    relevance: ModularFunction
    similarity: np.ndarray
    lam: float

    def __post_init__(self):
        sim = np.array(self.similarity, dtype=float)
        n = self.relevance.n
        if sim.shape != (n, n):
            raise BadParameter(f"similarity must be {n}x{n}, got {sim.shape}")
        if not np.array_equal(sim, sim.T):
            raise BadParameter("similarity matrix must be symmetric")
        if sim.size and (sim.min() < 0 or sim.max() > 1):
            raise BadParameter("similarity entries must lie in [0, 1]")
        if not 0.0 <= self.lam <= 1.0:
            raise BadParameter(f"MMR trade-off must lie in [0, 1], got {self.lam}")
        sim.setflags(write=False)
        object.__setattr__(self, "similarity", sim)
        object.__setattr__(self, "lam", float(self.lam))

    @property
    def n(self) -> int:
        return self.relevance.n

    def _penalties(self, idx: np.ndarray) -> np.ndarray:
        if idx.size < 2:
            return np.zeros(idx.size)
        sub = self.similarity[np.ix_(idx, idx)].copy()
        np.fill_diagonal(sub, -np.inf)
        return sub.max(axis=1)

    def evaluate(self, S):
        idx = as_items(S, self.n)
        rel = self.relevance.weights[idx]
        return float(np.sum(self.lam * rel - (1.0 - self.lam) * self._penalties(idx)))

    def marginal_gains(self, S, candidates):
        idx = as_items(S, self.n)
        cand = np.asarray(candidates, dtype=np.int64)
        if np.intersect1d(idx, cand).size:
            raise DuplicateItem("candidate already in the set")
        rel = self.relevance.weights[cand]
        if idx.size == 0:
            return self.lam * rel
        cross = self.similarity[np.ix_(cand, idx)]  # (c, |S|)
        current = self._penalties(idx)
        own = cross.max(axis=1)
        bumped = np.maximum(cross, current[None, :]) - current[None, :]
        return self.lam * rel - (1.0 - self.lam) * (own + bumped.sum(axis=1))


# --------------------------------------------------------------------------
# objective catalog
# --------------------------------------------------------------------------


def _modular(x, name: str, n: Optional[int] = None) -> ModularFunction:
    if x is None:
        raise MissingInput(f"missing input: {name}")
    m = x if isinstance(x, ModularFunction) else ModularFunction(np.asarray(x, dtype=float))
    if n is not None and m.n != n:
        raise BadParameter(f"{name} has {m.n} items, expected {n}")
    return m


def _matrix(x, name: str) -> np.ndarray:
    if x is None:
        raise MissingInput(f"missing input: {name}")
    a = np.asarray(x, dtype=float)
    if a.ndim != 2:
        raise BadParameter(f"{name} must be an items x columns matrix")
    if a.min(initial=0.0) < 0:
        raise BadParameter(f"{name} must be nonnegative")
    return a


def _column_terms(mat: np.ndarray, transform: ConcaveTransform, weights=None) -> list:
    w = np.ones(mat.shape[1]) if weights is None else np.asarray(weights, dtype=float)
    return [
        DiversityTerm(float(w[t]), transform, ModularFunction(mat[:, t]))
        for t in range(mat.shape[1])
    ]


def build_objective(
    algorithm: str,
    lam: Optional[float] = None,
    *,
    relevance=None,
    similarity=None,
    tendency=None,
    observed_tendency: Optional[float] = None,
    categories=None,
    category_weights=None,
    interests=None,
    coverage=None,
    intents=None,
) -> SetFunction:
    """Build one of the catalogued re-ranking objectives.

    ``lam`` is the algorithm's own hyperparameter: the MMR trade-off, the
    power exponent for coverage objectives, the reciprocal scale for
    set-category, the slope for intent-aware, and the diversity weight for
    tangent, ppt and neighbour-coverage (default 1 for those three).
    """
    algo = algorithm.lower().replace("_", "-")

    if algo == "mmr":
        if lam is None:
            raise MissingInput("missing input: lam")
        rel = _modular(relevance, "relevance")
        if similarity is None:
            raise MissingInput("missing input: similarity")
        return MmrObjective(rel, np.asarray(similarity, dtype=float), lam)

    if algo == "tangent":
        rel = _modular(relevance, "relevance")
        weight = 1.0 if lam is None else float(lam)
        return CompositeObjective(rel.n, rel, [DiversityTerm(weight, reciprocal(), rel)])

    if algo == "ppt":
        h = _modular(tendency, "tendency")
        if observed_tendency is None:
            raise MissingInput("missing input: observed_tendency")
        if not observed_tendency > 0:
            raise BadParameter("observed_tendency must be positive")
        weight = 1.0 if lam is None else float(lam)
        rel = None if relevance is None else _modular(relevance, "relevance", h.n)
        inner = h.scaled(1.0 / observed_tendency)
        return CompositeObjective(h.n, rel, [DiversityTerm(weight, log(), inner)])

    if algo == "set-category":
        cats = _matrix(categories, "categories")
        scale = 1.0 if lam is None else float(lam)
        rel = None if relevance is None else _modular(relevance, "relevance", cats.shape[0])
        return CompositeObjective(cats.shape[0], rel, _column_terms(cats, harmonic(scale)))

    if algo in ("binom-coverage", "interest-coverage", "neighbour-coverage", "intent-aware"):
        if algo != "neighbour-coverage" and lam is None:
            raise MissingInput("missing input: lam")
        if algo == "binom-coverage":
            cats = _matrix(categories, "categories")
            rel = _modular(relevance, "relevance", cats.shape[0])
            g = power(lam)
            prior = (
                np.full(cats.shape[1], 1.0 / cats.shape[1])
                if category_weights is None
                else np.asarray(category_weights, dtype=float)
            )
            # coverage: one power term per genre; non-redundancy: power of the
            # prior-weighted genre count
            terms = _column_terms(cats, g, prior)
            terms.append(DiversityTerm(1.0, g, ModularFunction(cats @ prior)))
            return CompositeObjective(cats.shape[0], rel, terms)
        if algo == "interest-coverage":
            mat = _matrix(interests, "interests")
            rel = None if relevance is None else _modular(relevance, "relevance", mat.shape[0])
            return CompositeObjective(mat.shape[0], rel, _column_terms(mat, power(lam)))
        if algo == "neighbour-coverage":
            mat = _matrix(coverage, "coverage")
            rel = _modular(relevance, "relevance", mat.shape[0])
            weight = 1.0 if lam is None else float(lam)
            terms = _column_terms(mat, saturation(), np.full(mat.shape[1], weight))
            return CompositeObjective(mat.shape[0], rel, terms)
        mat = _matrix(intents, "intents")
        return CompositeObjective(mat.shape[0], None, _column_terms(mat, linear(lam)))

    raise BadParameter(f"unknown algorithm {algorithm!r}")


ALGORITHMS = (
    "mmr",
    "tangent",
    "ppt",
    "set-category",
    "binom-coverage",
    "interest-coverage",
    "neighbour-coverage",
    "intent-aware",
)


def power_family(inner, lam: float) -> CompositeObjective:
    """Single power term over one or more inner modular columns."""
    mat = np.asarray(inner, dtype=float)
    if mat.ndim == 1:
        mat = mat[:, None]
    return CompositeObjective(mat.shape[0], None, _column_terms(mat, power(lam)))


# --------------------------------------------------------------------------
# exhaustive structure checks
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class StructureVerdict:
    submodular: bool
    modular: bool
    monotone: bool
    submodular_witness: Optional[tuple] = None
    modular_witness: Optional[tuple] = None
    monotone_witness: Optional[tuple] = None

    @property
    def witness(self) -> Optional[tuple]:
        return self.submodular_witness or self.monotone_witness or self.modular_witness


def _resolve_items(ground, obj) -> list:
    if ground is None:
        return list(range(obj.n))
    if isinstance(ground, GroundSet):
        return list(ground.items())
    if isinstance(ground, (int, np.integer)):
        return list(range(int(ground)))
    return [int(i) for i in ground]


def subset_values(obj: SetFunction, items: Sequence[int]) -> np.ndarray:
    """F evaluated on every subset of ``items``, indexed by bitmask."""
    m = len(items)
    vals = np.empty(1 << m)
    for mask in range(1 << m):
        vals[mask] = obj.evaluate([items[b] for b in range(m) if mask >> b & 1])
    return vals


def check_structure(
    obj: SetFunction,
    ground: Union[GroundSet, int, Sequence[int], None] = None,
    *,
    limit: int = STRUCTURE_LIMIT,
    tol: float = EQUALITY_TOL,
) -> StructureVerdict:
    """Exhaustively test submodularity, modularity and monotonicity.

    Uses the local form of the lattice inequality,
    F(S+j) + F(S+k) >= F(S+j+k) + F(S) for all S and j < k outside S, which
    is equivalent to checking every pair of subsets. Violations are
    reported for the first (S bitmask, j, k) in lexicographic order; the
    witness is the pair (S+j, S+k).
    """
    items = _resolve_items(ground, obj)
    m = len(items)
    if m > limit:
        raise TooLarge(f"{m} items exceed the exhaustive limit of {limit}", count=1 << m)
    vals = subset_values(obj, items)
    masks = np.arange(1 << m)

    def as_set(mask):
        return frozenset(items[b] for b in range(m) if mask >> b & 1)

    sub_first = mod_first = mono_first = None
    for j in range(m):
        bj = 1 << j
        free = masks[(masks & bj) == 0]
        drop = vals[free] - vals[free | bj]
        bad = free[drop > tol]
        if bad.size and (mono_first is None or (bad[0], j) < mono_first):
            mono_first = (int(bad[0]), j)
        for k in range(j + 1, m):
            bk = 1 << k
            base = free[(free & bk) == 0]
            diff = vals[base | bj] + vals[base | bk] - vals[base | bj | bk] - vals[base]
            bad = base[diff < -tol]
            if bad.size and (sub_first is None or (bad[0], j, k) < sub_first):
                sub_first = (int(bad[0]), j, k)
            bad = base[np.abs(diff) > tol]
            if bad.size and (mod_first is None or (bad[0], j, k) < mod_first):
                mod_first = (int(bad[0]), j, k)

    def pair(v):
        S, j, k = v
        return as_set(S | 1 << j), as_set(S | 1 << k)

    return StructureVerdict(
        submodular=sub_first is None,
        modular=mod_first is None,
        monotone=mono_first is None,
        submodular_witness=None if sub_first is None else pair(sub_first),
        modular_witness=None if mod_first is None else pair(mod_first),
        monotone_witness=None
        if mono_first is None
        else (as_set(mono_first[0]), as_set(mono_first[0] | 1 << mono_first[1])),
    )


def is_normalized(obj: SetFunction, tol: float = EQUALITY_TOL) -> bool:
    return math.isclose(obj.evaluate([]), 0.0, abs_tol=tol)


def all_subsets(items: Sequence[int], max_size: Optional[int] = None):
    top = len(items) if max_size is None else max_size
    for r in range(top + 1):
        yield from itertools.combinations(items, r)
