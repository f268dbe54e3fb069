"""Cardinality-constrained maximization: eager greedy, lazy greedy, exhaustive oracle."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadParameter, BudgetTooLarge, TooLarge

ORACLE_LIMIT = 2_000_000
BOUND_SLACK = 1e-12


@dataclass
class GreedyTrace:
    selected: list = field(default_factory=list)
    values: list = field(default_factory=list)
    gains: list = field(default_factory=list)
    evaluations: int = 0
    # lazy greedy only: steps where a stale bound was exceeded and a full scan ran
    fallbacks: int = 0

    @property
    def value(self) -> float:
        return self.values[-1] if self.values else 0.0

    def prefix(self, k: int) -> "GreedyTrace":
        return GreedyTrace(
            self.selected[:k], self.values[:k], self.gains[:k], self.evaluations, self.fallbacks
        )

    def to_dict(self) -> dict:
        return {
            "selected": [int(i) for i in self.selected],
            "values": [float(v) for v in self.values],
            "gains": [float(g) for g in self.gains],
            "evaluations": int(self.evaluations),
            "fallbacks": int(self.fallbacks),
        }


@dataclass(frozen=True)
class OracleResult:
    optimum: tuple
    value: float
    sets_examined: int


def _candidates(obj, candidates) -> list:
    if candidates is None:
        return list(range(obj.n))
    out = sorted(int(c) for c in candidates)
    if len(set(out)) != len(out):
        raise BadParameter("candidate list contains duplicates")
    return out


def _check_budget(k: int, m: int):
    if k < 0:
        raise BadParameter("budget must be nonnegative")
    if k > m:
        raise BudgetTooLarge(f"budget {k} exceeds {m} candidates")


def _record(obj, trace: GreedyTrace, item: int):
    trace.selected.append(int(item))
    value = float(obj.evaluate(trace.selected))
    trace.evaluations += 1
    trace.gains.append(value - (trace.values[-1] if trace.values else 0.0))
    trace.values.append(value)


def greedy_maximize(obj, candidates=None, k: int = 1) -> GreedyTrace:
    """Steepest-ascent greedy: add the item with the largest marginal gain, k times.

    Ties go to the smallest item id. Negative gains are still taken so that
    exactly k items come back.
    """
    remaining = _candidates(obj, candidates)
    _check_budget(k, len(remaining))
    trace = GreedyTrace()
    for _ in range(k):
        gains = obj.marginal_gains(trace.selected, remaining)
        trace.evaluations += len(remaining)
        # remaining is ascending, so argmax picks the smallest id among ties
        pos = int(np.argmax(gains))
        _record(obj, trace, remaining.pop(pos))
    return trace


def lazy_greedy_maximize(obj, candidates=None, k: int = 1) -> GreedyTrace:
    """Greedy with stale upper bounds kept in a heap (Minoux's acceleration).

    Returns the same selection as :func:`greedy_maximize` for submodular
    objectives. If a re-evaluated gain ever exceeds its stale bound the
    objective is not submodular there; that step is redone as a full scan
    and ``fallbacks`` is incremented.
    """
    remaining = _candidates(obj, candidates)
    _check_budget(k, len(remaining))
    trace = GreedyTrace()
    if k == 0:
        return trace
    first = obj.marginal_gains([], remaining)
    trace.evaluations += len(remaining)
    # entries: (-bound, id, step at which the bound was computed)
    heap = [(-float(g), i, 0) for g, i in zip(first, remaining)]
    heapq.heapify(heap)
    for step in range(k):
        violated = False
        while True:
            neg, i, stamp = heap[0]
            if stamp == step:
                break
            gain = float(obj.marginal_gains(trace.selected, [i])[0])
            trace.evaluations += 1
            # rounding can push a gain a few ulps past its bound
            if gain > -neg + BOUND_SLACK * max(1.0, abs(neg)):
                violated = True
            heapq.heapreplace(heap, (-gain, i, step))
        if violated:
            trace.fallbacks += 1
            ids = sorted(entry[1] for entry in heap)
            gains = obj.marginal_gains(trace.selected, ids)
            trace.evaluations += len(ids)
            heap = [(-float(g), i, step) for g, i in zip(gains, ids)]
            heapq.heapify(heap)
        _record(obj, trace, heapq.heappop(heap)[1])
    return trace


def brute_force_maximize(
    obj,
    candidates=None,
    k: int = 1,
    *,
    mode: str = "at_most",
    limit: int = ORACLE_LIMIT,
) -> OracleResult:
    """Exact maximum over subsets of size <= k (``mode="at_most"``) or == k.

    Ties keep the lexicographically first subset in combination order.
    """
    items = _candidates(obj, candidates)
    _check_budget(k, len(items))
    if mode not in ("at_most", "exact"):
        raise BadParameter(f"unknown oracle mode {mode!r}")
    combos = math.comb(len(items), k)
    if combos > limit:
        raise TooLarge(f"C({len(items)}, {k}) = {combos} exceeds the oracle limit of {limit}", count=combos)
    sizes = range(k + 1) if mode == "at_most" else [k]
    best, best_val, examined = None, -math.inf, 0
    for r in sizes:
        for combo in itertools.combinations(items, r):
            v = obj.evaluate(combo)
            examined += 1
            if v > best_val:
                best, best_val = combo, v
    return OracleResult(tuple(best), float(best_val), examined)
