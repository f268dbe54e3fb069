"""Seeded random objective instances for oracle checks and property tests."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curvature import NEMHAUSER_FACTOR, approximation_bound, total_curvature
from .errors import TooLarge
from .greedy import ORACLE_LIMIT, brute_force_maximize, greedy_maximize
from .objectives import ModularFunction, build_objective, check_structure

MONOTONE_FAMILIES = (
    "interest-coverage",
    "binom-coverage",
    "set-category",
    "neighbour-coverage",
    "intent-aware",
    "ppt",
)
ALL_FAMILIES = MONOTONE_FAMILIES + ("tangent", "mmr")
MODULAR_FAMILIES = ("modular", "intent-aware", "interest-coverage-1")


def _categories(rng, n, c=4):
    cats = (rng.random((n, c)) < 0.4).astype(float)
    empty = cats.sum(axis=1) == 0
    cats[empty, rng.integers(c, size=empty.sum())] = 1.0
    return cats


def random_instance(rng: np.random.Generator, n: int, family: str):
    """One catalog objective over ``n`` items with nonnegative random inputs."""
    rel = rng.random(n)
    if family == "modular":
        return ModularFunction(rel)
    if family == "interest-coverage":
        return build_objective(family, float(rng.random()), interests=rng.random((n, 3)))
    if family == "interest-coverage-1":
        return build_objective("interest-coverage", 1.0, interests=rng.random((n, 3)))
    if family == "binom-coverage":
        return build_objective(family, float(rng.random()), relevance=rel, categories=_categories(rng, n))
    if family == "set-category":
        return build_objective(family, float(rng.uniform(0.5, 2.0)), categories=_categories(rng, n))
    if family == "neighbour-coverage":
        return build_objective(family, float(rng.uniform(0.5, 2.0)), relevance=rel, coverage=rng.random((n, 3)))
    if family == "intent-aware":
        return build_objective(family, float(rng.uniform(0.1, 2.0)), intents=rng.random((n, 3)))
    if family == "ppt":
        return build_objective(
            family, 1.0, relevance=3.0 * rel, tendency=rng.uniform(1.0, 3.0, n), observed_tendency=1.0
        )
    if family == "tangent":
        return build_objective(family, relevance=rng.uniform(0.5, 2.0, n))
    if family == "mmr":
        sim = rng.random((n, n))
        sim = (sim + sim.T) / 2.0
        np.fill_diagonal(sim, 1.0)
        return build_objective(family, float(rng.random()), relevance=rel, similarity=sim)
    raise ValueError(f"unknown family {family!r}")


def random_catalog_instance(rng: np.random.Generator, n: int, families=MONOTONE_FAMILIES):
    family = families[int(rng.integers(len(families)))]
    return family, random_instance(rng, n, family)


@dataclass(frozen=True)
class GuaranteeResult:
    family: str
    alpha: float
    bound: float
    greedy_value: float
    optimum: float

    @property
    def ratio(self) -> float:
        return 1.0 if self.optimum == 0 else self.greedy_value / self.optimum

    @property
    def passed(self) -> bool:
        return self.greedy_value >= self.bound * self.optimum

    @property
    def classical_passed(self) -> bool:
        return self.greedy_value >= NEMHAUSER_FACTOR * self.optimum


def guarantee_suite(n: int, k: int, trials: int, seed: int = 0, families=MONOTONE_FAMILIES, max_draws=None):
    """Greedy versus brute force on ``trials`` structure-verified instances.

    Instances that the exhaustive checker does not certify as monotone and
    submodular are redrawn. Returns (results, rejected_count).
    """
    # fail fast on an oversized oracle before drawing anything
    if math.comb(n, k) > ORACLE_LIMIT:
        raise TooLarge(f"C({n}, {k}) = {math.comb(n, k)} exceeds the oracle limit", count=math.comb(n, k))
    rng = np.random.default_rng(seed)
    results, rejected = [], 0
    max_draws = max_draws or 50 * trials
    while len(results) < trials:
        if len(results) + rejected >= max_draws:
            raise RuntimeError(f"only {len(results)} verified instances after {max_draws} draws")
        family, obj = random_catalog_instance(rng, n, families)
        verdict = check_structure(obj)
        if not (verdict.monotone and verdict.submodular):
            rejected += 1
            continue
        alpha = total_curvature(obj, check_monotone=False).alpha
        trace = greedy_maximize(obj, None, k)
        opt = brute_force_maximize(obj, None, k)
        results.append(GuaranteeResult(family, alpha, approximation_bound(alpha), trace.value, opt.value))
    return results, rejected
