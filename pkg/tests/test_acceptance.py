"""End-to-end acceptance checks, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL - detail`` line; the
lines are repeated in the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from submodrank.curvature import approximation_bound, total_curvature
from submodrank.data import RatingsDataset, factorize_wnmf, synthesize_ratings
from submodrank.experiment import SweepConfig, aggregate_over_splits, run_sweep
from submodrank.greedy import greedy_maximize, lazy_greedy_maximize
from submodrank.instances import guarantee_suite, random_instance
from submodrank.metrics import dcg_at_k, feature_distance, ideal_dcg, serendipity_score
from submodrank.objectives import (
    CATALOG,
    CallableObjective,
    CompositeObjective,
    DiversityTerm,
    ModularFunction,
    check_structure,
    power_family,
)

FLOAT_SLACK = 1e-9


def test_criterion_1_bound_values(criterion):
    b01, b1 = approximation_bound(0.1), approximation_bound(1.0)
    ok = 0.95 <= b01 <= 0.952 and abs(b1 - (1 - 1 / math.e)) <= 1e-12
    assert criterion(1, ok, f"bound(0.1)={b01:.6f} bound(1)={b1:.12f}")


def test_criterion_2_greedy_guarantee(criterion):
    t0 = time.perf_counter()
    results, rejected = guarantee_suite(n=10, k=3, trials=200, seed=0)
    elapsed = time.perf_counter() - t0
    curv_fail = sum(not r.passed for r in results)
    classic_fail = sum(not r.classical_passed for r in results)
    worst = min(r.ratio - r.bound for r in results)
    ok = len(results) == 200 and curv_fail == 0 and classic_fail == 0 and elapsed < 120
    assert criterion(
        2,
        ok,
        f"200 instances ({rejected} rejected draws), curvature-bound violations={curv_fail}, "
        f"1-1/e violations={classic_fail}, tightest margin={worst:.4f}, {elapsed:.1f}s",
    )


def _row_transform(key, rng):
    builder, factory = CATALOG[key]
    # scaled reciprocal and linear need lambda > 0; power needs [0, 1]
    if builder in ("set-category", "intent-aware"):
        lam = float(rng.uniform(0.1, 2.0))
    else:
        lam = float(rng.random())
    return factory(lam)


def test_criterion_3_catalog_submodularity(criterion):
    """Each transform g over h = random nonnegative modular (positive offset so
    that reciprocal and log are defined at the empty set), normalized to
    F(empty) = 0; plus MMR on random nonnegative similarities."""
    rng = np.random.default_rng(3)
    n, per_row = 8, 50
    t0 = time.perf_counter()
    failures = {}
    for key, (builder, _) in CATALOG.items():
        if builder == "mmr":
            continue
        bad = 0
        for _ in range(per_row):
            g = _row_transform(key, rng)
            h = ModularFunction(rng.random(n), float(rng.uniform(0.05, 1.0)))
            obj = CompositeObjective(n, None, (DiversityTerm(1.0, g, h),))
            v = check_structure(obj)
            ok = v.submodular
            if g.kind in ("identity", "linear"):
                ok = ok and v.modular and total_curvature(obj).alpha == 0.0
            bad += not ok
        if bad:
            failures[f"{key}/{g.kind}"] = bad
    mmr_bad = 0
    for _ in range(per_row):
        mmr_bad += not check_structure(random_instance(rng, n, "mmr")).submodular
    if mmr_bad:
        failures["carbonell1998/mmr"] = mmr_bad
    # informational: the same rows as their algorithms compose them
    composed = {}
    for builder in ("tangent", "ppt", "set-category"):
        composed[builder] = sum(check_structure(random_instance(rng, n, builder)).submodular for _ in range(per_row))
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 60
    detail = ", ".join(f"{k} non-submodular {v}/{per_row}" for k, v in failures.items()) or "all rows submodular"
    info = ", ".join(f"{b} {c}/{per_row}" for b, c in composed.items())
    assert criterion(3, ok, f"{detail}; submodular as composed by the algorithm: {info}; {elapsed:.1f}s")


def test_criterion_4_curvature_endpoints(criterion):
    units = np.ones(6)
    a_mod = total_curvature(power_family(units, 1.0)).alpha
    a_cov = total_curvature(power_family(units, 0.0)).alpha
    ranks = [total_curvature(CallableObjective(6, lambda s, r=r: min(len(s), r))).alpha for r in range(1, 6)]
    ok = (
        abs(a_mod) <= FLOAT_SLACK
        and abs(a_cov - 1.0) <= FLOAT_SLACK
        and all(abs(a - 1.0) <= FLOAT_SLACK for a in ranks)
    )
    assert criterion(4, ok, f"power(1) alpha={a_mod:g}, power(0) alpha={a_cov:g}, truncated ranks alpha={ranks}")


@pytest.mark.slow
def test_criterion_5_tradeoff_trend(criterion):
    t0 = time.perf_counter()
    ds = synthesize_ratings(n_users=943, n_items=1682, n_ratings=100_000, seed=0)
    cfg = SweepConfig(fraction=0.05, n_splits=5, lambda_grid=(0.0, 0.25, 0.5, 0.75, 1.0), k_grid=(10,), n_users=200)
    rows = run_sweep(ds, cfg)
    elapsed = time.perf_counter() - t0
    agg = aggregate_over_splits(rows, 10)
    alpha = [a[1] for a in agg]
    rho = {
        name: spearmanr(alpha, [a[i] for a in agg]).statistic
        for i, name in ((2, "dcg"), (3, "ss"), (4, "fd"))
    }
    for lam, a, dcg, ss, fd in agg:
        print(f"  lambda={lam:.2f} alpha={a:.4f} dcg={dcg:.4f} ss={ss:.5f} fd={fd:.4f}")
    ok = rho["dcg"] <= -0.8 and rho["ss"] >= 0.8 and rho["fd"] >= 0.8 and elapsed < 15 * 60
    failed = [r.reason for r in rows if r.reason]
    assert criterion(
        5,
        ok,
        f"spearman(alpha, dcg)={rho['dcg']:+.3f} (need <= -0.8), ss={rho['ss']:+.3f}, "
        f"fd={rho['fd']:+.3f} (need >= +0.8); {len(failed)} rows with failures; {elapsed:.0f}s",
    )


def test_criterion_6_wnmf(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    problems = []
    negatives = 0

    def check_nonneg(it, U, V, loss):
        nonlocal negatives
        negatives += int((U < 0).sum() + (V < 0).sum())

    def monotone(h):
        return all(b <= a + 1e-9 for a, b in zip(h, h[1:]))

    for run in range(12):
        n_u, n_i = int(rng.integers(5, 80)), int(rng.integers(5, 80))
        mask = rng.random((n_u, n_i)) < rng.uniform(0.05, 0.6)
        u, i = np.nonzero(mask)
        ds = RatingsDataset(u, i, rng.integers(1, 6, u.size).astype(float), n_u, n_i)
        m = factorize_wnmf(
            ds,
            rank=int(rng.integers(1, 10)),
            reg=float(rng.uniform(0, 1)),
            unobserved_weight=float(rng.uniform(0, 1)),
            iters=100,
            seed=run,
            callback=check_nonneg,
        )
        if not monotone(m.loss_history):
            problems.append(f"random run {run} loss increased")

    big = synthesize_ratings(seed=1)
    m = factorize_wnmf(big, rank=32, iters=40, seed=0, callback=check_nonneg)
    if not monotone(m.loss_history):
        problems.append("100K run loss increased")

    uvec, vvec = rng.uniform(0.5, 1.5, 15), rng.uniform(0.5, 1.5, 20)
    R = np.outer(uvec, vvec)
    uu, ii = np.nonzero(R)
    planted = RatingsDataset(uu, ii, R[uu, ii], 15, 20)
    m = factorize_wnmf(planted, rank=1, reg=0.0, unobserved_weight=0.0, iters=500, seed=0, callback=check_nonneg)
    recovery = m.loss_history[-1] / m.loss_history[0]
    if recovery >= 1e-6:
        problems.append(f"planted recovery only {recovery:.2e}")
    if not monotone(m.loss_history):
        problems.append("planted loss increased")
    if negatives:
        problems.append(f"{negatives} negative factor entries")
    elapsed = time.perf_counter() - t0
    ok = not problems and elapsed < 60
    detail = "; ".join(problems) or "14 runs monotone, factors nonnegative every iteration"
    assert criterion(6, ok, f"{detail}; planted final/initial={recovery:.2e}; {elapsed:.1f}s")


def test_criterion_7_lazy_eager(criterion):
    rng = np.random.default_rng(7)
    families = ("interest-coverage", "binom-coverage", "set-category", "neighbour-coverage", "intent-aware", "modular")
    mismatches = more_evals = 0
    saved = 0
    for t in range(500):
        n = int(rng.integers(4, 31))
        k = int(rng.integers(1, min(n, 10) + 1))
        obj = random_instance(rng, n, families[t % len(families)])
        e, l = greedy_maximize(obj, None, k), lazy_greedy_maximize(obj, None, k)
        mismatches += l.selected != e.selected
        more_evals += l.evaluations > e.evaluations
        saved += e.evaluations - l.evaluations
    ok = mismatches == 0 and more_evals == 0
    assert criterion(
        7, ok, f"500 instances, selection mismatches={mismatches}, lazy>eager evaluations={more_evals}, "
        f"evaluations saved={saved}"
    )


def test_criterion_8_metric_oracles(criterion):
    examples = (
        dcg_at_k([0, 1, 2], {0, 2}, 3) == 1.5,
        serendipity_score([0, 1], set(), np.array([4, 1])) == 0.4,
        feature_distance([0, 1], np.array([[0.0, 0.0], [3.0, 4.0]])) == 5.0,
    )
    rng = np.random.default_rng(8)
    dcg_bad = ss_bad = fd_bad = 0
    for _ in range(1000):
        n = int(rng.integers(1, 15))
        ranked = rng.permutation(40)[:n].tolist()
        relevant = set(rng.choice(40, size=int(rng.integers(0, 20)), replace=False).tolist())
        k = int(rng.integers(1, 15))
        base = dcg_at_k(ranked, relevant, k)
        extra = ranked[int(rng.integers(n))]
        if dcg_at_k(ranked, relevant | {extra}, k) < base or base > ideal_dcg(k) + 1e-12:
            dcg_bad += 1
        if n > 1:
            p = int(rng.integers(1, n))
            if ranked[p] in relevant:
                moved = list(ranked)
                moved[p - 1], moved[p] = moved[p], moved[p - 1]
                dcg_bad += dcg_at_k(moved, relevant, k) < base
    for _ in range(1000):
        counts = rng.integers(1, 1000, size=int(rng.integers(2, 20)))
        rec = rng.permutation(counts.size)[: int(rng.integers(1, counts.size + 1))].tolist()
        s1, s2 = serendipity_score(rec, set(), counts), serendipity_score(rec, set(), 2 * counts)
        ss_bad += not math.isclose(s2, s1 / 2, rel_tol=1e-12)
    for _ in range(1000):
        X = rng.normal(size=(int(rng.integers(2, 12)), int(rng.integers(1, 8))))
        rec = list(range(X.shape[0]))
        d = feature_distance(rec, X)
        shifted = feature_distance(rec, X + rng.normal(scale=10.0, size=X.shape[1]))
        fd_bad += not math.isclose(shifted, d, rel_tol=1e-9, abs_tol=1e-9)
    ok = all(examples) and dcg_bad == ss_bad == fd_bad == 0
    assert criterion(
        8, ok, f"examples exact={list(examples)}, invariant violations dcg={dcg_bad} ss={ss_bad} fd={fd_bad} "
        "(1000 cases each)"
    )
