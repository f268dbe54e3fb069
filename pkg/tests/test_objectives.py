import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from submodrank.errors import BadParameter, DomainError, DuplicateItem, MissingInput, TooLarge
from submodrank.objectives import (
    CATALOG,
    CallableObjective,
    CompositeObjective,
    ConcaveTransform,
    DiversityTerm,
    GroundSet,
    MmrObjective,
    ModularFunction,
    build_objective,
    check_structure,
    harmonic,
    identity,
    linear,
    power,
    power_family,
    reciprocal,
)

A, B, C = 0, 1, 2


def single_term(weights, transform, lam=1.0, offset=0.0):
    w = np.asarray(weights, dtype=float)
    return CompositeObjective(w.size, None, [DiversityTerm(lam, transform, ModularFunction(w, offset))])


def brute_submodular(F, n, tol=1e-9):
    """Independent check of the lattice inequality over every pair of subsets."""
    subsets = [frozenset(c) for r in range(n + 1) for c in itertools.combinations(range(n), r)]
    vals = {s: F(s) for s in subsets}
    return all(vals[a] + vals[b] >= vals[a | b] + vals[a & b] - tol for a in subsets for b in subsets)


# -- evaluate ---------------------------------------------------------------


def test_modular_relevance_only():
    obj = CompositeObjective(2, ModularFunction([3.0, 1.0]))
    assert obj.evaluate([A, B]) == 4.0


def test_power_half_of_two_units():
    obj = single_term([1, 1], power(0.5))
    assert obj.evaluate([A, B]) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_mmr_lambda_one_is_pure_relevance():
    rng = np.random.default_rng(3)
    rel = rng.random(6)
    sim = rng.random((6, 6))
    sim = (sim + sim.T) / 2
    obj = MmrObjective(ModularFunction(rel), sim, 1.0)
    for S in ([], [0], [1, 4], [0, 2, 3, 5]):
        assert obj.evaluate(S) == pytest.approx(rel[S].sum(), abs=1e-12)


def test_mmr_penalty_uses_max_over_others():
    sim = np.array([[1, 0.2, 0.7], [0.2, 1, 0.4], [0.7, 0.4, 1]])
    obj = MmrObjective(ModularFunction([1.0, 2.0, 3.0]), sim, 0.5)
    # penalties: a -> .7, b -> .4, c -> .7
    expected = 0.5 * 6 - 0.5 * (0.7 + 0.4 + 0.7)
    assert obj.evaluate([A, B, C]) == pytest.approx(expected)
    assert obj.evaluate([B]) == pytest.approx(1.0)


def test_evaluate_is_order_independent():
    obj = single_term([0.1, 0.7, 0.3, 0.9], power(0.3))
    assert obj.evaluate([3, 0, 2]) == obj.evaluate([0, 2, 3])


def test_log_of_zero_inner_is_domain_error():
    obj = single_term([0.0, 1.0], ConcaveTransform("log"))
    assert obj.evaluate([]) == 0.0
    with pytest.raises(DomainError):
        obj.evaluate([A])


def test_duplicate_members_rejected():
    with pytest.raises(DuplicateItem):
        ModularFunction([1.0, 2.0]).evaluate([0, 0])


# -- marginal gains -----------------------------------------------------------


def test_modular_gain_is_weight():
    assert ModularFunction([3.0, 1.0]).marginal_gain([A], B) == 1.0


def test_power_gain_diminishes():
    obj = single_term([1, 1], power(0.5))
    at_a = obj.marginal_gain([A], B)
    at_empty = obj.marginal_gain([], B)
    assert at_a == pytest.approx(math.sqrt(2) - 1, abs=1e-12)
    # direct evaluation: F({b}) - F({}) = 1
    assert at_empty == pytest.approx(1.0, abs=1e-12)
    assert at_empty >= at_a


def test_gain_of_member_raises():
    with pytest.raises(DuplicateItem):
        single_term([1, 1], power(0.5)).marginal_gain([A], A)


def _random_objective(rng, n):
    kind = rng.integers(4)
    if kind == 0:
        return build_objective("interest-coverage", float(rng.random()), interests=rng.random((n, 3)))
    if kind == 1:
        return build_objective("neighbour-coverage", 1.0, relevance=rng.random(n), coverage=rng.random((n, 2)))
    if kind == 2:
        cats = (rng.random((n, 3)) < 0.5).astype(float)
        return build_objective("set-category", 1.5, categories=cats, relevance=rng.random(n))
    sim = rng.random((n, n))
    return build_objective("mmr", float(rng.random()), relevance=rng.random(n), similarity=(sim + sim.T) / 2)


@pytest.mark.parametrize("seed", range(40))
def test_marginal_gain_matches_evaluate(seed):
    rng = np.random.default_rng(seed)
    n = 7
    obj = _random_objective(rng, n)
    S = [int(i) for i in rng.choice(n, size=rng.integers(0, n), replace=False)]
    for j in set(range(n)) - set(S):
        direct = obj.evaluate(S + [j]) - obj.evaluate(S)
        scale = max(1.0, abs(obj.evaluate(S + [j])))
        assert obj.marginal_gain(S, j) == pytest.approx(direct, abs=1e-12 * scale)


# -- transforms ---------------------------------------------------------------


@pytest.mark.parametrize(
    "transform, x, expected",
    [
        (ConcaveTransform("identity"), 2.5, 2.5),
        (ConcaveTransform("reciprocal"), 4.0, 0.25),
        (ConcaveTransform("log"), math.e, 1.0),
        (ConcaveTransform("scaled_reciprocal", 2.0), 4.0, 0.125),
        (ConcaveTransform("power", 0.5), 9.0, 3.0),
        (ConcaveTransform("saturation"), 3.0, 0.75),
        (ConcaveTransform("linear", 3.0), 2.0, 6.0),
        (ConcaveTransform("harmonic", 1.0), 3.0, 1 + 1 / 2 + 1 / 3),
        (ConcaveTransform("harmonic", 2.0), 2.0, (1 + 1 / 2) / 2),
    ],
)
def test_transform_values(transform, x, expected):
    assert transform(x) == pytest.approx(expected, rel=1e-12)


def test_power_zero_is_coverage_indicator():
    g = power(0.0)
    assert g(0.0) == 0.0
    assert g(0.3) == 1.0


@pytest.mark.parametrize(
    "kind, param", [("power", 1.5), ("power", -0.1), ("linear", 0.0), ("scaled_reciprocal", None), ("log", 2.0)]
)
def test_bad_transform_parameters(kind, param):
    with pytest.raises(BadParameter):
        ConcaveTransform(kind, param)


@given(arrays(float, 6, elements=st.floats(0, 10)), st.lists(st.integers(0, 5), unique=True))
def test_power_one_and_linear_one_equal_identity(w, S):
    ident = single_term(w, identity())
    assert single_term(w, power(1.0)).evaluate(S) == pytest.approx(ident.evaluate(S), abs=1e-12)
    assert single_term(w, linear(1.0)).evaluate(S) == pytest.approx(ident.evaluate(S), abs=1e-12)


@given(
    arrays(float, 8, elements=st.floats(-5, 5)),
    st.floats(-3, 3),
    st.lists(st.integers(0, 7), unique=True),
    st.lists(st.integers(0, 7), unique=True),
)
def test_modular_additivity(w, offset, A_, B_):
    B_ = [b for b in B_ if b not in A_]
    f = ModularFunction(w, offset)
    assert f.evaluate(A_ + B_) == pytest.approx(f.evaluate(A_) + f.evaluate(B_) - f.evaluate([]), abs=1e-9)


def test_table1_has_every_row():
    assert len(CATALOG) == 8
    assert {row[0] for row in CATALOG.values()} == {
        "mmr",
        "tangent",
        "ppt",
        "set-category",
        "binom-coverage",
        "interest-coverage",
        "neighbour-coverage",
        "intent-aware",
    }


# -- builders -----------------------------------------------------------------


def test_interest_coverage_at_one_is_modular():
    rng = np.random.default_rng(0)
    obj = build_objective("interest-coverage", 1.0, interests=rng.random((6, 3)))
    verdict = check_structure(obj)
    assert verdict.modular and verdict.submodular


def test_tangent_value():
    obj = build_objective("tangent", relevance=[2.0, 3.0])
    # rel(S) + 1/rel(S) at rel = 5
    assert obj.evaluate([A, B]) == pytest.approx(5.2, abs=1e-12)


def test_ppt_value_natural_log():
    obj = build_objective("ppt", tendency=[2.0, 3.0], observed_tendency=10.0)
    assert obj.evaluate([A, B]) == pytest.approx(math.log(0.5), abs=1e-12)
    assert obj.evaluate([A, B]) == pytest.approx(-0.69315, abs=1e-5)


def test_set_category_counts_harmonically():
    cats = np.array([[1, 0], [1, 0], [1, 0], [0, 1]], dtype=float)
    obj = build_objective("set-category", 1.0, categories=cats)
    assert obj.evaluate([0, 1, 2]) == pytest.approx(1 + 1 / 2 + 1 / 3)
    assert obj.evaluate([0, 3]) == pytest.approx(2.0)


def test_binom_coverage_lambda_one_is_modular():
    rng = np.random.default_rng(1)
    cats = (rng.random((6, 3)) < 0.5).astype(float)
    obj = build_objective("binom-coverage", 1.0, relevance=rng.random(6), categories=cats)
    assert check_structure(obj).modular


def test_builder_errors():
    with pytest.raises(MissingInput, match="relevance"):
        build_objective("tangent")
    with pytest.raises(MissingInput, match="similarity"):
        build_objective("mmr", 0.5, relevance=[1.0])
    with pytest.raises(BadParameter):
        build_objective("interest-coverage", 1.5, interests=np.ones((2, 2)))
    with pytest.raises(BadParameter):
        build_objective("mmr", 1.2, relevance=[1.0], similarity=[[1.0]])
    with pytest.raises(BadParameter):
        build_objective("no-such-thing")


# -- structure checks ---------------------------------------------------------


@pytest.mark.parametrize("seed", range(5))
def test_modular_function_is_modular(seed):
    w = np.random.default_rng(seed).normal(size=4)
    v = check_structure(ModularFunction(w))
    assert v.modular and v.submodular
    assert v.modular_witness is None and v.submodular_witness is None


def test_concave_of_modular_is_submodular_not_modular():
    obj = single_term([0.3, 1.0, 2.0, 0.5], power(0.5))
    v = check_structure(obj)
    assert v.submodular and not v.modular and v.monotone
    assert v.modular_witness is not None
    assert brute_submodular(obj.evaluate, 4)


def test_witness_violates_lattice_inequality():
    # F(S) = |S|^2 is supermodular
    obj = CallableObjective(4, lambda s: len(s) ** 2)
    v = check_structure(obj)
    assert not v.submodular
    a, b = v.submodular_witness
    F = obj.evaluate
    assert F(a) + F(b) < F(a | b) + F(a & b)
    # lexicographically first: S = {}, j = 0, k = 1
    assert (a, b) == (frozenset({0}), frozenset({1}))


def test_mmr_with_max_penalty_is_not_submodular():
    # sim(a,b) = sim(a,c) = 1, sim(b,c) = 0: adding c costs a penalty of 2
    # at {a} but only 1 at {a, b}
    sim = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
    obj = MmrObjective(ModularFunction(np.zeros(3)), sim, 0.5)
    assert obj.marginal_gain([A], C) == pytest.approx(-1.0)
    assert obj.marginal_gain([A, B], C) == pytest.approx(-0.5)
    v = check_structure(obj)
    assert not v.submodular
    assert not brute_submodular(obj.evaluate, 3)


def test_tangent_is_not_submodular():
    obj = build_objective("tangent", relevance=[1.0, 1.0, 1.0])
    assert not check_structure(obj).submodular


def test_monotone_witness():
    obj = ModularFunction([1.0, -1.0, 2.0])
    v = check_structure(obj)
    assert not v.monotone
    small, big = v.monotone_witness
    assert small <= big and obj.evaluate(small) > obj.evaluate(big)


def test_structure_limit():
    with pytest.raises(TooLarge):
        check_structure(ModularFunction(np.ones(13)))
    assert check_structure(ModularFunction(np.ones(13)), limit=13).modular


def test_ground_set_arguments():
    obj = ModularFunction(np.ones(5))
    assert check_structure(obj, GroundSet(3)).modular
    assert check_structure(obj, [1, 3, 4]).modular
    with pytest.raises(BadParameter):
        GroundSet(0)


@settings(max_examples=30, deadline=None)
@given(arrays(float, (6, 2), elements=st.floats(0, 5)), st.floats(0, 1))
def test_checker_agrees_with_pairwise_definition(w, lam):
    obj = power_family(w, lam)
    assert check_structure(obj).submodular == brute_submodular(obj.evaluate, 6)


def test_immutability():
    f = ModularFunction([1.0, 2.0])
    with pytest.raises(ValueError):
        f.weights[0] = 5.0
    obj = single_term([1.0, 2.0], power(0.5))
    with pytest.raises(AttributeError):
        obj.normalization = 3.0


def test_normalization_zero_at_empty():
    rng = np.random.default_rng(0)
    for seed in range(10):
        obj = _random_objective(np.random.default_rng(seed), 5)
        assert obj.evaluate([]) == 0.0
    obj = single_term(rng.random(4), power(0.5), offset=2.0)
    assert obj.evaluate([]) == 0.0
    assert obj.normalization == pytest.approx(math.sqrt(2.0))


def test_reciprocal_guard_at_empty_set():
    obj = single_term([1.0, 2.0], reciprocal())
    assert obj.evaluate([]) == 0.0
    assert obj.evaluate([B]) == pytest.approx(0.5)
    assert harmonic(1.0)(0.0) == pytest.approx(0.0, abs=1e-15)
