import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anscombe_lab.errors import DomainMismatch, EmptySetWarning
from anscombe_lab.metric_space import (
    REAL_LINE,
    Box,
    DiscreteSpace,
    EuclideanSpace,
    FinitePoints,
    HalfLine,
    HalfLines,
    HatFunction,
    IntervalUnion,
    IntervalUnions,
    SupportSubsets,
    complement_probability_view,
    contains,
    dist_to_set,
    distance,
    enlarge,
    hat_eval,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)
R2 = EuclideanSpace(2)


def test_distance_examples():
    assert distance(R2, (0, 0), (0, 0)) == 0
    assert distance(R2, (0, 0), (3, 4)) == 5
    ab = DiscreteSpace.uniform(["a", "b"])
    assert distance(ab, "a", "b") == 1


def test_dimension_and_alphabet_checks():
    with pytest.raises(DomainMismatch):
        R2.encode((1, 2, 3))
    ab = DiscreteSpace.uniform(["a", "b"])
    with pytest.raises(DomainMismatch):
        ab.encode("c")


@pytest.mark.parametrize(
    "table",
    [
        [[0, 1], [2, 0]],  # asymmetric
        [[1, 1], [1, 0]],  # nonzero diagonal
        [[0, 0], [0, 0]],  # zero off the diagonal
        [[0, 1, 5], [1, 0, 1], [5, 1, 0]],  # triangle inequality fails
    ],
)
def test_bad_distance_tables_rejected(table):
    with pytest.raises(ValueError):
        DiscreteSpace(tuple("abc"[: len(table)]), table)


def test_dist_to_set_examples():
    assert dist_to_set(0.6, HalfLine(">=", 1.0)) == pytest.approx(0.4)
    assert dist_to_set(2.0, HalfLine(">=", 1.0)) == 0
    assert dist_to_set(1.0, FinitePoints.of([0, 2])) == 1


def test_dist_to_empty_set_warns():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert dist_to_set(0.0, FinitePoints.of([])) == math.inf
    assert any(issubclass(w.category, EmptySetWarning) for w in caught)


def test_enlarge_examples():
    assert enlarge(HalfLine(">=", 1.0), 0.5) == HalfLine(">=", 0.5)
    S = IntervalUnion(((0.0, 1.0), (3.0, 4.0)))
    assert enlarge(S, 0) == S
    grown = enlarge(FinitePoints.of([0, 2]), 1)
    assert grown == FinitePoints.of([0, 2], 1)
    assert contains(grown, 1.0)
    with pytest.raises(ValueError):
        enlarge(S, -1)


def test_interval_union_normalizes():
    S = IntervalUnion(((3.0, 4.0), (0.0, 1.0), (0.5, 2.0)))
    assert S.intervals() == ((0.0, 2.0), (3.0, 4.0))
    assert enlarge(S, 0.5).intervals() == ((-0.5, 4.5),)
    with pytest.raises(ValueError):
        IntervalUnion(((1.0, 0.0),))


def test_complement_view():
    view = complement_probability_view(HalfLine("<=", 0.0))
    assert view.contains(1.0)
    assert not view.contains(0.0)
    assert view.complement() == HalfLine("<=", 0.0)


@given(st.lists(finite, min_size=1, max_size=30), finite, st.sampled_from(["<=", ">="]))
def test_complement_law(xs, t, direction):
    S = HalfLine(direction, t)
    x = np.array(xs)
    assert np.all(complement_probability_view(S).contains(x) ^ S.contains(x))
    assert np.array_equal(S.complement().complement().contains(x), S.contains(x))


def test_hat_examples():
    base = HalfLine(">=", 1.0)
    h = HatFunction(base, 0.5)
    assert hat_eval(h, 1.5) == 1
    assert hat_eval(h, 0.5) == 0
    assert hat_eval(h, 0.75) == pytest.approx(0.5)


@given(finite, finite, finite)
def test_euclidean_metric_axioms(a, b, c):
    d = lambda p, q: distance(REAL_LINE, p, q)  # noqa: E731
    assert d(a, a) == 0
    assert d(a, b) == d(b, a) >= 0
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-9


@given(
    st.tuples(finite, finite),
    st.tuples(finite, finite),
    st.tuples(finite, finite),
)
def test_plane_metric_axioms(p, q, r):
    assert distance(R2, p, q) == pytest.approx(distance(R2, q, p))
    assert distance(R2, p, r) <= distance(R2, p, q) + distance(R2, q, r) + 1e-9


@settings(max_examples=60)
@given(finite, finite, st.floats(0.01, 50), st.floats(0.01, 50))
def test_hat_is_lipschitz(x, y, t, width):
    h = HatFunction(HalfLine("<=", t), width)
    assert abs(float(h(x)) - float(h(y))) <= abs(x - y) / width + 1e-12


@given(finite, st.floats(0, 100), st.floats(0, 100), finite)
def test_enlargement_is_monotone_and_additive(t, a, b, x):
    S = HalfLine(">=", t)
    if S.contains(x):
        assert enlarge(S, a).contains(x)
    assert enlarge(enlarge(S, a), b).dist(x) == pytest.approx(enlarge(S, a + b).dist(x), abs=1e-9)


@given(st.lists(finite, min_size=1, max_size=5), st.floats(0, 10), finite)
def test_finite_points_dist_matches_bruteforce(points, r, x):
    S = FinitePoints.of(points, r)
    brute = max(0.0, min(abs(x - p) for p in points) - r)
    assert float(S.dist(x)) == pytest.approx(brute, abs=1e-9)
    assert bool(S.contains(x)) == (min(abs(x - p) for p in points) <= r)


def test_box_in_the_plane():
    B = Box(((0, 1), (0, 1)))
    assert B.contains(np.array([0.5, 0.5]))
    assert float(B.dist(np.array([4.0, 5.0]))) == pytest.approx(5.0)
    assert enlarge(B, 5).contains(np.array([4.0, 5.0]))


def test_discrete_enlargement_recomputes_members():
    space = DiscreteSpace(("a", "b", "c"), [[0, 1, 2], [1, 0, 1], [2, 1, 0]])
    S = FinitePoints.of(["a"], 0, space)
    assert not S.contains(space.encode("b"))
    assert S.enlarge(1).contains(space.encode("b"))
    assert not S.enlarge(1).contains(space.encode("c"))


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6, unique=True), st.floats(0, 3))
def test_half_lines_closed_under_enlargement(ts, alpha):
    fam = HalfLines(tuple(sorted(ts)))
    closed = fam.closure(alpha)
    labels = {F.label() for F in closed}
    for F in fam:
        assert F.enlarge(alpha).label() in labels


def test_interval_unions_family():
    fam = IntervalUnions((0.0, 1.0, 2.0, 3.0), max_components=2)
    assert all(isinstance(F, IntervalUnion) for F in fam)
    # six single intervals plus [0,1] u [2,3]
    assert len(fam) == 7
    assert IntervalUnion(((0.0, 1.0), (2.0, 3.0))).label() in {F.label() for F in fam}


def test_support_subsets_enumerates_power_set():
    fam = SupportSubsets.of([0.0, 1.0, 2.0])
    assert len(fam) == 8
    with pytest.raises(ValueError):
        SupportSubsets.of(list(range(21)))
