import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from anscombe_lab.distributions import FiniteDistribution, PointMass, rademacher, uniform_finite
from anscombe_lab.errors import HorizonExceeded, SupportTooLarge, TheoremViolation
from anscombe_lab.indices import EstimatorGrid, Scenario
from anscombe_lab.metric_space import FinitePoints, HalfLine, HalfLines, SupportSubsets
from anscombe_lab.oracle import (
    exact_chi_surrogate,
    exact_lambda_p,
    exact_lambda_w,
    exact_window_exceedance,
    lambda_w_five_forms,
    marginal,
    mc_vs_oracle_compare,
    proof_inclusion_batch,
    proof_inclusion_check,
    rademacher_walk_marginal,
    randomized_marginal,
)
from anscombe_lab.processes import (
    Alternating,
    Constant,
    DeterministicIndex,
    EventuallyConstant,
    LinearKn,
    PartialSumNormalized,
    Path,
    TwoPoint,
    exact_finite_spec,
)

GRID = EstimatorGrid((0.25, 0.5), (0.1, 0.2), (20, 24), samples=100)


def mixed_model():
    # one outcome keeps oscillating through the whole horizon, the other is still
    return EventuallyConstant((([0.0, 1.0] * 40, 0.0, 0.25), ([], 0.0, 0.75)))


def test_window_exceedance_examples():
    const = exact_finite_spec(Constant(1.0), None, 40)
    assert exact_window_exceedance(const, 20, 0.2, 0.1) == 0
    alt = exact_finite_spec(Alternating(-1.0, 1.0), None, 40)
    assert exact_window_exceedance(alt, 20, 0.2, 2.0) == 1
    mixed = exact_finite_spec(mixed_model(), None, 40)
    assert exact_window_exceedance(mixed, 20, 0.2, 0.5) == 0.25
    with pytest.raises(HorizonExceeded):
        exact_window_exceedance(const, 39, 0.2, 0.1)


def test_chi_surrogate_examples():
    assert exact_chi_surrogate(exact_finite_spec(Constant(1.0), None, 40), GRID) == 0
    assert exact_chi_surrogate(exact_finite_spec(Alternating(-1.0, 1.0), None, 40), GRID) == 1
    assert exact_chi_surrogate(exact_finite_spec(mixed_model(), None, 40), GRID) == 0.25


def test_exact_lambda_p_examples():
    spec = exact_finite_spec(Constant(0.0), DeterministicIndex(LinearKn(1)), 40, GRID.n_values)
    assert exact_lambda_p(spec, LinearKn(1), GRID) == 0
    spec = exact_finite_spec(Constant(0.0), TwoPoint(0.3), 48, GRID.n_values)
    assert exact_lambda_p(spec, LinearKn(1), GRID) == pytest.approx(0.3, abs=1e-15)
    assert exact_lambda_p(spec, LinearKn(2), GRID) == pytest.approx(0.7, abs=1e-15)


def test_rademacher_marginal_against_binomial():
    for n in (1, 7, 40):
        law = rademacher_walk_marginal(n)
        k = np.arange(n + 1)
        ref = stats.binom.pmf(k, n, 0.5)
        assert np.allclose(np.sort(law.atoms), (2 * k - n) / math.sqrt(n))
        assert np.allclose(law.weights[np.argsort(law.atoms)], ref, atol=1e-15)


def test_marginals_from_enumeration():
    spec = exact_finite_spec(PartialSumNormalized(rademacher()), TwoPoint(0.5), 12, [6])
    direct = marginal(spec, 12)
    assert np.allclose(direct.weights, rademacher_walk_marginal(12).weights)
    mixed = randomized_marginal(spec, 6)
    assert mixed.weights.sum() == pytest.approx(1.0)


def test_five_forms_examples():
    u = uniform_finite([0.0, 1.0])
    res = lambda_w_five_forms([u] * 3, u)
    assert res.values() == (0.0,) * 5
    res = lambda_w_five_forms([PointMass(0.0).as_finite()] * 3, u)
    assert res.values() == pytest.approx((0.5,) * 5, abs=1e-12)


def test_five_forms_window_dependence():
    # xi_n = point mass at 2^-n; against the point mass at 0 every closed form
    # value is 1, attained through F = {2^-n}
    margs = [PointMass(2.0**-n).as_finite() for n in range(3, 8)]
    res = lambda_w_five_forms(margs, PointMass(0.0).as_finite())
    assert res.closed_form == 1.0
    assert res.spread() <= 1e-9


def test_five_forms_support_limit():
    with pytest.raises(SupportTooLarge):
        lambda_w_five_forms([uniform_finite(list(map(float, range(21))))], PointMass(0.0).as_finite())


@st.composite
def finite_instance(draw):
    k = draw(st.integers(2, 6))
    support = draw(
        st.lists(st.integers(-20, 20), min_size=k, max_size=k, unique=True).map(
            lambda v: [x / 4 for x in v]
        )
    )

    def law():
        w = np.array(draw(st.lists(st.integers(0, 9), min_size=k, max_size=k))) + 0.0
        if w.sum() == 0:
            w[0] = 1
        keep = w > 0
        return FiniteDistribution.of(np.array(support)[keep], w[keep] / w[keep].sum())

    n_laws = draw(st.integers(1, 4))
    return [law() for _ in range(n_laws)], law()


@settings(max_examples=30, deadline=None)
@given(finite_instance())
def test_five_forms_agree(instance):
    margs, target = instance
    assert lambda_w_five_forms(margs, target).spread() <= 1e-9


@settings(max_examples=30, deadline=None)
@given(finite_instance())
def test_closed_form_matches_support_subsets(instance):
    margs, target = instance
    pts = np.unique(np.concatenate([target.atoms] + [m.atoms for m in margs]))
    fam = SupportSubsets(pts)
    brute = max(m.prob(F) - target.prob(F) for m in margs for F in fam)
    assert lambda_w_five_forms(margs, target).closed_form == pytest.approx(max(0.0, brute), abs=1e-12)


def test_proof_inclusion_examples():
    values = np.zeros(20)
    values[10] = 0.3  # xi_11
    values[[7, 8, 11]] = [0.2, -0.35, 0.4]
    path = Path(values)
    F = HalfLine(">=", 0.25)
    assert proof_inclusion_check(path, 11, 10, 0.2, 0.5, F).holds
    res = proof_inclusion_check(path, 15, 10, 0.2, 0.5, F)
    assert not res.holds and "index_within_delta" in res.violated
    const = Path(np.full(30, 2.0))
    assert proof_inclusion_check(const, 12, 10, 0.2, 0.1, FinitePoints.of([2.0])).holds


def test_proof_inclusion_horizon():
    with pytest.raises(HorizonExceeded):
        proof_inclusion_check(Path(np.zeros(10)), 10, 10, 0.2, 0.5, HalfLine(">=", 0))


def test_proof_inclusion_detects_a_broken_conclusion(monkeypatch):
    # a faulty enlargement makes the conclusion fail while premises hold
    import anscombe_lab.oracle as oracle

    monkeypatch.setattr(oracle, "_within", lambda F, x, extra: extra == 0 and bool(F.contains(x)))
    path = Path(np.array([0.0] * 9 + [0.1, 0.3, 0.1] + [0.0] * 8))
    with pytest.raises(TheoremViolation):
        oracle.proof_inclusion_check(path, 11, 10, 0.2, 0.5, HalfLine(">=", 0.25))


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.integers(-8, 8), min_size=30, max_size=30),
    st.integers(1, 30),
    st.integers(5, 20),
    st.sampled_from([0.1, 0.2, 0.3]),
    st.sampled_from([0.25, 0.5, 1.0]),
    st.integers(-8, 8),
)
def test_proof_inclusion_never_violated(steps, N, k, delta, eps, t):
    path = Path(np.array(steps) / 4)
    for F in (HalfLine(">=", t / 4), HalfLine("<=", t / 4), FinitePoints.of([t / 4], 0.25)):
        proof_inclusion_check(path, N, k, delta, eps, F)


def test_proof_batch_agrees_with_single_checks():
    rng = np.random.default_rng(0)
    paths = np.cumsum(rng.choice([-0.25, 0.25], size=(300, 40)), axis=1)
    N = rng.integers(8, 14, size=300)
    F = HalfLine(">=", 0.0)
    counts = proof_inclusion_batch(paths, PartialSumNormalized(rademacher()).space, N, 10, 0.2, 0.5, F)
    singles = [proof_inclusion_check(Path(p), int(n), 10, 0.2, 0.5, F) for p, n in zip(paths, N)]
    assert counts["premises_hold"] == sum(r.holds for r in singles)
    assert counts["conclusion_holds"] == counts["premises_hold"]


def compare_scenario(process, index_model, target, family, **kw):
    g = EstimatorGrid((0.25, 0.5), (0.1, 0.2), (20, 22), samples=kw.pop("samples", 20_000))
    return Scenario(process, index_model, target, family, (LinearKn(1), LinearKn(2)), g, seed=4)


def test_compare_constant_all_zero():
    rows = mc_vs_oracle_compare(
        compare_scenario(Constant(0.0), DeterministicIndex(LinearKn(1)), PointMass(0.0), HalfLines((0.5,)))
    )
    lp1 = next(r for r in rows if r.name == "lambda_p[linear(c=1)]")
    assert (lp1.mc, lp1.oracle, lp1.stderr, lp1.z) == (0, 0, 0, 0)
    assert not any(r.flagged for r in rows)


def test_compare_two_point_and_alternating():
    rows = mc_vs_oracle_compare(
        compare_scenario(
            Alternating(-1.0, 1.0), TwoPoint(0.3), rademacher(), SupportSubsets.of([-1.0, 1.0])
        )
    )
    by = {r.name: r for r in rows}
    assert by["lambda_p[linear(c=1)]"].oracle == pytest.approx(0.3)
    assert abs(by["lambda_p[linear(c=1)]"].z) <= 4
    assert by["chi_ansc"].mc == by["chi_ansc"].oracle == 1
    assert not any(r.flagged for r in rows)


def test_exact_lambda_w_matches_support_enumeration():
    spec = exact_finite_spec(PartialSumNormalized(rademacher()), TwoPoint(0.5), 12, (5, 6))
    target = rademacher_walk_marginal(16)
    fam = HalfLines(tuple(np.linspace(-2, 2, 17)))
    val = exact_lambda_w(spec, target, fam, randomized=True)
    laws = [randomized_marginal(spec, n) for n in (5, 6)]
    brute = max(law.prob(F) - target.prob(F) for law in laws for F in fam)
    assert val == pytest.approx(max(0.0, brute))
