"""Acceptance criteria 1-8.

Each test prints a single ``criterion N PASS|FAIL: ...`` line; the lines are
collected again at the end of the pytest run.  Seeds are fixed up front.
"""

import dataclasses
import math
import time

import numpy as np
import pytest
from scipy import stats

import anscombe_lab.indices as indices
from anscombe_lab.cli import main
from anscombe_lab.distributions import (
    FiniteDistribution,
    Normal,
    PointMass,
    RngStream,
    rademacher,
    uniform_finite,
)
from anscombe_lab.errors import TheoremViolation
from anscombe_lab.indices import (
    EstimatorGrid,
    Scenario,
    chi_ansc,
    infimum_over_kn,
    lambda_p_ratio,
    lambda_w,
    verify_inequality,
)
from anscombe_lab.metric_space import (
    DiscreteSpace,
    EuclideanSpace,
    FinitePoints,
    HalfLine,
    HalfLines,
    SupportSubsets,
)
from anscombe_lab.oracle import (
    lambda_w_five_forms,
    mc_vs_oracle_compare,
    proof_inclusion_batch,
    proof_inclusion_check,
    rademacher_walk_marginal,
)
from anscombe_lab.processes import (
    Alternating,
    BlockGrowth,
    BlockOscillating,
    Constant,
    DeterministicIndex,
    EventuallyConstant,
    LinearKn,
    LinearNoise,
    PartialSumNormalized,
    Path,
    TwoPoint,
    UniformWindow,
)

SEED = 20261019
C_GRID = tuple(LinearKn(c) for c in (0.5, 1, 1.5, 2, 3))
ABC = DiscreteSpace(("a", "b", "c"), [[0, 1, 2], [1, 0, 1], [2, 1, 0]])


def grid(eps, deltas, window, stride=1, samples=100_000):
    return EstimatorGrid(tuple(eps), tuple(deltas), tuple(window), stride, samples)


# ---------------------------------------------------------------------------
# 1. five formulations


def random_instance(rng, space_kind):
    k = int(rng.integers(2, 13))
    length = int(rng.integers(1, 41))
    if space_kind == "line":
        support = rng.choice(np.arange(-40, 41), size=k, replace=False) / 8
        space = None
    elif space_kind == "plane":
        pts = rng.choice(np.arange(-6, 7), size=(3 * k, 2)) / 2
        support = np.unique(pts, axis=0)[:k]
        k = len(support)
        space = EuclideanSpace(2)
    else:
        k = 3
        support = np.array(ABC.alphabet)
        space = ABC

    def law():
        w = rng.dirichlet(np.ones(k))
        w[rng.random(k) < 0.3] = 0
        if w.sum() == 0:
            w[0] = 1
        keep = w > 0
        pts = support[keep]
        if space is ABC:
            return FiniteDistribution.of(list(pts), w[keep] / w[keep].sum(), ABC)
        return FiniteDistribution.of(pts, w[keep] / w[keep].sum(), space)

    return [law() for _ in range(length)], law()


def test_criterion_1_five_forms(criterion_line):
    rng = np.random.default_rng(SEED)
    kinds = ["line"] * 18 + ["plane"] * 4 + ["discrete"] * 2
    start = time.perf_counter()
    worst = 0.0
    for kind in kinds:
        margs, target = random_instance(rng, kind)
        worst = max(worst, lambda_w_five_forms(margs, target).spread())
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed <= 10
    criterion_line(
        1, ok, f"{len(kinds)} instances, max pairwise spread {worst:.2e} (<= 1e-9), {elapsed:.1f}s (<= 10s)"
    )
    assert ok


# ---------------------------------------------------------------------------
# 2. Monte Carlo vs exact


def oracle_scenarios():
    rw = rademacher()
    skew = FiniteDistribution.of([-1.0, 2.0], [2 / 3, 1 / 3])
    mixed = EventuallyConstant((([0.0, 1.0] * 20, 0.0, 0.25), ([0.5] * 3, 0.0, 0.75)))
    disc = EventuallyConstant(((["a", "b"] * 20, "c", 0.4), (["a"], "a", 0.6)), ABC)
    kn2 = (LinearKn(1), LinearKn(2))
    return {
        "constant": (Constant(0.0), DeterministicIndex(LinearKn(1)), PointMass(0.0),
                     HalfLines((-0.5, 0.5)), kn2, grid((0.25,), (0.2,), (20, 22))),
        "alternating_two_point": (Alternating(-1.0, 1.0), TwoPoint(0.3), rw,
                                  SupportSubsets.of([-1.0, 1.0]), kn2, grid((0.5,), (0.2,), (20, 22))),
        "walk_two_point": (PartialSumNormalized(rw), TwoPoint(0.3), Normal(),
                           HalfLines((-1.0, 0.0, 1.0)), kn2, grid((0.5,), (0.34,), (6, 8))),
        "walk_uniform_window": (PartialSumNormalized(rw), UniformWindow(0.5), Normal(),
                                HalfLines((-0.5, 0.5)), kn2, grid((0.5,), (0.25,), (8, 10))),
        "skew_walk_linear_noise": (PartialSumNormalized(skew, standardized=False),
                                   LinearNoise(1.0, 1.0, 0.5), Normal(0.0, math.sqrt(2)),
                                   HalfLines((0.0,)), kn2, grid((0.5,), (0.2,), (10, 11))),
        "eventually_constant": (mixed, UniformWindow(0.2), PointMass(0.0), HalfLines((0.25,)),
                                kn2, grid((0.25,), (0.1,), (20, 22))),
        "block_linear": (BlockOscillating(BlockGrowth("linear", 5), 0.0, 1.0), UniformWindow(0.25),
                         uniform_finite([0.0, 1.0]), SupportSubsets.of([0.0, 1.0]), kn2,
                         grid((0.5,), (0.1,), (20, 22))),
        "block_exponential": (BlockOscillating(BlockGrowth("exponential", 1.5), -1.0, 1.0, phases=8),
                              TwoPoint(0.5), uniform_finite([-1.0, 1.0]), HalfLines((0.0,)), kn2,
                              grid((1.0,), (0.1,), (20, 22))),
        "discrete_space": (disc, TwoPoint(0.2), PointMass("c", ABC), SupportSubsets.of(["a", "c"], ABC),
                           kn2, grid((1.0,), (0.1,), (20, 22))),
        "alternating_deterministic": (Alternating(0.0, 3.0), DeterministicIndex(LinearKn(2)),
                                      PointMass(0.0), HalfLines((1.0,)), (LinearKn(2), LinearKn(3)),
                                      grid((1.0,), (0.1,), (20, 22))),
    }


def test_criterion_2_estimators_match_oracle(criterion_line):
    start = time.perf_counter()
    failures, worst_z, rows_seen = [], 0.0, 0
    kinds = set()
    for name, (m, im, target, fam, kns, g) in oracle_scenarios().items():
        for row in mc_vs_oracle_compare(Scenario(m, im, target, fam, kns, g, seed=SEED)):
            rows_seen += 1
            kinds.add(row.name.split("(")[0].split("[")[0])
            diff = abs(row.mc - row.oracle)
            if not (diff <= 3 * row.stderr + 1e-12 and diff <= 0.02):
                failures.append(f"{name}/{row.name}: mc={row.mc:.5f} oracle={row.oracle:.5f} z={row.z:.2f}")
            if row.stderr > 0:
                worst_z = max(worst_z, abs(row.z))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed <= 60
    criterion_line(
        2,
        ok,
        f"10 scenarios, {rows_seen} rows ({', '.join(sorted(kinds))}), max |z|={worst_z:.2f}, "
        f"{len(failures)} outside 3*stderr or 0.02, {elapsed:.1f}s (<= 60s)",
    )
    assert ok, failures


# ---------------------------------------------------------------------------
# 3. analytic values


def test_criterion_3_known_values(criterion_line):
    g = grid((0.25, 0.5), (0.1, 0.2), (100, 120), samples=20_000)
    rng = RngStream(SEED)
    chi_const = chi_ansc(Constant(0.0), g, rng.substream("c")).value
    chi_alt = chi_ansc(Alternating(-1.0, 1.0), g, rng.substream("a")).value
    lp = lambda_p_ratio(TwoPoint(0.3), LinearKn(1), g, rng.substream("p")).value
    best, inf_est, _ = infimum_over_kn(TwoPoint(0.3), C_GRID, g, rng.substream("i"))
    checks = [
        chi_const == 0,
        abs(chi_alt - 1) <= 0.01,
        abs(lp - 0.3) <= 0.02,
        abs(inf_est.value - 0.3) <= 0.02 and best.c == 1,
    ]
    ok = all(checks)
    criterion_line(
        3,
        ok,
        f"chi(constant)={chi_const}, chi(alternating)={chi_alt:.4f}, lambda_P(two_point)={lp:.4f}, "
        f"inf over c-grid={inf_est.value:.4f} at c={best.c:g}",
    )
    assert ok


# ---------------------------------------------------------------------------
# 4. CLT


def test_criterion_4_clt(criterion_line):
    start = time.perf_counter()
    window = range(1000, 1025)
    fam = HalfLines(tuple(np.linspace(-3, 3, 61)))
    target = Normal()
    exact = -1.0
    for n in window:
        law = rademacher_walk_marginal(n)
        # independent check of the marginal against scipy's binomial law
        k = np.round((law.atoms * math.sqrt(n) + n) / 2).astype(int)
        assert np.allclose(law.weights, stats.binom.pmf(k, n, 0.5), rtol=1e-9, atol=1e-300)
        for F in fam:
            exact = max(exact, law.prob(F) - target.prob(F))
    g = grid((0.5, 1.0), (0.02, 0.04), (1000, 1024), samples=20_000)
    est = lambda_w(
        PartialSumNormalized(rademacher()), target, fam, g, RngStream(SEED), index_model=UniformWindow(0.05)
    )
    elapsed = time.perf_counter() - start
    ok = exact <= 0.02 and est.value <= 0.05 and elapsed <= 120
    criterion_line(
        4,
        ok,
        f"exact binomial surrogate {exact:.4f} (<= 0.02), randomized MC {est.value:.4f} "
        f"+/- {est.stderr:.4f} (<= 0.05), {elapsed:.1f}s (<= 120s)",
    )
    assert ok


# ---------------------------------------------------------------------------
# 5 and 8. the inequality suite


def alternating_scenario(seed):
    """Alternating path seen only at even n; the random index hits odd n half the time."""
    return Scenario(
        Alternating(0.0, 1.0),
        UniformWindow(0.05),
        PointMass(0.0),
        HalfLines((0.75,)),
        (LinearKn(1.0), LinearKn(1.05)),
        grid((0.25, 0.5), (0.05, 0.1), (100, 140), stride=2, samples=20_000),
        seed,
    )


def suite(seed):
    rw = rademacher()
    return {
        "degenerate": Scenario(
            Constant(0.0), DeterministicIndex(LinearKn(1)), PointMass(0.0), HalfLines((-0.5, 0.5)),
            C_GRID, grid((0.25, 0.5), (0.1, 0.2), (40, 44), samples=2000), seed,
        ),
        "alternating": alternating_scenario(seed),
        "two_point": Scenario(
            PartialSumNormalized(rw), TwoPoint(0.3), Normal(), HalfLines(tuple(np.linspace(-2, 2, 9))),
            C_GRID, grid((0.5, 1.0), (0.02, 0.04), (200, 240), stride=4, samples=10_000), seed,
        ),
        "clt_narrow": Scenario(
            PartialSumNormalized(rw), UniformWindow(0.01), Normal(), HalfLines(tuple(np.linspace(-3, 3, 25))),
            (LinearKn(0.5), LinearKn(1.0), LinearKn(2.0)),
            grid((0.5, 1.0), (0.02, 0.04), (1000, 1024), samples=20_000), seed,
        ),
        "block_exponential": Scenario(
            BlockOscillating(BlockGrowth("exponential", 2.0), -1.0, 1.0), UniformWindow(0.1),
            uniform_finite([-1.0, 1.0]), HalfLines((-0.5, 0.0, 0.5)), C_GRID,
            grid((0.5, 1.0), (0.05, 0.1), (100, 140), stride=4, samples=10_000), seed,
        ),
        "eventually_constant": Scenario(
            EventuallyConstant((([0.0, 1.0] * 60, 0.0, 0.2), ([1.0] * 10, 0.0, 0.8))),
            LinearNoise(1.0, 1.0, 0.5), PointMass(0.0), HalfLines((0.5,)), C_GRID,
            grid((0.25, 0.5), (0.05, 0.1), (100, 110), samples=10_000), seed,
        ),
    }


SUITE_SEEDS = tuple(SEED + i for i in range(10))


def test_criterion_5_inequality_suite(criterion_line):
    start = time.perf_counter()
    failures, runs, notes = [], 0, {}
    for seed in SUITE_SEEDS:
        for name, sc in suite(seed).items():
            rep = verify_inequality(sc)
            runs += 1
            if not rep.passed:
                failures.append(f"{name}@{seed}: lhs={rep.lhs.value:.4f} rhs={rep.rhs:.4f}")
            if seed == SEED:
                notes[name] = rep
    elapsed = time.perf_counter() - start
    ok = not failures
    alt, tp, clt = notes["alternating"], notes["two_point"], notes["clt_narrow"]
    criterion_line(
        5,
        ok,
        f"{runs} runs ({len(notes)} scenarios x {len(SUITE_SEEDS)} seeds), {len(failures)} failures; "
        f"alternating chi={alt.rhs_chi.value:.3f}, two_point lambda_P={tp.rhs_lp.value:.3f}, "
        f"clt rhs={clt.rhs:.4f}, {elapsed:.1f}s",
    )
    assert ok, failures


def test_criterion_8_mutation_without_chi(criterion_line, monkeypatch):
    real_chi = indices.chi_ansc

    def no_chi(*args, **kwargs):
        est = real_chi(*args, **kwargs)
        zero = np.zeros_like(est.table)
        return dataclasses.replace(est, value=0.0, stderr=0.0, table=zero, stderr_table=zero)

    intact = verify_inequality(alternating_scenario(SEED))
    monkeypatch.setattr(indices, "chi_ansc", no_chi)
    mutated = verify_inequality(alternating_scenario(SEED))
    bound = mutated.rhs_weak.value + mutated.rhs_lp.value + mutated.slack["total"]
    ok = intact.passed and not mutated.passed and mutated.lhs.value > bound
    criterion_line(
        8,
        ok,
        f"with chi: pass={intact.passed}; without chi: pass={mutated.passed}, "
        f"lhs={mutated.lhs.value:.4f} > weak+lambda_P+slack={bound:.4f}",
    )
    assert ok


# ---------------------------------------------------------------------------
# 6. proof inclusion


PROOF_DELTAS = (0.05, 0.1, 0.2)
PROOF_EPS = (0.1, 0.25, 0.5, 1.0)


def proof_cases():
    rw = rademacher()
    line_sets = [HalfLine(">=", 0.0), HalfLine("<=", 0.5), FinitePoints.of([0.0, 1.0], 0.2)]
    return [
        ("walk", PartialSumNormalized(rw), UniformWindow(0.1), 100, line_sets),
        ("walk_two_point", PartialSumNormalized(rw), TwoPoint(0.3), 60, line_sets),
        ("alternating", Alternating(-1.0, 1.0), UniformWindow(0.2), 100, line_sets),
        ("block", BlockOscillating(BlockGrowth("linear", 7), 0.0, 1.0), LinearNoise(1.0, 1.0, 0.5), 100,
         line_sets),
        ("discrete", EventuallyConstant(((["a", "b"] * 50, "c", 0.5), (["b"] * 90, "a", 0.5)), ABC),
         UniformWindow(0.1), 100, [FinitePoints.of(["a"], 0, ABC), FinitePoints.of(["b", "c"], 0, ABC)]),
    ]


def test_criterion_6_proof_inclusion(criterion_line):
    start = time.perf_counter()
    total = {"realizations": 0, "premises_hold": 0, "rechecked": 0}
    exact_checks = 0
    per_case = 100_000
    chunk = 20_000
    violation = None
    try:
        for name, m, im, n, sets in proof_cases():
            root = RngStream(SEED).substream(f"proof/{name}")
            for c in range(per_case // chunk):
                gen = root.substream("chunk", c).generator()
                kns = sorted({LinearKn(1.0)(n), im.max_index_bound(n)})
                horizon = max(indices.window_bounds(k, max(PROOF_DELTAS))[1] for k in kns)
                horizon = max(horizon, im.max_index_bound(n))
                paths = m.sample_paths(gen, chunk, horizon)
                N = im.sample(gen, [n], chunk)[:, 0]
                for k in kns:
                    for d in PROOF_DELTAS:
                        for e in PROOF_EPS:
                            for F in sets:
                                res = proof_inclusion_batch(paths, m.space, N, k, d, e, F)
                                for key in total:
                                    total[key] += res[key]
                # every realization of the first chunk also goes through the exact checker
                if c == 0:
                    for s in range(200):
                        path = Path(paths[s], m.space)
                        for d in PROOF_DELTAS:
                            for e in PROOF_EPS:
                                for F in sets:
                                    proof_inclusion_check(path, int(N[s]), kns[0], d, e, F)
                                    exact_checks += 1
    except TheoremViolation as exc:  # pragma: no cover - would mean a real bug
        violation = str(exc)
    elapsed = time.perf_counter() - start
    ok = violation is None and total["premises_hold"] > 0
    criterion_line(
        6,
        ok,
        f"{len(proof_cases())} processes x {per_case} realizations, {total['realizations']} "
        f"(realization, k, delta, epsilon, F) checks, premises held {total['premises_hold']} times, "
        f"{total['rechecked']} exact rechecks + {exact_checks} exact checks, "
        + ("no TheoremViolation" if violation is None else f"TheoremViolation: {violation}"),
    )
    assert ok


# ---------------------------------------------------------------------------
# 7. determinism through the command line


def test_criterion_7_byte_identical_reports(criterion_line, tmp_path):
    from pathlib import Path as FsPath

    config = FsPath(__file__).resolve().parent.parent / "configs" / "clt.json"
    blobs = {}
    for threads in (1, 2, 8):
        out = tmp_path / f"verify_{threads}.json"
        code = main(["verify", "--config", str(config), "--out", str(out), "--threads", str(threads)])
        assert code == 0
        blobs[threads] = out.read_bytes()
    ok = blobs[1] == blobs[2] == blobs[8]
    criterion_line(7, ok, f"verify on the CLT config at threads 1, 2, 8: {len(blobs[1])} bytes each, identical={ok}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
