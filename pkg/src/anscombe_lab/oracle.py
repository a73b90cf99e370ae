"""Exact computations on finite outcome spaces.

These functions never sample.  They enumerate outcomes (or use closed forms
such as the binomial law of a Rademacher walk) and compute the same finite
surrogates the Monte Carlo estimators target, so that each estimator can be
checked against an independent exact value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .distributions import FiniteDistribution, RngStream, exact_prob
from .errors import HorizonExceeded, SupportTooLarge, TheoremViolation
from .indices import (
    EstimatorGrid,
    Scenario,
    chi_ansc,
    infimum_over_kn,
    lambda_p_ratio,
    lambda_w,
    window_bounds,
    window_exceedance,
)
from .metric_space import (
    MAX_SUPPORT_SUBSETS,
    Box,
    DiscreteSpace,
    EuclideanSpace,
    FinitePoints,
    IntervalUnion,
    SetFamily,
    TestSet,
    min_pairwise_distance,
)
from .processes import (
    FiniteProcessSpec,
    KnSpec,
    Path,
    decimal_fraction,
    exact_finite_spec,
    required_horizon,
)

__all__ = [
    "ComparisonRow",
    "FiniteProcessSpec",
    "FiveFormResult",
    "InclusionResult",
    "exact_chi_surrogate",
    "exact_lambda_p",
    "exact_lambda_w",
    "exact_window_exceedance",
    "lambda_w_five_forms",
    "marginal",
    "mc_vs_oracle_compare",
    "proof_inclusion_batch",
    "proof_inclusion_check",
    "rademacher_walk_marginal",
    "randomized_marginal",
]


# ---------------------------------------------------------------------------
# marginals


def marginal(spec: FiniteProcessSpec, n: int) -> FiniteDistribution:
    """Exact law of ``xi_n``."""
    if n > spec.horizon:
        raise HorizonExceeded(f"n={n} beyond horizon {spec.horizon}")
    return FiniteDistribution.from_samples(spec.xi_values[:, n - 1], spec.xi_probs, spec.space)


def randomized_marginal(spec: FiniteProcessSpec, n: int) -> FiniteDistribution:
    """Exact law of ``xi_{N_n}`` (indices independent of the path)."""
    vals, probs = spec.index_laws[n]
    if vals.max() > spec.horizon:
        raise HorizonExceeded(f"N_{n} reaches {vals.max()} beyond horizon {spec.horizon}")
    values = np.concatenate([spec.xi_values[:, v - 1] for v in vals])
    weights = np.concatenate([spec.xi_probs * p for p in probs])
    return FiniteDistribution.from_samples(values, weights, spec.space)


def rademacher_walk_marginal(n: int) -> FiniteDistribution:
    """Exact law of ``S_n / sqrt(n)`` for a simple symmetric random walk."""
    atoms = (2 * np.arange(n + 1) - n) / math.sqrt(n)
    total = 2**n
    coeffs = [1]
    for j in range(n):  # C(n, j+1) from C(n, j), exact integers
        coeffs.append(coeffs[-1] * (n - j) // (j + 1))
    weights = np.array([c / total for c in coeffs])
    weights = weights / weights.sum()
    return FiniteDistribution(atoms, weights)


# ---------------------------------------------------------------------------
# exact surrogates


def _check_window(spec: FiniteProcessSpec, n: int, delta: float) -> tuple[int, int]:
    lo, hi = window_bounds(n, delta)
    if hi > spec.horizon:
        raise HorizonExceeded(f"window [{lo}, {hi}] of n={n} exceeds horizon {spec.horizon}")
    return lo, hi


def exact_window_exceedance(spec: FiniteProcessSpec, n: int, delta: float, epsilon: float) -> float:
    lo, hi = _check_window(spec, n, delta)
    x_n = spec.xi_values[:, n - 1]
    worst = np.zeros(len(spec.xi_probs))
    for m in range(lo, hi + 1):
        worst = np.maximum(worst, spec.space.dist(x_n, spec.xi_values[:, m - 1]))
    return float(spec.xi_probs[worst >= epsilon].sum())


def exact_chi_surrogate(
    spec: FiniteProcessSpec, grid: EstimatorGrid, n_values: Sequence[int] | None = None
) -> float:
    n_values = grid.n_values if n_values is None else n_values
    best = 0.0
    for eps in grid.epsilon_grid:
        inner = min(
            max(exact_window_exceedance(spec, n, delta, eps) for n in n_values)
            for delta in grid.delta_grid
        )
        best = max(best, inner)
    return min(1.0, best)


def exact_lambda_p(
    spec: FiniteProcessSpec,
    kn: KnSpec,
    grid: EstimatorGrid,
    epsilon_grid: Sequence[float] | None = None,
    n_values: Sequence[int] | None = None,
) -> float:
    n_values = grid.n_values if n_values is None else n_values
    eps_grid = grid.epsilon_grid if epsilon_grid is None else epsilon_grid
    best = 0.0
    for n in n_values:
        vals, probs = spec.index_laws[n]
        k = kn(n)
        for eps in eps_grid:
            e = decimal_fraction(eps)
            p = sum(float(q) for v, q in zip(vals, probs) if abs(int(v) - k) >= e * k)
            best = max(best, p)
    return min(1.0, best)


def exact_lambda_w(
    spec: FiniteProcessSpec,
    target,
    family: SetFamily,
    n_values: Sequence[int] | None = None,
    randomized: bool = False,
) -> float:
    n_values = spec.n_values if n_values is None else n_values
    members = list(family)
    target_p = [exact_prob(target, F) for F in members]
    best = -math.inf
    for n in n_values:
        law = randomized_marginal(spec, n) if randomized else marginal(spec, n)
        for F, tp in zip(members, target_p):
            best = max(best, law.prob(F) - tp)
    return min(1.0, max(0.0, best))


# ---------------------------------------------------------------------------
# the five formulations of the weak defect


@dataclass(frozen=True)
class FiveFormResult:
    function_form: float
    enlargement_form: float
    open_form: float
    closed_form: float
    continuity_form: float

    def values(self) -> tuple:
        return (
            self.function_form,
            self.enlargement_form,
            self.open_form,
            self.closed_form,
            self.continuity_form,
        )

    def spread(self) -> float:
        v = self.values()
        return max(v) - min(v)


def _support_matrix(marginals, target: FiniteDistribution):
    space = target.space
    keyed: dict = {}
    for law in [target, *marginals]:
        if not law.space.same_as(space):
            raise ValueError("marginals and target must share one space")
        for a in law.atoms:
            keyed.setdefault(np.asarray(a).tobytes(), a)
    support = np.asarray(list(keyed.values()))
    index = {k: i for i, k in enumerate(keyed)}

    def vector(law):
        v = np.zeros(len(support))
        for a, w in zip(law.atoms, law.weights):
            v[index[np.asarray(a).tobytes()]] += w
        return v

    return support, np.stack([vector(m) for m in marginals]), vector(target)


def _continuity_cells(space, support, gap) -> list[TestSet]:
    """One closed cell per support point, boundaries carrying no support mass."""
    if isinstance(space, EuclideanSpace) and space.dim == 1:
        order = np.argsort(support)
        s = support[order]
        mids = (s[:-1] + s[1:]) / 2
        lows = np.concatenate([[s[0] - gap / 2], mids])
        highs = np.concatenate([mids, [s[-1] + gap / 2]])
        cells = [None] * len(s)
        for pos, i in enumerate(order):
            cells[i] = IntervalUnion(((lows[pos], highs[pos]),))
        return cells
    return [FinitePoints(support[i : i + 1], gap / 2, space) for i in range(len(support))]


def _boundary_hits(cell: TestSet, atoms) -> bool:
    if isinstance(cell, IntervalUnion):
        ends = {e for piece in cell.pieces for e in piece}
        return any(float(a) in ends for a in atoms)
    return bool(np.any(cell.space.dist(atoms[:, None], cell.points[None, :]) == cell.radius))


def auto_alpha_grid(space, support) -> np.ndarray:
    """Distinct pairwise distances of the support plus half the smallest one."""
    d = space.dist(support[:, None], support[None, :])
    nz = np.unique(d[d > 0])
    if nz.size == 0:
        return np.array([1.0])
    return np.unique(np.concatenate([[nz[0] / 2], nz]))


def lambda_w_five_forms(
    marginals: Mapping[int, FiniteDistribution] | Sequence[FiniteDistribution],
    target: FiniteDistribution,
    alpha_grid: Sequence[float] | None = None,
    chunk: int = 4096,
) -> FiveFormResult:
    """All five formulations of the weak defect, by exhaustive enumeration.

    ``marginals`` are the laws of ``xi_n`` over the n-window.  Each form's
    ``limsup`` is the maximum over the window and each ``sup`` over sets runs
    over all subsets of the combined support, realized as:

    closed      the finite subsets themselves,
    open        their complements,
    continuity  unions of cells whose boundaries miss the support,
    enlargement closed ``alpha``-enlargements, alpha over ``alpha_grid``,
    function    hat functions on the subsets, widths over ``alpha_grid``.
    """
    laws = list(marginals.values()) if isinstance(marginals, Mapping) else list(marginals)
    space = target.space
    support, pn, pt = _support_matrix(laws, target)
    k = len(support)
    if k > MAX_SUPPORT_SUBSETS:
        raise SupportTooLarge(f"combined support has {k} points (limit {MAX_SUPPORT_SUBSETS})")
    dist = space.dist(support[:, None], support[None, :])
    gap = min_pairwise_distance(space, support)
    if alpha_grid is None:
        alphas = auto_alpha_grid(space, support)
    else:
        alphas = np.unique(np.asarray(alpha_grid, dtype=float))
        if not math.isinf(gap) and not np.any((alphas > 0) & (alphas < gap)):
            raise ValueError("alpha grid needs a positive value below the minimal support distance")
    alphas = alphas[alphas > 0]

    cells = _continuity_cells(space, support, gap if math.isfinite(gap) else 1.0)
    cell_members = np.stack([c.contains(support) for c in cells]).astype(np.int64)
    for c in cells:
        if _boundary_hits(c, support):
            raise AssertionError(f"continuity cell {c.label()} has support on its boundary")
    reach = [(dist <= a).astype(np.int64) for a in alphas]

    forms = dict.fromkeys(("function", "enlargement", "open", "closed", "continuity"), -math.inf)
    for start in range(0, 1 << k, chunk):
        masks = np.arange(start, min(start + chunk, 1 << k))
        member = ((masks[:, None] >> np.arange(k)[None, :]) & 1).astype(np.int64)

        t_closed = member @ pt
        n_closed = member @ pn.T
        forms["closed"] = max(forms["closed"], np.max(n_closed - t_closed[:, None]))

        t_open = (1 - member) @ pt
        n_open = (1 - member) @ pn.T
        forms["open"] = max(forms["open"], np.max(t_open[:, None] - n_open))

        cont = ((member @ cell_members) > 0).astype(np.int64)
        forms["continuity"] = max(
            forms["continuity"], np.max(np.abs(cont @ pt - (cont @ pn.T).T).T)
        )

        nonempty = member.sum(axis=1) > 0
        near = np.where(member[:, None, :] > 0, dist[None, :, :], np.inf).min(axis=2)
        for a, r in zip(alphas, reach):
            grown = ((member @ r) > 0).astype(np.int64)
            forms["enlargement"] = max(
                forms["enlargement"], np.max(t_closed[:, None] - grown @ pn.T)
            )
            hat = np.where(nonempty[:, None], np.maximum(0.0, 1.0 - near / a), 0.0)
            forms["function"] = max(forms["function"], np.max(np.abs(hat @ pt - (hat @ pn.T).T)))

    def clip(v):
        return float(min(1.0, max(0.0, v)))

    return FiveFormResult(
        function_form=clip(forms["function"]),
        enlargement_form=clip(forms["enlargement"]),
        open_form=clip(forms["open"]),
        closed_form=clip(forms["closed"]),
        continuity_form=clip(forms["continuity"]),
    )


# ---------------------------------------------------------------------------
# the pathwise inclusion behind the random-index inequality


@dataclass(frozen=True)
class InclusionResult:
    holds: bool
    violated: tuple = ()


PREMISES = ("index_within_delta", "oscillation_below_epsilon", "xi_N_in_F")


def _q(x) -> Fraction:
    return Fraction(float(x))


def _exact_dist_sq(space, x, y) -> Fraction:
    if isinstance(space, DiscreteSpace):
        d = _q(space.dist(x, y))
        return d * d
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    return sum(((_q(a) - _q(b)) ** 2 for a, b in zip(xs, ys)), Fraction(0))


def _within(F: TestSet, x, extra: float) -> bool:
    """Exact test of ``d(x, F) <= extra``."""
    e = decimal_fraction(extra)
    space = F.space
    if isinstance(space, DiscreteSpace):
        return bool(F.enlarge(extra).contains(x))
    if isinstance(F, FinitePoints):
        if F.is_empty:
            return False
        bound = (_q(F.radius) + e) ** 2
        return any(_exact_dist_sq(space, x, p) <= bound for p in F.points)
    if isinstance(F, Box):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        core = Fraction(0)
        for v, (lo, hi) in zip(xs, F.bounds):
            v = _q(v)
            excess = max(_q(lo) - v, v - _q(hi), Fraction(0))
            core += excess * excess
        return core <= (_q(F.radius) + e) ** 2
    v = _q(x)
    for lo, hi in F.intervals():
        below = _q(lo) - v if math.isfinite(lo) else Fraction(-1)
        above = v - _q(hi) if math.isfinite(hi) else Fraction(-1)
        if max(below, above, Fraction(0)) <= e:
            return True
    return False


def proof_inclusion_check(
    xi_path: Path, N_n: int, k_n: int, delta: float, epsilon: float, F: TestSet
) -> InclusionResult:
    """Check one realization of the event inclusion.

    Premises: ``|k_n - N_n| <= delta k_n``; ``xi`` moves by less than epsilon
    over ``window_bounds(k_n, delta)`` (measured from ``xi_{k_n}``);
    ``xi_{N_n}`` lies in F.  Conclusion: ``xi_{k_n}`` lies in the closed
    epsilon-enlargement of F.  Comparisons use exact rational arithmetic.
    Premises holding with a failed conclusion raises TheoremViolation.
    """
    lo, hi = window_bounds(k_n, delta)
    if hi > xi_path.horizon:
        raise HorizonExceeded(f"window [{lo}, {hi}] exceeds horizon {xi_path.horizon}")
    space = xi_path.space
    failed = []
    if abs(N_n - k_n) > decimal_fraction(delta) * k_n:
        failed.append("index_within_delta")
    x_k = xi_path.at(k_n)
    eps_sq = decimal_fraction(epsilon) ** 2
    if any(_exact_dist_sq(space, x_k, xi_path.at(m)) >= eps_sq for m in range(lo, hi + 1)):
        failed.append("oscillation_below_epsilon")
    if 1 <= N_n <= xi_path.horizon:
        if not _within(F, xi_path.at(N_n), 0.0):
            failed.append("xi_N_in_F")
    elif not failed:
        raise HorizonExceeded(f"N_n={N_n} outside horizon {xi_path.horizon}")
    if failed:
        return InclusionResult(False, tuple(failed))
    if not _within(F, x_k, epsilon):
        raise TheoremViolation(
            f"premises hold but xi_k={x_k!r} is not in the {epsilon}-enlargement of {F.label()}"
        )
    return InclusionResult(True)


def proof_inclusion_batch(
    paths: np.ndarray,
    space,
    N: np.ndarray,
    k_n: int,
    delta: float,
    epsilon: float,
    F: TestSet,
) -> dict:
    """Vectorized screening of many realizations at one ``(k_n, delta, epsilon, F)``.

    Floating-point premises and conclusion are computed for every path.  Any
    path that might satisfy the premises while its conclusion is not
    comfortably met (a rounding margin on both sides) is re-examined by
    :func:`proof_inclusion_check` in exact arithmetic.
    """
    lo, hi = window_bounds(k_n, delta)
    if hi > paths.shape[1]:
        raise HorizonExceeded(f"window [{lo}, {hi}] exceeds horizon {paths.shape[1]}")
    N = np.asarray(N, dtype=np.int64)
    # |N - k| <= delta k  <=>  |N - k| <= floor(delta k) for integers
    idx_ok = np.abs(N - k_n) <= math.floor(decimal_fraction(delta) * k_n)
    x_k = paths[:, k_n - 1]
    window = paths[:, lo - 1 : hi]
    if isinstance(space, EuclideanSpace) and space.dim == 1:
        osc = np.maximum(window.max(axis=1) - x_k, x_k - window.min(axis=1))
    else:
        osc = space.dist(x_k[:, None], window).max(axis=1)
    osc_ok = osc < epsilon
    safe_N = np.clip(N, 1, paths.shape[1])
    x_N = paths[np.arange(len(N)), safe_N - 1]
    in_F = F.contains(x_N) & (N >= 1) & (N <= paths.shape[1])
    premises = idx_ok & osc_ok & in_F
    concl = F.enlarge(epsilon).contains(x_k)
    # widen the screen by a rounding margin so that boundary cases always
    # reach the exact check
    tol = 1e-9 * (1.0 + epsilon)
    loose = idx_ok & (osc < epsilon + tol) & (N >= 1) & (N <= paths.shape[1])
    if F.is_empty:
        suspects = np.array([], dtype=np.int64)
    else:
        loose &= np.asarray(F.dist(x_N), dtype=float) <= tol
        sure = np.asarray(F.dist(x_k), dtype=float) <= epsilon - tol
        suspects = np.flatnonzero(loose & ~sure)
    for s in suspects:
        proof_inclusion_check(Path(paths[s], space), int(N[s]), k_n, delta, epsilon, F)
    return {
        "realizations": int(len(N)),
        "premises_hold": int(premises.sum()),
        "conclusion_holds": int((premises & concl).sum()),
        "rechecked": int(len(suspects)),
        "index_violated": int((~idx_ok).sum()),
        "oscillation_violated": int((~osc_ok).sum()),
        "membership_violated": int((~in_F).sum()),
    }


# ---------------------------------------------------------------------------
# Monte Carlo vs exact


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    mc: float
    oracle: float
    stderr: float
    z: float
    flagged: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "mc": self.mc,
            "oracle": self.oracle,
            "stderr": self.stderr,
            "z": self.z if math.isfinite(self.z) else ("inf" if self.z > 0 else "-inf"),
            "flagged": self.flagged,
        }


def _row(name, mc, oracle, stderr, limit=4.0) -> ComparisonRow:
    diff = mc - oracle
    if stderr > 0:
        z = diff / stderr
    else:
        z = 0.0 if abs(diff) <= 1e-12 else math.copysign(math.inf, diff)
    return ComparisonRow(name, float(mc), float(oracle), float(stderr), float(z), abs(z) > limit)


def scenario_spec(scenario: Scenario) -> FiniteProcessSpec:
    """Enumerate a scenario out to the horizon every estimator needs."""
    grid = scenario.grid
    n_values = grid.n_values
    horizon = max(
        required_horizon(scenario.index_model, n_values),
        max(window_bounds(n, d)[1] for n in n_values for d in grid.delta_grid),
    )
    return exact_finite_spec(scenario.process, scenario.index_model, horizon, n_values)


def mc_vs_oracle_compare(scenario: Scenario, threads: int = 1) -> list[ComparisonRow]:
    """Every estimator next to its exact value on an enumerable scenario."""
    spec = scenario_spec(scenario)
    grid = scenario.grid
    root = RngStream(scenario.seed)
    rows = []

    n0, d0, e0 = grid.n_values[0], grid.delta_grid[-1], grid.epsilon_grid[0]
    we = window_exceedance(
        scenario.process, n0, d0, e0, grid.samples, root.substream("compare/we"), threads
    )
    rows.append(
        _row(
            f"window_exceedance(n={n0},delta={d0:g},epsilon={e0:g})",
            we.value,
            exact_window_exceedance(spec, n0, d0, e0),
            we.stderr,
        )
    )

    chi = chi_ansc(scenario.process, grid, root.substream("compare/chi"), threads)
    rows.append(_row("chi_ansc", chi.value, exact_chi_surrogate(spec, grid), chi.stderr))

    kn_rng = root.substream("compare/kn")
    for kn in sorted(scenario.kn_family, key=lambda k: k.sort_key()):
        est = lambda_p_ratio(scenario.index_model, kn, grid, kn_rng, threads)
        rows.append(
            _row(f"lambda_p[{kn.label()}]", est.value, exact_lambda_p(spec, kn, grid), est.stderr)
        )
    _, best, _ = infimum_over_kn(scenario.index_model, scenario.kn_family, grid, kn_rng, threads)
    exact_inf = min(exact_lambda_p(spec, kn, grid) for kn in scenario.kn_family)
    rows.append(_row("lambda_p_infimum", best.value, exact_inf, best.stderr))

    lw = lambda_w(
        scenario.process,
        scenario.target,
        scenario.family,
        grid,
        root.substream("compare/lw"),
        threads=threads,
        hat_form=False,
    )
    rows.append(
        _row("lambda_w", lw.value, exact_lambda_w(spec, scenario.target, scenario.family), lw.stderr)
    )
    lwr = lambda_w(
        scenario.process,
        scenario.target,
        scenario.family,
        grid,
        root.substream("compare/lwr"),
        index_model=scenario.index_model,
        threads=threads,
        hat_form=False,
    )
    exact_r = exact_lambda_w(spec, scenario.target, scenario.family, randomized=True)
    rows.append(_row("lambda_w_randomized", lwr.value, exact_r, lwr.stderr))
    return rows
