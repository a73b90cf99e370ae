"""Scenario configuration: strict JSON schema, validation and object building.

Validation never stops at the first problem; every violation found is
collected and reported together in one :class:`ValidationError`.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass

import numpy as np

from .distributions import FiniteDistribution, Normal, PointMass, exact_prob, infer_space
from .errors import ConfigParseError, UnsupportedSetForLaw, ValidationError
from .indices import EstimatorGrid, Scenario, window_bounds
from .metric_space import (
    MAX_SUPPORT_SUBSETS,
    DiscreteSpace,
    EuclideanSpace,
    HalfLines,
    IntervalUnions,
    SupportSubsets,
)
from .processes import (
    Alternating,
    BlockGrowth,
    BlockOscillating,
    Constant,
    DeterministicIndex,
    EventuallyConstant,
    ExplicitKn,
    LinearKn,
    LinearNoise,
    PartialSumNormalized,
    TwoPoint,
    UniformWindow,
    required_horizon,
)

MAX_HORIZON = 1_000_000
QUANTITIES = ("chi_ansc", "lambda_w", "lambda_w_randomized", "lambda_p")

TOP_LEVEL = {
    "seed": True,
    "samples": True,
    "n_window": True,
    "stride": False,
    "epsilon_grid": True,
    "delta_grid": True,
    "alpha_grid": False,
    "process": True,
    "index_model": False,
    "target": True,
    "set_family": True,
    "kn_family": False,
    "space": False,
    "quantities": False,
}

PROCESS_PARAMS = {
    "constant": {"point"},
    "alternating": {"a", "b"},
    "partial_sum_normalized": {"step_law", "standardized"},
    "eventually_constant": {"outcomes"},
    "block_oscillating": {"growth", "a", "b", "phases"},
}
INDEX_PARAMS = {
    "deterministic": {"kn"},
    "two_point": {"q"},
    "uniform_window": {"beta"},
    "linear_noise": {"c", "halfwidth"},
}
LAW_FIELDS = {
    "normal": {"mean", "stddev"},
    "point_mass": {"point"},
    "uniform_finite": {"atoms"},
    "finite": {"atoms", "weights"},
    "rademacher": set(),
}
FAMILY_PARAMS = {
    "half_lines": {"thresholds"},
    "interval_unions": {"endpoints", "max_components"},
    "support_subsets": {"points"},
}


class _Problems:
    def __init__(self):
        self.items: list[str] = []

    def add(self, msg: str):
        self.items.append(msg)

    def fields(self, where: str, obj, allowed, required=()):
        if not isinstance(obj, dict):
            self.add(f"{where}: expected an object")
            return False
        for key in sorted(set(obj) - set(allowed)):
            self.add(f"{where}: unknown field '{key}'")
        for key in sorted(set(required) - set(obj)):
            self.add(f"{where}: missing field '{key}'")
        return True

    def attempt(self, where: str, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            for v in exc.violations:
                self.add(f"{where}: {v}")
        except (ValueError, TypeError, KeyError, IndexError) as exc:
            self.add(f"{where}: {exc}")
        return None


def _kind_params(p: _Problems, where: str, spec, table, params_key="params"):
    if not p.fields(where, spec, {"kind", params_key}, {"kind"}):
        return None, {}
    kind = spec.get("kind")
    if kind not in table:
        p.add(f"{where}.kind: unknown kind {kind!r} (expected one of {sorted(table)})")
        return None, {}
    params = spec.get(params_key, {})
    if not p.fields(f"{where}.{params_key}", params, table[kind]):
        return None, {}
    return kind, params


def _build_space(p: _Problems, spec):
    if spec is None:
        return None
    if not p.fields("space", spec, {"kind", "dim", "alphabet", "distance_table"}, {"kind"}):
        return None
    kind = spec.get("kind")
    if kind == "euclidean":
        return p.attempt("space", EuclideanSpace, int(spec.get("dim", 1)))
    if kind == "discrete":
        alphabet = spec.get("alphabet")
        table = spec.get("distance_table")
        if table is None and alphabet is not None:
            return p.attempt("space", DiscreteSpace.uniform, alphabet)
        return p.attempt("space", DiscreteSpace, tuple(alphabet or ()), table)
    p.add(f"space.kind: unknown kind {kind!r}")
    return None


def _build_law(p: _Problems, where: str, spec, space):
    if not p.fields(where, spec, {"kind", "params"}, {"kind"}):
        return None
    kind = spec.get("kind")
    if kind not in LAW_FIELDS:
        p.add(f"{where}.kind: unknown kind {kind!r} (expected one of {sorted(LAW_FIELDS)})")
        return None
    params = spec.get("params", {})
    if not p.fields(f"{where}.params", params, LAW_FIELDS[kind]):
        return None

    def build():
        if kind == "normal":
            return Normal(float(params.get("mean", 0.0)), float(params.get("stddev", 1.0)))
        if kind == "point_mass":
            pt = params["point"]
            return PointMass(pt, space or infer_space([pt]))
        if kind == "rademacher":
            return FiniteDistribution.of([-1.0, 1.0], [0.5, 0.5])
        atoms = params["atoms"]
        sp = space or infer_space(atoms)
        if kind == "uniform_finite":
            return FiniteDistribution.of(atoms, np.full(len(atoms), 1.0 / len(atoms)), sp)
        return FiniteDistribution.of(atoms, params["weights"], sp)

    return p.attempt(where, build)


def _build_kn(p: _Problems, where: str, spec):
    if not p.fields(where, spec, {"kind", "c", "values"}, {"kind"}):
        return None
    kind = spec.get("kind")
    if kind == "linear":
        return p.attempt(where, LinearKn, float(spec.get("c", 1.0)))
    if kind == "explicit":
        return p.attempt(where, ExplicitKn, tuple(spec.get("values", ())))
    p.add(f"{where}.kind: unknown kind {kind!r}")
    return None


def _build_process(p: _Problems, spec, space):
    kind, params = _kind_params(p, "process", spec, PROCESS_PARAMS)
    if kind is None:
        return None
    where = "process.params"

    def build():
        if kind == "constant":
            return Constant(params["point"], space)
        if kind == "alternating":
            return Alternating(params["a"], params["b"], space)
        if kind == "eventually_constant":
            outs = []
            for i, o in enumerate(params["outcomes"]):
                if not p.fields(
                    f"{where}.outcomes[{i}]", o, {"prefix", "limit", "probability"}, {"limit", "probability"}
                ):
                    continue
                outs.append((o.get("prefix", []), o["limit"], o["probability"]))
            return EventuallyConstant(tuple(outs), space)
        if kind == "block_oscillating":
            g = params["growth"]
            if not p.fields(f"{where}.growth", g, {"kind", "c", "r"}, {"kind"}):
                return None
            rate = g.get("c") if g.get("kind") == "linear" else g.get("r")
            if rate is None:
                raise ValueError("growth needs 'c' (linear) or 'r' (exponential)")
            growth = BlockGrowth(g["kind"], float(rate))
            return BlockOscillating(growth, params["a"], params["b"], int(params.get("phases", 16)), space)
        return None

    if kind == "partial_sum_normalized":
        step = _build_law(p, f"{where}.step_law", params.get("step_law"), None)
        if step is None:
            return None
        return p.attempt(where, PartialSumNormalized, step, bool(params.get("standardized", True)))
    return p.attempt(where, build)


def _build_index(p: _Problems, spec):
    if spec is None:
        return DeterministicIndex(LinearKn(1.0))
    kind, params = _kind_params(p, "index_model", spec, INDEX_PARAMS)
    if kind is None:
        return None
    where = "index_model.params"
    if kind == "deterministic":
        kn = _build_kn(p, f"{where}.kn", params.get("kn", {"kind": "linear", "c": 1.0}))
        return None if kn is None else DeterministicIndex(kn)
    if kind == "two_point":
        return p.attempt(where, TwoPoint, float(params.get("q", 0.0)))
    if kind == "uniform_window":
        return p.attempt(where, UniformWindow, float(params.get("beta", 0.0)))
    hw = params.get("halfwidth", {})
    if not p.fields(f"{where}.halfwidth", hw, {"scale", "exponent"}):
        return None
    return p.attempt(
        where,
        LinearNoise,
        float(params.get("c", 1.0)),
        float(hw.get("scale", 1.0)),
        float(hw.get("exponent", 0.5)),
    )


def _build_family(p: _Problems, spec, space):
    kind, params = _kind_params(p, "set_family", spec, FAMILY_PARAMS)
    if kind is None:
        return None
    where = "set_family.params"

    def grid_values(v):
        if isinstance(v, dict):
            if not p.fields(f"{where}.thresholds", v, {"start", "stop", "num"}, {"start", "stop", "num"}):
                return ()
            return tuple(np.linspace(float(v["start"]), float(v["stop"]), int(v["num"])))
        return tuple(float(x) for x in v)

    if kind == "half_lines":
        return p.attempt(where, lambda: HalfLines(grid_values(params.get("thresholds", ()))))
    if kind == "interval_unions":
        return p.attempt(
            where,
            lambda: IntervalUnions(
                grid_values(params.get("endpoints", ())), int(params.get("max_components", 1))
            ),
        )
    pts = params.get("points", [])
    if len(pts) > MAX_SUPPORT_SUBSETS:
        p.add(f"{where}.points: at most {MAX_SUPPORT_SUBSETS} points allowed")
        return None
    return p.attempt(where, lambda: SupportSubsets.of(pts, space or infer_space(pts)))


def _build_kn_family(p: _Problems, spec):
    if spec is None:
        return (LinearKn(1.0),)
    if not p.fields("kn_family", spec, {"kind", "c_grid", "sequences"}, {"kind"}):
        return None
    kind = spec.get("kind")
    if kind == "linear":
        grid = spec.get("c_grid", [])
        if not grid:
            p.add("kn_family.c_grid: must be nonempty")
            return None
        out = [p.attempt("kn_family.c_grid", LinearKn, float(c)) for c in grid]
        return None if None in out else tuple(out)
    if kind == "explicit":
        seqs = spec.get("sequences", [])
        if not seqs:
            p.add("kn_family.sequences: must be nonempty")
            return None
        out = [p.attempt("kn_family.sequences", ExplicitKn, tuple(s)) for s in seqs]
        return None if None in out else tuple(out)
    p.add(f"kn_family.kind: unknown kind {kind!r}")
    return None


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    raw: dict
    scenario: Scenario
    quantities: tuple

    @property
    def seed(self) -> int:
        return self.scenario.seed

    def echo(self) -> dict:
        return copy.deepcopy(self.raw)


def _parse_text(source) -> dict:
    if isinstance(source, dict):
        return copy.deepcopy(source)
    text = source
    if isinstance(source, (str, os.PathLike)) and not str(source).lstrip().startswith("{"):
        try:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigParseError(f"cannot read config {source}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigParseError("config must be a JSON object")
    return data


def load_config(source, seed: int | None = None, samples: int | None = None, verify: bool = False):
    """Parse and fully validate a scenario config (path, JSON text or dict).

    ``seed`` and ``samples`` override the file values.  With ``verify`` the
    checks needed by the inequality verifier are added.
    """
    raw = _parse_text(source)
    if seed is not None:
        raw["seed"] = seed
    if samples is not None:
        raw["samples"] = samples
    p = _Problems()
    p.fields("config", raw, TOP_LEVEL, [k for k, req in TOP_LEVEL.items() if req])

    s = raw.get("seed")
    if "seed" in raw and not (isinstance(s, int) and not isinstance(s, bool) and 0 <= s < 2**64):
        p.add("seed: must be an unsigned 64-bit integer")

    grid = None
    try:
        grid = EstimatorGrid(
            tuple(raw.get("epsilon_grid", ())),
            tuple(raw.get("delta_grid", ())),
            tuple(raw.get("n_window", ())),
            int(raw.get("stride", 1)),
            int(raw.get("samples", 0)),
            raw.get("alpha_grid", "auto"),
        )
    except ValidationError as exc:
        p.items.extend(exc.violations)
    except (TypeError, ValueError) as exc:
        p.add(f"grid: {exc}")

    space = _build_space(p, raw.get("space"))
    process = _build_process(p, raw.get("process"), space) if "process" in raw else None
    if space is None and process is not None:
        space = process.space
    index_model = _build_index(p, raw.get("index_model"))
    target = _build_law(p, "target", raw.get("target"), space) if "target" in raw else None
    family = _build_family(p, raw.get("set_family"), space) if "set_family" in raw else None
    kn_family = _build_kn_family(p, raw.get("kn_family"))

    quantities = tuple(raw.get("quantities", QUANTITIES))
    for q in quantities:
        if q not in QUANTITIES:
            p.add(f"quantities: unknown quantity {q!r} (expected one of {list(QUANTITIES)})")

    if grid is not None and index_model is not None:
        n_values = grid.n_values
        horizon = p.attempt("index_model", required_horizon, index_model, n_values)
        if horizon is not None:
            chi_h = max(window_bounds(n, d)[1] for n in n_values for d in grid.delta_grid)
            if max(horizon, chi_h) > MAX_HORIZON:
                p.add(f"horizon {max(horizon, chi_h)} exceeds the limit {MAX_HORIZON}")
        if kn_family:
            for kn in kn_family:
                if isinstance(kn, ExplicitKn) and len(kn.seq) < grid.n_window[1]:
                    p.add(f"kn_family: explicit sequence shorter than n_window end {grid.n_window[1]}")

    if target is not None and family is not None:
        if process is not None and not target.space.same_as(process.space):
            p.add("target: lives in a different space than the process")
        try:
            members = family.members()
            for F in members:
                exact_prob(target, F)
            if verify and grid is not None:
                for F in members:
                    exact_prob(target, F.enlarge(grid.epsilon_grid[0]))
        except UnsupportedSetForLaw as exc:
            p.add(f"set_family: {exc}")
        except ValueError as exc:
            p.add(f"set_family: {exc}")

    if p.items:
        raise ValidationError(p.items)
    scenario = Scenario(process, index_model, target, family, kn_family, grid, int(raw["seed"]))
    return ScenarioConfig(raw, scenario, quantities)


def canonical_config(raw: dict) -> dict:
    """Config echo with floats normalized; used verbatim in reports."""
    return json.loads(json.dumps(raw, sort_keys=True))

