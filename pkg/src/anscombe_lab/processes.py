"""Random sequences, random index sequences and their composition.

A process model produces whole sample paths ``xi_1, ..., xi_H`` in batches:
``sample_paths`` returns an array of shape ``(count, H) + point_shape`` of
encoded points.  Index models produce ``N_n`` for a list of ``n`` values, drawn
independently across ``n`` and independently of the paths.

Models with a finite outcome space can also be enumerated exactly, which is
what :func:`exact_finite_spec` hands over to the oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .distributions import FiniteDistribution, Normal, RngStream, infer_space
from .errors import IndexOutOfHorizon, NotEnumerable
from .metric_space import REAL_LINE, DiscreteSpace, Space

MAX_ENUMERABLE_HORIZON = 25
MAX_ENUMERATED_OUTCOMES = 1 << 25


def decimal_fraction(x) -> Fraction:
    """Exact rational value of the shortest decimal that prints as ``x``.

    Grid parameters are written in decimal (0.05 means 1/20), so integer
    thresholds derived from them use this value rather than the binary one.
    """
    return Fraction(repr(float(x)))


def round_half_up(x) -> int:
    return math.floor(x + Fraction(1, 2)) if isinstance(x, Fraction) else math.floor(x + 0.5)


def _space_for(points, space):
    return space if space is not None else infer_space(points)


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True, eq=False)
class Path:
    """One realization ``xi_1..xi_H`` (encoded points, 1-based access via ``at``)."""

    values: np.ndarray
    space: Space = REAL_LINE

    @property
    def horizon(self) -> int:
        return len(self.values)

    def at(self, n: int):
        if not 1 <= n <= self.horizon:
            raise IndexOutOfHorizon(f"index {n} outside horizon {self.horizon}")
        return self.values[n - 1]

    def decoded(self) -> list:
        return [self.space.decode(v) for v in self.values]

    def __eq__(self, other):
        return (
            isinstance(other, Path)
            and self.space.same_as(other.space)
            and np.array_equal(self.values, other.values)
        )


# ---------------------------------------------------------------------------
# process models


class ProcessModel:
    space: Space
    kind = "process"

    def sample_paths(self, gen: np.random.Generator, count: int, horizon: int) -> np.ndarray:
        raise NotImplementedError

    def enumerate_paths(self, horizon: int) -> tuple[np.ndarray, np.ndarray]:
        """All paths to ``horizon`` with their probabilities."""
        raise NotEnumerable(f"{self.kind} has no finite outcome space")

    def _pattern(self, codes: np.ndarray, count: int) -> np.ndarray:
        return np.broadcast_to(codes, (count,) + codes.shape).copy()


@dataclass(frozen=True, eq=False)
class Constant(ProcessModel):
    """``xi_n = point`` for every n."""

    point: object
    space: Space | None = None

    kind = "constant"

    def __post_init__(self):
        object.__setattr__(self, "space", _space_for([self.point], self.space))
        object.__setattr__(self, "_code", np.asarray(self.space.encode(self.point)))

    def _row(self, horizon):
        return np.broadcast_to(self._code, (horizon,) + self._code.shape)

    def sample_paths(self, gen, count, horizon):
        return self._pattern(self._row(horizon), count)

    def enumerate_paths(self, horizon):
        return self._row(horizon)[None].copy(), np.ones(1)

    def to_dict(self):
        return {"kind": self.kind, "params": {"point": self.space.decode(self._code)}}


@dataclass(frozen=True, eq=False)
class Alternating(ProcessModel):
    """``xi_n = a`` for even n and ``b`` for odd n."""

    a: object
    b: object
    space: Space | None = None

    kind = "alternating"

    def __post_init__(self):
        object.__setattr__(self, "space", _space_for([self.a, self.b], self.space))
        codes = np.asarray([self.space.encode(self.a), self.space.encode(self.b)])
        object.__setattr__(self, "_codes", codes)

    def _row(self, horizon):
        n = np.arange(1, horizon + 1)
        return self._codes[n % 2]

    def sample_paths(self, gen, count, horizon):
        return self._pattern(self._row(horizon), count)

    def enumerate_paths(self, horizon):
        return self._row(horizon)[None].copy(), np.ones(1)

    def to_dict(self):
        a, b = (self.space.decode(c) for c in self._codes)
        return {"kind": self.kind, "params": {"a": a, "b": b}}


@dataclass(frozen=True, eq=False)
class PartialSumNormalized(ProcessModel):
    """``xi_n = S_n / sqrt(n)`` with ``S_n`` a sum of n i.i.d. real steps.

    With ``standardized=True`` (the CLT setting) a finite step law must have
    mean 0 and variance 1, and a normal step law must be N(0, 1).
    """

    step_law: FiniteDistribution | Normal
    standardized: bool = True

    kind = "partial_sum_normalized"
    space = REAL_LINE

    def __post_init__(self):
        if not REAL_LINE.same_as(self.step_law.space):
            raise ValueError("step law must live on the real line")
        if self.standardized:
            if isinstance(self.step_law, FiniteDistribution):
                m, v = self.step_law.mean(), self.step_law.variance()
            else:
                m, v = self.step_law.mean, self.step_law.stddev**2
            if abs(m) > 1e-12 or abs(v - 1.0) > 1e-12:
                raise ValueError(f"step law must have mean 0 and variance 1, got ({m}, {v})")

    def _normalize(self, steps):
        s = np.cumsum(steps, axis=-1)
        return s / np.sqrt(np.arange(1, steps.shape[-1] + 1))

    def sample_paths(self, gen, count, horizon):
        return self._normalize(self.step_law.sample(gen, (count, horizon)))

    def enumerate_paths(self, horizon):
        if not isinstance(self.step_law, FiniteDistribution):
            raise NotEnumerable("normal steps have no finite outcome space")
        k = len(self.step_law.atoms)
        if horizon > MAX_ENUMERABLE_HORIZON or k**horizon > MAX_ENUMERATED_OUTCOMES:
            raise NotEnumerable(
                f"{k}^{horizon} step sequences exceed the enumeration cap "
                f"(horizon <= {MAX_ENUMERABLE_HORIZON})"
            )
        idx = np.arange(k**horizon)
        digits = (idx[:, None] // (k ** np.arange(horizon))[None, :]) % k
        steps = self.step_law.atoms[digits]
        probs = np.prod(self.step_law.weights[digits], axis=1)
        return self._normalize(steps), probs

    def to_dict(self):
        return {"kind": self.kind, "params": {"step_law": self.step_law.to_dict()}}


@dataclass(frozen=True, eq=False)
class EventuallyConstant(ProcessModel):
    """Finitely many outcomes, each a finite prefix followed by a limit point.

    ``outcomes`` is a sequence of ``(prefix, limit, probability)`` triples.
    """

    outcomes: tuple
    space: Space | None = None

    kind = "eventually_constant"

    def __post_init__(self):
        outcomes = tuple((tuple(p), lim, float(q)) for p, lim, q in self.outcomes)
        if not outcomes:
            raise ValueError("eventually_constant needs at least one outcome")
        probs = np.array([q for _, _, q in outcomes])
        if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("outcome probabilities must be positive and sum to 1")
        pts = [x for p, lim, _ in outcomes for x in (*p, lim)]
        object.__setattr__(self, "space", _space_for(pts, self.space))
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "_probs", probs)

    def _table(self, horizon):
        rows = []
        for prefix, limit, _ in self.outcomes:
            seq = list(prefix[:horizon]) + [limit] * max(0, horizon - len(prefix))
            rows.append(self.space.encode_many(seq))
        return np.stack(rows)

    def sample_paths(self, gen, count, horizon):
        which = gen.choice(len(self._probs), size=count, p=self._probs)
        return self._table(horizon)[which]

    def enumerate_paths(self, horizon):
        return self._table(horizon), self._probs.copy()

    def to_dict(self):
        return {
            "kind": self.kind,
            "params": {
                "outcomes": [
                    {"prefix": list(p), "limit": lim, "probability": q}
                    for p, lim, q in self.outcomes
                ]
            },
        }


@dataclass(frozen=True)
class BlockGrowth:
    """How block boundaries are placed.

    ``linear``: blocks of constant integer length ``c`` (boundaries grow
    linearly), random phase uniform on ``{0, ..., c-1}``.
    ``exponential``: boundaries at ``r^(j + u)``, random phase ``u`` uniform on
    ``{0, 1/K, ..., (K-1)/K}``.
    """

    kind: str
    rate: float

    def __post_init__(self):
        if self.kind == "linear":
            if int(self.rate) != self.rate or self.rate < 1:
                raise ValueError("linear block length must be a positive integer")
        elif self.kind == "exponential":
            if not self.rate > 1:
                raise ValueError("exponential growth rate must exceed 1")
        else:
            raise ValueError(f"unknown block growth {self.kind!r}")


@dataclass(frozen=True, eq=False)
class BlockOscillating(ProcessModel):
    """Constant on blocks, switching between ``a`` and ``b`` from block to block.

    The block pattern is shifted by a uniformly random phase, so a window
    straddles a block boundary with a probability strictly between 0 and 1.
    """

    growth: BlockGrowth
    a: object
    b: object
    phases: int = 16
    space: Space | None = None

    kind = "block_oscillating"

    def __post_init__(self):
        object.__setattr__(self, "space", _space_for([self.a, self.b], self.space))
        if self.phases < 1:
            raise ValueError("phases must be >= 1")
        codes = np.asarray([self.space.encode(self.a), self.space.encode(self.b)])
        object.__setattr__(self, "_codes", codes)

    @property
    def n_phases(self) -> int:
        return int(self.growth.rate) if self.growth.kind == "linear" else self.phases

    def block_index(self, n: np.ndarray, phase: int) -> np.ndarray:
        n = np.asarray(n)
        if self.growth.kind == "linear":
            return (n + phase) // int(self.growth.rate)
        u = phase / self.phases
        return np.floor(np.log(n) / math.log(self.growth.rate) + u).astype(np.int64)

    def _table(self, horizon):
        n = np.arange(1, horizon + 1)
        return np.stack([self._codes[self.block_index(n, j) % 2] for j in range(self.n_phases)])

    def sample_paths(self, gen, count, horizon):
        which = gen.integers(0, self.n_phases, size=count)
        return self._table(horizon)[which]

    def enumerate_paths(self, horizon):
        k = self.n_phases
        return self._table(horizon), np.full(k, 1.0 / k)

    def to_dict(self):
        a, b = (self.space.decode(c) for c in self._codes)
        growth = {"kind": self.growth.kind}
        growth["c" if self.growth.kind == "linear" else "r"] = self.growth.rate
        return {
            "kind": self.kind,
            "params": {"growth": growth, "a": a, "b": b, "phases": self.phases},
        }


# ---------------------------------------------------------------------------
# deterministic index sequences


class KnSpec:
    kind = "kn"

    def __call__(self, n: int) -> int:
        raise NotImplementedError

    def values(self, n_values) -> np.ndarray:
        return np.asarray([self(int(n)) for n in n_values], dtype=np.int64)

    def sort_key(self):
        return (1, 0.0)


@dataclass(frozen=True)
class LinearKn(KnSpec):
    """``k_n = max(1, round(c * n))`` with halves rounded up."""

    c: float

    kind = "linear"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("linear k_n needs c > 0")

    def __call__(self, n):
        return max(1, round_half_up(decimal_fraction(self.c) * int(n)))

    def sort_key(self):
        return (0, float(self.c))

    def label(self):
        return f"linear(c={format(self.c, '.12g')})"

    def to_dict(self):
        return {"kind": "linear", "c": self.c}


@dataclass(frozen=True)
class ExplicitKn(KnSpec):
    """Explicit nondecreasing positive integers ``k_1, k_2, ...``."""

    seq: tuple

    kind = "explicit"

    def __post_init__(self):
        seq = tuple(int(v) for v in self.seq)
        if not seq:
            raise ValueError("explicit k_n sequence is empty")
        if min(seq) < 1:
            raise ValueError("explicit k_n must be positive integers")
        if any(b < a for a, b in zip(seq, seq[1:])):
            raise ValueError("explicit k_n must be nondecreasing")
        object.__setattr__(self, "seq", seq)

    def __call__(self, n):
        if not 1 <= n <= len(self.seq):
            raise IndexOutOfHorizon(f"explicit k_n has no entry for n={n}")
        return self.seq[n - 1]

    def label(self):
        return f"explicit(len={len(self.seq)})"

    def to_dict(self):
        return {"kind": "explicit", "values": list(self.seq)}


# ---------------------------------------------------------------------------
# random index models


class IndexModel:
    kind = "index"

    def law(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Exact law of ``N_n`` as (values, probabilities)."""
        raise NotImplementedError

    def max_index_bound(self, n: int) -> int:
        raise NotImplementedError

    def sample(self, gen: np.random.Generator, n_values, count: int) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class DeterministicIndex(IndexModel):
    kn: KnSpec

    kind = "deterministic"

    def law(self, n):
        return np.array([self.kn(n)], dtype=np.int64), np.ones(1)

    def max_index_bound(self, n):
        return self.kn(n)

    def sample(self, gen, n_values, count):
        k = self.kn.values(n_values)
        return np.broadcast_to(k, (count, len(k))).copy()

    def to_dict(self):
        return {"kind": self.kind, "params": {"kn": self.kn.to_dict()}}


@dataclass(frozen=True)
class TwoPoint(IndexModel):
    """``N_n = 2n`` with probability q, else ``N_n = n``."""

    q: float

    kind = "two_point"

    def __post_init__(self):
        if not 0 <= self.q <= 1:
            raise ValueError("q must lie in [0, 1]")

    def law(self, n):
        return np.array([n, 2 * n], dtype=np.int64), np.array([1.0 - self.q, self.q])

    def max_index_bound(self, n):
        return 2 * n if self.q > 0 else n

    def sample(self, gen, n_values, count):
        n = np.asarray(n_values, dtype=np.int64)
        doubled = gen.random((count, len(n))) < self.q
        return np.where(doubled, 2 * n, n)

    def to_dict(self):
        return {"kind": self.kind, "params": {"q": self.q}}


def _floor_scaled(n: int, factor: float) -> int:
    return math.floor(decimal_fraction(factor) * n)


@dataclass(frozen=True)
class UniformWindow(IndexModel):
    """``N_n`` uniform on ``{n, ..., floor((1 + beta) n)}``."""

    beta: float

    kind = "uniform_window"

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError("beta must be nonnegative")

    def top(self, n: int) -> int:
        return n + _floor_scaled(n, self.beta)

    def law(self, n):
        vals = np.arange(n, self.top(n) + 1, dtype=np.int64)
        return vals, np.full(len(vals), 1.0 / len(vals))

    def max_index_bound(self, n):
        return self.top(n)

    def sample(self, gen, n_values, count):
        n = np.asarray(n_values, dtype=np.int64)
        hi = np.asarray([self.top(int(v)) for v in n], dtype=np.int64)
        return gen.integers(n, hi + 1, size=(count, len(n)))

    def to_dict(self):
        return {"kind": self.kind, "params": {"beta": self.beta}}


@dataclass(frozen=True)
class LinearNoise(IndexModel):
    """``N_n = round(c n) + U`` with U uniform on ``{-h(n), ..., h(n)}``.

    ``h(n) = floor(scale * n ** exponent)``; realizations are clamped at 1.
    """

    c: float
    scale: float = 1.0
    exponent: float = 0.5

    kind = "linear_noise"

    def __post_init__(self):
        if not self.c > 0 or self.scale < 0:
            raise ValueError("linear_noise needs c > 0 and scale >= 0")

    def center(self, n):
        return max(1, round_half_up(decimal_fraction(self.c) * int(n)))

    def halfwidth(self, n):
        return math.floor(self.scale * n**self.exponent)

    def law(self, n):
        c, h = self.center(n), self.halfwidth(n)
        raw = np.maximum(np.arange(c - h, c + h + 1, dtype=np.int64), 1)
        vals, counts = np.unique(raw, return_counts=True)
        return vals, counts / counts.sum()

    def max_index_bound(self, n):
        return self.center(n) + self.halfwidth(n)

    def sample(self, gen, n_values, count):
        c = np.asarray([self.center(int(n)) for n in n_values], dtype=np.int64)
        h = np.asarray([self.halfwidth(int(n)) for n in n_values], dtype=np.int64)
        noise = gen.integers(-h, h + 1, size=(count, len(c)))
        return np.maximum(c + noise, 1)

    def to_dict(self):
        return {
            "kind": self.kind,
            "params": {"c": self.c, "halfwidth": {"scale": self.scale, "exponent": self.exponent}},
        }


# ---------------------------------------------------------------------------
# operations


def sample_path(m: ProcessModel, rng: RngStream, horizon: int) -> Path:
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    return Path(m.sample_paths(rng.generator(), 1, horizon)[0], m.space)


def sample_indices(im: IndexModel, rng: RngStream, n_list: Sequence[int]) -> list[int]:
    return [int(v) for v in im.sample(rng.generator(), list(n_list), 1)[0]]


def max_index_bound(im: IndexModel, n: int) -> int:
    return im.max_index_bound(n)


def required_horizon(im: IndexModel | None, n_values) -> int:
    """Path horizon covering every possible ``N_n`` for ``n`` in ``n_values``."""
    if im is None:
        return int(max(n_values))
    return int(max(im.max_index_bound(int(n)) for n in n_values))


def compose_randomized(path: Path, indices: Sequence[int]) -> Path:
    """The path ``j -> xi_{indices[j]}``."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 1 or idx.max() > path.horizon):
        raise IndexOutOfHorizon(
            f"indices span [{idx.min()}, {idx.max()}] but the horizon is {path.horizon}"
        )
    return Path(path.values[idx - 1], path.space)


def compose_batch(paths: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Row-wise composition: ``out[s, j] = paths[s, indices[s, j] - 1]``."""
    if indices.size and (indices.min() < 1 or indices.max() > paths.shape[1]):
        raise IndexOutOfHorizon(
            f"indices span [{indices.min()}, {indices.max()}] but the horizon is {paths.shape[1]}"
        )
    rows = np.arange(paths.shape[0])[:, None]
    return paths[rows, indices - 1]


@dataclass(frozen=True, eq=False)
class FiniteProcessSpec:
    """Exact joint law of a path and independent per-n indices.

    The path outcomes are listed explicitly; since indices are independent of
    the path and across n, their law is stored per n.  ``outcomes`` expands the
    product into the explicit joint list.
    """

    xi_values: np.ndarray
    xi_probs: np.ndarray
    index_laws: dict
    n_values: tuple
    space: Space

    def __post_init__(self):
        p = np.asarray(self.xi_probs, dtype=float)
        if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError("outcome probabilities must be positive and sum to 1")
        for n, (vals, probs) in self.index_laws.items():
            if abs(np.sum(probs) - 1.0) > 1e-12:
                raise ValueError(f"index law at n={n} does not sum to 1")

    @property
    def horizon(self) -> int:
        return int(self.xi_values.shape[1])

    def outcomes(self, n_list=None) -> Iterator[tuple[Path, dict, float]]:
        n_list = list(self.n_values if n_list is None else n_list)
        laws = [self.index_laws[n] for n in n_list]
        for values, p in zip(self.xi_values, self.xi_probs):
            path = Path(values, self.space)
            for combo in itertools.product(*(range(len(v)) for v, _ in laws)):
                prob = float(p) * math.prod(float(laws[i][1][c]) for i, c in enumerate(combo))
                idx = {n: int(laws[i][0][c]) for i, (n, c) in enumerate(zip(n_list, combo))}
                yield path, idx, prob


def exact_finite_spec(
    m: ProcessModel, im: IndexModel | None, horizon: int, n_values=None
) -> FiniteProcessSpec:
    """Enumerate a finite scenario out to ``horizon``.

    ``n_values`` defaults to every n whose largest possible index fits the
    horizon.
    """
    im = im if im is not None else DeterministicIndex(LinearKn(1.0))
    if n_values is None:
        n_values = [n for n in range(1, horizon + 1) if im.max_index_bound(n) <= horizon]
    n_values = tuple(int(n) for n in n_values)
    for n in n_values:
        if im.max_index_bound(n) > horizon:
            raise IndexOutOfHorizon(f"N_{n} may exceed the horizon {horizon}")
    values, probs = m.enumerate_paths(horizon)
    keep = probs > 0
    laws = {}
    for n in n_values:
        vals, p = im.law(n)
        laws[n] = (vals[p > 0], p[p > 0])
    return FiniteProcessSpec(values[keep], probs[keep], laws, n_values, m.space)


__all__ = [
    "Alternating",
    "BlockGrowth",
    "BlockOscillating",
    "Constant",
    "DeterministicIndex",
    "DiscreteSpace",
    "EventuallyConstant",
    "ExplicitKn",
    "FiniteProcessSpec",
    "IndexModel",
    "KnSpec",
    "LinearKn",
    "LinearNoise",
    "PartialSumNormalized",
    "Path",
    "ProcessModel",
    "TwoPoint",
    "UniformWindow",
    "compose_batch",
    "compose_randomized",
    "exact_finite_spec",
    "max_index_bound",
    "required_horizon",
    "sample_indices",
    "sample_path",
]
