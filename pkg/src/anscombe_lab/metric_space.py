"""State spaces, closed test sets, their enlargements and hat test functions.

Two kinds of space are supported: ``R^d`` with the Euclidean metric and finite
discrete spaces given by an explicit distance table.  Points are handled in an
*encoded* form so that large batches can be processed with numpy:

* on the real line a point is a float and a batch is an array of any shape;
* in ``R^d`` (d > 1) a point is a length-``d`` vector, batches carry the
  coordinates on the last axis;
* in a discrete space a point is the integer position of its symbol in the
  alphabet.

Every test set is closed.  Open sets only appear as :class:`ComplementView`
handles, which are good for membership and probability evaluation only.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import DomainMismatch, EmptySetWarning

MetricPoint = Union[float, Sequence[float], str]

_TRIANGLE_TOL = 1e-12


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


# ---------------------------------------------------------------------------
# spaces


@dataclass(frozen=True, eq=False)
class EuclideanSpace:
    dim: int = 1

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise DomainMismatch(f"dimension must be a positive integer, got {self.dim!r}")

    kind = "euclidean"

    @property
    def point_shape(self) -> tuple:
        return () if self.dim == 1 else (self.dim,)

    def encode(self, point):
        if isinstance(point, str):
            raise DomainMismatch(f"symbol {point!r} is not a point of R^{self.dim}")
        arr = np.asarray(point, dtype=float)
        if self.dim == 1:
            if arr.size != 1:
                raise DomainMismatch(f"expected a real number, got {point!r}")
            return float(arr.reshape(()))
        if arr.shape != (self.dim,):
            raise DomainMismatch(f"expected a point of R^{self.dim}, got shape {arr.shape}")
        return arr

    def encode_many(self, points) -> np.ndarray:
        encoded = [self.encode(p) for p in points]
        if self.dim == 1:
            return np.asarray(encoded, dtype=float)
        return np.asarray(encoded, dtype=float).reshape(len(encoded), self.dim)

    def decode(self, x):
        if self.dim == 1:
            return float(x)
        return tuple(float(v) for v in np.asarray(x))

    def dist(self, x, y) -> np.ndarray:
        """Broadcasting distance between encoded points or batches."""
        diff = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        if self.dim == 1:
            return np.abs(diff)
        return np.sqrt(np.sum(diff * diff, axis=-1))

    def same_as(self, other) -> bool:
        return isinstance(other, EuclideanSpace) and other.dim == self.dim

    def to_dict(self) -> dict:
        return {"kind": "euclidean", "dim": self.dim}


REAL_LINE = EuclideanSpace(1)


@dataclass(frozen=True, eq=False)
class DiscreteSpace:
    """Finite metric space with an explicit, validated distance table."""

    alphabet: tuple
    distance_table: np.ndarray = field(repr=False)

    kind = "discrete"
    point_shape = ()

    def __post_init__(self):
        alphabet = tuple(self.alphabet)
        table = np.array(self.distance_table, dtype=float)
        k = len(alphabet)
        if k == 0:
            raise DomainMismatch("alphabet must not be empty")
        if len(set(alphabet)) != k:
            raise DomainMismatch("alphabet symbols must be distinct")
        if table.shape != (k, k):
            raise DomainMismatch(f"distance table must be {k}x{k}, got {table.shape}")
        if not np.all(np.isfinite(table)):
            raise DomainMismatch("distance table must be finite")
        if not np.array_equal(table, table.T):
            raise DomainMismatch("distance table must be symmetric")
        if np.any(np.diag(table) != 0):
            raise DomainMismatch("distance table must have a zero diagonal")
        off = ~np.eye(k, dtype=bool)
        if np.any(table[off] <= 0):
            raise DomainMismatch("off-diagonal distances must be strictly positive")
        # d(i,j) <= d(i,m) + d(m,j) for all i, m, j
        through = table[:, :, None] + table[None, :, :]
        if np.any(table[:, None, :] > through + _TRIANGLE_TOL):
            raise DomainMismatch("distance table violates the triangle inequality")
        table.setflags(write=False)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "distance_table", table)
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(alphabet)})

    @classmethod
    def uniform(cls, alphabet) -> "DiscreteSpace":
        """The 0/1 metric on ``alphabet``."""
        k = len(alphabet)
        return cls(tuple(alphabet), 1.0 - np.eye(k))

    def encode(self, point) -> int:
        try:
            return self._index[point]
        except (KeyError, TypeError):
            raise DomainMismatch(f"{point!r} is not in the alphabet {self.alphabet}") from None

    def encode_many(self, points) -> np.ndarray:
        return np.asarray([self.encode(p) for p in points], dtype=np.int64)

    def decode(self, x):
        return self.alphabet[int(x)]

    def dist(self, x, y) -> np.ndarray:
        return self.distance_table[np.asarray(x, dtype=np.int64), np.asarray(y, dtype=np.int64)]

    def same_as(self, other) -> bool:
        return (
            isinstance(other, DiscreteSpace)
            and other.alphabet == self.alphabet
            and np.array_equal(other.distance_table, self.distance_table)
        )

    def to_dict(self) -> dict:
        return {
            "kind": "discrete",
            "alphabet": list(self.alphabet),
            "distance_table": self.distance_table.tolist(),
        }


Space = Union[EuclideanSpace, DiscreteSpace]


def distance(space: Space, p: MetricPoint, q: MetricPoint) -> float:
    """Distance between two points of ``space``.

    Raises DomainMismatch when either point does not belong to the space.
    """
    return float(space.dist(space.encode(p), space.encode(q)))


# ---------------------------------------------------------------------------
# closed test sets


def _merge_intervals(intervals) -> tuple:
    cleaned = []
    for lo, hi in intervals:
        lo, hi = float(lo), float(hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval endpoints must not be NaN")
        if lo > hi:
            raise ValueError(f"interval endpoints out of order: [{lo}, {hi}]")
        cleaned.append((lo, hi))
    cleaned.sort()
    merged: list[list[float]] = []
    for lo, hi in cleaned:
        # closed intervals that touch share a point, so they merge
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return tuple((lo, hi) for lo, hi in merged)


def _interval_dist(x, intervals) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not intervals:
        return np.full(x.shape, np.inf)
    out = np.full(x.shape, np.inf)
    for lo, hi in intervals:
        d = np.maximum(np.maximum(lo - x, x - hi), 0.0)
        np.minimum(out, d, out=out)
    return out


def _interval_contains(x, intervals) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape, dtype=bool)
    for lo, hi in intervals:
        out |= (x >= lo) & (x <= hi)
    return out


class TestSet:
    """Base class of closed test sets.  Subclasses are frozen dataclasses."""

    __test__ = False  # keep pytest from collecting this class

    space: Space

    def contains(self, x) -> np.ndarray:
        raise NotImplementedError

    def dist(self, x) -> np.ndarray:
        raise NotImplementedError

    def enlarge(self, alpha: float) -> "TestSet":
        raise NotImplementedError

    def intervals(self) -> tuple:
        """Representation as a union of closed intervals (real line only)."""
        raise DomainMismatch(f"{type(self).__name__} has no interval representation")

    def complement(self) -> "ComplementView":
        return ComplementView(self)

    @property
    def is_empty(self) -> bool:
        return False

    def label(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class HalfLine(TestSet):
    """``{x <= threshold}`` or ``{x >= threshold}`` on the real line."""

    direction: str
    threshold: float

    def __post_init__(self):
        if self.direction not in ("<=", ">="):
            raise ValueError(f"direction must be '<=' or '>=', got {self.direction!r}")
        if math.isnan(self.threshold):
            raise ValueError("threshold must not be NaN")
        object.__setattr__(self, "threshold", float(self.threshold))

    @property
    def space(self) -> EuclideanSpace:
        return REAL_LINE

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return x <= self.threshold if self.direction == "<=" else x >= self.threshold

    def dist(self, x):
        x = np.asarray(x, dtype=float)
        if self.direction == "<=":
            return np.maximum(x - self.threshold, 0.0)
        return np.maximum(self.threshold - x, 0.0)

    def enlarge(self, alpha):
        _check_alpha(alpha)
        if alpha == 0:
            return self
        shift = alpha if self.direction == "<=" else -alpha
        return HalfLine(self.direction, self.threshold + shift)

    def intervals(self):
        if self.direction == "<=":
            return ((-math.inf, self.threshold),)
        return ((self.threshold, math.inf),)

    def label(self):
        return f"x{self.direction}{_fmt(self.threshold)}"


@dataclass(frozen=True)
class IntervalUnion(TestSet):
    """Finite union of closed intervals, normalized to disjoint sorted pieces."""

    pieces: tuple

    def __post_init__(self):
        object.__setattr__(self, "pieces", _merge_intervals(self.pieces))

    @property
    def space(self) -> EuclideanSpace:
        return REAL_LINE

    @property
    def is_empty(self):
        return not self.pieces

    def contains(self, x):
        return _interval_contains(x, self.pieces)

    def dist(self, x):
        return _interval_dist(x, self.pieces)

    def enlarge(self, alpha):
        _check_alpha(alpha)
        if alpha == 0:
            return self
        return IntervalUnion(tuple((lo - alpha, hi + alpha) for lo, hi in self.pieces))

    def intervals(self):
        return self.pieces

    def label(self):
        if not self.pieces:
            return "empty"
        return "U".join(f"[{_fmt(lo)},{_fmt(hi)}]" for lo, hi in self.pieces)


def _as_coords(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x[..., None] if dim == 1 else x


@dataclass(frozen=True)
class Box(TestSet):
    """Closed axis-aligned box in ``R^d``, optionally enlarged by ``radius``.

    The enlargement of a box in the Euclidean metric has rounded corners, so
    the set is stored as ``{x : d(x, core) <= radius}`` which keeps the family
    closed under enlargement.
    """

    bounds: tuple
    radius: float = 0.0

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if not bounds:
            raise ValueError("a box needs at least one dimension")
        for lo, hi in bounds:
            if lo > hi:
                raise ValueError(f"box bounds out of order: [{lo}, {hi}]")
        _check_alpha(self.radius)
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def space(self) -> EuclideanSpace:
        return EuclideanSpace(len(self.bounds))

    def _core_dist(self, x):
        dim = len(self.bounds)
        c = _as_coords(x, dim)
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        excess = np.maximum(np.maximum(lo - c, c - hi), 0.0)
        return np.sqrt(np.sum(excess * excess, axis=-1))

    def contains(self, x):
        return self._core_dist(x) <= self.radius

    def dist(self, x):
        return np.maximum(self._core_dist(x) - self.radius, 0.0)

    def enlarge(self, alpha):
        _check_alpha(alpha)
        if alpha == 0:
            return self
        return Box(self.bounds, self.radius + alpha)

    def intervals(self):
        if len(self.bounds) != 1:
            return super().intervals()
        lo, hi = self.bounds[0]
        return ((lo - self.radius, hi + self.radius),)

    def label(self):
        core = "x".join(f"[{_fmt(lo)},{_fmt(hi)}]" for lo, hi in self.bounds)
        return core if self.radius == 0 else f"{core}+{_fmt(self.radius)}"


@dataclass(frozen=True, eq=False)
class FinitePoints(TestSet):
    """Union of closed balls of common ``radius`` around finitely many points.

    ``points`` holds encoded points of ``space``.  With ``radius == 0`` the set
    is the point set itself.
    """

    points: np.ndarray
    radius: float
    space: Space = REAL_LINE

    def __post_init__(self):
        _check_alpha(self.radius)
        pts = np.asarray(self.points)
        if isinstance(self.space, DiscreteSpace):
            pts = pts.astype(np.int64).reshape(-1)
            if pts.size and (pts.min() < 0 or pts.max() >= len(self.space.alphabet)):
                raise DomainMismatch("point codes outside the alphabet")
        else:
            pts = pts.astype(float).reshape((-1,) + self.space.point_shape)
        pts = np.unique(pts, axis=0) if pts.size else pts
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "radius", float(self.radius))
        if isinstance(self.space, DiscreteSpace):
            # materialize the member set; enlargements are computed on it
            all_codes = np.arange(len(self.space.alphabet))
            if pts.size:
                near = self.space.dist(all_codes[:, None], pts[None, :]).min(axis=1)
                members = all_codes[near <= self.radius]
            else:
                members = all_codes[:0]
            members.setflags(write=False)
            object.__setattr__(self, "_members", members)

    @classmethod
    def of(cls, points, radius: float = 0.0, space: Space = REAL_LINE) -> "FinitePoints":
        """Build from raw (unencoded) points."""
        return cls(space.encode_many(points), radius, space)

    @property
    def is_empty(self):
        return self.points.shape[0] == 0

    def __eq__(self, other):
        return (
            isinstance(other, FinitePoints)
            and self.space.same_as(other.space)
            and self.radius == other.radius
            and np.array_equal(self.points, other.points)
        )

    def __hash__(self):
        return hash((self.radius, self.points.tobytes()))

    def _min_dist(self, x, pts):
        x = np.asarray(x)
        if isinstance(self.space, DiscreteSpace):
            return self.space.dist(x[..., None], pts).min(axis=-1)
        if self.space.dim == 1:
            return np.abs(np.asarray(x, float)[..., None] - pts).min(axis=-1)
        diff = np.asarray(x, float)[..., None, :] - pts
        return np.sqrt(np.sum(diff * diff, axis=-1)).min(axis=-1)

    def contains(self, x):
        x = np.asarray(x)
        if self.is_empty:
            return np.zeros(x.shape[: x.ndim - len(self.space.point_shape)], dtype=bool)
        if isinstance(self.space, DiscreteSpace):
            return np.isin(x, self._members)
        return self._min_dist(x, self.points) <= self.radius

    def dist(self, x):
        x = np.asarray(x)
        if self.is_empty:
            warnings.warn("distance to an empty set", EmptySetWarning, stacklevel=2)
            return np.full(x.shape[: x.ndim - len(self.space.point_shape)], np.inf)
        if isinstance(self.space, DiscreteSpace):
            return self._min_dist(x, self._members)
        return np.maximum(self._min_dist(x, self.points) - self.radius, 0.0)

    def enlarge(self, alpha):
        _check_alpha(alpha)
        if alpha == 0 or self.is_empty:
            return self
        if isinstance(self.space, DiscreteSpace):
            # discrete spaces are not geodesic: recompute the member set
            all_codes = np.arange(len(self.space.alphabet))
            near = self.space.dist(all_codes[:, None], self._members[None, :]).min(axis=1)
            return FinitePoints(all_codes[near <= alpha], 0.0, self.space)
        return FinitePoints(self.points, self.radius + alpha, self.space)

    def intervals(self):
        if not (isinstance(self.space, EuclideanSpace) and self.space.dim == 1):
            return super().intervals()
        return _merge_intervals((p - self.radius, p + self.radius) for p in self.points)

    def label(self):
        if isinstance(self.space, DiscreteSpace):
            names = ",".join(str(self.space.decode(c)) for c in self.points)
        elif self.space.dim == 1:
            names = ",".join(_fmt(p) for p in self.points)
        else:
            names = ",".join("(" + ",".join(_fmt(v) for v in p) + ")" for p in self.points)
        core = "{" + names + "}"
        return core if self.radius == 0 else f"{core}+{_fmt(self.radius)}"


@dataclass(frozen=True)
class ComplementView:
    """Open set given as the complement of a closed test set."""

    base: TestSet

    @property
    def space(self):
        return self.base.space

    def contains(self, x):
        return ~np.asarray(self.base.contains(x), dtype=bool)

    def complement(self) -> TestSet:
        return self.base

    def label(self):
        return f"not({self.base.label()})"


def _check_alpha(alpha):
    if not (alpha >= 0) or math.isinf(alpha):
        raise ValueError(f"enlargement radius must be finite and nonnegative, got {alpha!r}")


def _check_space(space: Space, S) -> None:
    if not space.same_as(S.space):
        raise DomainMismatch(f"set {S.label()} lives in a different space")


def dist_to_set(p: MetricPoint, S: TestSet) -> float:
    """``inf_{s in S} d(p, s)``; +inf (with an EmptySetWarning) for empty S."""
    x = S.space.encode(p)
    if S.is_empty:
        warnings.warn("distance to an empty set", EmptySetWarning, stacklevel=2)
        return math.inf
    return float(S.dist(x))


def enlarge(S: TestSet, alpha: float) -> TestSet:
    """Closed enlargement ``{x : d(x, S) <= alpha}``."""
    return S.enlarge(alpha)


def complement_probability_view(S: TestSet) -> ComplementView:
    return ComplementView(S)


def contains(S, p: MetricPoint) -> bool:
    return bool(S.contains(S.space.encode(p)))


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class HatFunction:
    """``x -> max(0, 1 - d(x, base) / width)``: continuous, [0,1]-valued."""

    base: TestSet
    width: float

    def __post_init__(self):
        if not (self.width > 0) or math.isinf(self.width):
            raise ValueError(f"hat width must be positive and finite, got {self.width!r}")

    def __call__(self, x) -> np.ndarray:
        if self.base.is_empty:
            return np.zeros(np.shape(x)[: np.ndim(x) - len(self.base.space.point_shape)])
        return np.maximum(0.0, 1.0 - self.base.dist(x) / self.width)

    def label(self):
        return f"hat({self.base.label()};{_fmt(self.width)})"


def hat_eval(h: HatFunction, p: MetricPoint) -> float:
    return float(h(h.base.space.encode(p)))


# ---------------------------------------------------------------------------
# finite families standing in for "all closed sets"


class SetFamily:
    kind = "explicit"

    def members(self) -> list:
        raise NotImplementedError

    def __iter__(self) -> Iterator[TestSet]:
        return iter(self.members())

    def __len__(self):
        return len(self.members())

    def closure(self, alpha: float) -> "ExplicitFamily":
        """This family together with the ``alpha``-enlargement of each member."""
        seen = {}
        for s in self.members():
            seen.setdefault(s.label(), s)
        for s in self.members():
            e = s.enlarge(alpha)
            seen.setdefault(e.label(), e)
        return ExplicitFamily(tuple(seen.values()))


@dataclass(frozen=True)
class ExplicitFamily(SetFamily):
    sets: tuple

    def members(self):
        return list(self.sets)


@dataclass(frozen=True)
class HalfLines(SetFamily):
    thresholds: tuple

    kind = "half_lines"

    def __post_init__(self):
        ts = tuple(sorted({float(t) for t in self.thresholds}))
        if not ts:
            raise ValueError("half_lines family needs at least one threshold")
        object.__setattr__(self, "thresholds", ts)

    def members(self):
        return [HalfLine(d, t) for t in self.thresholds for d in ("<=", ">=")]


@dataclass(frozen=True)
class IntervalUnions(SetFamily):
    """All unions of at most ``max_components`` intervals with grid endpoints."""

    endpoints: tuple
    max_components: int = 1

    kind = "interval_unions"

    def __post_init__(self):
        eps = tuple(sorted({float(e) for e in self.endpoints}))
        if len(eps) < 2:
            raise ValueError("interval_unions family needs at least two endpoints")
        if self.max_components < 1:
            raise ValueError("max_components must be >= 1")
        object.__setattr__(self, "endpoints", eps)

    def members(self):
        out = []
        for j in range(1, self.max_components + 1):
            for combo in itertools.combinations(self.endpoints, 2 * j):
                out.append(IntervalUnion(tuple(zip(combo[0::2], combo[1::2]))))
        return out


MAX_SUPPORT_SUBSETS = 20


@dataclass(frozen=True, eq=False)
class SupportSubsets(SetFamily):
    """All ``2^k`` subsets of a declared finite point list (k <= 20)."""

    points: np.ndarray
    space: Space = REAL_LINE

    kind = "support_subsets"

    def __post_init__(self):
        pts = np.asarray(self.points)
        pts = np.unique(pts, axis=0) if pts.size else pts
        if len(pts) > MAX_SUPPORT_SUBSETS:
            raise ValueError(f"support_subsets is limited to {MAX_SUPPORT_SUBSETS} points")
        object.__setattr__(self, "points", pts)

    @classmethod
    def of(cls, points, space: Space = REAL_LINE) -> "SupportSubsets":
        return cls(space.encode_many(points), space)

    def members(self):
        k = len(self.points)
        return [
            FinitePoints(self.points[[bool(mask >> i & 1) for i in range(k)]], 0.0, self.space)
            for mask in range(1 << k)
        ]


def min_pairwise_distance(space: Space, points) -> float:
    """Smallest nonzero distance among encoded ``points`` (inf if fewer than 2)."""
    pts = np.asarray(points)
    if len(pts) < 2:
        return math.inf
    d = space.dist(pts[:, None], pts[None, :])
    nz = d[d > 0]
    return float(nz.min()) if nz.size else math.inf
