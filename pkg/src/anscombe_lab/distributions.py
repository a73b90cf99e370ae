"""Laws of state-space valued random variables and reproducible random streams."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .errors import DomainMismatch, UnsupportedSetForLaw
from .metric_space import (
    REAL_LINE,
    ComplementView,
    DiscreteSpace,
    EuclideanSpace,
    HatFunction,
    Space,
)

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """SplitMix64 finalizer: a 64-bit avalanche mixing function."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def stream_id(tag: str, *parts: int) -> int:
    """Stable 64-bit stream index for a named purpose and integer coordinates."""
    text = "/".join([tag, *(str(int(p)) for p in parts)])
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


@dataclass(frozen=True)
class RngStream:
    """Independent random substream keyed by ``(master_seed, stream_index)``.

    The pair is mixed into the 128-bit key of a Philox counter-based generator,
    so a stream's draws depend on nothing but the pair and the draw count.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_index"):
            v = getattr(self, name)
            if int(v) != v or not 0 <= v <= _MASK64:
                raise ValueError(f"{name} must be an unsigned 64-bit integer, got {v!r}")

    def key(self) -> tuple[int, int]:
        a = splitmix64(self.master_seed ^ splitmix64(self.stream_index))
        b = splitmix64(a ^ self.stream_index ^ 0xD1B54A32D192ED03)
        return a, b

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=np.array(self.key(), dtype=np.uint64)))

    def substream(self, tag: str, *parts: int) -> "RngStream":
        return RngStream(self.master_seed, stream_id(tag, self.stream_index, *parts))


# ---------------------------------------------------------------------------
# laws


def normal_cdf(x):
    """Standard normal distribution function.

    Computed from the complementary error function (absolute error far below
    1e-9), so ``normal_cdf(-x) == 1 - normal_cdf(x)`` to rounding.
    """
    out = ndtr(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def infer_space(points) -> Space:
    """Real line for scalars, ``R^d`` for length-d vectors.

    Symbols need an explicit :class:`DiscreteSpace`.
    """
    points = list(points)
    if any(isinstance(p, str) for p in points):
        raise DomainMismatch("symbolic points need an explicit discrete space")
    dims = {np.asarray(p, dtype=float).size for p in points}
    if len(dims) != 1:
        raise DomainMismatch(f"points of mixed dimension {sorted(dims)}")
    shapes = {np.asarray(p).ndim for p in points}
    (dim,) = dims
    if dim == 1 and shapes == {0}:
        return REAL_LINE
    return EuclideanSpace(dim)


@dataclass(frozen=True, eq=False)
class FiniteDistribution:
    """Law with finitely many atoms.  ``atoms`` are encoded points of ``space``."""

    atoms: np.ndarray
    weights: np.ndarray
    space: Space = REAL_LINE

    def __post_init__(self):
        atoms = np.asarray(self.atoms)
        if isinstance(self.space, DiscreteSpace):
            atoms = atoms.astype(np.int64).reshape(-1)
        else:
            atoms = atoms.astype(float).reshape((-1,) + self.space.point_shape)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(atoms) != len(w) or len(w) == 0:
            raise ValueError("atoms and weights must be nonempty and of equal length")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        if len(np.unique(atoms, axis=0)) != len(atoms):
            raise ValueError("atoms must be distinct")
        atoms.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    @classmethod
    def of(cls, atoms, weights, space: Space | None = None) -> "FiniteDistribution":
        space = space or infer_space(atoms)
        return cls(space.encode_many(atoms), weights, space)

    @classmethod
    def from_samples(cls, values, probs, space: Space) -> "FiniteDistribution":
        """Collapse repeated (encoded) values, summing their probabilities."""
        values = np.asarray(values)
        probs = np.asarray(probs, dtype=float)
        uniq, inverse = np.unique(values, axis=0, return_inverse=True)
        w = np.zeros(len(uniq))
        np.add.at(w, inverse.reshape(-1), probs)
        return cls(uniq, w / w.sum(), space)

    def prob(self, S) -> float:
        return float(self.weights[np.asarray(S.contains(self.atoms), dtype=bool)].sum())

    def sample(self, gen: np.random.Generator, size=None):
        idx = gen.choice(len(self.weights), size=size, p=self.weights)
        return self.atoms[idx]

    def expect(self, f) -> float:
        return float(np.dot(self.weights, f(self.atoms)))

    def mean(self) -> float:
        return float(np.dot(self.weights, self.atoms))

    def variance(self) -> float:
        m = self.mean()
        return float(np.dot(self.weights, (self.atoms - m) ** 2))

    def to_dict(self) -> dict:
        return {
            "kind": "finite",
            "atoms": [self.space.decode(a) for a in self.atoms],
            "weights": self.weights.tolist(),
        }


def uniform_finite(atoms, space: Space | None = None) -> FiniteDistribution:
    k = len(atoms)
    return FiniteDistribution.of(atoms, np.full(k, 1.0 / k), space)


def rademacher() -> FiniteDistribution:
    """+-1 with probability 1/2 each."""
    return FiniteDistribution.of([-1.0, 1.0], [0.5, 0.5])


@dataclass(frozen=True)
class Normal:
    mean: float = 0.0
    stddev: float = 1.0

    space = REAL_LINE

    def __post_init__(self):
        if not self.stddev > 0:
            raise ValueError(f"stddev must be positive, got {self.stddev!r}")

    def _cdf(self, x):
        if x == math.inf:
            return 1.0
        if x == -math.inf:
            return 0.0
        return normal_cdf((x - self.mean) / self.stddev)

    def prob(self, S) -> float:
        try:
            pieces = S.intervals()
        except DomainMismatch:
            raise UnsupportedSetForLaw(
                f"no closed-form normal probability for {S.label()}"
            ) from None
        return float(min(1.0, sum(self._cdf(hi) - self._cdf(lo) for lo, hi in pieces)))

    def sample(self, gen: np.random.Generator, size=None):
        return gen.normal(self.mean, self.stddev, size=size)

    def to_dict(self) -> dict:
        return {"kind": "normal", "mean": self.mean, "stddev": self.stddev}


@dataclass(frozen=True, eq=False)
class PointMass:
    point: object
    space: Space = REAL_LINE

    def __post_init__(self):
        object.__setattr__(self, "_code", self.space.encode(self.point))

    @property
    def code(self):
        return self._code

    def prob(self, S) -> float:
        return float(bool(S.contains(self._code)))

    def sample(self, gen: np.random.Generator, size=None):
        if size is None:
            return self._code
        shape = (size,) if np.ndim(size) == 0 else tuple(size)
        return np.broadcast_to(np.asarray(self._code), shape + np.shape(self._code)).copy()

    def as_finite(self) -> FiniteDistribution:
        return FiniteDistribution(np.asarray([self._code]), [1.0], self.space)

    def to_dict(self) -> dict:
        return {"kind": "point_mass", "point": self.space.decode(self._code)}


def exact_prob(law, S) -> float:
    """``P[xi in S]`` for a closed test set or a complement view."""
    if isinstance(S, ComplementView):
        return 1.0 - exact_prob(law, S.base)
    if not law.space.same_as(S.space):
        raise DomainMismatch(f"set {S.label()} and law live in different spaces")
    return law.prob(S)


def sample(law, gen: np.random.Generator, size=None):
    return law.sample(gen, size)


def _hat_breakpoints(pieces, width):
    pts = set()
    for lo, hi in pieces:
        for v in (lo, hi, lo - width, hi + width):
            if math.isfinite(v):
                pts.add(v)
    for (_, h0), (l1, _) in zip(pieces, pieces[1:]):
        pts.add(0.5 * (h0 + l1))
    return sorted(pts)


def expect_hat(law, h: HatFunction) -> float:
    """Exact ``E[h(xi)]`` for a hat function.

    For a normal law the hat is piecewise linear with known breakpoints, and
    each linear piece integrates in closed form against the Gaussian density.
    """
    if isinstance(law, FiniteDistribution):
        return law.expect(h)
    if isinstance(law, PointMass):
        return float(h(law.code))
    if not isinstance(law, Normal):
        raise UnsupportedSetForLaw(f"no hat expectation for {type(law).__name__}")
    try:
        pieces = h.base.intervals()
    except DomainMismatch:
        raise UnsupportedSetForLaw(f"no closed form for {h.label()}") from None
    if not pieces:
        return 0.0
    mu, sigma = law.mean, law.stddev
    bps = _hat_breakpoints(pieces, h.width)
    edges = [-math.inf, *bps, math.inf]
    total = 0.0
    for u, v in zip(edges[:-1], edges[1:]):
        if not math.isfinite(u) or not math.isfinite(v):
            # outermost pieces: the hat is constant there
            probe = (v - 1.0) if math.isfinite(v) else (u + 1.0)
            if not math.isfinite(probe):
                probe = 0.0
            total += float(h(probe)) * (law._cdf(v) - law._cdf(u))
            continue
        hu, hv = float(h(u)), float(h(v))
        slope = (hv - hu) / (v - u)
        intercept = hu - slope * u
        zu, zv = (u - mu) / sigma, (v - mu) / sigma
        total += (intercept + slope * mu) * (normal_cdf(zv) - normal_cdf(zu))
        total += slope * sigma * float(normal_pdf(zu) - normal_pdf(zv))
    return float(min(1.0, max(0.0, total)))


def law_to_finite(law) -> FiniteDistribution:
    if isinstance(law, FiniteDistribution):
        return law
    if isinstance(law, PointMass):
        return law.as_finite()
    raise UnsupportedSetForLaw(f"{type(law).__name__} has no finite support")


Law = (FiniteDistribution, Normal, PointMass)

__all__ = [
    "FiniteDistribution",
    "Normal",
    "PointMass",
    "RngStream",
    "exact_prob",
    "expect_hat",
    "infer_space",
    "law_to_finite",
    "normal_cdf",
    "rademacher",
    "sample",
    "splitmix64",
    "stream_id",
    "uniform_finite",
]

