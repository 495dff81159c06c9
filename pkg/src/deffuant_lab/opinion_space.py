"""Geometry of the opinion space: norms, bounded convex shapes, distances.

Opinions are fixed-dimension vectors of 64-bit floats.  Derived quantities
(diameter, center, sup-distances) are closed-form only; the one sampled
estimator in this module is explicitly named as an estimate and must never
feed the bound calculator.

Scalar norm evaluation (`Norm.of`) accumulates coordinates in index order.
The simulation kernels rely on that exact order for bit-reproducibility,
so do not replace the loops with numpy reductions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, SamplingError, UnsupportedGeometryError

Opinion = np.ndarray  # shape (d,), dtype float64

NORM_KINDS = ("l1", "l2", "linf", "lp")

# 2^d corner enumerations and rejection sampling stop being desk-scale
# well before this; refuse rather than stall.
_MAX_CORNER_DIM = 20
_REJECTION_GUARD = 10**6


def as_opinion(value, dimension: int) -> Opinion:
    """Coerce scalars/sequences to a (d,) float64 vector, checking dimension."""
    a = np.atleast_1d(np.asarray(value, dtype=np.float64))
    if a.shape != (dimension,):
        raise DimensionMismatchError(f"expected a vector of dimension {dimension}, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class Norm:
    """A norm on R^d: one of l1, l2, linf, or a general lp with p >= 1."""

    kind: str
    dimension: int
    p: float | None = None

    def __post_init__(self):
        if self.kind not in NORM_KINDS:
            raise UnsupportedGeometryError(f"unknown norm kind {self.kind!r}; expected one of {NORM_KINDS}")
        if self.dimension < 1:
            raise DimensionMismatchError(f"norm dimension must be >= 1, got {self.dimension}")
        if self.kind == "lp":
            if self.p is None or not math.isfinite(self.p) or self.p < 1.0:
                raise UnsupportedGeometryError(f"lp norm requires finite p >= 1, got {self.p}")
        elif self.p is not None:
            raise UnsupportedGeometryError(f"norm kind {self.kind!r} does not take a p parameter")

    @classmethod
    def l1(cls, dimension: int) -> "Norm":
        return cls("l1", dimension)

    @classmethod
    def l2(cls, dimension: int) -> "Norm":
        return cls("l2", dimension)

    @classmethod
    def linf(cls, dimension: int) -> "Norm":
        return cls("linf", dimension)

    @classmethod
    def lp(cls, dimension: int, p: float) -> "Norm":
        return cls("lp", dimension, float(p))

    def of(self, v) -> float:
        """Norm of a single vector.  Scalar loop, coordinate order fixed."""
        a = as_opinion(v, self.dimension)
        xs = a.tolist()
        if self.kind == "l1":
            acc = 0.0
            for x in xs:
                acc += abs(x)
            return acc
        if self.kind == "l2":
            acc = 0.0
            for x in xs:
                acc += x * x
            return math.sqrt(acc)
        if self.kind == "linf":
            acc = 0.0
            for x in xs:
                ax = abs(x)
                if ax > acc:
                    acc = ax
            return acc
        acc = 0.0
        for x in xs:
            acc += abs(x) ** self.p
        return acc ** (1.0 / self.p)

    def of_rows(self, m) -> np.ndarray:
        """Row-wise norms of an (n, d) array.

        Vectorized over rows but accumulated coordinate-by-coordinate so each
        row reduces in the same order as `of`.
        """
        m = np.asarray(m, dtype=np.float64)
        if m.ndim != 2 or m.shape[1] != self.dimension:
            raise DimensionMismatchError(f"expected an (n, {self.dimension}) array, got shape {m.shape}")
        if self.kind == "l1":
            acc = np.abs(m[:, 0])
            for k in range(1, self.dimension):
                acc = acc + np.abs(m[:, k])
            return acc
        if self.kind == "l2":
            acc = m[:, 0] * m[:, 0]
            for k in range(1, self.dimension):
                acc = acc + m[:, k] * m[:, k]
            return np.sqrt(acc)
        if self.kind == "linf":
            acc = np.abs(m[:, 0])
            for k in range(1, self.dimension):
                acc = np.maximum(acc, np.abs(m[:, k]))
            return acc
        acc = np.abs(m[:, 0]) ** self.p
        for k in range(1, self.dimension):
            acc = acc + np.abs(m[:, k]) ** self.p
        return acc ** (1.0 / self.p)

    __call__ = of


@dataclass(frozen=True, eq=False)
class Ball:
    """Open ball {a : ||a - center|| < radius} under the space's norm."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=np.float64)).copy()
        c.flags.writeable = False
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise UnsupportedGeometryError(f"ball radius must be positive and finite, got {self.radius}")


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box [lower_1, upper_1] x ... x [lower_d, upper_d]."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=np.float64)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=np.float64)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatchError(f"box bounds must be 1-D and of equal shape, got {lo.shape} and {hi.shape}")
        if not np.all(lo <= hi):
            raise UnsupportedGeometryError("box requires lower <= upper in every coordinate")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise UnsupportedGeometryError("box bounds must be finite")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)


Shape = Union[Ball, Box]


def interval(a: float, b: float) -> Box:
    """The interval [a, b] as a one-dimensional Box."""
    return Box(np.array([a]), np.array([b]))


@dataclass(frozen=True, eq=False)
class OpinionSpace:
    """A bounded convex shape together with the norm that measures disagreement.

    The same norm defines ball membership and measures distances; mismatched
    pairings are not representable.
    """

    shape: Shape
    norm: Norm

    def __post_init__(self):
        d = self.norm.dimension
        if isinstance(self.shape, Ball):
            if self.shape.center.shape != (d,):
                raise DimensionMismatchError(f"ball center has dimension {self.shape.center.shape[0]}, norm has {d}")
        elif isinstance(self.shape, Box):
            if self.shape.lower.shape != (d,):
                raise DimensionMismatchError(f"box has dimension {self.shape.lower.shape[0]}, norm has {d}")
        else:
            raise UnsupportedGeometryError(f"unsupported shape {type(self.shape).__name__}")

    @property
    def dimension(self) -> int:
        return self.norm.dimension

    @cached_property
    def diameter(self) -> float:
        """Largest distance between two points of the shape (closed form)."""
        if isinstance(self.shape, Ball):
            return 2.0 * self.shape.radius
        return self.norm.of(self.shape.upper - self.shape.lower)

    @cached_property
    def center(self) -> Opinion:
        """The point whose sup-distance to the shape equals diameter / 2."""
        if isinstance(self.shape, Ball):
            return self.shape.center
        c = (self.shape.lower + self.shape.upper) / 2.0
        c.flags.writeable = False
        return c

    def contains(self, a, tol: float = 1e-12) -> bool:
        a = as_opinion(a, self.dimension)
        if isinstance(self.shape, Ball):
            return self.norm.of(a - self.shape.center) < self.shape.radius + tol
        return bool(np.all(a >= self.shape.lower - tol) and np.all(a <= self.shape.upper + tol))

    def contains_rows(self, m, tol: float = 1e-12) -> np.ndarray:
        m = np.asarray(m, dtype=np.float64)
        if isinstance(self.shape, Ball):
            return self.norm.of_rows(m - self.shape.center) < self.shape.radius + tol
        return np.all(m >= self.shape.lower - tol, axis=1) & np.all(m <= self.shape.upper + tol, axis=1)


def distance(a, b, norm: Norm) -> float:
    """Disagreement ||a - b|| between two opinions."""
    a = as_opinion(a, norm.dimension)
    b = as_opinion(b, norm.dimension)
    return norm.of(a - b)


def interpolate(a, b, mu: float) -> Opinion:
    """Partial averaging: move a fraction mu of the way from a to b.

    Only mu in (0, 1/2] is meaningful for the dynamics; other values are
    rejected rather than extrapolated.
    """
    if not (0.0 < mu <= 0.5):
        raise ValueError(f"mu must lie in (0, 1/2], got {mu}")
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    if a.shape != b.shape:
        raise DimensionMismatchError(f"cannot interpolate between shapes {a.shape} and {b.shape}")
    return a + mu * (b - a)


def sup_distance_to_set(a, space: OpinionSpace) -> float:
    """Supremum of ||a - c|| over all points c of the shape.

    Ball: distance to the center plus the radius (sup attained on the
    boundary along the ray away from a).  Box: the supremum of a convex
    function over a convex set sits at an extreme point, so enumerate the
    2^d corners.
    """
    a = as_opinion(a, space.dimension)
    shape = space.shape
    if isinstance(shape, Ball):
        return space.norm.of(a - shape.center) + shape.radius
    if space.dimension > _MAX_CORNER_DIM:
        raise UnsupportedGeometryError(f"corner enumeration limited to dimension {_MAX_CORNER_DIM}")
    best = 0.0
    for corner in itertools.product(*zip(shape.lower.tolist(), shape.upper.tolist())):
        val = space.norm.of(a - np.array(corner))
        if val > best:
            best = val
    return best


def sample_uniform(space: OpinionSpace, n: int, rng: np.random.Generator) -> np.ndarray:
    """n points uniform over the shape, as an (n, d) array.

    Boxes sample directly.  Balls reject from the bounding box
    [center - r, center + r]^d under any norm (for linf that box is the
    ball, so nothing is rejected).  Aborts with a diagnostic if 10^6
    consecutive proposals are rejected.
    """
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    d = space.dimension
    shape = space.shape
    if isinstance(shape, Box):
        u = rng.random((n, d))
        return shape.lower + u * (shape.upper - shape.lower)
    out = np.empty((n, d))
    filled = 0
    consecutive_rejected = 0
    while filled < n:
        batch = max(1024, n - filled)
        proposals = shape.center + shape.radius * (2.0 * rng.random((batch, d)) - 1.0)
        keep = space.norm.of_rows(proposals - shape.center) < shape.radius
        accepted = proposals[keep]
        if accepted.shape[0] == 0:
            consecutive_rejected += batch
            if consecutive_rejected > _REJECTION_GUARD:
                raise SamplingError(
                    f"ball rejection sampler exceeded {_REJECTION_GUARD} consecutive rejections "
                    f"(dimension {d}, norm {space.norm.kind}); acceptance rate is too low at this scale")
            continue
        consecutive_rejected = 0
        take = min(accepted.shape[0], n - filled)
        out[filled:filled + take] = accepted[:take]
        filled += take
    return out


def diameter_sampled_estimate(space: OpinionSpace, n_pairs: int, rng: np.random.Generator) -> float:
    """Statistical UNDER-estimate of the diameter from sampled pairs.

    Diagnostic only: the consensus bound must use the analytic `diameter`,
    never this value.
    """
    a = sample_uniform(space, n_pairs, rng)
    b = sample_uniform(space, n_pairs, rng)
    if n_pairs == 0:
        return 0.0
    return float(np.max(space.norm.of_rows(a - b)))
