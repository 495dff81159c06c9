"""Initial opinion distributions: i.i.d. samplers and disagreement moments.

The center-weighted ball draw works by rejection against the uniform ball
with acceptance weight (r - ||a - c||)/r, which is valid under any norm.
The radial distribution functions are kept as independent closed-form
oracles for the samplers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import NoClosedFormError, SamplingError, UnsupportedGeometryError
from .graphs import Graph
from .opinion_space import Ball, Box, Opinion, OpinionSpace, as_opinion, sample_uniform

_REJECTION_GUARD = 10**6


@dataclass(frozen=True, eq=False)
class UniformBall:
    """Uniform over an open ball."""

    space: OpinionSpace

    def __post_init__(self):
        _require_shape(self.space, Ball, "UniformBall")


@dataclass(frozen=True, eq=False)
class TriangularBall:
    """Density proportional to (r - ||a - c||) on the ball: mass piles up at the center."""

    space: OpinionSpace

    def __post_init__(self):
        _require_shape(self.space, Ball, "TriangularBall")


@dataclass(frozen=True, eq=False)
class UniformBox:
    """Uniform over a box."""

    space: OpinionSpace

    def __post_init__(self):
        _require_shape(self.space, Box, "UniformBox")


@dataclass(frozen=True, eq=False)
class PointMass:
    """Every agent starts at the same point of the space."""

    space: OpinionSpace
    point: Opinion

    def __post_init__(self):
        p = as_opinion(self.point, self.space.dimension).copy()
        p.flags.writeable = False
        object.__setattr__(self, "point", p)
        if not self.space.contains(p):
            raise UnsupportedGeometryError(f"point mass at {p.tolist()} lies outside the opinion space")


InitialDistribution = Union[UniformBall, TriangularBall, UniformBox, PointMass]


def _require_shape(space: OpinionSpace, shape_type, name: str) -> None:
    if not isinstance(space.shape, shape_type):
        raise UnsupportedGeometryError(f"{name} requires a {shape_type.__name__} space, got {type(space.shape).__name__}")


def sample_batch(dist: InitialDistribution, n: int, rng: np.random.Generator) -> np.ndarray:
    """n independent draws as an (n, d) array."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    space = dist.space
    if isinstance(dist, PointMass):
        return np.tile(dist.point, (n, 1))
    if isinstance(dist, (UniformBall, UniformBox)):
        return sample_uniform(space, n, rng)
    # TriangularBall: accept a uniform-ball proposal a with probability
    # (r - ||a - c||)/r, giving density proportional to r - ||a - c||.
    ball = space.shape
    out = np.empty((n, space.dimension))
    filled = 0
    consecutive_rejected = 0
    while filled < n:
        batch = max(1024, n - filled)
        proposals = sample_uniform(space, batch, rng)
        weight = (ball.radius - space.norm.of_rows(proposals - ball.center)) / ball.radius
        keep = rng.random(batch) < weight
        accepted = proposals[keep]
        if accepted.shape[0] == 0:
            consecutive_rejected += batch
            if consecutive_rejected > _REJECTION_GUARD:
                raise SamplingError(
                    f"center-weighted sampler exceeded {_REJECTION_GUARD} consecutive rejections")
            continue
        consecutive_rejected = 0
        take = min(accepted.shape[0], n - filled)
        out[filled:filled + take] = accepted[:take]
        filled += take
    return out


def sample(dist: InitialDistribution, rng: np.random.Generator) -> Opinion:
    """One draw."""
    return sample_batch(dist, 1, rng)[0]


def initial_configuration(dist: InitialDistribution, graph: Graph, rng: np.random.Generator) -> np.ndarray:
    """One independent draw per vertex, as an (N, d) array."""
    return sample_batch(dist, graph.n_vertices, rng)


def expected_disagreement_analytic(dist: InitialDistribution) -> float:
    """Closed-form E||X - center||.

    Uniform ball: d r / (d + 1).  Center-weighted ball: d r / (d + 2).
    Point mass: the exact distance from the point to the center.  Uniform
    box has no closed form under a general norm; use the MC estimator.
    """
    space = dist.space
    if isinstance(dist, UniformBall):
        d, r = space.dimension, space.shape.radius
        return d * r / (d + 1)
    if isinstance(dist, TriangularBall):
        d, r = space.dimension, space.shape.radius
        return d * r / (d + 2)
    if isinstance(dist, PointMass):
        return space.norm.of(dist.point - space.center)
    raise NoClosedFormError(
        f"{type(dist).__name__} has no closed-form disagreement moment; "
        "use expected_disagreement_mc")


def expected_disagreement_mc(dist: InitialDistribution, c, n_samples: int,
                             rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo (mean, standard error) of ||X - c||."""
    if n_samples < 2:
        raise ValueError(f"need n_samples >= 2, got {n_samples}")
    c = as_opinion(c, dist.space.dimension)
    values = dist.space.norm.of_rows(sample_batch(dist, n_samples, rng) - c)
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / np.sqrt(n_samples))
    return mean, se


def radial_cdf_analytic(dist: InitialDistribution, s: float) -> float:
    """Closed-form P(||X - c|| < s) for the ball distributions; sampler oracle.

    Uniform ball: (s/r)^d.  Center-weighted ball: (s/r)^d (1 + d (1 - s/r)).
    """
    space = dist.space
    if not isinstance(dist, (UniformBall, TriangularBall)):
        raise NoClosedFormError(f"no radial distribution function for {type(dist).__name__}")
    d, r = space.dimension, space.shape.radius
    if s <= 0.0:
        return 0.0
    if s >= r:
        return 1.0
    t = s / r
    if isinstance(dist, UniformBall):
        return t**d
    return t**d * (1.0 + d * (1.0 - t))
