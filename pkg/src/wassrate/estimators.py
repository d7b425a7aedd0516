"""Sampling, empirical measures and the Voronoi projection onto a center set."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import errors
from .metric import DiscreteMeasure, FiniteMetricSpace

#: Name and version of the pseudo-random scheme recorded in every output.
GENERATOR_ID = "numpy-pcg64-seedseq-v1"


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """Independent substream keyed by ``(seed, *stream)``, e.g. ``(seed, n, trial)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))


@dataclass(frozen=True, eq=False)
class SampleBatch:
    space: FiniteMetricSpace
    indices: np.ndarray = field(repr=False)
    seed: int
    generator_id: str = GENERATOR_ID
    stream: tuple = ()

    @property
    def n(self) -> int:
        return self.indices.size


def draw_indices(weights: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draws: the first index whose cumulative weight exceeds a uniform."""
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random(n), side="right")
    return np.minimum(idx, weights.size - 1)


def sample(P: DiscreteMeasure, n: int, seed: int, trial: int = 0) -> SampleBatch:
    """``n`` independent draws from ``P``; deterministic in ``(seed, n, trial)``."""
    if int(n) != n or n < 1:
        raise errors.ValidationError(f"n must be a positive integer, got {n!r}")
    idx = draw_indices(P.weights, int(n), rng_for(seed, n, trial))
    idx.setflags(write=False)
    return SampleBatch(P.space, idx, int(seed), GENERATOR_ID, (int(n), int(trial)))


def empirical(batch: SampleBatch) -> DiscreteMeasure:
    """Uniform measure on the sampled points (with multiplicity)."""
    if batch.n == 0:
        raise errors.ValidationError("empty sample batch")
    counts = np.bincount(batch.indices, minlength=batch.space.size)
    return DiscreteMeasure(batch.space, counts / batch.n)


def voronoi_cells(space: FiniteMetricSpace, centers: Iterable[int]) -> np.ndarray:
    """For every point, the nearest center (ties to the lowest center index)."""
    D = np.unique(np.asarray(list(centers), dtype=int))
    if D.size == 0:
        raise errors.EmptyCenterSet("center set is empty")
    if D[0] < 0 or D[-1] >= space.size:
        raise errors.ValidationError("center indices outside the space")
    return D[np.argmin(space.dist[:, D], axis=1)]


def voronoi_project(Q: DiscreteMeasure, centers: Iterable[int]) -> DiscreteMeasure:
    """Move each point's mass to its nearest center.

    The result is the closest measure to ``Q`` among those supported on the
    centers, in every ``W_r``.
    """
    owner = voronoi_cells(Q.space, centers)
    w = np.bincount(owner, weights=Q.weights, minlength=Q.space.size)
    return DiscreteMeasure(Q.space, w)
