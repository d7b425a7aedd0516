"""Finite metric spaces, discrete probability measures and basic geometry."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import errors

#: Above this many points the O(m^3) triangle check is skipped.
TRIANGLE_CHECK_MAX = 512
#: Absolute tolerance on the total mass of a measure.
MASS_TOL = 1e-9

_UNCHECKED_FLAG = "[triangle-unchecked]"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """Indexed point set with a validated distance table.

    Build instances with :func:`validate_space` or one of the generators
    (:func:`discrete`, :func:`path`, :func:`grid`, :func:`cube_grid`,
    :func:`from_points`); the constructor itself does not validate.

    ``coords`` is optional and only used by callers that need an embedding,
    e.g. the one-dimensional quantile formula.
    """

    dist: np.ndarray
    label: str = ""
    coords: Optional[np.ndarray] = None
    triangle_checked: bool = True

    @property
    def size(self) -> int:
        return self.dist.shape[0]

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.size)

    def diameter(self) -> float:
        return float(self.dist.max())

    def __repr__(self):
        return f"FiniteMetricSpace(size={self.size}, label={self.label!r})"


def _first_triangle_violation(d: np.ndarray, tol: float):
    m = d.shape[0]
    for k in range(m):
        bad = d > d[:, k, None] + d[None, k, :] + tol
        if bad.any():
            i, j = np.argwhere(bad)[0]
            return int(i), int(j), k
    return None


def validate_space(
    dist_table,
    label: str = "",
    coords=None,
    check_triangle: Optional[bool] = None,
    tol: float = 1e-12,
) -> FiniteMetricSpace:
    """Validate a square distance table and wrap it as a metric space.

    Parameters
    ----------
    dist_table : array_like, shape (m, m)
        Nonnegative pairwise distances.
    label : str
        Human readable name.
    coords : array_like, optional
        Embedding coordinates, shape ``(m,)`` or ``(m, D)``.
    check_triangle : bool, optional
        Force (``True``) or skip (``False``) the triangle check.  By default
        it runs for spaces with at most :data:`TRIANGLE_CHECK_MAX` points and
        is skipped above, in which case the label is tagged.
    tol : float
        Relative slack used for the symmetry and triangle checks.

    Raises
    ------
    NonSquareTable, NegativeDistance, NonzeroDiagonal, AsymmetricDistance,
    TriangleViolation
    """
    d = np.asarray(dist_table, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
        raise errors.NonSquareTable(f"distance table must be square and nonempty, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise errors.NegativeDistance("distance table contains non-finite entries")
    if (d < 0).any():
        i, j = np.argwhere(d < 0)[0]
        raise errors.NegativeDistance(f"negative distance d({i},{j}) = {d[i, j]:g}")
    scale = max(1.0, float(d.max()))
    diag = np.diag(d)
    if (diag != 0).any():
        i = int(np.flatnonzero(diag != 0)[0])
        raise errors.NonzeroDiagonal(f"d({i},{i}) = {diag[i]:g}, expected 0")
    asym = np.abs(d - d.T) > tol * scale
    if asym.any():
        i, j = np.argwhere(asym)[0]
        raise errors.AsymmetricDistance(f"d({i},{j}) = {d[i, j]:g} but d({j},{i}) = {d[j, i]:g}")

    m = d.shape[0]
    if check_triangle is None:
        check_triangle = m <= TRIANGLE_CHECK_MAX
    if check_triangle:
        hit = _first_triangle_violation(d, tol * scale)
        if hit is not None:
            i, j, k = hit
            raise errors.TriangleViolation(i, k, j, d[i, j], d[i, k], d[k, j])
    elif _UNCHECKED_FLAG not in label:
        label = f"{label} {_UNCHECKED_FLAG}".strip()

    c = None
    if coords is not None:
        c = _frozen(coords)
        if c.shape[0] != m:
            raise errors.ValidationError(f"coords has {c.shape[0]} rows for a {m}-point space")
    return FiniteMetricSpace(_frozen(d), label=label, coords=c, triangle_checked=bool(check_triangle))


# --------------------------------------------------------------------------
# generators


def from_points(points, metric: str = "euclidean", label: str = "", check_triangle=None) -> FiniteMetricSpace:
    """Metric space on the rows of ``points`` (shape ``(m,)`` or ``(m, D)``).

    ``metric`` is ``"euclidean"`` or ``"chebyshev"`` (l-infinity).
    """
    x = np.asarray(points, dtype=float)
    flat = x.ndim == 1
    if flat:
        x = x[:, None]
    if metric not in ("euclidean", "chebyshev"):
        raise errors.ValidationError(f"unknown metric {metric!r}")
    # per-axis accumulation keeps memory at one m x m table
    d = np.zeros((x.shape[0], x.shape[0]))
    for a in range(x.shape[1]):
        diff = np.abs(x[:, None, a] - x[None, :, a])
        if metric == "euclidean":
            d += diff * diff
        else:
            np.maximum(d, diff, out=d)
    if metric == "euclidean":
        np.sqrt(d, out=d)
    coords = x[:, 0] if flat or x.shape[1] == 1 else x
    # generated from coordinates, so the triangle inequality holds up to rounding
    return validate_space(d, label=label, coords=coords, check_triangle=check_triangle, tol=1e-9)


def discrete(m: int, delta: float = 1.0) -> FiniteMetricSpace:
    """``m`` points at mutual distance ``delta``."""
    if m < 1 or delta <= 0:
        raise errors.ValidationError("discrete space needs m >= 1 and delta > 0")
    d = delta * (1.0 - np.eye(m))
    return validate_space(d, label=f"discrete({m}, {delta:g})", check_triangle=m <= TRIANGLE_CHECK_MAX)


def path(m: int) -> FiniteMetricSpace:
    """``{0, ..., m-1}`` with ``|i - j|``."""
    if m < 1:
        raise errors.ValidationError("path space needs m >= 1")
    return from_points(np.arange(m, dtype=float), label=f"path({m})")


def grid(D: int, side: int) -> FiniteMetricSpace:
    """Integer grid ``{0..side-1}^D`` with the l-infinity metric."""
    if D < 1 or side < 1:
        raise errors.ValidationError("grid needs D >= 1 and side >= 1")
    axes = [np.arange(side, dtype=float)] * D
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, D)
    return from_points(pts, metric="chebyshev", label=f"grid({D}, {side})")


def cube_grid(D: int, k: int) -> FiniteMetricSpace:
    """Cell-centre lattice ``((i + 1/2) / k)`` of ``[0, 1]^D``, Euclidean metric."""
    if D < 1 or k < 1:
        raise errors.ValidationError("cube-grid needs D >= 1 and k >= 1")
    axis = (np.arange(k, dtype=float) + 0.5) / k
    pts = np.stack(np.meshgrid(*([axis] * D), indexing="ij"), -1).reshape(-1, D)
    return from_points(pts, metric="euclidean", label=f"cube-grid({D}, {k})")


GENERATORS = {
    "discrete": (discrete, (int, float)),
    "path": (path, (int,)),
    "grid": (grid, (int, int)),
    "cube-grid": (cube_grid, (int, int)),
}

_SPEC_RE = re.compile(r"^\s*([a-z-]+)\s*[(:]\s*([^)]*)\)?\s*$")


def space_from_spec(spec: str) -> FiniteMetricSpace:
    """Build a space from ``"name(args)"`` / ``"name:args"`` or a file path.

    >>> space_from_spec("discrete(4, 1)").size
    4
    """
    m = _SPEC_RE.match(spec)
    if m and m.group(1) in GENERATORS:
        fn, types = GENERATORS[m.group(1)]
        raw = [a for a in re.split(r"[,\s]+", m.group(2).strip()) if a]
        if len(raw) > len(types) or len(raw) < 1:
            raise errors.ValidationError(f"bad arguments for generator {m.group(1)!r}: {m.group(2)!r}")
        try:
            args = [t(float(a)) if t is int else t(a) for t, a in zip(types, raw)]
        except ValueError as exc:
            raise errors.ValidationError(f"bad generator arguments in {spec!r}") from exc
        return fn(*args)
    p = Path(spec)
    if p.exists():
        return load_space(p)
    raise errors.ValidationError(f"{spec!r} is neither a known generator nor an existing file")


def load_space(path, label: Optional[str] = None) -> FiniteMetricSpace:
    """Read the plain-text distance-matrix format (count line, then rows)."""
    text = Path(path).read_text().split()
    if not text:
        raise errors.ValidationError(f"{path}: empty distance file")
    try:
        m = int(text[0])
        vals = np.array([float(t) for t in text[1:]])
    except ValueError as exc:
        raise errors.ValidationError(f"{path}: malformed distance file") from exc
    if m < 1 or vals.size != m * m:
        raise errors.NonSquareTable(f"{path}: expected {m * m} entries after the count, got {vals.size}")
    return validate_space(vals.reshape(m, m), label=label or Path(path).name)


def save_space(space: FiniteMetricSpace, path) -> None:
    rows = [str(space.size)]
    rows += [" ".join(repr(float(v)) for v in row) for row in space.dist]
    Path(path).write_text("\n".join(rows) + "\n")


# --------------------------------------------------------------------------
# measures


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability weights on the points of a :class:`FiniteMetricSpace`."""

    space: FiniteMetricSpace
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True).ravel()
        if w.shape[0] != self.space.size:
            raise errors.InvalidMeasure(f"{w.shape[0]} weights for a {self.space.size}-point space")
        if not np.all(np.isfinite(w)) or (w < 0).any():
            raise errors.InvalidMeasure("weights must be finite and nonnegative")
        total = w.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise errors.InvalidMeasure(f"weights sum to {total!r}, not 1")
        w = w / total
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)

    def mass(self, subset) -> float:
        return float(self.weights[np.asarray(list(subset), dtype=int)].sum())

    def same_space(self, other: "DiscreteMeasure") -> bool:
        return self.space is other.space

    def allclose(self, other: "DiscreteMeasure", atol: float = 1e-12) -> bool:
        return self.same_space(other) and bool(np.allclose(self.weights, other.weights, rtol=0, atol=atol))

    def __repr__(self):
        s = self.support
        body = ", ".join(f"{i}: {self.weights[i]:.4g}" for i in s[:6])
        more = ", ..." if s.size > 6 else ""
        return f"DiscreteMeasure({self.space.label or self.space.size}; {{{body}{more}}})"


def point_mass(space: FiniteMetricSpace, x: int) -> DiscreteMeasure:
    w = np.zeros(space.size)
    w[x] = 1.0
    return DiscreteMeasure(space, w)


def uniform(space: FiniteMetricSpace, subset: Optional[Iterable[int]] = None) -> DiscreteMeasure:
    w = np.zeros(space.size)
    idx = np.arange(space.size) if subset is None else np.unique(np.asarray(list(subset), dtype=int))
    if idx.size == 0:
        raise errors.EmptySubset("uniform measure on an empty set")
    w[idx] = 1.0 / idx.size
    return DiscreteMeasure(space, w)


def require_same_space(*measures: DiscreteMeasure) -> FiniteMetricSpace:
    space = measures[0].space
    for mu in measures[1:]:
        if mu.space is not space:
            raise errors.SpaceMismatch("measures live on different spaces")
    return space


# --------------------------------------------------------------------------
# geometry


def _subset_index(space: FiniteMetricSpace, subset) -> np.ndarray:
    idx = np.unique(np.asarray(list(subset), dtype=int))
    if idx.size and (idx[0] < 0 or idx[-1] >= space.size):
        raise errors.ValidationError(f"subset indices out of range for a {space.size}-point space")
    return idx


def diameter(space: FiniteMetricSpace, subset) -> float:
    """Largest pairwise distance within ``subset`` (0 for a singleton)."""
    idx = _subset_index(space, subset)
    if idx.size == 0:
        raise errors.EmptySubset("diameter of an empty set")
    return float(space.dist[np.ix_(idx, idx)].max())


def separation(space: FiniteMetricSpace, subset) -> float:
    """Smallest distance between two distinct points of ``subset``."""
    idx = _subset_index(space, subset)
    if idx.size < 2:
        raise errors.DegenerateSubset("separation needs at least two distinct points")
    sub = space.dist[np.ix_(idx, idx)]
    return float(sub[np.triu_indices(idx.size, 1)].min())


@dataclass(frozen=True)
class MomentEstimate:
    order: float
    base_point: int
    value: float


def metric_moment(P: DiscreteMeasure, order: float, base_point: int) -> MomentEstimate:
    """``(sum_y P(y) d(x, y)^order)^(1/order)``; ``order=inf`` gives the max over the support."""
    if not (order > 0):  # also rejects nan
        raise errors.NonpositiveOrder(f"moment order must be positive, got {order!r}")
    d = P.space.dist[base_point]
    if math.isinf(order):
        value = float(d[P.support].max())
    else:
        value = float(np.dot(P.weights, d**order) ** (1.0 / order))
    return MomentEstimate(order=float(order), base_point=int(base_point), value=value)


def pairwise_distances(space: FiniteMetricSpace, subset: Sequence[int]) -> list:
    """Sorted distinct positive distances within ``subset``."""
    idx = _subset_index(space, subset)
    sub = space.dist[np.ix_(idx, idx)][np.triu_indices(idx.size, 1)]
    return [float(v) for v in np.unique(sub[sub > 0])]
