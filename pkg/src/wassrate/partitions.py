"""Partitions, covering/packing numbers, packing radius and nested refinement chains."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import errors
from .metric import FiniteMetricSpace

#: Largest space for exact covering numbers (search over partitions).
COVER_EXACT_MAX = 12
#: Largest space for exact packing numbers / packing radii (subset search).
PACK_EXACT_MAX = 20


class DegenerateRadiusWarning(UserWarning):
    """R(1) is an empty infimum; the returned +inf carries no information."""


def _tol(eps: float) -> float:
    return 1e-12 * max(1.0, abs(eps))


@dataclass(frozen=True, eq=False)
class Partition:
    """Disjoint nonempty cells covering every point of ``space``.

    Cells keep the order they were given in; several constructions depend on
    that enumeration order.
    """

    space: FiniteMetricSpace
    cells: Tuple[Tuple[int, ...], ...]
    labels: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        m = self.space.size
        labels = np.full(m, -1, dtype=int)
        cells = []
        for c, cell in enumerate(self.cells):
            idx = sorted({int(i) for i in cell})
            if not idx:
                raise errors.InvalidPartition(f"cell {c} is empty")
            if idx[0] < 0 or idx[-1] >= m:
                raise errors.InvalidPartition(f"cell {c} has indices outside the space")
            if (labels[idx] >= 0).any():
                raise errors.InvalidPartition(f"cell {c} overlaps an earlier cell")
            labels[idx] = c
            cells.append(tuple(idx))
        if (labels < 0).any():
            missing = np.flatnonzero(labels < 0)[:5].tolist()
            raise errors.InvalidPartition(f"partition misses points {missing}")
        labels.setflags(write=False)
        object.__setattr__(self, "cells", tuple(cells))
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.cells)

    def __iter__(self):
        return iter(self.cells)

    def as_sets(self) -> set:
        return {frozenset(c) for c in self.cells}

    def same_cells(self, other: "Partition") -> bool:
        return self.as_sets() == other.as_sets()

    def masses(self, weights) -> np.ndarray:
        """Mass of each cell under a weight vector (or a DiscreteMeasure)."""
        w = getattr(weights, "weights", weights)
        return np.bincount(self.labels, weights=w, minlength=len(self.cells))

    def diameters(self) -> np.ndarray:
        d = self.space.dist
        return np.array([d[np.ix_(c, c)].max() if len(c) > 1 else 0.0 for c in self.cells])

    def resolution(self) -> float:
        return float(self.diameters().max())

    def refines(self, coarser: "Partition") -> bool:
        """True when every cell of ``self`` sits inside one cell of ``coarser``."""
        if coarser.space is not self.space:
            raise errors.SpaceMismatch("partitions live on different spaces")
        lab = coarser.labels
        return all(np.all(lab[list(c)] == lab[c[0]]) for c in self.cells)

    def __repr__(self):
        shown = ", ".join("{" + ",".join(map(str, c)) + "}" for c in self.cells[:8])
        more = ", ..." if len(self.cells) > 8 else ""
        return f"Partition([{shown}{more}])"


def whole(space: FiniteMetricSpace) -> Partition:
    return Partition(space, (tuple(range(space.size)),))


def singletons(space: FiniteMetricSpace) -> Partition:
    return Partition(space, tuple((i,) for i in range(space.size)))


def resolution(p: Partition) -> float:
    """Largest cell diameter."""
    return p.resolution()


def disjointify(space: FiniteMetricSpace, cover: Iterable[Iterable[int]]) -> Partition:
    """Turn a cover into a partition: cell i is cover i minus all earlier cells.

    Cells that come out empty are dropped.
    """
    taken = np.zeros(space.size, dtype=bool)
    cells = []
    for c in cover:
        idx = np.unique(np.asarray(list(c), dtype=int))
        if idx.size and (idx[0] < 0 or idx[-1] >= space.size):
            raise errors.ValidationError("cover set has indices outside the space")
        fresh = idx[~taken[idx]]
        taken[fresh] = True
        if fresh.size:
            cells.append(tuple(fresh.tolist()))
    if not taken.all():
        missing = np.flatnonzero(~taken)[:5].tolist()
        raise errors.IncompleteCover(f"cover misses points {missing}")
    return Partition(space, tuple(cells))


# --------------------------------------------------------------------------
# covering / packing


@dataclass(frozen=True)
class CountBound:
    """Certified interval ``lower <= value <= upper``; ``exact`` iff the ends meet by search."""

    lower: int
    upper: int
    exact: bool
    witness: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.lower > self.upper:
            raise ValueError(f"CountBound lower {self.lower} > upper {self.upper}")
        if self.exact and self.lower != self.upper:
            raise ValueError("exact CountBound must have lower == upper")


def farthest_point_order(space: FiniteMetricSpace, seed: int = 0):
    """Farthest-point traversal from ``seed``; ties go to the lowest index.

    Returns ``(order, radii)`` where ``radii[i]`` is the distance from
    ``order[i]`` to the points chosen before it (``radii[0] = inf``).  Radii are
    non-increasing and the first ``k`` points have separation ``radii[k-1]``.
    """
    m = space.size
    d = space.dist
    order = np.empty(m, dtype=int)
    radii = np.empty(m)
    order[0], radii[0] = seed, math.inf
    nearest = d[seed].copy()
    nearest[seed] = -1.0
    for i in range(1, m):
        j = int(np.argmax(nearest))
        order[i], radii[i] = j, nearest[j]
        np.minimum(nearest, d[j], out=nearest)
        nearest[order[: i + 1]] = -1.0
    return order, radii


def _greedy_packing(space, eps, strict=False):
    order, radii = farthest_point_order(space)
    t = _tol(eps)
    ok = radii > eps + t if strict else radii >= eps - t
    k = int(ok.sum())  # radii are non-increasing
    return tuple(sorted(order[:k].tolist()))


def greedy_partition(space: FiniteMetricSpace, eps: float) -> Partition:
    """Cells of diameter <= eps grown from the lowest unassigned point.

    Candidates join in order of distance from the seed whenever the cell's
    diameter stays within ``eps``.
    """
    d = space.dist
    t = _tol(eps)
    free = np.ones(space.size, dtype=bool)
    cells = []
    for seed in range(space.size):
        if not free[seed]:
            continue
        cand = np.flatnonzero(free & (d[seed] <= eps + t))
        cand = cand[np.argsort(d[seed, cand], kind="stable")]
        reach = d[seed, cand].copy()  # max distance from each candidate to the cell
        cell = []
        for pos, c in enumerate(cand):
            if reach[pos] <= eps + t:
                cell.append(int(c))
                np.maximum(reach, d[c, cand], out=reach)
        free[cell] = False
        cells.append(tuple(cell))
    return Partition(space, tuple(cells))


def _bitmask_rows(adj: np.ndarray) -> List[int]:
    return [sum(1 << int(j) for j in np.flatnonzero(row)) for row in adj]


def _exact_min_partition(space: FiniteMetricSpace, eps: float) -> Partition:
    """Fewest cells of diameter <= eps: minimum colouring of the 'too far' graph."""
    m = space.size
    t = _tol(eps)
    far = space.dist > eps + t
    far_mask = _bitmask_rows(far)
    # vertices with many conflicts first
    order = sorted(range(m), key=lambda v: -int(far[v].sum()))

    # lower bound: greedy clique in the conflict graph
    clique = []
    for v in order:
        if all(far[v, u] for u in clique):
            clique.append(v)
    lower = len(clique)

    best = {"k": m + 1, "classes": None}
    classes: List[int] = []

    def place(pos: int):
        if len(classes) >= best["k"]:
            return
        if pos == m:
            best["k"], best["classes"] = len(classes), list(classes)
            return
        v = order[pos]
        bit = 1 << v
        for c in range(len(classes)):
            if classes[c] & far_mask[v] == 0:
                classes[c] |= bit
                place(pos + 1)
                classes[c] &= ~bit
                if best["k"] == lower:
                    return
        if len(classes) + 1 < best["k"]:
            classes.append(bit)
            place(pos + 1)
            classes.pop()

    place(0)
    cells = [tuple(i for i in range(m) if mask >> i & 1) for mask in best["classes"]]
    cells.sort()
    return Partition(space, tuple(cells))


def _exact_max_packing(space: FiniteMetricSpace, eps: float) -> Tuple[int, ...]:
    """Largest subset with all pairwise distances >= eps (branch and bound)."""
    m = space.size
    t = _tol(eps)
    close = space.dist < eps - t
    np.fill_diagonal(close, True)
    close_mask = _bitmask_rows(close)
    best = {"set": 0, "size": 0}

    def grow(cand: int, chosen: int, size: int):
        if cand == 0:
            if size > best["size"]:
                best["set"], best["size"] = chosen, size
            return
        if size + bin(cand).count("1") <= best["size"]:
            return
        v = (cand & -cand).bit_length() - 1
        grow(cand & ~close_mask[v], chosen | (1 << v), size + 1)
        grow(cand & ~(1 << v), chosen, size)

    grow((1 << m) - 1, 0, 0)
    return tuple(i for i in range(m) if best["set"] >> i & 1)


def _check_eps(eps: float):
    if not (eps > 0):
        raise errors.ValidationError(f"eps must be positive, got {eps!r}")


def _check_mode(mode: str):
    if mode not in ("exact", "greedy"):
        raise errors.ValidationError(f"mode must be 'exact' or 'greedy', got {mode!r}")


def min_partition(space: FiniteMetricSpace, eps: float, mode: str = "exact") -> Partition:
    """A partition of resolution <= eps: minimal (exact) or greedy."""
    _check_eps(eps)
    _check_mode(mode)
    if space.diameter() <= eps + _tol(eps):
        return whole(space)
    if mode == "greedy":
        return greedy_partition(space, eps)
    if space.size > COVER_EXACT_MAX:
        raise errors.ExactModeTooLarge(f"exact covering is limited to {COVER_EXACT_MAX} points, space has {space.size}")
    return _exact_min_partition(space, eps)


def covering_number(space: FiniteMetricSpace, eps: float, mode: str = "exact") -> CountBound:
    """Fewest cells of a partition with resolution <= eps.

    Greedy mode brackets the value: the upper end is a greedy partition, the
    lower end a farthest-point set whose pairwise distances exceed eps (such
    points need distinct cells).  The witness is the partition achieving the
    upper end.
    """
    p = min_partition(space, eps, mode)
    if mode == "exact" or len(p) == 1:
        return CountBound(len(p), len(p), True, p)
    lower = len(_greedy_packing(space, eps, strict=True))
    return CountBound(min(lower, len(p)), len(p), lower == len(p), p)


def packing_number(space: FiniteMetricSpace, eps: float, mode: str = "exact") -> CountBound:
    """Largest subset with separation >= eps.

    Greedy mode: lower end from farthest-point traversal, upper end from a
    greedy partition at eps/2 (two eps-separated points never share a cell of
    diameter eps/2).  The witness is the packing achieving the lower end.
    """
    _check_eps(eps)
    _check_mode(mode)
    if mode == "exact":
        if space.size > PACK_EXACT_MAX:
            raise errors.ExactModeTooLarge(f"exact packing is limited to {PACK_EXACT_MAX} points, space has {space.size}")
        s = _exact_max_packing(space, eps)
        return CountBound(len(s), len(s), True, s)
    s = _greedy_packing(space, eps)
    upper = len(min_partition(space, eps / 2, "greedy"))
    return CountBound(len(s), max(upper, len(s)), len(s) == upper, s)


def packing_radius(space: FiniteMetricSpace, n: int, mode: str = "exact") -> float:
    """Largest separation of a subset with at least ``n`` points.

    ``n == 1`` returns ``inf`` and emits :class:`DegenerateRadiusWarning`.
    Greedy mode returns the separation of the first ``n`` farthest-point
    picks, a certified lower bound on the exact value.
    """
    _check_mode(mode)
    if n < 1:
        raise errors.ValidationError(f"n must be >= 1, got {n}")
    if n > space.size:
        raise errors.NTooLarge(f"no subset of a {space.size}-point space has {n} points")
    if n == 1:
        warnings.warn("packing radius R(1) is +inf (empty infimum)", DegenerateRadiusWarning, stacklevel=2)
        return math.inf
    if mode == "greedy":
        _, radii = farthest_point_order(space)
        return float(radii[n - 1])
    if space.size > PACK_EXACT_MAX:
        raise errors.ExactModeTooLarge(f"exact packing radius is limited to {PACK_EXACT_MAX} points, space has {space.size}")
    d = space.dist
    cand = np.unique(d[np.triu_indices(space.size, 1)])
    # M(eps) is non-increasing in eps: find the largest candidate with M >= n
    lo, hi = 0, cand.size - 1
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if len(_exact_max_packing(space, float(cand[mid]))) >= n:
            lo = mid
        else:
            hi = mid - 1
    return float(cand[lo])


def packing_radii(space: FiniteMetricSpace, kmax: int, mode: str = "exact") -> dict:
    """``{k: R(k)}`` for ``k = 2..kmax`` (capped at the space size)."""
    kmax = min(kmax, space.size)
    if mode == "greedy":
        _, radii = farthest_point_order(space)
        return {k: float(radii[k - 1]) for k in range(2, kmax + 1)}
    return {k: packing_radius(space, k, mode) for k in range(2, kmax + 1)}


# --------------------------------------------------------------------------
# refinement


def refine_coarsen(S: Partition, T: Partition) -> Partition:
    """Coarsen ``S`` so that ``T`` refines the result.

    Output cell i is the union of the T-cells meeting S_i, minus earlier output
    cells; empty cells are dropped.  The result has at most ``len(S)`` cells
    and resolution at most ``Res(S) + 2 Res(T)``.
    """
    if S.space is not T.space:
        raise errors.SpaceMismatch("partitions live on different spaces")
    tcells = [np.asarray(c) for c in T.cells]
    taken = np.zeros(S.space.size, dtype=bool)
    out = []
    for cell in S.cells:
        hit = np.unique(T.labels[list(cell)])
        members = np.concatenate([tcells[h] for h in hit])
        members = members[~taken[members]]
        if members.size:
            taken[members] = True
            out.append(tuple(np.sort(members).tolist()))
    return Partition(S.space, tuple(out))


@dataclass(frozen=True, eq=False)
class NestedSequence:
    """Partitions ordered coarse to fine; level k+1 refines level k."""

    levels: Tuple[Partition, ...]
    resolutions: Tuple[float, ...] = field(init=False)

    def __post_init__(self):
        levels = tuple(self.levels)
        if not levels:
            raise errors.InvalidPartition("nested sequence needs at least one level")
        space = levels[0].space
        for k in range(len(levels) - 1):
            if levels[k + 1].space is not space:
                raise errors.SpaceMismatch("levels live on different spaces")
            if not levels[k + 1].refines(levels[k]):
                raise errors.InvalidPartition(f"level {k + 1} does not refine level {k}")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "resolutions", tuple(p.resolution() for p in levels))

    @property
    def space(self) -> FiniteMetricSpace:
        return self.levels[0].space

    @property
    def depth(self) -> int:
        """Number of levels below the coarsest one."""
        return len(self.levels) - 1

    def level(self, k: int) -> Partition:
        return self.levels[k]


def _check_non_increasing(eps_seq: Sequence[float], allow_zero: bool = False):
    eps = [float(e) for e in eps_seq]
    if not eps:
        raise errors.ValidationError("need at least one eps value")
    for e in eps:
        if not (e > 0 or (allow_zero and e == 0)):
            raise errors.ValidationError(f"eps values must be positive, got {e!r}")
    for a, b in zip(eps, eps[1:]):
        if b > a:
            raise errors.NotNonIncreasing(f"eps sequence increases: {a!r} -> {b!r}")
    return eps


def build_nested_sequence(space: FiniteMetricSpace, eps_seq: Sequence[float], mode: Optional[str] = None):
    """Nested chain ``{Omega} = S_0, S_1, ..., S_K`` from per-level eps-partitions.

    Each level k >= 1 starts as an eps_k partition (minimal in exact mode,
    greedy otherwise).  Working from the finest level upward, every coarser
    level is coarsened against the already nested finer one, so that
    ``Res(S_k) <= sum_{j>=k} 2^(j-k) eps_j`` and ``|S_k| <= N(eps_k)``.

    Returns ``(NestedSequence, counts)`` where ``counts[k-1]`` is the
    :class:`CountBound` for level k's starting partition.
    """
    eps = _check_non_increasing(eps_seq)
    if mode is None:
        mode = "exact" if space.size <= COVER_EXACT_MAX else "greedy"
    counts = [covering_number(space, e, mode) for e in eps]
    raw = [c.witness for c in counts]
    nested = [raw[-1]]
    for p in reversed(raw[:-1]):
        nested.append(refine_coarsen(p, nested[-1]))
    nested.append(whole(space))
    return NestedSequence(tuple(reversed(nested))), counts
