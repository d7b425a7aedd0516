"""Exact Wasserstein distances on finite spaces and the coupling-based bounds built on them."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

# POT probes every installed array backend at import; only numpy is used here.
for _backend in ("PYTORCH", "TENSORFLOW", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")

import ot  # noqa: E402

from . import errors  # noqa: E402
from .metric import MASS_TOL, DiscreteMeasure, FiniteMetricSpace, require_same_space  # noqa: E402
from .partitions import NestedSequence, Partition  # noqa: E402
from .reports import BoundReport, make_report  # noqa: E402

#: Network simplex iteration cap; large enough that it never binds at target scale.
MAX_ITER = 10**9
#: Relative tolerance for the optimality certificate.
CERT_TOL = 1e-9


def _check_order(r: float):
    if not (r >= 1 and math.isfinite(r)):
        raise errors.NonpositiveOrder(f"transport order r must be a finite real >= 1, got {r!r}")


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Coupling of ``source`` and ``target`` stored as a sparse mass list.

    ``cost_r`` is ``sum mass(i, j) * dist(i, j) ** r`` for the stated ``r``.
    """

    source: DiscreteMeasure
    target: DiscreteMeasure
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    r: float = 1.0
    cost_r: float = field(init=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=int)
        cols = np.asarray(self.cols, dtype=int)
        vals = np.asarray(self.values, dtype=float)
        if (vals < 0).any():
            raise errors.SolverFailure("transport plan has negative mass")
        keep = vals > 0
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
        for name, a in (("rows", rows), ("cols", cols), ("values", vals)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        d = self.source.space.dist[rows, cols]
        object.__setattr__(self, "cost_r", float(np.dot(vals, d**self.r)))

    @property
    def space(self) -> FiniteMetricSpace:
        return self.source.space

    @property
    def mass(self) -> np.ndarray:
        """Dense ``size x size`` mass table."""
        m = self.space.size
        out = np.zeros((m, m))
        np.add.at(out, (self.rows, self.cols), self.values)
        return out

    def marginals(self) -> Tuple[np.ndarray, np.ndarray]:
        m = self.space.size
        return (np.bincount(self.rows, self.values, minlength=m), np.bincount(self.cols, self.values, minlength=m))

    def marginal_residual(self) -> float:
        a, b = self.marginals()
        return float(max(np.abs(a - self.source.weights).max(), np.abs(b - self.target.weights).max()))

    def recomputed_cost(self, r: Optional[float] = None) -> float:
        """Cost from the dense table, independent of the stored sparse sum."""
        r = self.r if r is None else r
        return float(np.sum(self.mass * self.space.dist**r))

    def value(self) -> float:
        return self.cost_r ** (1.0 / self.r)


def _diagonal_plan(P, Q, r, weights=None) -> TransportPlan:
    w = P.weights if weights is None else weights
    idx = np.flatnonzero(w > 0)
    return TransportPlan(P, Q, idx, idx, w[idx], r)


def _solve(a, b, C):
    """Network simplex with duals; ``a`` and ``b`` are rescaled to equal mass."""
    b = b * (a.sum() / b.sum())
    G, log = ot.emd(a, b, C, numItermax=MAX_ITER, log=True)
    if log.get("result_code", 1) != 1 or log.get("warning"):
        raise errors.SolverFailure(f"network simplex did not reach optimality: {log.get('warning')}")
    return G, np.asarray(log["u"], dtype=float), np.asarray(log["v"], dtype=float)


def _certify(cost, p, q, u, v, C, label):
    """Dual feasibility ``u_i + v_j <= C_ij`` and zero duality gap."""
    scale = max(1.0, float(C.max()) if C.size else 1.0)
    slack = float((u[:, None] + v[None, :] - C).max()) if C.size else 0.0
    gap = abs(cost - (float(u @ p) + float(v @ q)))
    if slack > CERT_TOL * scale or gap > CERT_TOL * scale:
        raise errors.SolverFailure(f"{label}: optimality certificate failed (dual slack {slack:.3g}, gap {gap:.3g})")


def wasserstein_exact(P: DiscreteMeasure, Q: DiscreteMeasure, r: float = 1.0, certify: bool = True):
    """Exact ``W_r(P, Q)`` and an optimal plan.

    The transportation problem over ``supp P x supp Q`` is solved by network
    simplex, then optimality is certified from the dual potentials.  For
    ``r = 1`` the shared mass ``min(P, Q)`` stays in place first, which is
    optimal for any metric cost and shrinks the problem.

    Returns
    -------
    value : float
        ``W_r(P, Q) = cost ** (1 / r)``.
    plan : TransportPlan
    """
    space = require_same_space(P, Q)
    _check_order(r)
    p, q = P.weights, Q.weights
    dist = space.dist
    if np.array_equal(p, q):
        return 0.0, _diagonal_plan(P, Q, r)

    if r == 1:
        common = np.minimum(p, q)
        a_full, b_full = p - common, q - common
        S, T = np.flatnonzero(a_full > 0), np.flatnonzero(b_full > 0)
        if S.size == 0 or T.size == 0:
            return 0.0, _diagonal_plan(P, Q, r, common)
        a, b = a_full[S], b_full[T]
        C = dist[np.ix_(S, T)]
        G, u, v = _solve(a, b, C)
        if certify:
            # c-transform lifts the reduced duals to a 1-Lipschitz potential on the full supports
            _certify(float(np.sum(G * C)), a, b * (a.sum() / b.sum()), u, v, C, "reduced problem")
            sp, sq = P.support, Q.support
            f_p = np.min(dist[np.ix_(sp, T)] - v[None, :], axis=1)
            f_q = np.min(dist[np.ix_(sq, T)] - v[None, :], axis=1)
            _certify(float(np.sum(G * C)), p[sp], q[sq], f_p, -f_q, dist[np.ix_(sp, sq)], "full problem")
        ii, jj = np.nonzero(G)
        diag = np.flatnonzero(common > 0)
        rows = np.concatenate([diag, S[ii]])
        cols = np.concatenate([diag, T[jj]])
        vals = np.concatenate([common[diag], G[ii, jj]])
    else:
        S, T = P.support, Q.support
        a, b = p[S], q[T]
        C = dist[np.ix_(S, T)] ** r
        G, u, v = _solve(a, b, C)
        if certify:
            _certify(float(np.sum(G * C)), a, b * (a.sum() / b.sum()), u, v, C, "transport problem")
        ii, jj = np.nonzero(G)
        rows, cols, vals = S[ii], T[jj], G[ii, jj]

    plan = TransportPlan(P, Q, rows, cols, vals, r)
    if plan.marginal_residual() > MASS_TOL:
        raise errors.SolverFailure(f"plan marginals off by {plan.marginal_residual():.3g}")
    return plan.value(), plan


# --------------------------------------------------------------------------
# one-dimensional closed forms


def line_coordinates(space: FiniteMetricSpace, tol: float = 1e-9) -> np.ndarray:
    """Declared 1-D coordinates, checked against the distance table."""
    if space.coords is None:
        raise errors.NotLineEmbeddable("space has no declared coordinates")
    x = np.asarray(space.coords, dtype=float)
    if x.ndim == 2 and x.shape[1] == 1:
        x = x[:, 0]
    if x.ndim != 1:
        raise errors.NotLineEmbeddable(f"coordinates have shape {x.shape}, expected one per point")
    err = np.abs(np.abs(x[:, None] - x[None, :]) - space.dist).max()
    if err > tol * max(1.0, space.diameter()):
        raise errors.NotLineEmbeddable(f"|x_i - x_j| differs from dist by up to {err:.3g}")
    return x


def _quantile_merge(x, p, q, r):
    order = np.argsort(x, kind="stable")
    xs = x[order]
    cp, cq = np.cumsum(p[order]), np.cumsum(q[order])
    cp[-1] = cq[-1] = 1.0
    knots = np.unique(np.concatenate([[0.0], cp, cq]))
    knots = knots[knots <= 1.0]
    du = np.diff(knots)
    mid = 0.5 * (knots[:-1] + knots[1:])
    last = xs.size - 1
    xp = xs[np.minimum(np.searchsorted(cp, mid, side="left"), last)]
    xq = xs[np.minimum(np.searchsorted(cq, mid, side="left"), last)]
    return float(np.dot(du, np.abs(xp - xq) ** r))


def wasserstein_1d(P: DiscreteMeasure, Q: DiscreteMeasure, r: float = 1.0) -> float:
    """``W_r`` from the quantile functions of two measures on a line-embedded space."""
    space = require_same_space(P, Q)
    _check_order(r)
    x = line_coordinates(space)
    return _quantile_merge(x, P.weights, Q.weights, r) ** (1.0 / r)


def _abs_power_integral(x, a, b, r):
    """``int_a^b |x - u|^r du`` elementwise."""
    hi, lo = b - x, a - x
    return (np.sign(hi) * np.abs(hi) ** (r + 1) - np.sign(lo) * np.abs(lo) ** (r + 1)) / (r + 1)


def wasserstein_uniform_1d(samples: Sequence[float], r: float = 1.0) -> float:
    """``W_r^r`` between the continuous uniform law on [0, 1] and an empirical measure.

    With sorted samples ``x_(1) <= ... <= x_(n)`` this is
    ``sum_i int_{(i-1)/n}^{i/n} |x_(i) - u|^r du``, evaluated in closed form.
    """
    _check_order(r)
    x = np.sort(np.asarray(samples, dtype=float))
    n = x.size
    if n == 0:
        raise errors.ValidationError("need at least one sample")
    i = np.arange(n)
    return float(_abs_power_integral(x, i / n, (i + 1) / n, r).sum())


# --------------------------------------------------------------------------
# elementary bounds


def l1_and_tv(P: DiscreteMeasure, Q: DiscreteMeasure) -> Tuple[float, float]:
    require_same_space(P, Q)
    l1 = float(np.abs(P.weights - Q.weights).sum())
    return l1, l1 / 2


def cell_coupling(P: DiscreteMeasure, Q: DiscreteMeasure, S: Partition, r: float = 1.0) -> TransportPlan:
    """Couple P and Q independently inside each cell of ``S``.

    Requires ``P(cell) = Q(cell)`` on every cell; the plan then moves mass only
    within cells, so its cost is at most ``Res(S) ** r``.
    """
    space = require_same_space(P, Q)
    if S.space is not space:
        raise errors.SpaceMismatch("partition lives on a different space")
    _check_order(r)
    pm, qm = S.masses(P), S.masses(Q)
    rows, cols, vals = [], [], []
    for c, cell in enumerate(S.cells):
        if abs(pm[c] - qm[c]) > MASS_TOL:
            raise errors.CellMassMismatch(cell, float(pm[c]), float(qm[c]))
        if pm[c] <= 0:
            continue  # 0/0 = 0: an empty cell carries no mass
        idx = np.asarray(cell)
        block = np.outer(P.weights[idx], Q.weights[idx]) / pm[c]
        ii, jj = np.nonzero(block)
        rows.append(idx[ii])
        cols.append(idx[jj])
        vals.append(block[ii, jj])
    return TransportPlan(P, Q, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), r)


def sandwich_bounds(P: DiscreteMeasure, Q: DiscreteMeasure, r: float = 1.0, mass: str = "l1") -> Tuple[float, float]:
    """Separation/diameter bounds on ``W_r^r`` over the joint support.

    ``lo = Sep(U)^r * m`` and ``hi = Diam(U)^r * m`` with ``U = supp P u supp Q``
    and ``m`` the L1 distance (``mass="l1"``) or the total variation distance
    (``mass="tv"``).  The mass actually moved by any coupling is the total
    variation, so only the ``"tv"`` lower end is guaranteed; the ``"l1"`` lower
    end can exceed ``W_r^r`` by up to a factor of two.
    """
    require_same_space(P, Q)
    _check_order(r)
    if mass not in ("l1", "tv"):
        raise errors.ValidationError(f"mass must be 'l1' or 'tv', got {mass!r}")
    l1, tv = l1_and_tv(P, Q)
    U = np.union1d(P.support, Q.support)
    if U.size == 1:
        if l1 == 0:
            return 0.0, 0.0
        raise errors.DegenerateSupport("single-point joint support but the measures differ")
    if l1 == 0:
        return 0.0, 0.0
    d = P.space.dist[np.ix_(U, U)]
    sep = float(d[np.triu_indices(U.size, 1)].min())
    diam = float(d.max())
    m = l1 if mass == "l1" else tv
    return sep**r * m, diam**r * m


def multires_upper_bound(P: DiscreteMeasure, Q: DiscreteMeasure, levels: NestedSequence, r: float = 1.0) -> BoundReport:
    """Multi-resolution upper bound on ``W_r^r`` from a nested partition chain.

    ``Res(S_K)^r + sum_{k=1}^K Res(S_{k-1})^r * sum_{S in S_k} |P(S) - Q(S)|``.
    """
    space = require_same_space(P, Q)
    _check_order(r)
    if levels.space is not space:
        raise errors.SpaceMismatch("nested sequence lives on a different space")
    if len(levels.level(0)) != 1:
        raise errors.BadLevelZero("the coarsest level must be the single-cell partition")
    res = levels.resolutions
    K = levels.depth
    terms = [("truncation", res[K] ** r)]
    for k in range(1, K + 1):
        lv = levels.level(k)
        disagreement = float(np.abs(lv.masses(P) - lv.masses(Q)).sum())
        terms.append((f"level {k}", res[k - 1] ** r * disagreement))
    return make_report(terms, {"r": r, "K": K, "resolutions": list(res), "cells": [len(p) for p in levels.levels]})


# --------------------------------------------------------------------------
# shells


@dataclass(frozen=True, eq=False)
class ShellDecomposition:
    """Distance shells ``B_k = {x : w_k <= d(x0, x) < w_{k+1}}`` around a base point.

    The last shell is unbounded.  ``conditionals[k]`` is the weight vector of
    ``P`` restricted to ``B_k`` and renormalized, or all zeros when
    ``P(B_k) = 0``.
    """

    base_point: int
    radii: Tuple[float, ...]
    shells: Tuple[Tuple[int, ...], ...]
    shell_mass: np.ndarray
    conditionals: Tuple[np.ndarray, ...]
    space: FiniteMetricSpace = field(repr=False)

    def conditional(self, k: int) -> Optional[DiscreteMeasure]:
        if self.shell_mass[k] <= 0:
            return None
        return DiscreteMeasure(self.space, self.conditionals[k])

    def markov_holds(self, P: DiscreteMeasure, ell: float) -> bool:
        """``P(B_k) <= m_ell^ell / w_k^ell`` for every shell with ``w_k > 0``."""
        d = self.space.dist[self.base_point]
        moment = float(np.dot(P.weights, d**ell))
        for w, mass in zip(self.radii, self.shell_mass):
            if w > 0 and mass > moment / w**ell * (1 + 1e-12) + 1e-15:
                return False
        return True


def shell_decompose(P: DiscreteMeasure, base_point: int, radii: Sequence[float]) -> ShellDecomposition:
    w = np.asarray(radii, dtype=float)
    if w.ndim != 1 or w.size == 0 or w[0] != 0 or (np.diff(w) < 0).any() or not np.isfinite(w).all():
        raise errors.BadRadii("radii must be finite, non-decreasing and start at 0")
    space = P.space
    if not 0 <= base_point < space.size:
        raise errors.ValidationError(f"base point {base_point} outside the space")
    d = space.dist[base_point]
    which = np.searchsorted(w, d, side="right") - 1
    shells, masses, conds = [], [], []
    for k in range(w.size):
        idx = np.flatnonzero(which == k)
        shells.append(tuple(idx.tolist()))
        mass = float(P.weights[idx].sum())
        cond = np.zeros(space.size)
        if mass > 0:
            cond[idx] = P.weights[idx] / mass
        cond.setflags(write=False)
        masses.append(mass)
        conds.append(cond)
    sm = np.array(masses)
    sm.setflags(write=False)
    return ShellDecomposition(int(base_point), tuple(w.tolist()), tuple(shells), sm, tuple(conds), space)
