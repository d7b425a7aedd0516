"""Random instance generators and brute-force oracles shared by the tests."""

import itertools

import numpy as np
from scipy.optimize import linprog
from scipy.sparse.csgraph import shortest_path

from wassrate import metric


def random_space(rng, size=None, max_size=10, kind=None):
    """Euclidean point cloud, l-infinity cloud, or shortest-path metric of a random graph."""
    m = int(size if size is not None else rng.integers(2, max_size + 1))
    kind = kind or rng.choice(["euclid", "cheb", "graph"])
    if kind == "graph":
        w = rng.uniform(0.5, 3.0, size=(m, m))
        w = np.triu(w, 1)
        keep = np.triu(rng.random((m, m)) < 0.6, 1)
        keep[np.arange(m - 1), np.arange(1, m)] = True  # connected
        adj = np.where(keep, w, 0.0)
        adj = adj + adj.T
        d = shortest_path(adj, directed=False)
        return metric.validate_space(d, tol=1e-9)
    pts = rng.uniform(0, 1, size=(m, int(rng.integers(1, 4))))
    return metric.from_points(pts, metric="euclidean" if kind == "euclid" else "chebyshev")


def random_measure(rng, space, support=None, sparsity=0.3):
    m = space.size
    w = rng.dirichlet(np.full(m, 0.7))
    if support is None:
        w[rng.random(m) < sparsity] = 0.0
        if w.sum() == 0:
            w[rng.integers(m)] = 1.0
    else:
        mask = np.zeros(m, dtype=bool)
        mask[list(support)] = True
        w[~mask] = 0.0
        if w.sum() == 0:
            w[list(support)[0]] = 1.0
    return metric.DiscreteMeasure(space, w / w.sum())


def random_partition_cells(rng, m, n_cells=None):
    n_cells = int(n_cells or rng.integers(1, m + 1))
    labels = rng.integers(0, n_cells, size=m)
    return [tuple(np.flatnonzero(labels == c).tolist()) for c in range(n_cells) if (labels == c).any()]


def lp_wasserstein_r(P, Q, r):
    """W_r^r by a dense linear program (HiGHS); independent of the network simplex."""
    d = P.space.dist ** r
    m = d.shape[0]
    A = []
    for i in range(m):
        row = np.zeros((m, m)); row[i, :] = 1; A.append(row.ravel())
    for j in range(m):
        col = np.zeros((m, m)); col[:, j] = 1; A.append(col.ravel())
    b = np.concatenate([P.weights, Q.weights])
    res = linprog(d.ravel(), A_eq=np.array(A), b_eq=b, bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def set_partitions(items):
    """All set partitions of a list (Bell-number many)."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def brute_covering(space, eps):
    d = space.dist
    best = space.size
    for part in set_partitions(list(range(space.size))):
        if len(part) < best and all(d[np.ix_(c, c)].max() <= eps + 1e-12 for c in part):
            best = len(part)
    return best


def brute_packing(space, eps):
    d = space.dist
    for k in range(space.size, 0, -1):
        for S in itertools.combinations(range(space.size), k):
            if k == 1 or min(d[i, j] for i, j in itertools.combinations(S, 2)) >= eps - 1e-12:
                return k
    return 1


def brute_radius(space, n):
    d = space.dist
    best = 0.0
    for k in range(n, space.size + 1):
        for S in itertools.combinations(range(space.size), k):
            best = max(best, min(d[i, j] for i, j in itertools.combinations(S, 2)))
    return best
