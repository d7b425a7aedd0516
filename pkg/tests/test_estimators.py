import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from wassrate import errors, metric
from wassrate import estimators as es
from wassrate import partitions as pt
from wassrate.metric import DiscreteMeasure
from wassrate.transport import wasserstein_exact

from helpers import random_measure, random_space


def test_sample_examples():
    s = metric.path(4)
    b = es.sample(metric.point_mass(s, 2), 50, seed=1)
    assert np.all(b.indices == 2)
    P = metric.uniform(s)
    a1, a2 = es.sample(P, 100, seed=7), es.sample(P, 100, seed=7)
    assert np.array_equal(a1.indices, a2.indices) and a1.generator_id == es.GENERATOR_ID
    assert not np.array_equal(a1.indices, es.sample(P, 100, seed=7, trial=1).indices)
    freq = np.bincount(es.sample(P, 10**5, seed=3).indices, minlength=4) / 10**5
    assert np.abs(freq - 0.25).max() < 0.01


def test_sample_rejects_bad_n():
    with pytest.raises(errors.ValidationError):
        es.sample(metric.uniform(metric.path(2)), 0, seed=0)


def test_zero_weight_points_never_drawn():
    s = metric.path(5)
    P = DiscreteMeasure(s, [0, 0.5, 0, 0.5, 0])
    idx = es.sample(P, 5000, seed=11).indices
    assert set(np.unique(idx)) == {1, 3}


def test_empirical_examples():
    s = metric.path(2)
    batch = es.SampleBatch(s, np.array([0, 0, 1]), seed=0)
    assert es.empirical(batch).weights == pytest.approx([2 / 3, 1 / 3])
    same = es.SampleBatch(s, np.array([1, 1, 1]), seed=0)
    assert es.empirical(same).weights.tolist() == [0, 1]


def test_cell_aggregated_counts_follow_binomial():
    s = metric.path(6)
    P = DiscreteMeasure(s, [0.1, 0.2, 0.05, 0.15, 0.3, 0.2])
    cells = pt.Partition(s, ((0, 1), (2, 3, 4), (5,)))
    n, trials = 40, 4000
    counts = np.array([cells.masses(es.empirical(es.sample(P, n, 5, t)))[0] * n for t in range(trials)]).round()
    p = P.mass(cells.cells[0])
    observed = np.bincount(counts.astype(int), minlength=n + 1)
    expected = stats.binom.pmf(np.arange(n + 1), n, p) * trials
    # pool sparse tails so every bin expects at least 5
    keep = expected >= 5
    obs = np.append(observed[keep], observed[~keep].sum())
    exp = np.append(expected[keep], expected[~keep].sum())
    exp *= obs.sum() / exp.sum()
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_voronoi_examples():
    s = metric.path(3)
    Q = DiscreteMeasure(s, [0.3, 0, 0.7])
    assert es.voronoi_project(Q, [0, 2]).allclose(Q)
    assert es.voronoi_project(metric.point_mass(s, 1), [2, 0]).weights.tolist() == [1, 0, 0]
    with pytest.raises(errors.EmptyCenterSet):
        es.voronoi_project(Q, [])


def _simplex_grid(k, steps):
    for c in itertools.product(range(steps + 1), repeat=k - 1):
        if sum(c) <= steps:
            yield np.array(list(c) + [steps - sum(c)]) / steps


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 2.0]))
def test_voronoi_projection_is_optimal(seed, r):
    rng = np.random.default_rng(seed)
    s = random_space(rng, max_size=7)
    Q = random_measure(rng, s)
    D = np.sort(rng.choice(s.size, size=int(rng.integers(1, min(4, s.size) + 1)), replace=False))
    Qp = es.voronoi_project(Q, D)
    best = wasserstein_exact(Q, Qp, r)[0]
    for wts in _simplex_grid(D.size, 6):
        w = np.zeros(s.size)
        w[D] = wts
        assert best <= wasserstein_exact(Q, DiscreteMeasure(s, w), r)[0] + 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 2.0]))
def test_voronoi_doubling_and_mass(seed, r):
    rng = np.random.default_rng(seed)
    s = random_space(rng)
    D = rng.choice(s.size, size=int(rng.integers(1, s.size + 1)), replace=False)
    P = random_measure(rng, s, support=D)
    Q = random_measure(rng, s)
    Qp = es.voronoi_project(Q, D)
    assert Qp.weights.sum() == pytest.approx(1)
    assert not Qp.weights[np.setdiff1d(np.arange(s.size), D)].any()
    assert wasserstein_exact(P, Qp, r)[0] <= 2 * wasserstein_exact(P, Q, r)[0] + 1e-9


def test_empirical_risk_decreases_with_n():
    s = metric.from_points(np.random.default_rng(0).random((30, 2)))
    P = metric.uniform(s)
    means = []
    for n in [2**k for k in range(4, 13)]:
        vals = [wasserstein_exact(P, es.empirical(es.sample(P, n, 0, t)), 1)[0] for t in range(40)]
        means.append(np.mean(vals))
    assert all(b < a for a, b in zip(means, means[1:]))
