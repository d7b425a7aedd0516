import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wassrate import errors, metric
from wassrate import partitions as pt
from wassrate import transport as tr
from wassrate.metric import DiscreteMeasure

from helpers import lp_wasserstein_r, random_measure, random_partition_cells, random_space


@pytest.fixture
def path3():
    return metric.path(3)


def test_exact_examples(path3):
    P = DiscreteMeasure(path3, [0.5, 0.5, 0])
    Q = DiscreteMeasure(path3, [0, 0.5, 0.5])
    v1, _ = tr.wasserstein_exact(P, Q, 1)
    v2, plan2 = tr.wasserstein_exact(P, Q, 2)
    assert v1 == pytest.approx(1.0)
    assert v2**2 == pytest.approx(1.0)
    assert plan2.mass[0, 1] == pytest.approx(0.5) and plan2.mass[1, 2] == pytest.approx(0.5)
    v, plan = tr.wasserstein_exact(P, P, 2)
    assert v == 0 and np.allclose(np.diag(plan.mass), P.weights)
    for r in (1, 1.5, 3):
        assert tr.wasserstein_exact(metric.point_mass(path3, 0), metric.point_mass(path3, 2), r)[0] == pytest.approx(2)


def test_exact_errors(path3):
    with pytest.raises(errors.SpaceMismatch):
        tr.wasserstein_exact(metric.uniform(path3), metric.uniform(metric.path(3)))
    with pytest.raises(errors.NonpositiveOrder):
        tr.wasserstein_exact(metric.uniform(path3), metric.uniform(path3), 0.5)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 1.5, 2.0]))
def test_exact_matches_linear_program(seed, r):
    rng = np.random.default_rng(seed)
    s = random_space(rng, max_size=8)
    P, Q = random_measure(rng, s), random_measure(rng, s)
    v, plan = tr.wasserstein_exact(P, Q, r)
    assert v**r == pytest.approx(lp_wasserstein_r(P, Q, r), abs=1e-9)
    assert plan.marginal_residual() <= 1e-9
    assert abs(plan.recomputed_cost() - plan.cost_r) <= 1e-10


def test_1d_examples():
    s = metric.from_points(np.array([0.0, 1.0]))
    P = DiscreteMeasure(s, [0.5, 0.5])
    Q = DiscreteMeasure(s, [1, 0])
    assert tr.wasserstein_1d(P, Q, 1) == pytest.approx(0.5)
    assert tr.wasserstein_1d(P, P, 2) == 0
    d3 = metric.discrete(3)
    with pytest.raises(errors.NotLineEmbeddable):
        tr.wasserstein_1d(metric.uniform(d3), metric.point_mass(d3, 0))
    bent = metric.validate_space([[0, 1, 1], [1, 0, 1], [1, 1, 0]], coords=np.array([0.0, 1.0, 2.0]))
    with pytest.raises(errors.NotLineEmbeddable):
        tr.wasserstein_1d(metric.uniform(bent), metric.point_mass(bent, 0))


def test_uniform_closed_form_against_quadrature():
    x = np.array([0.1, 0.35, 0.8, 0.95])
    for r in (1.0, 2.0, 2.5):
        u = (np.arange(400000) + 0.5) / 400000
        q = np.sort(x)[np.minimum((u * x.size).astype(int), x.size - 1)]
        assert tr.wasserstein_uniform_1d(x, r) == pytest.approx(np.mean(np.abs(q - u) ** r), rel=1e-6)


def test_l1_tv_examples(path3):
    P = DiscreteMeasure(path3, [0.5, 0.5, 0])
    Q = DiscreteMeasure(path3, [0, 0.5, 0.5])
    assert tr.l1_and_tv(P, P) == (0, 0)
    assert tr.l1_and_tv(metric.point_mass(path3, 0), metric.point_mass(path3, 2)) == (2, 1)
    assert tr.l1_and_tv(P, Q) == pytest.approx((1, 0.5))


def test_cell_coupling_examples(path3):
    P = metric.uniform(path3)
    plan = tr.cell_coupling(P, P, pt.singletons(path3))
    assert plan.cost_r == 0 and np.allclose(plan.mass, np.diag(P.weights))
    S = pt.Partition(path3, ((0, 1), (2,)))
    plan = tr.cell_coupling(metric.point_mass(path3, 0), metric.point_mass(path3, 1), S)
    assert plan.mass[0, 1] == 1 and plan.cost_r <= S.resolution()
    with pytest.raises(errors.CellMassMismatch) as info:
        tr.cell_coupling(metric.point_mass(path3, 0), metric.point_mass(path3, 2), S)
    assert info.value.cell == (0, 1)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 2.0]))
def test_cell_coupling_certifies_resolution(seed, r):
    rng = np.random.default_rng(seed)
    s = random_space(rng, max_size=10)
    S = pt.Partition(s, tuple(random_partition_cells(rng, s.size)))
    P = random_measure(rng, s, sparsity=0)
    # Q: same cell masses, reshuffled inside each cell
    q = np.zeros(s.size)
    for cell in S.cells:
        inner = rng.dirichlet(np.ones(len(cell)))
        q[list(cell)] = inner * P.mass(cell)
    Q = DiscreteMeasure(s, q / q.sum())
    plan = tr.cell_coupling(P, Q, S, r)
    assert plan.marginal_residual() <= 1e-9
    assert plan.cost_r <= S.resolution() ** r + 1e-12
    assert tr.wasserstein_exact(P, Q, r)[1].cost_r <= plan.cost_r + 1e-12
    c = S.cells[0]
    i, j = c[0], c[-1]
    if P.mass(c) > 0:
        assert plan.mass[i, j] == pytest.approx(P.weights[i] * Q.weights[j] / P.mass(c))


def test_sandwich_examples(path3):
    lo, hi = tr.sandwich_bounds(metric.point_mass(path3, 0), metric.point_mass(path3, 2), 1)
    # the joint support {0, 2} has separation 2 and diameter 2
    assert (lo, hi) == (4, 4)
    lo_tv, hi_tv = tr.sandwich_bounds(metric.point_mass(path3, 0), metric.point_mass(path3, 2), 1, mass="tv")
    assert lo_tv <= 2 <= hi_tv
    d = metric.discrete(5)
    P, Q = metric.uniform(d), metric.point_mass(d, 0)
    lo, hi = tr.sandwich_bounds(P, Q, 2, mass="tv")
    assert lo == hi == pytest.approx(tr.wasserstein_exact(P, Q, 2)[1].cost_r)
    assert tr.sandwich_bounds(P, P) == (0, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 2.0]))
def test_sandwich_tv_form_contains_exact(seed, r):
    rng = np.random.default_rng(seed)
    s = random_space(rng)
    P, Q = random_measure(rng, s), random_measure(rng, s)
    cost = tr.wasserstein_exact(P, Q, r)[1].cost_r
    lo, hi = tr.sandwich_bounds(P, Q, r, mass="tv")
    assert lo - 1e-9 <= cost <= hi + 1e-9
    assert cost <= tr.sandwich_bounds(P, Q, r)[1] + 1e-9


def test_multires_examples(path3):
    levels = pt.NestedSequence((pt.whole(path3), pt.Partition(path3, ((0, 1), (2,)))))
    rep = tr.multires_upper_bound(metric.point_mass(path3, 0), metric.point_mass(path3, 1), levels, 1)
    assert rep.value == 1 and rep.term("truncation") == 1 and rep.term("level 1") == 0
    with pytest.raises(errors.BadLevelZero):
        tr.multires_upper_bound(
            metric.uniform(path3), metric.uniform(path3), pt.NestedSequence((pt.singletons(path3),)), 1
        )


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 2.0]))
def test_multires_one_level_matches_cell_combination(seed, r):
    rng = np.random.default_rng(seed)
    s = random_space(rng)
    S1 = pt.Partition(s, tuple(random_partition_cells(rng, s.size)))
    P, Q = random_measure(rng, s), random_measure(rng, s)
    rep = tr.multires_upper_bound(P, Q, pt.NestedSequence((pt.whole(s), S1)), r)
    assert rep.consistent()
    assert rep.value >= tr.wasserstein_exact(P, Q, r)[1].cost_r - 1e-9
    disagreement = np.abs(S1.masses(P) - S1.masses(Q)).sum()
    assert rep.value == pytest.approx(S1.resolution() ** r + s.diameter() ** r * disagreement)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 2.0, 3.0]))
def test_metric_axioms_and_monotonicity(seed, r):
    rng = np.random.default_rng(seed)
    s = random_space(rng)
    P, Q, R = (random_measure(rng, s) for _ in range(3))
    w = lambda a, b, rr=r: tr.wasserstein_exact(a, b, rr)[0]
    assert w(P, R) <= w(P, Q) + w(Q, R) + 1e-8
    assert w(P, Q) == pytest.approx(w(Q, P), abs=1e-10)
    assert w(P, P) == 0
    assert w(P, Q, 1.0) <= w(P, Q, r) + 1e-10


def test_solver_scale():
    rng = np.random.default_rng(3)
    s = metric.from_points(rng.random((1500, 2)))
    P = DiscreteMeasure(s, rng.dirichlet(np.ones(1500)))
    Q = DiscreteMeasure(s, rng.dirichlet(np.ones(1500)))
    for r in (1, 2):
        v, plan = tr.wasserstein_exact(P, Q, r)
        assert plan.marginal_residual() <= 1e-9 and v > 0


def test_shell_examples(path3):
    P = metric.uniform(path3)
    one = tr.shell_decompose(P, 0, (0, path3.diameter() + 1))
    assert one.shells[0] == (0, 1, 2) and one.shell_mass[0] == 1 and one.shell_mass[1] == 0
    assert one.conditional(1) is None and not one.conditionals[1].any()
    sh = tr.shell_decompose(P, 0, (0, 1, 2))
    assert sh.shells == ((0,), (1,), (2,))
    m2 = metric.metric_moment(P, 2, 0).value ** 2
    assert m2 == pytest.approx(5 / 3)
    assert sh.shell_mass[2] == pytest.approx(1 / 3)
    assert sh.shell_mass[2] <= m2 / 4
    assert sh.markov_holds(P, 2)
    with pytest.raises(errors.BadRadii):
        tr.shell_decompose(P, 0, (1, 2))
    with pytest.raises(errors.BadRadii):
        tr.shell_decompose(P, 0, (0, 2, 1))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_shell_properties(seed):
    rng = np.random.default_rng(seed)
    s = random_space(rng)
    P = random_measure(rng, s)
    radii = np.concatenate([[0], np.sort(rng.uniform(0, s.diameter(), size=int(rng.integers(1, 5))))])
    sh = tr.shell_decompose(P, int(rng.integers(s.size)), radii)
    assert sorted(i for c in sh.shells for i in c) == list(range(s.size))
    assert sh.shell_mass.sum() == pytest.approx(1)
    for k, cell in enumerate(sh.shells):
        cond = sh.conditionals[k]
        outside = np.setdiff1d(np.arange(s.size), cell)
        assert not cond[outside].any()
        if sh.shell_mass[k] > 0:
            assert cond.sum() == pytest.approx(1)
    for ell in (0.5, 1, 2, 4):
        assert sh.markov_holds(P, ell)
