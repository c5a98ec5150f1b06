import numpy as np
import pytest
from hypothesis import given, strategies as st

from crsets.partition import (DescentError, FinitePointSet, ZTree, canonical_point,
                              canonical_point_bruteforce, cantor_pair_index, dissect,
                              enumerate_constructive, enumerate_finite, leadbetter_count,
                              select_with_fallback, separation_depth, take)
from crsets.setalg import DiscreteSet, DyadicFamily, IntervalSet, SingletonFamily, lebesgue

UNIT = DyadicFamily(IntervalSet.of((0, 1)))

# points on a 2**-20 grid: distinct points separate by depth 20
grid_points = st.lists(st.integers(0, (1 << 20) - 1).map(lambda k: k / (1 << 20)),
                       unique=True, max_size=20)


def test_point_set_semantics():
    assert FinitePointSet.of([0.3, 0.8]) == FinitePointSet.of([0.8, 0.3])
    with pytest.raises(ValueError):
        FinitePointSet.of([0.3, 0.3])


def test_dissect_one_step():
    assert dissect(IntervalSet.of((0, 1)), UNIT, 1) == [IntervalSet.of((0, 0.5)), IntervalSet.of((0.5, 1))]


def test_dissect_two_steps_gives_quarters():
    cells = sorted(dissect(IntervalSet.of((0, 1)), UNIT, 2), key=lambda c: c.lo)
    assert [c.components[0] for c in cells] == [(0, 0.25), (0.25, 0.5), (0.5, 0.75), (0.75, 1)]


def test_dissect_empty():
    assert dissect(IntervalSet(), UNIT, 3) == []


@given(st.integers(0, 63), st.integers(1, 64), st.integers(0, 7))
def test_dissect_partitions_the_set(a, w, depth):
    lo, hi = a / 32 - 0.5, (a + w) / 32 - 0.5
    s = IntervalSet.of((lo, hi))
    cells = dissect(s, UNIT, depth)
    total = IntervalSet()
    for i, c in enumerate(cells):
        for d in cells[i + 1:]:
            assert c.isdisjoint(d)
        total = total.union(c)
    assert total == s
    # nested: every cell of the next level sits inside one of this level
    finer = dissect(s, UNIT, depth + 1)
    assert all(sum(f.issubset(c) for c in cells) == 1 for f in finer)


@pytest.mark.parametrize("depth, count", [(0, 1), (1, 2), (6, 2), (7, 3), (8, 3)])
def test_leadbetter_example(depth, count):
    m = FinitePointSet.of([0.3, 0.31, 0.8])
    assert leadbetter_count(m, IntervalSet.of((0, 1)), UNIT, depth) == count


def test_leadbetter_trivial():
    a = IntervalSet.of((0, 1))
    assert all(leadbetter_count(FinitePointSet(()), a, UNIT, d) == 0 for d in range(5))
    assert all(leadbetter_count(FinitePointSet.of([0.7]), a, UNIT, d) == 1 for d in range(1, 5))


@given(grid_points, st.integers(0, 31), st.integers(1, 32))
def test_leadbetter_fast_path_matches_explicit_cells(pts, a, w):
    s = IntervalSet.of((a / 32, min(1.0, (a + w) / 32)))
    m = FinitePointSet.of(pts)
    for d in range(0, 7):
        explicit = sum(1 for c in dissect(s, UNIT, d) if any(p in c for p in pts))
        assert leadbetter_count(m, s, UNIT, d) == explicit


@given(grid_points)
def test_leadbetter_monotone_and_exact(pts):
    a = IntervalSet.of((0.25, 0.875))
    m = FinitePointSet.of(pts)
    counts = [leadbetter_count(m, a, UNIT, d) for d in range(0, 22)]
    assert all(x <= y for x, y in zip(counts, counts[1:]))
    inside = m.within(a)
    if len(inside) >= 2:
        assert leadbetter_count(m, a, UNIT, separation_depth(inside, UNIT)) == len(inside)
    assert counts[-1] == len(inside)


def test_leadbetter_generic_family():
    fam = SingletonFamily(4)
    a = DiscreteSet.full(4)
    m = FinitePointSet.of([0, 2, 3])
    assert [leadbetter_count(m, a, fam, d) for d in range(0, 5)] == [1, 2, 2, 3, 3]


def test_ztree_cells_partition_discrete_space():
    fam = SingletonFamily(3)
    tree = ZTree(fam)
    for n in range(0, 5):
        cells = tree.cells(n)
        assert len(cells) == 1 << n
        assert sorted(x for c in cells for x in c.elements()) == [0, 1, 2]


def test_ztree_cells_partition_real_window():
    tree = ZTree(UNIT, IntervalSet.of((-1, 2)))
    probes = np.linspace(-1, 2, 601, endpoint=False)
    for n in range(1, 6):
        member = np.stack([c.contains(probes) for c in tree.cells(n)])
        assert (member.sum(axis=0) == 1).all()


def test_ztree_path_matches_cells():
    tree = ZTree(UNIT)
    path = tree.path(0.3)
    for n in range(1, 6):
        k = next(path)
        assert 0.3 in tree.cells(n)[k - 1]


@pytest.mark.parametrize("pts", [[0.3, 0.8], [0.8, 0.3]])
def test_canonical_point_example(pts):
    assert canonical_point(FinitePointSet.of(pts), UNIT) == 0.3


def test_canonical_point_singleton_and_empty():
    assert canonical_point(FinitePointSet.of([0.77]), UNIT) == 0.77
    with pytest.raises(ValueError, match="empty set has no canonical point"):
        canonical_point(FinitePointSet(()), UNIT)


def test_descent_cap_reports_unseparable_points():
    with pytest.raises(DescentError):
        canonical_point(FinitePointSet.of([0.0, 1e-300]), UNIT)


@given(st.lists(st.integers(0, 255).map(lambda k: k / 256), unique=True, min_size=1, max_size=8))
def test_canonical_point_matches_bruteforce_descent(pts):
    m = FinitePointSet.of(pts)
    assert canonical_point(m, UNIT) == canonical_point_bruteforce(m, UNIT, levels=2 ** 9)


@given(st.lists(st.integers(0, 5), unique=True, min_size=1))
def test_canonical_point_discrete_matches_bruteforce(pts):
    fam = SingletonFamily(6)
    m = FinitePointSet.of(pts)
    assert canonical_point(m, fam) == canonical_point_bruteforce(m, fam, levels=8)


def test_select_with_fallback():
    assert select_with_fallback(FinitePointSet(()), 0.5, UNIT) == 0.5
    assert select_with_fallback(FinitePointSet.of([0.1]), 0.5, UNIT) == 0.1
    assert select_with_fallback(FinitePointSet.of([0.3, 0.8]), 0.99, UNIT) == 0.3


def test_enumerate_examples():
    assert take(enumerate_finite(FinitePointSet.of([0.3, 0.8]), 0.0, UNIT), 5) == [0.3, 0.8, 0.3, 0.3, 0.3]
    assert take(enumerate_finite(FinitePointSet(()), 0.5, UNIT), 3) == [0.5] * 3
    assert take(enumerate_finite(FinitePointSet.of([0.4]), 0.0, UNIT), 3) == [0.4] * 3


@given(grid_points, st.randoms(use_true_random=False))
def test_enumeration_permutation_invariant_and_complete(pts, rnd):
    shuffled = list(pts)
    rnd.shuffle(shuffled)
    a = take(enumerate_finite(FinitePointSet.of(pts), -1.0, UNIT), len(pts) + 3)
    b = take(enumerate_finite(FinitePointSet.of(shuffled), -1.0, UNIT), len(pts) + 3)
    assert a == b
    if pts:
        head = a[: len(pts)]
        assert sorted(head) == sorted(pts)
        assert all(x == a[0] for x in a[len(pts):])


def test_constructive_enumeration_fills_empty_components():
    e = enumerate_constructive([FinitePointSet.of([0.3]), FinitePointSet(()), FinitePointSet.of([0.7])],
                               0.5, UNIT)
    assert [e[2, k] for k in range(1, 5)] == [0.3] * 4
    assert set(e.flat(40)) == {0.3, 0.7}


def test_constructive_enumeration_all_empty():
    e = enumerate_constructive([FinitePointSet(()), FinitePointSet(())], 0.5, UNIT)
    assert set(e.flat(10)) == {0.5}


def test_constructive_single_component_reduces():
    m = FinitePointSet.of([0.6, 0.1, 0.35])
    e = enumerate_constructive([m], 0.0, UNIT)
    assert e.row(1, 6) == take(enumerate_finite(m, 0.0, UNIT), 6)


def test_cantor_pairing_covers_grid():
    pairs = {cantor_pair_index(i) for i in range(55)}
    assert pairs == {(n, k) for n in range(1, 11) for k in range(1, 11) if n + k <= 11}


def test_dissect_cells_have_positive_length():
    cells = dissect(IntervalSet.of((0.1, 0.9)), UNIT, 5)
    assert all(lebesgue(c) > 0 for c in cells)
