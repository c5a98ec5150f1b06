"""Dissecting systems, Leadbetter counting, the binary Z-tree and the
canonical selection of points from finite sets."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .setalg import MAX_DYADIC_DEPTH, DiscreteSet, DyadicFamily, IntervalSet, SeparatingFamily

MAX_DESCENT_DEPTH = MAX_DYADIC_DEPTH


class DescentError(RuntimeError):
    pass


@dataclass(frozen=True)
class FinitePointSet:
    """Finite set of state-space points; the stored order carries no meaning."""

    points: tuple

    def __post_init__(self):
        pts = tuple(self.points)
        if len(set(pts)) != len(pts):
            raise ValueError("a finite point set cannot hold duplicate points")
        object.__setattr__(self, "points", pts)

    @classmethod
    def of(cls, points: Iterable) -> "FinitePointSet":
        return cls(tuple(points))

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __bool__(self) -> bool:
        return bool(self.points)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FinitePointSet):
            return NotImplemented
        return set(self.points) == set(other.points)

    def __hash__(self) -> int:
        return hash(frozenset(self.points))

    def without(self, x) -> "FinitePointSet":
        return FinitePointSet(tuple(p for p in self.points if p != x))

    def within(self, a) -> "FinitePointSet":
        return FinitePointSet(tuple(p for p in self.points if p in a))


def _as_points(m) -> FinitePointSet:
    return m if isinstance(m, FinitePointSet) else FinitePointSet.of(m)


# -- dissecting systems ------------------------------------------------------

def _split(cell, e):
    inside = cell.intersect(e)
    rest = cell.diff(e)
    out = [inside] if not inside.is_empty() else []
    return out + rest.pieces()


def dissect(a, family: SeparatingFamily, depth: int) -> list:
    """Cells of the dissecting system for ``a`` after ``depth`` refinement rounds.

    Round d splits every cell C by each member E of block d of the family
    into C ∩ E and the semiring pieces of C ∖ E. Empty cells are dropped.
    A multi-component interval set starts from its components.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    cells = a.pieces() if not a.is_empty() else []
    if isinstance(family, DyadicFamily):
        return _dissect_dyadic(cells, family, depth)
    for d in range(1, depth + 1):
        for n in family.block(d):
            e = family.member(n)
            cells = [piece for c in cells for piece in _split(c, e)]
    return cells


def _dissect_dyadic(cells: list, family: DyadicFamily, depth: int) -> list:
    # Members of a block that miss a cell leave it untouched, so only the
    # dyadic cells overlapping it need to be visited.
    for d in range(1, depth + 1):
        nxt = []
        for c in cells:
            lo, hi = c.components[0][0], c.components[-1][1]
            if hi <= family.lo or lo >= family.hi:
                nxt.append(c)
                continue
            k0 = int(max(family.locate(d, max(lo, family.lo)), 0))
            k1 = int(family.locate(d, np.nextafter(min(hi, family.hi), -np.inf)))
            if k1 < 0:
                k1 = (1 << d) - 1
            pieces = [c]
            for k in range(k0, k1 + 1):
                e = family.cell(d, k)
                pieces = [p for piece in pieces for p in _split(piece, e)]
            nxt.extend(pieces)
        cells = nxt
    return cells


def _dyadic_cell_keys(points: np.ndarray, a: IntervalSet, family: DyadicFamily, depth: int) -> np.ndarray:
    """Identify the dissecting-system cell of each point of ``a`` at ``depth``.

    Inside the window a cell is (dyadic cell, component of a); the part of a
    outside the window is never split beyond its (at most two per
    component) pieces.
    """
    comp = a.component_index(points)
    if depth == 0:
        return np.stack([comp, np.zeros_like(comp)], axis=1)
    k = family.locate(depth, points)
    outside_side = np.where(points < family.lo, -1, -2)
    k = np.where(k < 0, outside_side, k)
    return np.stack([comp, k], axis=1)


def leadbetter_count(m, a, family: SeparatingFamily, depth: int) -> int:
    """Number of level-``depth`` cells of the dissecting system of ``a`` hit by ``m``."""
    pts = _as_points(m)
    if isinstance(family, DyadicFamily) and isinstance(a, IntervalSet):
        arr = np.asarray([p for p in pts.points], dtype=float)
        arr = arr[a.contains(arr)] if arr.size else arr
        if arr.size == 0:
            return 0
        keys = _dyadic_cell_keys(arr, a, family, depth)
        return int(np.unique(keys, axis=0).shape[0])
    return sum(1 for c in dissect(a, family, depth) if any(p in c for p in pts))


def separation_depth(m, family: DyadicFamily) -> int:
    """Depth from which every pair of points of m sits in distinct dyadic cells."""
    pts = sorted(_as_points(m).points)
    if len(pts) < 2:
        return 1
    return max(family.separation_depth(x, y) for x, y in zip(pts, pts[1:]))


# -- Z-tree --------------------------------------------------------------------

class ZTree:
    """Binary nested partition built from a separating family.

    Level n has 2**n cells; cell 2k-1 of level n is cell k of level n-1
    intersected with E_n and cell 2k is the remainder. Empty cells are kept
    so that indices match the least-index selection rule.
    """

    def __init__(self, family: SeparatingFamily, space=None):
        self.family = family
        if space is None:
            space = IntervalSet.real_line() if family.backend == "interval" else DiscreteSet.full(family.m)
        self.space = space

    def cells(self, n: int) -> list:
        if n < 1:
            return [self.space]
        prev = self.cells(n - 1)
        e = self.family.member(n)
        out = []
        for z in prev:
            out.append(z.intersect(e))
            out.append(z.diff(e))
        return out

    def path(self, x) -> Iterator[int]:
        """1-based cell index of x at levels 1, 2, ..."""
        k = 1
        n = 1
        while True:
            inside = x in self.family.member(n)
            k = 2 * k - 1 if inside else 2 * k
            yield k
            n += 1


def _descend_generic(pts: list, family: SeparatingFamily, max_levels: int):
    # Cell order at every level is lexicographic in the membership word with
    # "inside E_n" first, so the least occupied cell keeps the candidates in
    # E_n when there are any.
    cand = pts
    for n in range(1, max_levels + 1):
        if len(cand) == 1:
            return cand[0]
        e = family.member(n)
        inside = [p for p in cand if p in e]
        if inside:
            cand = inside
    if len(cand) == 1:
        return cand[0]
    raise DescentError(f"descent did not isolate a point within {max_levels} levels")


def _descend_dyadic(pts: list, family: DyadicFamily):
    # Within a dyadic block the members are the cells left to right, so the
    # first member meeting the candidates is their leftmost occupied cell.
    # Points outside the window belong to no member and are never preferred.
    arr = np.asarray(pts, dtype=float)
    inwin = family.window.contains(arr)
    if inwin.any():
        arr = arr[inwin]
    elif len(arr) > 1:
        raise DescentError("points outside the dyadic window cannot be told apart")
    if arr.size == 1:
        return float(arr[0])
    # locate is nondecreasing in x, so the leftmost occupied cell at every
    # depth holds the smallest candidate; the descent ends there as soon as
    # the two smallest points fall into different cells
    two = np.sort(arr)[:2]
    k = family.locate(MAX_DESCENT_DEPTH, two)
    if k[0] == k[1]:
        raise DescentError(
            f"points closer than window/2**{MAX_DESCENT_DEPTH} cannot be separated by the dyadic family")
    return float(two[0])


def canonical_point(m, family: SeparatingFamily):
    """The unique point of m lying in the least occupied Z-tree cell at every level."""
    pts = _as_points(m)
    if not pts:
        raise ValueError("empty set has no canonical point")
    if isinstance(family, DyadicFamily):
        return _descend_dyadic(list(pts.points), family)
    return _descend_generic(list(pts.points), family, MAX_DESCENT_DEPTH)


def canonical_point_bruteforce(m, family: SeparatingFamily, levels: int):
    """Reference descent that materialises Z-tree cells level by level."""
    pts = list(_as_points(m).points)
    if not pts:
        raise ValueError("empty set has no canonical point")
    tree = ZTree(family)
    paths = {p: tree.path(p) for p in pts}
    cand = pts
    for _ in range(levels):
        idx = {p: next(paths[p]) for p in pts}
        best = min(idx[p] for p in cand)
        cand = [p for p in cand if idx[p] == best]
        if len(cand) == 1:
            return cand[0]
    raise DescentError("not isolated within the given number of levels")


def select_with_fallback(m, y, family: SeparatingFamily):
    pts = _as_points(m)
    return y if not pts else canonical_point(pts, family)


def enumerate_finite(m, y, family: SeparatingFamily) -> Iterator:
    """X_1 = selection from m (or y); then remove and reselect with X_1 as fallback."""
    rest = _as_points(m)
    x1 = select_with_fallback(rest, y, family)
    yield x1
    if rest:
        rest = rest.without(x1)
    while True:
        x = select_with_fallback(rest, x1, family)
        yield x
        if rest:
            rest = rest.without(x)


def take(it: Iterator, n: int) -> list:
    return list(itertools.islice(it, n))


def cantor_pair_index(i: int) -> tuple[int, int]:
    """i-th pair (n, k), both 1-based, along anti-diagonals n + k = const."""
    s = 0
    while (s + 1) * (s + 2) // 2 <= i:
        s += 1
    j = i - s * (s + 1) // 2
    return s - j + 1, j + 1


class ConstructiveEnumeration:
    """Doubly indexed selectors X[n, k] for a union of finite components.

    Component n contributes its own finite enumeration when nonempty; empty
    components repeat the global selector, i.e. the canonical point of the
    first nonempty component (or y when all are empty).
    """

    def __init__(self, components: Sequence, y, family: SeparatingFamily):
        self.components = [_as_points(c) for c in components]
        self.family = family
        self.y = y
        first = next((c for c in self.components if c), None)
        self.global_point = y if first is None else canonical_point(first, family)
        self._cache: dict[int, list] = {}

    def row(self, n: int, length: int) -> list:
        comp = self.components[n - 1] if n <= len(self.components) else FinitePointSet(())
        if not comp:
            return [self.global_point] * length
        cached = self._cache.get(n)
        if cached is None or len(cached) < length:
            cached = take(enumerate_finite(comp, self.y, self.family), max(length, len(comp) + 1))
            self._cache[n] = cached
        return cached[:length]

    def __getitem__(self, nk: tuple[int, int]):
        n, k = nk
        return self.row(n, k)[k - 1]

    def flat(self, count: int) -> list:
        return [self[cantor_pair_index(i)] for i in range(count)]


def enumerate_constructive(components: Sequence, y, family: SeparatingFamily) -> ConstructiveEnumeration:
    return ConstructiveEnumeration(components, y, family)
