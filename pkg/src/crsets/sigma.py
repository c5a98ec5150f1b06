"""Exact sigma-fields over the configuration universe 2^S of a small discrete S.

A sigma-field generated by finitely many maps on a finite universe is the
field of unions of the fibers (atoms) of the joint map, so every object here
is an atom partition of the 2**m configurations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .rng import substream
from .setalg import DiscreteSet

MAX_FULL = 12


def _masks(tests: Iterable) -> list[int]:
    return [t.mask if isinstance(t, DiscreteSet) else int(t) for t in tests]


@dataclass(frozen=True)
class ConfigUniverse:
    m: int

    def __post_init__(self):
        if not 1 <= self.m <= MAX_FULL:
            raise ValueError(f"full-universe operations need 1 <= m <= {MAX_FULL}")

    @property
    def size(self) -> int:
        return 1 << self.m

    @property
    def full_mask(self) -> int:
        return (1 << self.m) - 1

    @cached_property
    def configurations(self) -> np.ndarray:
        return np.arange(self.size, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class FieldPartition:
    """Atom partition of the configuration universe."""

    universe: ConfigUniverse
    atom_id: np.ndarray = field(repr=False)

    @cached_property
    def n_atoms(self) -> int:
        return int(self.atom_id.max()) + 1 if self.atom_id.size else 0

    @cached_property
    def _canonical(self) -> tuple:
        # relabel atoms by first appearance so equal partitions compare equal
        _, first, inv = np.unique(self.atom_id, return_index=True, return_inverse=True)
        order = np.argsort(np.argsort(first))
        return tuple(order[inv].tolist())

    def __eq__(self, other) -> bool:
        if not isinstance(other, FieldPartition):
            return NotImplemented
        return self.universe == other.universe and self._canonical == other._canonical

    __hash__ = None

    def atoms(self) -> list[list[int]]:
        groups: dict[int, list[int]] = {}
        for cfg, a in enumerate(self.atom_id.tolist()):
            groups.setdefault(a, []).append(cfg)
        return sorted(groups.values())

    def contains(self, event) -> bool:
        """Is the configuration-set ``event`` (bool array or index list) a union of atoms?"""
        ev = np.zeros(self.universe.size, dtype=bool)
        arr = np.asarray(event)
        if arr.dtype == bool:
            ev[:] = arr
        else:
            ev[arr.astype(np.int64)] = True
        hits = np.bincount(self.atom_id, weights=ev, minlength=self.n_atoms)
        sizes = np.bincount(self.atom_id, minlength=self.n_atoms)
        return bool(np.all((hits == 0) | (hits == sizes)))

    def refines(self, other: "FieldPartition") -> bool:
        """True when every atom of self sits inside one atom of other (self is finer)."""
        pairs = np.unique(np.stack([self.atom_id, other.atom_id]), axis=1)
        return pairs.shape[1] == self.n_atoms


def _fibers(keys: np.ndarray, universe: ConfigUniverse) -> FieldPartition:
    if keys.shape[1] == 0:
        return FieldPartition(universe, np.zeros(universe.size, dtype=np.int64))
    _, inv = np.unique(keys, axis=0, return_inverse=True)
    return FieldPartition(universe, inv.reshape(-1).astype(np.int64))


def counting_field(universe: ConfigUniverse, tests: Sequence) -> FieldPartition:
    """Atoms are the fibers of M -> (|M ∩ A|) over the test sets."""
    cfg = universe.configurations
    cols = [np.bitwise_count(cfg & a) for a in _masks(tests)]
    keys = np.stack(cols, axis=1) if cols else np.zeros((universe.size, 0), dtype=np.int64)
    return _fibers(keys, universe)


def hitormiss_field(universe: ConfigUniverse, tests: Sequence) -> FieldPartition:
    """Atoms are the fibers of M -> (1{M ∩ A != ∅}) over the test sets."""
    cfg = universe.configurations
    cols = [(cfg & a) != 0 for a in _masks(tests)]
    keys = np.stack(cols, axis=1) if cols else np.zeros((universe.size, 0), dtype=bool)
    return _fibers(keys, universe)


# -- family predicates ---------------------------------------------------------

def is_intersection_stable(family: Iterable[int]) -> bool:
    fam = set(_masks(family))
    return all(a & b in fam for a in fam for b in fam)


def _exact_disjoint_cover(target: int, family: Sequence[int]) -> bool:
    if target == 0:
        return True
    low = target & -target
    for s in family:
        if s & low and s & ~target == 0:
            if _exact_disjoint_cover(target & ~s, family):
                return True
    return False


def is_semiring(family: Iterable[int]) -> bool:
    """∩-stable, and every A ∖ B a finite disjoint union of members."""
    fam = sorted(set(_masks(family)))
    if not fam or not is_intersection_stable(fam):
        return False
    nonempty = [s for s in fam if s]
    return all(_exact_disjoint_cover(a & ~b, nonempty) for a in fam for b in fam)


def is_separating(family: Iterable[int], m: int) -> bool:
    fam = _masks(family)
    for x, y in itertools.combinations(range(m), 2):
        if not any(((s >> x) & 1) != ((s >> y) & 1) for s in fam):
            return False
    return True


def is_union_of(target: int, family: Iterable[int]) -> bool:
    """Is target a union of family members (the empty union allowed)?"""
    cover = 0
    for s in _masks(family):
        if s & ~target == 0:
            cover |= s
    return cover == target


def hit_event(universe: ConfigUniverse, a) -> np.ndarray:
    mask = a.mask if isinstance(a, DiscreteSet) else int(a)
    return (universe.configurations & mask) != 0


# -- theorem checks ------------------------------------------------------------

def check_selfdissecting_equality(universe: ConfigUniverse, semiring_tests: Sequence) -> dict:
    """Compare the hit-or-miss and counting fields of a separating semiring.

    A failed closure or separation precondition is reported as such; only
    ``theorem_violation`` signals a genuine disagreement under the hypotheses.
    """
    tests = _masks(semiring_tests)
    semiring = is_semiring(tests)
    separating = is_separating(tests, universe.m)
    h = hitormiss_field(universe, tests)
    c = counting_field(universe, tests)
    equal = h == c
    precondition = semiring and separating
    return {
        "semiring": semiring,
        "separating": separating,
        "precondition_ok": precondition,
        "equal": equal,
        "hit_atoms": h.n_atoms,
        "count_atoms": c.n_atoms,
        "theorem_violation": precondition and not equal,
    }


def hit_membership_iff_union(universe: ConfigUniverse, a, tests: Sequence) -> tuple[bool, bool]:
    """(is {N_A != 0} in the hit-or-miss field?, is A a union of test sets?)"""
    mask = a.mask if isinstance(a, DiscreteSet) else int(a)
    field_ = hitormiss_field(universe, tests)
    return field_.contains(hit_event(universe, mask)), is_union_of(mask, tests)


def star_semiring_closure(tests: Sequence, m: int) -> set[int]:
    """Finite intersections of tests and their complements (nonempty lists)."""
    if not 1 <= m <= MAX_FULL:
        raise ValueError(f"m must be in 1..{MAX_FULL}")
    full = (1 << m) - 1
    literals = set()
    for t in _masks(tests):
        literals.add(t)
        literals.add(full & ~t)
    closure = set(literals)
    frontier = set(literals)
    while frontier:
        new = {a & b for a in frontier for b in literals} - closure
        closure |= new
        frontier = new
    return closure


def counting_subfield(universe: ConfigUniverse, small: Sequence, big: Sequence) -> bool:
    """Is C(small) ⊆ C(big)?"""
    return counting_field(universe, big).refines(counting_field(universe, small))


def check_star_union_representation(universe: ConfigUniverse, t_family: Sequence, tests: Sequence) -> dict:
    """When C(T) ⊆ C(tests), every A in T must be a union of E*-sets."""
    included = counting_subfield(universe, t_family, tests)
    star = star_semiring_closure(tests, universe.m)
    unions = [is_union_of(a, star) for a in _masks(t_family)]
    return {
        "included": included,
        "all_unions": all(unions),
        "violation": included and not all(unions),
    }


def check_intersection_stable_generator(universe: ConfigUniverse, gens: Sequence) -> dict:
    g = _masks(gens)
    stable = is_intersection_stable(g)
    cover = 0
    for s in g:
        cover |= s
    covering = cover == universe.full_mask
    everything = list(range(universe.size))
    generates = counting_field(universe, g) == counting_field(universe, everything)
    return {"intersection_stable": stable, "covering": covering, "generates": generates}


# -- exhaustive engine -------------------------------------------------------
#
# For m <= 4 every test family is a bitmask over the 2**m subsets of S, so all
# families can be checked at once with numpy. Two configurations are merged by
# a family iff the family avoids every set on which they differ; this pairwise
# formulation is independent of the atom computation above.

def _partitions(elements: list[int]):
    if not elements:
        yield []
        return
    first, rest = elements[0], elements[1:]
    for part in _partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [part[i] | (1 << first)] + part[i + 1:]
        yield part + [1 << first]


def exhaustive_theorem_checks(m: int) -> dict:
    """Check the self-dissecting equality and the hit-membership criterion for
    every test family over S = {0..m-1}, m <= 4."""
    if not 1 <= m <= 4:
        raise ValueError("exhaustive checks are limited to m <= 4")
    nsets = 1 << m
    nconf = 1 << m
    fam = np.arange(1 << nsets, dtype=np.int64)
    has = [((fam >> s) & 1).astype(bool) for s in range(nsets)]

    def bitmask_of(sets) -> int:
        out = 0
        for s in sets:
            out |= 1 << s
        return out

    pairs = list(itertools.combinations(range(nconf), 2))
    d_hit = {}
    d_cnt = {}
    for p, q in pairs:
        d_hit[p, q] = bitmask_of(s for s in range(nsets) if bool(p & s) != bool(q & s))
        d_cnt[p, q] = bitmask_of(s for s in range(nsets) if (p & s).bit_count() != (q & s).bit_count())

    # hit field == counting field  <=>  no pair merged by hits but split by counts
    equal = np.ones(fam.size, dtype=bool)
    for pq in pairs:
        merged_by_hits = (fam & d_hit[pq]) == 0
        split_by_counts = (fam & d_cnt[pq]) != 0
        equal &= ~(merged_by_hits & split_by_counts)

    stable = np.ones(fam.size, dtype=bool)
    for a in range(nsets):
        for b in range(nsets):
            stable &= ~(has[a] & has[b]) | has[a & b]

    decomposable = {}
    for target in range(nsets):
        elems = [i for i in range(m) if target >> i & 1]
        ok = np.zeros(fam.size, dtype=bool)
        for part in _partitions(elems):
            cond = np.ones(fam.size, dtype=bool)
            for block in part:
                cond &= has[block]
            ok |= cond
        decomposable[target] = ok
    semiring = stable & (fam != 0)
    for a in range(nsets):
        for b in range(nsets):
            semiring &= ~(has[a] & has[b]) | decomposable[a & ~b]

    separating = np.ones(fam.size, dtype=bool)
    for x, y in itertools.combinations(range(m), 2):
        sep = bitmask_of(s for s in range(nsets) if ((s >> x) & 1) != ((s >> y) & 1))
        separating &= (fam & sep) != 0

    hyp = semiring & separating
    equality_violations = int(np.count_nonzero(hyp & ~equal))

    union_violations = 0
    instances33 = 0
    for a in range(nsets):
        member = np.ones(fam.size, dtype=bool)
        for p, q in pairs:
            if bool(p & a) != bool(q & a):
                member &= (fam & d_hit[p, q]) != 0
        cover = np.zeros(fam.size, dtype=np.int64)
        for s in range(nsets):
            if s & ~a == 0:
                cover |= np.where(has[s], s, 0)
        is_union = cover == a
        union_violations += int(np.count_nonzero(member != is_union))
        instances33 += fam.size

    return {
        "m": m,
        "families": int(fam.size),
        "selfdissecting_families": int(np.count_nonzero(hyp)),
        "selfdissecting_violations": equality_violations,
        "membership_instances": instances33,
        "membership_violations": union_violations,
    }


# -- randomized instances --------------------------------------------------------

def random_separating_semiring(rng: np.random.Generator, m: int, extra: int = 3) -> list[int]:
    """Random separating semiring on {0..m-1}.

    A separating semiring on a finite space holds every covered singleton and
    leaves at most one point uncovered; extra sets avoiding that point are
    added and the family is closed under intersection.
    """
    full = (1 << m) - 1
    uncovered = int(rng.integers(-1, m))  # -1: every point covered
    avoid = full if uncovered < 0 else full & ~(1 << uncovered)
    fam = {0} | {1 << i for i in range(m) if i != uncovered}
    for _ in range(extra):
        fam.add(int(rng.integers(0, 1 << m)) & avoid)
    changed = True
    while changed:
        new = {a & b for a in fam for b in fam} - fam
        changed = bool(new)
        fam |= new
    out = sorted(fam)
    rng.shuffle(out)
    return out


def random_trials(m_max: int, trials: int, seed: int) -> dict:
    """Randomized instances of the self-dissecting equality, the
    hit-membership criterion, the star-closure union representation, and the
    intersection-stable generator criterion."""
    rng = substream(seed, 0x51)
    failures = []
    counts = {"selfdissecting": 0, "membership": 0, "star_union": 0, "generator": 0}
    examples = []
    for i in range(trials):
        m = int(rng.integers(1, m_max + 1))
        uni = ConfigUniverse(m)
        sr = random_separating_semiring(rng, m)
        rep = check_selfdissecting_equality(uni, sr)
        counts["selfdissecting"] += 1
        if not rep["precondition_ok"] or not rep["equal"]:
            failures.append({"trial": i, "check": "selfdissecting", "m": m, "tests": sr, "report": rep})
        if i < 3:
            examples.append({"m": m, "tests": sr, "atoms": hitormiss_field(uni, sr).atoms()[:8]})

        k = int(rng.integers(0, 2 * m + 1))
        tests = [int(v) for v in rng.integers(0, 1 << m, size=k)]
        a = int(rng.integers(0, 1 << m))
        member, union = hit_membership_iff_union(uni, a, tests)
        counts["membership"] += 1
        if member != union:
            failures.append({"trial": i, "check": "membership", "m": m, "A": a, "tests": tests})

        if m <= 5:
            t_fam = [1 << j for j in range(m)] + [int(v) for v in rng.integers(0, 1 << m, size=2)]
            big = [int(v) for v in rng.integers(0, 1 << m, size=int(rng.integers(1, 2 * m + 1)))]
            if rng.random() < 0.5:
                big += t_fam[:m]
            star = check_star_union_representation(uni, t_fam, big)
            counts["star_union"] += 1
            if star["violation"]:
                failures.append({"trial": i, "check": "star_union", "m": m, "T": t_fam, "tests": big})

        gens = sorted({0, uni.full_mask} | {1 << j for j in range(m)} |
                      {int(v) for v in rng.integers(0, 1 << m, size=2)})
        stable = set(gens)
        while True:
            new = {x & y for x in stable for y in stable} - stable
            if not new:
                break
            stable |= new
        gen = check_intersection_stable_generator(uni, sorted(stable))
        counts["generator"] += 1
        if not gen["generates"]:
            failures.append({"trial": i, "check": "generator", "m": m, "gens": sorted(stable)})
    return {"instances": counts, "failures": failures, "atoms_examples": examples}
