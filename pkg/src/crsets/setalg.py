"""State-space backends: half-open interval unions on the line, bitmask sets
on small discrete spaces, and countable separating families over both."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

MAX_DISCRETE = 16
# cell indices at depth d need 2**d to fit in a signed 64-bit integer
MAX_DYADIC_DEPTH = 62

# Endpoint conventions. Ring operations are defined for half-open sets only;
# closed/open variants exist so closed interval unions and open chains can be
# expressed for hitting queries. All three have the same Lebesgue measure.
HALF_OPEN = "half-open"
CLOSED = "closed"
OPEN = "open"
_KINDS = (HALF_OPEN, CLOSED, OPEN)


def _normalize(pairs: Iterable[Sequence[float]], kind: str) -> tuple[tuple[float, float], ...]:
    items = []
    for a, b in pairs:
        a, b = float(a), float(b)
        if math.isnan(a) or math.isnan(b):
            raise ValueError("interval endpoints must not be NaN")
        if a < b or (kind == CLOSED and a == b):
            items.append((a, b))
    items.sort()
    out: list[tuple[float, float]] = []
    for a, b in items:
        if out:
            pa, pb = out[-1]
            # half-open [a,b) and [b,c) abut and merge; closed [a,b],[b,c]
            # overlap at b; open (a,b),(b,c) stay apart since b is missing.
            touch = a < pb if kind == OPEN else a <= pb
            if touch:
                out[-1] = (pa, max(pb, b))
                continue
        out.append((a, b))
    return tuple(out)


@dataclass(frozen=True)
class IntervalSet:
    """Finite union of disjoint intervals on the real line.

    Stored components are sorted and pairwise separated by a positive gap
    (for half-open sets; see ``_normalize`` for the other conventions).
    Endpoints may be infinite. The empty tuple is the empty set.
    """

    components: tuple[tuple[float, float], ...] = ()
    kind: str = HALF_OPEN

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown interval kind {self.kind!r}")
        object.__setattr__(self, "components", _normalize(self.components, self.kind))

    @classmethod
    def of(cls, *pairs: Sequence[float]) -> "IntervalSet":
        return cls(tuple(tuple(p) for p in pairs))

    @classmethod
    def closed(cls, *pairs: Sequence[float]) -> "IntervalSet":
        return cls(tuple(tuple(p) for p in pairs), CLOSED)

    @classmethod
    def open(cls, *pairs: Sequence[float]) -> "IntervalSet":
        return cls(tuple(tuple(p) for p in pairs), OPEN)

    @classmethod
    def real_line(cls) -> "IntervalSet":
        return cls(((-math.inf, math.inf),))

    # -- basic queries -------------------------------------------------
    def is_empty(self) -> bool:
        return not self.components

    def __bool__(self) -> bool:
        return bool(self.components)

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self) -> Iterator[tuple[float, float]]:
        return iter(self.components)

    @property
    def lo(self) -> float:
        return self.components[0][0] if self.components else math.nan

    @property
    def hi(self) -> float:
        return self.components[-1][1] if self.components else math.nan

    def contains(self, x):
        """Membership for a scalar or an array of points."""
        arr = np.asarray(x, dtype=float)
        if not self.components:
            out = np.zeros(arr.shape, dtype=bool)
        else:
            lefts = np.array([c[0] for c in self.components])
            rights = np.array([c[1] for c in self.components])
            if self.kind == HALF_OPEN:
                idx = np.searchsorted(lefts, arr, side="right") - 1
                ok = idx >= 0
                idx = np.clip(idx, 0, None)
                out = ok & (arr < rights[idx])
            elif self.kind == CLOSED:
                idx = np.searchsorted(lefts, arr, side="right") - 1
                ok = idx >= 0
                idx = np.clip(idx, 0, None)
                out = ok & (arr <= rights[idx])
            else:
                idx = np.searchsorted(lefts, arr, side="left") - 1
                ok = idx >= 0
                idx = np.clip(idx, 0, None)
                out = ok & (arr < rights[idx])
        return bool(out) if out.ndim == 0 else out

    def __contains__(self, x) -> bool:
        return bool(self.contains(float(x)))

    def component_index(self, x) -> np.ndarray:
        """Index of the component holding each point, -1 when outside."""
        arr = np.asarray(x, dtype=float)
        if not self.components:
            return np.full(arr.shape, -1, dtype=np.int64)
        lefts = np.array([c[0] for c in self.components])
        side = "left" if self.kind == OPEN else "right"
        idx = np.searchsorted(lefts, arr, side=side) - 1
        inside = self.contains(arr)
        return np.where(inside, idx, -1).astype(np.int64)

    # -- ring operations -----------------------------------------------
    def _check_ring(self, other: "IntervalSet") -> None:
        if self.kind != HALF_OPEN or other.kind != HALF_OPEN:
            raise ValueError("set algebra is defined on half-open interval sets only")

    def union(self, other: "IntervalSet") -> "IntervalSet":
        self._check_ring(other)
        return IntervalSet(self.components + other.components)

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        self._check_ring(other)
        out = []
        i = j = 0
        a, b = self.components, other.components
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if lo < hi:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return IntervalSet(tuple(out))

    def complement(self, window: "IntervalSet | None" = None) -> "IntervalSet":
        """Complement within ``window`` (the whole line by default)."""
        if window is None:
            window = IntervalSet.real_line()
        self._check_ring(window)
        gaps = []
        prev = -math.inf
        for a, b in self.components:
            if prev < a:
                gaps.append((prev, a))
            prev = b
        if prev < math.inf:
            gaps.append((prev, math.inf))
        return IntervalSet(tuple(gaps)).intersect(window)

    def diff(self, other: "IntervalSet") -> "IntervalSet":
        self._check_ring(other)
        return self.intersect(other.complement())

    __or__ = union
    __and__ = intersect
    __sub__ = diff

    def issubset(self, other: "IntervalSet") -> bool:
        return self.diff(other).is_empty()

    def isdisjoint(self, other: "IntervalSet") -> bool:
        return self.intersect(other).is_empty()

    def pieces(self) -> list["IntervalSet"]:
        """Connected components, each as its own set."""
        return [IntervalSet((c,), self.kind) for c in self.components]

    def as_half_open(self) -> "IntervalSet":
        """Same endpoints read as half-open (differs only on a null set)."""
        return IntervalSet(self.components, HALF_OPEN)

    def shift(self, z: float) -> "IntervalSet":
        return IntervalSet(tuple((a + z, b + z) for a, b in self.components), self.kind)

    # -- serialization -------------------------------------------------
    def to_json(self):
        pairs = [[a, b] for a, b in self.components]
        if self.kind == HALF_OPEN:
            return pairs
        return {"kind": self.kind, "intervals": pairs}

    @classmethod
    def from_json(cls, obj) -> "IntervalSet":
        if isinstance(obj, dict):
            return cls(tuple(tuple(p) for p in obj["intervals"]), obj.get("kind", HALF_OPEN))
        if not isinstance(obj, list) or any(not isinstance(p, list) or len(p) != 2 for p in obj):
            raise ValueError("interval set must be a JSON array of [a, b] pairs")
        return cls(tuple(tuple(p) for p in obj))

    def __repr__(self) -> str:
        if not self.components:
            return "IntervalSet(∅)"
        br = {HALF_OPEN: "[)", CLOSED: "[]", OPEN: "()"}[self.kind]
        body = " ∪ ".join(f"{br[0]}{a:g}, {b:g}{br[1]}" for a, b in self.components)
        return f"IntervalSet({body})"


def lebesgue(a: IntervalSet) -> float:
    return float(sum(b - x for x, b in a.components))


@dataclass(frozen=True)
class DiscreteSet:
    """Subset of {0, ..., m-1} as an m-bit mask."""

    m: int
    mask: int = 0

    def __post_init__(self):
        if not 1 <= self.m <= MAX_DISCRETE:
            raise ValueError(f"universe size must be in 1..{MAX_DISCRETE}, got {self.m}")
        if self.mask < 0 or self.mask >> self.m:
            raise ValueError(f"mask {self.mask:#x} uses bits outside the low {self.m}")

    @classmethod
    def of(cls, m: int, elements: Iterable[int]) -> "DiscreteSet":
        mask = 0
        for e in elements:
            if not 0 <= e < m:
                raise ValueError(f"element {e} outside universe of size {m}")
            mask |= 1 << e
        return cls(m, mask)

    @classmethod
    def full(cls, m: int) -> "DiscreteSet":
        return cls(m, (1 << m) - 1)

    def elements(self) -> list[int]:
        return [i for i in range(self.m) if self.mask >> i & 1]

    def __contains__(self, x: int) -> bool:
        return bool(self.mask >> x & 1)

    def contains(self, x):
        arr = np.asarray(x, dtype=np.int64)
        out = ((self.mask >> arr) & 1).astype(bool)
        return bool(out) if out.ndim == 0 else out

    def __len__(self) -> int:
        return self.mask.bit_count()

    def is_empty(self) -> bool:
        return self.mask == 0

    def _same(self, other: "DiscreteSet") -> None:
        if other.m != self.m:
            raise ValueError("discrete sets live in different universes")

    def union(self, other: "DiscreteSet") -> "DiscreteSet":
        self._same(other)
        return DiscreteSet(self.m, self.mask | other.mask)

    def intersect(self, other: "DiscreteSet") -> "DiscreteSet":
        self._same(other)
        return DiscreteSet(self.m, self.mask & other.mask)

    def diff(self, other: "DiscreteSet") -> "DiscreteSet":
        self._same(other)
        return DiscreteSet(self.m, self.mask & ~other.mask)

    def complement(self, window: "DiscreteSet | None" = None) -> "DiscreteSet":
        full = (1 << self.m) - 1 if window is None else window.mask
        return DiscreteSet(self.m, full & ~self.mask)

    __or__ = union
    __and__ = intersect
    __sub__ = diff

    def issubset(self, other: "DiscreteSet") -> bool:
        return self.mask & ~other.mask == 0

    def pieces(self) -> list["DiscreteSet"]:
        # every subset is a semiring element of the power set
        return [self] if self.mask else []

    def to_json(self) -> dict:
        return {"m": self.m, "mask": self.mask}

    @classmethod
    def from_json(cls, obj: dict) -> "DiscreteSet":
        try:
            return cls(int(obj["m"]), int(obj["mask"]))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"discrete set needs integer fields 'm' and 'mask': {exc}") from None

    def __repr__(self) -> str:
        return f"DiscreteSet(m={self.m}, {{{', '.join(map(str, self.elements()))}}})"


# -- separating families -----------------------------------------------------

class SeparatingFamily:
    """Countable family E_1, E_2, ... separating points of the backend.

    Members are grouped into blocks; ``block(d)`` is the 1-based index range
    of block ``d``. Dissecting systems refine one block per depth.
    """

    backend = "abstract"

    def member(self, n: int):
        raise NotImplementedError

    def block(self, d: int) -> range:
        raise NotImplementedError

    def __iter__(self):
        n = 1
        while True:
            yield self.member(n)
            n += 1

    def first(self, count: int) -> list:
        return [self.member(n) for n in range(1, count + 1)]

    def separating_index(self, x, y, limit: int = 1 << 20) -> int | None:
        """Least n with exactly one of x, y in E_n (None if x == y)."""
        if x == y:
            return None
        for n in range(1, limit + 1):
            e = self.member(n)
            if (x in e) != (y in e):
                return n
        raise RuntimeError(f"no separating member among the first {limit}")


class DyadicFamily(SeparatingFamily):
    """Dyadic cells of a bounded window, breadth first.

    Depth d contributes the 2**d cells [lo + k*w/2**d, lo + (k+1)*w/2**d),
    k = 0..2**d - 1, so E_1 = left half, E_2 = right half, E_3 = first
    quarter, and so on. Member n sits at depth d = floor(log2(n + 1)).
    """

    backend = "interval"

    def __init__(self, window: IntervalSet):
        if window.is_empty() or len(window) != 1:
            raise ValueError("dyadic family needs a single nonempty interval window")
        lo, hi = window.components[0]
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("dyadic window must be bounded")
        self.window = window
        self.lo = lo
        self.hi = hi
        self.width = hi - lo

    def __repr__(self) -> str:
        return f"DyadicFamily([{self.lo:g}, {self.hi:g}))"

    def __eq__(self, other) -> bool:
        return isinstance(other, DyadicFamily) and self.window == other.window

    def __hash__(self) -> int:
        return hash(("dyadic", self.window))

    @staticmethod
    def depth_of(n: int) -> tuple[int, int]:
        """Map member index n >= 1 to (depth, cell offset)."""
        if n < 1:
            raise ValueError("family indices start at 1")
        d = (n + 1).bit_length() - 1
        return d, n - ((1 << d) - 1)

    def block(self, d: int) -> range:
        return range((1 << d) - 1, (1 << (d + 1)) - 1)

    def edge(self, d: int, k):
        """Left boundary of cell k at depth d (k may be an array)."""
        return self.lo + np.asarray(k, dtype=float) * (self.width / 2.0 ** d)

    def cell(self, d: int, k: int) -> IntervalSet:
        a = float(self.edge(d, k))
        b = self.hi if k == (1 << d) - 1 else float(self.edge(d, k + 1))
        return IntervalSet(((a, b),))

    def member(self, n: int) -> IntervalSet:
        d, k = self.depth_of(n)
        return self.cell(d, k)

    def locate(self, d: int, x) -> np.ndarray:
        """Cell index at depth d for each point; -1 outside the window.

        Uses the same floating boundaries as ``cell`` so that membership
        computed here agrees exactly with ``cell(d, k).contains``.
        """
        if not 0 <= d <= MAX_DYADIC_DEPTH:
            raise ValueError(f"dyadic depth must lie in 0..{MAX_DYADIC_DEPTH}, got {d}")
        x = np.asarray(x, dtype=float)
        hi = self.hi
        inside = (x >= self.lo) & (x < hi)
        ncell = 1 << d
        with np.errstate(invalid="ignore"):
            k = np.floor((x - self.lo) / (self.width / 2.0 ** d))
        k = np.clip(np.nan_to_num(k, nan=0.0), 0, ncell - 1).astype(np.int64)
        # correct one-ulp disagreements with the stored boundaries
        for _ in range(2):
            left = self.edge(d, k)
            k = np.where((x < left) & (k > 0), k - 1, k)
            right = np.where(k + 1 < ncell, self.edge(d, np.minimum(k + 1, ncell - 1)), hi)
            k = np.where((x >= right) & (k + 1 < ncell), k + 1, k)
        return np.where(inside, k, -1)

    def separation_depth(self, x: float, y: float) -> int:
        """Depth at which x != y are guaranteed to lie in different cells."""
        gap = abs(x - y)
        if gap == 0:
            raise ValueError("identical points are never separated")
        return max(1, math.ceil(math.log2(self.width / gap)))

    def separating_index(self, x, y, limit: int = 1 << 20) -> int | None:
        if x == y:
            return None
        if not (x in self.window and y in self.window):
            return super().separating_index(x, y, limit)
        for d in range(1, MAX_DYADIC_DEPTH + 1):
            kx, ky = (int(v) for v in self.locate(d, [x, y]))
            if kx != ky:
                # first member of this depth holding exactly one of them
                return (1 << d) - 1 + min(kx, ky)
        raise ValueError(f"points closer than window/2**{MAX_DYADIC_DEPTH} are not separated by the supported depths")


class SingletonFamily(SeparatingFamily):
    """E_n = {n-1} for n <= m and the empty set afterwards."""

    backend = "discrete"

    def __init__(self, m: int):
        if not 1 <= m <= MAX_DISCRETE:
            raise ValueError(f"universe size must be in 1..{MAX_DISCRETE}")
        self.m = m

    def __repr__(self) -> str:
        return f"SingletonFamily(m={self.m})"

    def __eq__(self, other) -> bool:
        return isinstance(other, SingletonFamily) and self.m == other.m

    def __hash__(self) -> int:
        return hash(("singleton", self.m))

    def block(self, d: int) -> range:
        return range(d, d + 1)

    def member(self, n: int) -> DiscreteSet:
        if n < 1:
            raise ValueError("family indices start at 1")
        return DiscreteSet(self.m, 1 << (n - 1) if n <= self.m else 0)

    def separating_index(self, x, y, limit: int = 1 << 20) -> int | None:
        if x == y:
            return None
        return min(x, y) + 1


def dyadic_family(window: IntervalSet) -> DyadicFamily:
    return DyadicFamily(window)


def singleton_family(m: int) -> SingletonFamily:
    return SingletonFamily(m)


def dyadic_sets(count: int, window: IntervalSet | None = None) -> list[IntervalSet]:
    """First ``count`` members of the dyadic family (default window [0, 1))."""
    fam = DyadicFamily(window or IntervalSet.of((0.0, 1.0)))
    return fam.first(count)


def dyadic_sibling_pairs(count: int, window: IntervalSet | None = None) -> list[tuple[IntervalSet, IntervalSet]]:
    """Disjoint (left, right) halves of successive dyadic parent cells."""
    fam = DyadicFamily(window or IntervalSet.of((0.0, 1.0)))
    out = []
    d = 1
    while len(out) < count:
        for k in range(0, 1 << d, 2):
            out.append((fam.cell(d, k), fam.cell(d, k + 1)))
            if len(out) == count:
                break
        d += 1
    return out


def parse_family(spec: str):
    """``dyadic:<a>,<b>`` or ``singleton:<m>``."""
    name, _, arg = spec.partition(":")
    if name == "dyadic":
        if not arg:
            return DyadicFamily(IntervalSet.of((0.0, 1.0)))
        parts = arg.strip("[]()").split(",")
        if len(parts) != 2:
            raise ValueError(f"dyadic window must be 'a,b', got {arg!r}")
        return DyadicFamily(IntervalSet.of((float(parts[0]), float(parts[1]))))
    if name == "singleton":
        return SingletonFamily(int(arg))
    raise ValueError(f"unknown family {spec!r}")
