"""Intensity measures and constructive samplers for countable random sets.

A model is an ordered sequence of independent finite components, each a
finite intensity plus a sampler (Poisson, or a fixed number of i.i.d.
points). Infinite sequences carry a closed-form tail so truncation bias can
be bounded. An optional standard-normal shift moves every point of a
realization by the same random amount, and an optional restriction keeps
only the points inside a window.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, special, stats

from .partition import FinitePointSet
from .rng import check_seed, substream
from .setalg import CLOSED, IntervalSet, lebesgue

CHUNK = 8192
STD_NORMAL = "std-normal"
_HARMONIC_DIRECT = 100_000


class ModelSpecError(ValueError):
    """Invalid model specification; the message names the offending field."""


# -- finite intensities ----------------------------------------------------------

@dataclass(frozen=True)
class FiniteIntensity:
    """Finite measure: ``rate`` times Lebesgue measure on ``support``, or
    point masses ``weights`` on {0, ..., len(weights) - 1}."""

    kind: str
    support: IntervalSet = IntervalSet()
    rate: float = 1.0
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind not in ("uniform", "discrete"):
            raise ValueError(f"unknown intensity kind {self.kind!r}")
        if self.kind == "uniform":
            if self.rate < 0 or not math.isfinite(self.rate):
                raise ValueError("rate must be finite and nonnegative")
            if self.support and not math.isfinite(lebesgue(self.support)):
                raise ValueError("uniform intensity needs a bounded support")
        elif any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")

    @property
    def atomless(self) -> bool:
        return self.kind == "uniform"

    @property
    def total(self) -> float:
        if self.kind == "uniform":
            return self.rate * lebesgue(self.support)
        return float(sum(self.weights))

    def evaluate(self, a) -> float:
        if self.kind == "uniform":
            return self.rate * lebesgue(a.as_half_open().intersect(self.support))
        return float(sum(w for i, w in enumerate(self.weights) if i in a))

    def sample(self, rng: np.random.Generator, k: int) -> np.ndarray:
        """k i.i.d. points from the normalized measure."""
        if k == 0:
            return np.empty(0)
        if self.kind == "discrete":
            p = np.asarray(self.weights, dtype=float)
            return rng.choice(len(p), size=k, p=p / p.sum()).astype(float)
        comps = self.support.components
        if len(comps) == 1:
            a, b = comps[0]
            return a + (b - a) * rng.random(k)
        lengths = np.array([b - a for a, b in comps])
        which = rng.choice(len(comps), size=k, p=lengths / lengths.sum())
        lefts = np.array([a for a, _ in comps])
        return lefts[which] + lengths[which] * rng.random(k)

    def to_json(self) -> dict:
        if self.kind == "discrete":
            return {"kind": "discrete", "weights": list(self.weights)}
        return {"kind": "lebesgue", "window": self.support.to_json(), "rate": self.rate}


def lebesgue_intensity(window, rate: float = 1.0) -> FiniteIntensity:
    if not isinstance(window, IntervalSet):
        window = IntervalSet.of(tuple(window))
    return FiniteIntensity("uniform", window, rate)


def lebesgue_slice(n: int) -> FiniteIntensity:
    """λ(· ∩ [-1/n, 1/n))."""
    return lebesgue_intensity(IntervalSet.of((-1.0 / n, 1.0 / n)))


def discrete_weights(weights: Sequence[float]) -> FiniteIntensity:
    return FiniteIntensity("discrete", weights=tuple(float(w) for w in weights))


@dataclass(frozen=True)
class Component:
    intensity: FiniteIntensity
    sampler: str = "poisson"
    n_points: int = 0

    def __post_init__(self):
        if self.sampler not in ("poisson", "fixed"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.sampler == "fixed" and (self.n_points < 0 or self.intensity.total <= 0):
            raise ValueError("fixed sampler needs n_points >= 0 and positive total mass")

    def miss_probability(self, a) -> float:
        mass = self.intensity.evaluate(a)
        if self.sampler == "poisson":
            return math.exp(-mass)
        return (1.0 - mass / self.intensity.total) ** self.n_points

    def mean_count(self, a) -> float:
        mass = self.intensity.evaluate(a)
        if self.sampler == "poisson":
            return mass
        return self.n_points * mass / self.intensity.total

    def draw_counts(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.sampler == "poisson":
            return rng.poisson(self.intensity.total, size)
        return np.full(size, self.n_points, dtype=np.int64)

    def to_json(self) -> dict:
        out = self.intensity.to_json()
        if self.sampler == "fixed":
            out.update(sampler="fixed", n_points=self.n_points)
        return out


# -- closed-form tails -----------------------------------------------------------

def _harmonic(lo: int, hi: int) -> float:
    """Σ_{k=lo}^{hi} 1/k (0 when hi < lo)."""
    if hi < lo:
        return 0.0
    if hi - lo < _HARMONIC_DIRECT:
        return math.fsum(1.0 / k for k in range(lo, hi + 1))
    return float(special.digamma(hi + 1) - special.digamma(lo))


def _half_slice_sum(a: float, b: float, first: int) -> float:
    """Σ_{k >= first} λ([a, b) ∩ [0, 1/k)) for 0 <= a < b."""
    if a <= 0.0:
        return math.inf
    # terms vanish once 1/k <= a
    last = math.ceil(1.0 / a) - 1
    while last >= 1 and 1.0 / last <= a:
        last -= 1
    while 1.0 / (last + 1) > a:
        last += 1
    if last < first:
        return 0.0
    full_until = math.floor(1.0 / b) if math.isfinite(b) else 0  # k <= 1/b: whole [a,b) inside
    n_full = max(0, min(full_until, last) - first + 1)
    start = max(first, full_until + 1)
    partial = _harmonic(start, last) - a * max(0, last - start + 1)
    return n_full * (b - a) + max(partial, 0.0)


def _split_halves(a: IntervalSet):
    """Positive part and mirrored negative part of a, as lists of [lo, hi)."""
    pos, neg = [], []
    for lo, hi in a.as_half_open().components:
        if hi > 0:
            pos.append((max(lo, 0.0), hi))
        if lo < 0:
            neg.append((max(-hi, 0.0), -lo))
    return pos, neg


def _touches_zero(a: IntervalSet) -> bool:
    return any(lo <= 0.0 <= hi for lo, hi in a.components)


def slice_tail_mass(a: IntervalSet, first: int) -> float:
    """Σ_{k >= first} λ(a ∩ [-1/k, 1/k))."""
    if a.is_empty():
        return 0.0
    if _touches_zero(a):
        return math.inf
    pos, neg = _split_halves(a)
    return math.fsum(_half_slice_sum(lo, hi, first) for lo, hi in pos + neg)


@dataclass(frozen=True)
class SliceTail:
    """Infinite component sequence accumulating at 0.

    ``example1``: component k is λ(· ∩ [-1/k, 1/k)).
    ``example1-halves``: component 2j-1 is λ(· ∩ [0, 1/j)) and component 2j
    is λ(· ∩ [-1/j, 0)); the same total intensity split differently.
    """

    kind: str = "example1"

    def __post_init__(self):
        if self.kind not in ("example1", "example1-halves"):
            raise ValueError(f"unknown tail {self.kind!r}")

    def component(self, k: int) -> Component:
        if self.kind == "example1":
            return Component(lebesgue_slice(k))
        j = (k + 1) // 2
        window = (0.0, 1.0 / j) if k % 2 else (-1.0 / j, 0.0)
        return Component(lebesgue_intensity(IntervalSet.of(window)))

    def mass_after(self, a: IntervalSet, n: int) -> float:
        """Σ_{k > n} μ_k(a)."""
        if a.is_empty():
            return 0.0
        if self.kind == "example1":
            return slice_tail_mass(a, n + 1)
        if _touches_zero(a):
            return math.inf
        pos, neg = _split_halves(a)
        # positive half j is component 2j-1, negative half j is component 2j
        j_pos = (n + 1) // 2 + 1
        j_neg = n // 2 + 1
        return (math.fsum(_half_slice_sum(lo, hi, j_pos) for lo, hi in pos)
                + math.fsum(_half_slice_sum(lo, hi, j_neg) for lo, hi in neg))


# -- models ----------------------------------------------------------------------

@dataclass(frozen=True)
class CrSetModel:
    components: tuple[Component, ...] = ()
    tail: SliceTail | None = None
    shift: str | None = None
    restrict: IntervalSet | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        for c in self.components:
            if not c.intensity.atomless:
                raise ValueError("cr-set components need atomless intensities (no multiplicities)")
        if self.shift not in (None, STD_NORMAL):
            raise ValueError(f"unknown shift law {self.shift!r}")

    @property
    def finite_length(self) -> int | None:
        return None if self.tail is not None else len(self.components)

    def component(self, k: int) -> Component:
        if k <= len(self.components):
            return self.components[k - 1]
        if self.tail is None:
            raise IndexError(f"model has only {len(self.components)} components")
        return self.tail.component(k - len(self.components))

    def sampled_components(self, depth: int) -> int:
        if depth < 1:
            raise ValueError("depth must be >= 1")
        return depth if self.tail is not None else min(depth, len(self.components))

    @property
    def is_poisson(self) -> bool:
        return self.shift is None and all(c.sampler == "poisson" for c in self.components)

    def _clip(self, a: IntervalSet) -> IntervalSet:
        a = a.as_half_open()
        return a if self.restrict is None else a.intersect(self.restrict.as_half_open())

    def _mass(self, a: IntervalSet) -> float:
        total = math.fsum(c.intensity.evaluate(a) for c in self.components)
        if self.tail is not None:
            total += self.tail.mass_after(a, 0)
        return total

    def intensity(self, a: IntervalSet) -> float:
        """E N_a for Poisson-type models."""
        if not self.is_poisson:
            raise ValueError("intensity is only defined here for unshifted Poisson-type models")
        return self._mass(self._clip(a))

    def mean_count(self, a: IntervalSet) -> float:
        if self.shift is not None:
            raise ValueError("mean counts of shifted models are not closed form")
        a = self._clip(a)
        total = math.fsum(c.mean_count(a) for c in self.components)
        if self.tail is not None:
            total += self.tail.mass_after(a, 0)
        return total

    def tail_mass(self, a: IntervalSet, depth: int) -> float:
        """Σ over components beyond ``depth`` of their intensity of a (unshifted)."""
        a = self._clip(a)
        if self.tail is None:
            return math.fsum(c.intensity.evaluate(a) for c in self.components[depth:])
        extra = math.fsum(c.intensity.evaluate(a) for c in self.components[depth:])
        return extra + self.tail.mass_after(a, max(0, depth - len(self.components)))

    def _miss(self, a: IntervalSet) -> float:
        prob = 1.0
        for c in self.components:
            prob *= c.miss_probability(a)
        if self.tail is not None:
            prob *= math.exp(-self.tail.mass_after(a, 0))
        return prob

    def _infinite_unshifted(self, a: IntervalSet) -> float:
        if self.tail is None:
            return 0.0
        return 1.0 if math.isinf(self.tail.mass_after(a, 0)) else 0.0

    def hitting(self, a: IntervalSet) -> float:
        """P(τ ∩ a ≠ ∅)."""
        a = self._clip(a)
        if a.is_empty():
            return 0.0
        if self.shift is None:
            return 1.0 - self._miss(a)
        return _expect_over_shift(a, lambda b: 1.0 - self._miss(b))

    def tail_bound(self, a: IntervalSet, depth: int) -> float:
        """P(some component beyond ``depth`` hits a): the truncation bias of a
        hitting estimate at that depth."""
        a = self._clip(a)
        if a.is_empty():
            return 0.0
        n = self.sampled_components(depth)

        def beyond(b: IntervalSet) -> float:
            prob = 1.0
            for c in self.components[n:]:
                prob *= c.miss_probability(b)
            if self.tail is not None:
                prob *= math.exp(-self.tail.mass_after(b, max(0, n - len(self.components))))
            return 1.0 - prob

        if self.shift is None:
            return beyond(a)
        return _expect_over_shift(a, beyond)

    def prob_infinite(self, a: IntervalSet) -> float:
        """P(N_a(τ) = ∞)."""
        a = self._clip(a)
        if a.is_empty() or self.tail is None:
            return 0.0
        if self.shift is None:
            return self._infinite_unshifted(a)
        # μ(a - z) = ∞ exactly when z lies in the closure of a
        return _normal_mass_of_closure(a)

    def to_json(self) -> dict:
        out: dict = {"components": [c.to_json() for c in self.components],
                     "shift": self.shift,
                     "tail": self.tail.kind if self.tail else None}
        if self.restrict is not None:
            out["restrict"] = self.restrict.to_json()
        if self.name:
            out["name"] = self.name
        return out


def _normal_mass_of_closure(a: IntervalSet) -> float:
    comps = IntervalSet(a.components, CLOSED).components
    return math.fsum(stats.norm.cdf(hi) - stats.norm.cdf(lo) for lo, hi in comps)


def _expect_over_shift(a: IntervalSet, g) -> float:
    """E[g(a - Z)] for Z standard normal, g(b) = 1 whenever 0 ∈ closure(b)."""
    inside = _normal_mass_of_closure(a)
    closed = IntervalSet(a.components, CLOSED).components
    edges = [-math.inf] + [v for c in closed for v in c] + [math.inf]
    total = inside
    for lo, hi in zip(edges[0::2], edges[1::2]):
        if not lo < hi:
            continue

        def f(z):
            return g(a.shift(-z)) * stats.norm.pdf(z)

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(f, lo, hi, limit=200, epsabs=1e-10, epsrel=1e-8)
        total += val
    return min(max(total, 0.0), 1.0)


@dataclass(frozen=True)
class Superposition:
    """Independent union of models."""

    parts: tuple
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise ValueError("a superposition needs at least one part")

    @property
    def is_poisson(self) -> bool:
        return all(p.is_poisson for p in self.parts)

    @property
    def shift(self):
        return None

    def intensity(self, a: IntervalSet) -> float:
        return math.fsum(p.intensity(a) for p in self.parts)

    def mean_count(self, a: IntervalSet) -> float:
        return math.fsum(p.mean_count(a) for p in self.parts)

    def hitting(self, a: IntervalSet) -> float:
        return 1.0 - math.prod(1.0 - p.hitting(a) for p in self.parts)

    def tail_bound(self, a: IntervalSet, depth: int) -> float:
        return 1.0 - math.prod(1.0 - p.tail_bound(a, depth) for p in self.parts)

    def prob_infinite(self, a: IntervalSet) -> float:
        return 1.0 - math.prod(1.0 - p.prob_infinite(a) for p in self.parts)

    def tail_mass(self, a: IntervalSet, depth: int) -> float:
        return math.fsum(p.tail_mass(a, depth) for p in self.parts)

    def to_json(self) -> dict:
        out: dict = {"union": [p.to_json() for p in self.parts]}
        if self.name:
            out["name"] = self.name
        return out


# -- presets ---------------------------------------------------------------------

def lebesgue_model(window=(0.0, 1.0), rate: float = 1.0) -> CrSetModel:
    return CrSetModel((Component(lebesgue_intensity(window, rate)),), name="lebesgue")


def split_lebesgue_model(pieces: Sequence[tuple[float, float, float]]) -> CrSetModel:
    """Poisson model from components (a, b, rate), each uniform on [a, b)."""
    return CrSetModel(tuple(Component(lebesgue_intensity((a, b), r)) for a, b, r in pieces), name="split")


def binomial_model(n_points: int, window=(0.0, 1.0)) -> CrSetModel:
    """Exactly ``n_points`` i.i.d. uniform points (not Poisson)."""
    return CrSetModel((Component(lebesgue_intensity(window), "fixed", n_points),), name="binomial")


def example1_model(split: str = "example1") -> CrSetModel:
    return CrSetModel(tail=SliceTail(split), name=split)


def example2_model(restrict: IntervalSet | None = None) -> CrSetModel:
    return CrSetModel(tail=SliceTail("example1"), shift=STD_NORMAL, restrict=restrict, name="example2")


def empty_model() -> CrSetModel:
    return CrSetModel(name="empty")


def mixture_model() -> Superposition:
    """Lebesgue Poisson on [0, 1) plus Example-2 points restricted to [2, 3)."""
    return Superposition((lebesgue_model(), example2_model(IntervalSet.of((2.0, 3.0)))), name="mixture")


PRESETS = {
    "lebesgue01": lebesgue_model,
    "example1": example1_model,
    "example1-halves": lambda: example1_model("example1-halves"),
    "example2": example2_model,
    "binomial1": lambda: binomial_model(1),
    "mixture": mixture_model,
    "empty": empty_model,
}


def example1_intensity(a: IntervalSet) -> float:
    """Σ_n λ(a ∩ (-1/n, 1/n)); ∞ iff 0 lies in the closure of a."""
    return slice_tail_mass(a, 1)


def analytic_hitting(model, a: IntervalSet) -> float:
    return model.hitting(a)


def prob_infinite_count_example2(a: IntervalSet) -> float:
    """P(N_a(τ) = ∞) for the randomly shifted accumulation model."""
    return example2_model().prob_infinite(a)


# -- JSON model specs ------------------------------------------------------------

def _interval_field(obj, where: str) -> IntervalSet:
    try:
        if isinstance(obj, list) and len(obj) == 2 and all(isinstance(v, (int, float)) for v in obj):
            return IntervalSet.of(tuple(obj))
        return IntervalSet.from_json(obj)
    except (ValueError, TypeError, KeyError) as exc:
        raise ModelSpecError(f"{where}: {exc}") from None


def model_from_json(obj, where: str = "model"):
    if isinstance(obj, str):
        if obj in PRESETS:
            return PRESETS[obj]()
        raise ModelSpecError(f"{where}: unknown preset {obj!r} (known: {', '.join(sorted(PRESETS))})")
    if not isinstance(obj, dict):
        raise ModelSpecError(f"{where}: expected an object or a preset name")
    if "union" in obj:
        parts = obj["union"]
        if not isinstance(parts, list) or not parts:
            raise ModelSpecError(f"{where}.union: expected a nonempty array")
        return Superposition(tuple(model_from_json(p, f"{where}.union[{i}]") for i, p in enumerate(parts)),
                             name=str(obj.get("name", "")))
    unknown = set(obj) - {"components", "shift", "tail", "restrict", "name"}
    if unknown:
        raise ModelSpecError(f"{where}: unknown field(s) {', '.join(sorted(unknown))}")
    comps = []
    raw = obj.get("components", [])
    if not isinstance(raw, list):
        raise ModelSpecError(f"{where}.components: expected an array")
    for i, c in enumerate(raw):
        cw = f"{where}.components[{i}]"
        if not isinstance(c, dict):
            raise ModelSpecError(f"{cw}: expected an object")
        kind = c.get("kind")
        try:
            if kind == "lebesgue":
                if "window" not in c:
                    raise ModelSpecError(f"{cw}.window: missing")
                inten = lebesgue_intensity(_interval_field(c["window"], f"{cw}.window"), float(c.get("rate", 1.0)))
            elif kind == "lebesgue-slice":
                inten = lebesgue_slice(int(c["n"]))
            else:
                raise ModelSpecError(f"{cw}.kind: expected 'lebesgue' or 'lebesgue-slice', got {kind!r}")
            comps.append(Component(inten, c.get("sampler", "poisson"), int(c.get("n_points", 0))))
        except ModelSpecError:
            raise
        except (ValueError, TypeError, KeyError) as exc:
            raise ModelSpecError(f"{cw}: {exc}") from None
    shift = obj.get("shift")
    if shift not in (None, STD_NORMAL):
        raise ModelSpecError(f"{where}.shift: expected 'std-normal' or null, got {shift!r}")
    tail = obj.get("tail")
    if tail not in (None, "example1", "example1-halves"):
        raise ModelSpecError(f"{where}.tail: expected 'example1', 'example1-halves' or null, got {tail!r}")
    restrict = obj.get("restrict")
    restrict = None if restrict is None else _interval_field(restrict, f"{where}.restrict")
    return CrSetModel(tuple(comps), SliceTail(tail) if tail else None, shift, restrict, str(obj.get("name", "")))


def load_model(text: str):
    """Preset name, inline JSON, or a path to a JSON file."""
    text = text.strip()
    if text in PRESETS:
        return PRESETS[text]()
    if not text.startswith(("{", "[", '"')):
        try:
            with open(text) as fh:
                text = fh.read()
        except OSError as exc:
            raise ModelSpecError(f"model: cannot read {text!r}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelSpecError(f"model: malformed JSON ({exc.msg} at line {exc.lineno} column {exc.colno})") from None
    return model_from_json(obj)


# -- sampling --------------------------------------------------------------------

@dataclass(frozen=True)
class Realization:
    depth: int
    components: tuple[FinitePointSet, ...]
    shift: float | None
    seed: int

    @property
    def points(self) -> FinitePointSet:
        return FinitePointSet(tuple(p for c in self.components for p in c))

    def count(self, a) -> int:
        return sum(1 for c in self.components for p in c if p in a)

    def to_json(self) -> dict:
        return {"seed": self.seed, "depth": self.depth, "shift": self.shift,
                "components": [sorted(c.points) for c in self.components]}


@dataclass
class SampleBatch:
    """Points of ``n`` replicates, flattened and sorted by replicate."""

    n: int
    depth: int
    seed: int
    points: np.ndarray
    owner: np.ndarray
    component: np.ndarray
    shift: np.ndarray | None = None
    _offsets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._offsets = np.searchsorted(self.owner, np.arange(self.n + 1))

    def truncated(self, depth: int) -> "SampleBatch":
        """The same replicates restricted to their first ``depth`` components."""
        keep = self.component < depth
        return SampleBatch(self.n, min(depth, self.depth), self.seed, self.points[keep], self.owner[keep],
                           self.component[keep], self.shift)

    def counts(self, a) -> np.ndarray:
        inside = a.contains(self.points) if self.points.size else np.zeros(0, dtype=bool)
        return np.bincount(self.owner[inside], minlength=self.n)

    def hits(self, a) -> np.ndarray:
        return self.counts(a) > 0

    def count_matrix(self, sets: Sequence) -> np.ndarray:
        return np.stack([self.counts(a) for a in sets], axis=1) if sets else np.zeros((self.n, 0), dtype=np.int64)

    def sizes(self) -> np.ndarray:
        return np.diff(self._offsets)

    def realization(self, i: int) -> Realization:
        lo, hi = self._offsets[i], self._offsets[i + 1]
        pts, comp = self.points[lo:hi], self.component[lo:hi]
        ncomp = int(comp.max()) + 1 if comp.size else 0
        groups = tuple(FinitePointSet(tuple(float(p) for p in pts[comp == k])) for k in range(ncomp))
        return Realization(self.depth, groups, None if self.shift is None else float(self.shift[i]), self.seed)


def _sample_chunk(model: CrSetModel, size: int, depth: int, seed: int, part: int, chunk: int):
    rng = substream(seed, part, chunk, 0)
    ncomp = model.sampled_components(depth) if (model.components or model.tail) else 0
    pts_list, own_list, comp_list = [], [], []
    for k in range(1, ncomp + 1):
        comp = model.component(k)
        counts = comp.draw_counts(rng, size)
        total = int(counts.sum())
        if total == 0:
            continue
        pts_list.append(comp.intensity.sample(rng, total))
        own_list.append(np.repeat(np.arange(size), counts))
        comp_list.append(np.full(total, k - 1, dtype=np.int64))
    if pts_list:
        pts = np.concatenate(pts_list)
        own = np.concatenate(own_list)
        cmp_ = np.concatenate(comp_list)
    else:
        pts = np.empty(0)
        own = np.empty(0, dtype=np.int64)
        cmp_ = np.empty(0, dtype=np.int64)
    # atomless draws collide with probability zero; redraw exact collisions
    fix = substream(seed, part, chunk, 2)
    while pts.size:
        order = np.lexsort((pts, own))
        dup = (np.diff(pts[order]) == 0) & (np.diff(own[order]) == 0)
        if not dup.any():
            break
        for idx in order[1:][dup]:
            pts[idx] = model.component(int(cmp_[idx]) + 1).intensity.sample(fix, 1)[0]
    shift = None
    if model.shift is not None:
        shift = substream(seed, part, chunk, 1).standard_normal(size)
        pts = pts + shift[own]
    if model.restrict is not None and pts.size:
        keep = model.restrict.contains(pts)
        pts, own, cmp_ = pts[keep], own[keep], cmp_[keep]
    return pts, own, cmp_, shift


def _parts(model):
    return model.parts if isinstance(model, Superposition) else (model,)


def sample_batch(model, n: int, depth: int, seed: int, threads: int = 1) -> SampleBatch:
    """``n`` independent realizations truncated at ``depth`` components.

    Replicates are processed in fixed chunks with their own substreams, so
    the result is independent of ``threads``. Components are drawn in order
    from one stream per chunk, which makes realizations nested in depth.
    """
    check_seed(seed)
    if n < 1:
        raise ValueError("n must be >= 1")
    jobs = []
    for part_idx, part in enumerate(_parts(model)):
        for c, start in enumerate(range(0, n, CHUNK)):
            jobs.append((part_idx, part, c, start, min(CHUNK, n - start)))

    def run(job):
        part_idx, part, c, start, size = job
        return _sample_chunk(part, size, depth, seed, part_idx, c)

    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]

    pts, own, cmp_ = [], [], []
    shift = None
    comp_offset = {}
    offset = 0
    for part_idx, part in enumerate(_parts(model)):
        comp_offset[part_idx] = offset
        offset += part.sampled_components(depth) if (part.components or part.tail) else 0
    for (part_idx, part, c, start, size), (p, o, k, s) in zip(jobs, results):
        pts.append(p)
        own.append(o + start)
        cmp_.append(k + comp_offset[part_idx])
        if s is not None and len(_parts(model)) == 1:
            shift = s if shift is None else np.concatenate([shift, s])
    pts = np.concatenate(pts) if pts else np.empty(0)
    own = np.concatenate(own) if own else np.empty(0, dtype=np.int64)
    cmp_ = np.concatenate(cmp_) if cmp_ else np.empty(0, dtype=np.int64)
    order = np.argsort(own, kind="stable")
    return SampleBatch(n, depth, seed, pts[order], own[order], cmp_[order], shift)


def sample_finite_poisson(mu: FiniteIntensity, seed: int) -> FinitePointSet:
    model = CrSetModel((Component(mu),))
    return sample_batch(model, 1, 1, seed).realization(0).points


def sample_constructive(model, depth: int, seed: int) -> Realization:
    return sample_batch(model, 1, depth, seed).realization(0)


def sample_example2(depth: int, seed: int) -> Realization:
    return sample_constructive(example2_model(), depth, seed)


def harmonic_threshold(depth: int) -> int:
    """Count threshold for the infinite-count detector at a given depth.

    A shift landing exactly on a boundary point of the test set yields a
    Poisson(H_depth) count (one side of every slice); flooring H_depth makes
    such boundary cases detected with probability at least 1/2.
    """
    return math.floor(_harmonic(1, depth))


def detect_infinite(batch: SampleBatch, a: IntervalSet, threshold: int | None = None) -> np.ndarray:
    thr = harmonic_threshold(batch.depth) if threshold is None else threshold
    return batch.counts(a) >= thr
