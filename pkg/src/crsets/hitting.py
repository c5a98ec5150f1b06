"""Hitting functions: Monte Carlo estimates with Wilson intervals, exact
discrete hitting functions, axiom checks, the Rényi avoidance identity and
the inner/outer approximation of T by closed-type and open-type families."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .models import SampleBatch, sample_batch
from .rng import check_seed, substream
from .setalg import CLOSED, HALF_OPEN, OPEN, DiscreteSet, IntervalSet
from .sigma import is_intersection_stable, is_union_of

LEVEL = 0.99
EXACT_SUM_TOL = 1e-12


def wilson_interval(k: int, n: int, level: float = LEVEL) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion k/n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    z = stats.norm.ppf(0.5 + level / 2)
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    # the score interval always contains the point estimate; clamp rounding
    return float(min(lo, p)), float(max(hi, p))


def _describe(a) -> object:
    return a.to_json() if hasattr(a, "to_json") else repr(a)


@dataclass(frozen=True)
class HittingEstimate:
    set: object
    p_hat: float
    ci_low: float
    ci_high: float
    n_samples: int
    depth: int
    truncation_bias_bound: float | str = "unknown"
    level: float = LEVEL

    def __post_init__(self):
        if not 0.0 <= self.p_hat <= 1.0:
            raise ValueError("p_hat must lie in [0, 1]")
        tb = self.truncation_bias_bound
        if not (tb == "unknown" or (isinstance(tb, float) and tb >= 0.0)):
            raise ValueError("truncation bound must be a nonnegative float or 'unknown'")

    @property
    def ci_halfwidth(self) -> float:
        return (self.ci_high - self.ci_low) / 2

    @property
    def slack(self) -> float:
        """Half-width plus the truncation bound (∞ when the bound is unknown)."""
        tb = self.truncation_bias_bound
        return self.ci_halfwidth + (math.inf if tb == "unknown" else tb)

    @property
    def decided(self) -> bool:
        """True when the truncation bias is provably below the sampling error."""
        tb = self.truncation_bias_bound
        return tb != "unknown" and tb < self.ci_halfwidth

    def brackets(self, value: float, tol: float = 1e-12) -> bool:
        """Is ``value`` consistent with the estimate?

        Truncated realizations are subsets of full ones, so truncation can
        only push p_hat down: the upper end is widened by the bound.
        """
        tb = self.truncation_bias_bound
        high = math.inf if tb == "unknown" else self.ci_high + tb
        return self.ci_low - tol <= value <= high + tol

    def to_json(self) -> dict:
        return {"set": _describe(self.set), "p_hat": self.p_hat,
                "ci": [self.ci_low, self.ci_high], "ci_halfwidth": self.ci_halfwidth,
                "level": self.level, "truncation_bias_bound": self.truncation_bias_bound,
                "decided": self.decided, "n_samples": self.n_samples, "depth": self.depth}


def _estimate(a, hits: int, n: int, depth: int, bound, level: float) -> HittingEstimate:
    lo, hi = wilson_interval(hits, n, level)
    return HittingEstimate(a, hits / n, lo, hi, n, depth, bound, level)


def _tail_bound(model, a, depth: int):
    try:
        return float(model.tail_bound(a, depth))
    except (AttributeError, ValueError, NotImplementedError):
        return "unknown"


def estimate_from_batch(model, batch: SampleBatch, a: IntervalSet, level: float = LEVEL) -> HittingEstimate:
    hits = int(batch.hits(a).sum()) if not a.is_empty() else 0
    return _estimate(a, hits, batch.n, batch.depth, _tail_bound(model, a, batch.depth), level)


def estimate_hitting(model, a, n_samples: int, depth: int, seed: int, level: float = LEVEL,
                     threads: int = 1) -> HittingEstimate:
    """Fraction of seeded replicates meeting ``a``, with a Wilson interval."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if isinstance(model, ExactHitting):
        return model.estimate(a, n_samples, seed, level)
    batch = sample_batch(model, n_samples, depth, seed, threads)
    return estimate_from_batch(model, batch, a, level)


def hits_up_to(batch: SampleBatch, a: IntervalSet, depth: int) -> np.ndarray:
    """Hit indicators of the same replicates truncated to their first ``depth`` components."""
    keep = batch.component < depth
    inside = keep & (a.contains(batch.points) if batch.points.size else np.zeros(0, dtype=bool))
    return np.bincount(batch.owner[inside], minlength=batch.n) > 0


# -- exact discrete hitting functions -----------------------------------------------

class ExactHitting:
    """Law of a random subset of S = {0, ..., m-1} as outcome probabilities.

    Outcome ω is the subset with bitmask ω; T(A) sums the probabilities of
    the outcomes meeting A with a correctly rounded sum, so exact set
    identities between hit events give bitwise equal values.
    """

    def __init__(self, m: int, probs: Sequence[float]):
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (1 << m,):
            raise ValueError(f"need {1 << m} outcome probabilities, got shape {probs.shape}")
        if (probs < 0).any():
            raise ValueError("outcome probabilities must be nonnegative")
        total = math.fsum(probs)
        if abs(total - 1.0) > EXACT_SUM_TOL:
            raise ValueError(f"outcome probabilities sum to {total!r}, not 1")
        self.m = m
        self.probs = probs
        self._outcomes = np.arange(1 << m, dtype=np.int64)
        self._cache: dict[int, float] = {}

    @classmethod
    def independent(cls, inclusion: Sequence[float]) -> "ExactHitting":
        """Each point i present independently with probability inclusion[i]."""
        p = np.asarray(inclusion, dtype=float)
        if ((p < 0) | (p > 1)).any():
            raise ValueError("inclusion probabilities must lie in [0, 1]")
        m = p.size
        outcomes = np.arange(1 << m)
        probs = np.ones(1 << m)
        for i in range(m):
            bit = (outcomes >> i) & 1
            probs *= np.where(bit == 1, p[i], 1 - p[i])
        return cls(m, probs)

    @classmethod
    def random(cls, m: int, seed: int, sparsity: float = 0.5) -> "ExactHitting":
        """Random law with roughly ``sparsity`` of the outcomes charged."""
        rng = substream(seed, m, 0xE1)
        w = rng.exponential(size=1 << m) * (rng.random(1 << m) < sparsity)
        if w.sum() == 0:
            w[rng.integers(1 << m)] = 1.0
        return cls(m, w / w.sum())

    def _mask(self, a) -> int:
        if isinstance(a, DiscreteSet):
            if a.m != self.m:
                raise ValueError("set lives on a different finite space")
            return a.mask
        return int(a)

    def __call__(self, a) -> float:
        return self.evaluate(a)

    def evaluate(self, a) -> float:
        mask = self._mask(a)
        val = self._cache.get(mask)
        if val is None:
            val = math.fsum(self.probs[(self._outcomes & mask) != 0]) if mask else 0.0
            val = min(val, 1.0)  # weights may sum to 1 + ulp
            self._cache[mask] = val
        return val

    def sample(self, n: int, seed: int) -> np.ndarray:
        """``n`` outcome masks."""
        rng = substream(check_seed(seed), self.m, 0xE2)
        return rng.choice(self._outcomes, size=n, p=self.probs / self.probs.sum())

    def estimate(self, a, n: int, seed: int, level: float = LEVEL) -> HittingEstimate:
        outcomes = self.sample(n, seed)
        hits = int(((outcomes & self._mask(a)) != 0).sum())
        return _estimate(a, hits, n, 0, 0.0, level)


# -- axioms ----------------------------------------------------------------------------

def _value(v) -> tuple[float, float]:
    if isinstance(v, HittingEstimate):
        return v.p_hat, v.slack
    return float(v), 0.0


def _empty_like(a):
    if isinstance(a, DiscreteSet):
        return DiscreteSet(a.m, 0)
    if isinstance(a, IntervalSet):
        return IntervalSet()
    return 0


def _union(a, b):
    if isinstance(a, int):
        return a | b
    return a.as_half_open().union(b.as_half_open()) if isinstance(a, IntervalSet) else a.union(b)


def _subset(a, b) -> bool:
    if isinstance(a, int):
        return a & ~b == 0
    if isinstance(a, IntervalSet):
        return a.as_half_open().issubset(b.as_half_open())
    return a.issubset(b)


def check_axioms(t: Callable, sets: Sequence, chains: Sequence = (), tol: float = 0.0) -> dict:
    """Check T(∅)=0, monotonicity, subadditivity and continuity from below.

    ``t`` maps a set to a probability or to a ``HittingEstimate``; for
    estimates every comparison is allowed the combined slack (CI half-width
    plus truncation bound) of the values involved. ``chains`` holds pairs
    (increasing sets, limit set); the last chain value must come within
    ``tol`` plus slack of T(limit) and never exceed it.
    """
    sets = list(sets)
    memo: dict = {}

    def val(a):
        if a not in memo:
            memo[a] = _value(t(a))
        return memo[a]

    failures: list[dict] = []
    probe = sets[0] if sets else 0
    v0, s0 = val(_empty_like(probe))
    if abs(v0) > s0:
        failures.append({"axiom": "empty", "value": v0})
    n_mono = n_sub = 0
    for i, a in enumerate(sets):
        va, sa = val(a)
        if not -sa <= va <= 1 + sa:
            failures.append({"axiom": "range", "set": _describe(a), "value": va})
        for b in sets[i + 1:]:
            vb, sb = val(b)
            for x, y, vx, vy, sx, sy in ((a, b, va, vb, sa, sb), (b, a, vb, va, sb, sa)):
                if _subset(x, y):
                    n_mono += 1
                    if vx > vy + sx + sy:
                        failures.append({"axiom": "monotone", "sets": [_describe(x), _describe(y)],
                                         "values": [vx, vy]})
            n_sub += 1
            vu, su = val(_union(a, b))
            # the float sum va + vb carries one rounding step
            if vu > va + vb + sa + sb + su + 2 * math.ulp(1.0):
                failures.append({"axiom": "subadditive", "sets": [_describe(a), _describe(b)],
                                 "values": [va, vb, vu]})
    for chain, limit in chains:
        vals = [val(c) for c in chain]
        vl, sl = val(limit)
        for (v1, s1), (v2, s2) in zip(vals, vals[1:]):
            if v1 > v2 + s1 + s2:
                failures.append({"axiom": "chain-monotone", "values": [v1, v2]})
        vlast, slast = vals[-1]
        if vlast > vl + slast + sl or vl - vlast > tol + slast + sl:
            failures.append({"axiom": "continuity-below", "limit": vl, "last": vlast})
    return {"passed": not failures, "failures": failures, "checked": {
        "sets": len(sets), "nested_pairs": n_mono, "union_pairs": n_sub, "chains": len(chains)}}


def continuity_from_above_probe(model, chain: Sequence[IntervalSet], limit: IntervalSet,
                                n_samples: int = 0, depth: int = 1, seed: int = 0,
                                tol: float = 1e-3, level: float = LEVEL) -> dict:
    """Compare T along a decreasing chain with T of its intersection.

    Analytic values decide the verdict: the chain is reported continuous
    when its last value is within ``tol`` of T(limit), and a discontinuity
    witness otherwise. With ``n_samples`` > 0 each set is also estimated
    and every estimate must bracket its analytic value.
    """
    for a, b in zip(chain, chain[1:]):
        if not _subset(b, a):
            raise ValueError("chain must be decreasing")
    analytic = [float(model.hitting(a)) for a in chain]
    t_limit = float(model.hitting(limit))
    gap = analytic[-1] - t_limit
    out: dict = {"analytic": analytic, "limit_value": t_limit, "gap": gap,
                 "continuous": abs(gap) <= tol, "discontinuity_witness": abs(gap) > tol}
    if n_samples > 0:
        batch = sample_batch(model, n_samples, depth, seed)
        ests = [estimate_from_batch(model, batch, a, level) for a in chain]
        out["estimates"] = [e.to_json() for e in ests]
        out["estimates_consistent"] = all(e.brackets(v) for e, v in zip(ests, analytic))
        last = ests[-1]
        out["estimated_gap"] = last.p_hat - t_limit
        out["estimated_gap_within_ci"] = last.ci_low - tol <= t_limit + gap <= last.ci_high + tol
    return out


# -- Rényi identity ---------------------------------------------------------------------

def renyi_verify(model, ring_sets: Sequence[IntervalSet], n_samples: int, seed: int,
                 depth: int = 1000, level: float = LEVEL, threads: int = 1) -> dict:
    """Check P(hit A) = 1 − exp(−μ(A)) on each set against a Wilson interval
    widened by the model's truncation bound."""
    if not model.is_poisson:
        raise ValueError("the avoidance identity needs a Poisson-type model")
    batch = sample_batch(model, n_samples, depth, seed, threads)
    rows = []
    for a in ring_sets:
        est = estimate_from_batch(model, batch, a, level)
        mu = float(model.intensity(a))
        analytic = -math.expm1(-mu) if math.isfinite(mu) else 1.0
        rows.append({**est.to_json(), "mu": mu, "analytic": analytic,
                     "pass": est.brackets(analytic)})
    return {"passed": all(r["pass"] for r in rows), "n_samples": n_samples, "depth": depth,
            "seed": seed, "level": level, "rows": rows}


def renyi_depth_profile(model, a: IntervalSet, depths: Sequence[int], n_samples: int, seed: int) -> dict:
    """Hit frequency of the same replicates truncated at increasing depths."""
    depths = sorted(depths)
    batch = sample_batch(model, n_samples, depths[-1], seed)
    p = [float(hits_up_to(batch, a, d).mean()) for d in depths]
    return {"depths": depths, "p_hat": p, "monotone": all(x <= y for x, y in zip(p, p[1:]))}


# -- inner / outer approximation on a finite space ----------------------------------------

def _closure(family: set[int], op) -> set[int]:
    out = set(family)
    frontier = set(family)
    while frontier:
        new = {op(a, b) for a in frontier for b in out} - out
        out |= new
        frontier = new
    return out


def _atoms(family: Sequence[int], m: int) -> list[int]:
    sig: dict[tuple, int] = {}
    for x in range(m):
        key = tuple((e >> x) & 1 for e in family)
        sig[key] = sig.get(key, 0) | (1 << x)
    return list(sig.values())


def _field_members(atoms: list[int]) -> list[int]:
    out = [0]
    for atom in atoms:
        out += [s | atom for s in out]
    return sorted(out)


def inner_outer_sandwich(t: ExactHitting, e_family: Sequence) -> dict:
    """sup{T(F): F ∈ E_int, F ⊆ A} = T(A) = inf{T(G): G ∈ E_ext, A ⊆ G}.

    E_int is the ∩-closure of the complements of E and E_ext the ∪-closure
    of E. Every set A of the field generated by E is checked, with exact
    equality.
    """
    m = t.m
    full = (1 << m) - 1
    fam = sorted({x.mask if isinstance(x, DiscreteSet) else int(x) for x in e_family})
    e_int = _closure({full & ~e for e in fam}, lambda a, b: a & b)
    e_ext = _closure(set(fam), lambda a, b: a | b)
    pre = {"intersection_stable": is_intersection_stable(fam), "contains_empty": 0 in fam,
           "inner_generates": all(is_union_of(e, e_int) for e in fam)}
    targets = _field_members(_atoms(fam, m))
    rows, failures = [], 0
    for a in targets:
        inner = [t(f) for f in e_int if f & ~a == 0]
        outer = [t(g) for g in e_ext if a & ~g == 0]
        sup = max(inner, default=0.0)
        inf = min(outer, default=1.0)
        ta = t(a)
        ok = sup == ta == inf
        failures += not ok
        rows.append({"set": a, "sup_inner": sup, "T": ta, "inf_outer": inf, "equal": ok})
    return {"preconditions": pre, "preconditions_ok": all(pre.values()),
            "inner_size": len(e_int), "outer_size": len(e_ext), "sets_checked": len(targets),
            "failures": failures, "passed": failures == 0, "rows": rows}


def interval_semiring(m: int) -> list[int]:
    """∅ and the runs {i, ..., j} of consecutive points of {0, ..., m-1}."""
    out = [0]
    for i in range(m):
        for j in range(i, m):
            out.append(((1 << (j + 1)) - 1) & ~((1 << i) - 1))
    return out


# -- constructive models: T on open sets from closed subsets ----------------------------------

def closed_exhaustion(a: IntervalSet, k: int) -> IntervalSet:
    """k-th closed inner approximation of ``a``.

    Each component is shrunk by width·2**-k at every endpoint it excludes;
    closed sets are returned unchanged.
    """
    if a.kind == CLOSED:
        return a
    out = []
    for lo, hi in a.components:
        width = hi - lo
        if not math.isfinite(width):
            raise ValueError("exhaustion needs bounded components")
        delta = width * 2.0 ** -k
        left = lo + delta if a.kind == OPEN else lo
        right = hi - delta
        if left <= right:
            out.append((left, right))
    return IntervalSet(tuple(out), CLOSED)


def constructive_sup_representation(model, a: IntervalSet, levels: int = 48, tol: float = 1e-9) -> dict:
    """T(a) against T over an increasing exhaustion of ``a`` by closed sets."""
    if a.kind not in (HALF_OPEN, OPEN, CLOSED):
        raise ValueError("unknown interval kind")
    sets = [closed_exhaustion(a, k) for k in range(1, levels + 1)]
    values = [float(model.hitting(f)) for f in sets]
    target = float(model.hitting(a))
    sup = max(values)
    return {"target": target, "values": values, "sup": sup, "gap": target - sup,
            "monotone": all(x <= y for x, y in zip(values, values[1:])),
            "attained": any(v == target for v in values),
            "converged": abs(target - sup) <= tol and sup <= target + tol}
