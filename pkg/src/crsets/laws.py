"""Statistical comparison of laws of cr-sets.

Joint count distributions, hitting probabilities on a ring, closed-set and
G_δ agreement, recovery of the intensity from the hitting function, the
independent-increments characterisation of Poisson processes, and the
split of a window into a σ-finite part and its complement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special, stats

from .hitting import HittingEstimate, estimate_from_batch
from .models import SampleBatch, detect_infinite, harmonic_threshold, sample_batch
from .rng import derive_seed
from .setalg import IntervalSet

ALPHA = 0.01
MIN_EXPECTED = 5.0


@dataclass(frozen=True)
class FidiSpec:
    """Sets A_1..A_n and the cap c above which counts are pooled."""

    sets: tuple
    cap: int = 3

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(self.sets))
        if not self.sets:
            raise ValueError("a fidi spec needs at least one set")
        if self.cap < 1:
            raise ValueError("count cap must be >= 1")

    def categories(self, counts: np.ndarray) -> np.ndarray:
        """Mixed-radix code of the capped count vector of each replicate."""
        capped = np.minimum(np.asarray(counts, dtype=np.int64), self.cap)
        radix = self.cap + 1
        return capped @ (radix ** np.arange(capped.shape[1], dtype=np.int64))


def _counts(samples, sets) -> np.ndarray:
    if isinstance(samples, SampleBatch):
        return samples.count_matrix(list(sets))
    arr = np.asarray(samples)
    return arr[:, None] if arr.ndim == 1 else arr


def _pool_rare(table: np.ndarray) -> np.ndarray:
    """Merge columns of a 2-row table whose expected cell counts fall below 5.

    Columns are sorted by total; every rare column goes into one pooled bin,
    which takes further columns until it is large enough itself. The result
    depends only on column totals, so swapping the rows never changes it.
    """
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] <= 1:
        return table
    rows = table.sum(axis=1, keepdims=True)
    grand = rows.sum()
    order = np.argsort(table.sum(axis=0), kind="stable")
    table = table[:, order]
    col = table.sum(axis=0)
    exp_min = col * rows.min() / grand
    k = int((exp_min < MIN_EXPECTED).sum())
    if k == 0:
        return table
    while k < table.shape[1] and exp_min[:k].sum() < MIN_EXPECTED:
        k += 1
    pooled = table[:, :k].sum(axis=1, keepdims=True)
    return np.hstack([pooled, table[:, k:]])


def chi2_homogeneity(x1: np.ndarray, x2: np.ndarray) -> dict:
    """Two-sample chi-square test on category labels."""
    labels, inv = np.unique(np.concatenate([x1, x2]), return_inverse=True)
    table = np.zeros((2, labels.size), dtype=float)
    np.add.at(table[0], inv[: x1.size], 1)
    np.add.at(table[1], inv[x1.size:], 1)
    table = _pool_rare(table)
    if table.shape[1] <= 1:
        return {"statistic": 0.0, "df": 0, "p_value": 1.0, "bins": int(table.shape[1])}
    expected = table.sum(axis=1, keepdims=True) * table.sum(axis=0, keepdims=True) / table.sum()
    stat = float(((table - expected) ** 2 / expected).sum())
    df = table.shape[1] - 1
    return {"statistic": stat, "df": df, "p_value": float(stats.chi2.sf(stat, df)),
            "bins": int(table.shape[1])}


def fidi_compare(samples1, samples2, spec: FidiSpec, alpha: float = ALPHA) -> dict:
    """Compare the joint law of capped counts (N_A1 ∧ c, ..., N_An ∧ c).

    ``samples`` are sample batches or (replicates × sets) count matrices.
    """
    c1 = spec.categories(_counts(samples1, spec.sets))
    c2 = spec.categories(_counts(samples2, spec.sets))
    if c1.size == 0 or c2.size == 0:
        raise ValueError("both samples must be nonempty")
    test = chi2_homogeneity(c1, c2)
    return {**test, "alpha": alpha, "pass": test["p_value"] >= alpha,
            "n1": int(c1.size), "n2": int(c2.size), "cap": spec.cap, "n_sets": len(spec.sets)}


def two_proportion_pvalue(k1: int, n1: int, k2: int, n2: int) -> float:
    p = (k1 + k2) / (n1 + n2)
    if p in (0.0, 1.0):
        return 1.0
    se = math.sqrt(p * (1 - p) * (1 / n1 + 1 / n2))
    z = (k1 / n1 - k2 / n2) / se
    return float(2 * stats.norm.sf(abs(z)))


def _model_seeds(seed: int) -> tuple[int, int]:
    return derive_seed(seed, 1), derive_seed(seed, 2)


def _hit_rows(model1, model2, b1: SampleBatch, b2: SampleBatch, sets, alpha_each: float) -> list[dict]:
    rows = []
    for a in sets:
        e1 = estimate_from_batch(model1, b1, a)
        e2 = estimate_from_batch(model2, b2, a)
        k1, k2 = round(e1.p_hat * b1.n), round(e2.p_hat * b2.n)
        pv = two_proportion_pvalue(k1, b1.n, k2, b2.n)
        tb = sum(e.truncation_bias_bound for e in (e1, e2) if e.truncation_bias_bound != "unknown")
        unknown = "unknown" in (e1.truncation_bias_bound, e2.truncation_bias_bound)
        # a difference explained by truncation alone is not evidence against equality
        up1 = e1.ci_high + (0.0 if e1.truncation_bias_bound == "unknown" else e1.truncation_bias_bound)
        up2 = e2.ci_high + (0.0 if e2.truncation_bias_bound == "unknown" else e2.truncation_bias_bound)
        overlap = e1.ci_low <= up2 and e2.ci_low <= up1
        rows.append({"set": a.to_json(), "p1": e1.p_hat, "p2": e2.p_hat, "ci1": [e1.ci_low, e1.ci_high],
                     "ci2": [e2.ci_low, e2.ci_high], "p_value": pv, "truncation_allowance": tb,
                     "pass": bool(pv >= alpha_each or unknown or (tb > 0 and overlap))})
    return rows


def hitting_compare_on_ring(model1, model2, ring_sets: Sequence[IntervalSet], n: int, depth: int,
                            seed: int, alpha: float = ALPHA, batches=None) -> dict:
    """Per-set two-proportion tests of P(hit A), Bonferroni-corrected."""
    if batches is None:
        s1, s2 = _model_seeds(seed)
        batches = (sample_batch(model1, n, depth, s1), sample_batch(model2, n, depth, s2))
    rows = _hit_rows(model1, model2, *batches, ring_sets, alpha / max(1, len(ring_sets)))
    return {"pass": all(r["pass"] for r in rows), "alpha": alpha, "n": n, "depth": depth,
            "seed": seed, "rows": rows}


def uniqueness_check(model1, model2, ring_sets: Sequence[IntervalSet], spec: FidiSpec, n: int,
                     depth: int, seed: int, alpha: float = ALPHA) -> dict:
    """Ring hitting agreement and fidi agreement in one Bonferroni family."""
    s1, s2 = _model_seeds(seed)
    b1, b2 = sample_batch(model1, n, depth, s1), sample_batch(model2, n, depth, s2)
    k = len(ring_sets) + 1
    ring = _hit_rows(model1, model2, b1, b2, ring_sets, alpha / k)
    fidi = fidi_compare(b1, b2, spec, alpha / k)
    ok = all(r["pass"] for r in ring) and fidi["pass"]
    return {"pass": ok, "alpha": alpha, "tests": k, "seed": seed, "ring": ring, "fidi": fidi}


def closed_set_compare(model1, model2, closed_sets: Sequence[IntervalSet],
                       gdelta_chains: Sequence[Sequence[IntervalSet]], probe_sets: Sequence[IntervalSet],
                       fidi: FidiSpec, n: int, depth: int, seed: int, alpha: float = ALPHA,
                       tol: float = 1e-9) -> dict:
    """Closed-set, null-transfer and G_δ agreement of two constructive models,
    followed by an empirical fidi comparison.

    Parts (a)-(c) use the analytic hitting functions; (a) is additionally
    tested on samples.
    """
    t1, t2 = model1.hitting, model2.hitting
    part_a = [{"set": f.to_json(), "T1": t1(f), "T2": t2(f)} for f in closed_sets]
    for r in part_a:
        r["pass"] = abs(r["T1"] - r["T2"]) <= tol
    part_b = []
    for a in probe_sets:
        v1, v2 = t1(a), t2(a)
        part_b.append({"set": a.to_json(), "T1": v1, "T2": v2,
                       "pass": (v1 == 0.0) == (v2 == 0.0)})
    part_c = []
    for chain in gdelta_chains:
        v1 = [t1(g) for g in chain]
        v2 = [t2(g) for g in chain]
        part_c.append({"chain": [g.to_json() for g in chain], "T1": v1, "T2": v2,
                       "pass": all(abs(x - y) <= tol for x, y in zip(v1, v2))})
    s1, s2 = _model_seeds(seed)
    b1, b2 = sample_batch(model1, n, depth, s1), sample_batch(model2, n, depth, s2)
    tests = len(closed_sets) + 1
    sampled = _hit_rows(model1, model2, b1, b2, closed_sets, alpha / tests)
    fid = fidi_compare(b1, b2, fidi, alpha / tests)
    tail = max((m.tail_bound(a, depth) for m in (model1, model2) for a in fidi.sets), default=0.0)
    fid["max_truncation_bound"] = tail
    ok = (all(r["pass"] for r in part_a + part_b + part_c + sampled) and fid["pass"])
    return {"pass": ok, "closed": part_a, "null_transfer": part_b, "gdelta": part_c,
            "closed_sampled": sampled, "fidi": fid, "seed": seed, "n": n, "depth": depth}


# -- intensity from the hitting function --------------------------------------------------

def _neglog1m(t: float) -> float:
    return math.inf if t >= 1.0 else -math.log1p(-t)


@dataclass(frozen=True)
class MassEstimate:
    mass: float
    low: float
    high: float

    @property
    def infinite(self) -> bool:
        return math.isinf(self.mass)

    @property
    def halfwidth(self) -> float:
        return (self.high - self.low) / 2

    def to_json(self) -> dict:
        # JSON has no infinity; the flag carries it
        def fin(v):
            return v if math.isfinite(v) else None
        return {"mass": fin(self.mass), "infinite": self.infinite, "interval": [fin(self.low), fin(self.high)]}


def mass_from_hitting(value) -> MassEstimate:
    """μ̂ = −log(1 − T), with the image of the CI when T is an estimate."""
    if isinstance(value, HittingEstimate):
        tb = value.truncation_bias_bound
        hi = 1.0 if tb == "unknown" else min(1.0, value.ci_high + tb)
        return MassEstimate(_neglog1m(value.p_hat), _neglog1m(value.ci_low), _neglog1m(hi))
    v = float(value)
    m = _neglog1m(v)
    return MassEstimate(m, m, m)


def recover_intensity(t: Callable, sets: Sequence, pairs: Sequence[tuple] = (), tol: float = 1e-9) -> dict:
    """Masses μ̂(A) = −log(1 − T(A)) and additivity on disjoint pairs.

    ``pairs`` holds (A, B) with A ∩ B = ∅; μ̂(A) + μ̂(B) must equal
    μ̂(A ∪ B) within the sum of the three interval half-widths (plus
    ``tol`` for exact T). Infinite masses must match: μ̂(A ∪ B) = ∞ iff one
    of the parts is infinite.
    """
    masses = [(a, mass_from_hitting(t(a))) for a in sets]
    rows = []
    for a, b in pairs:
        if not a.isdisjoint(b):
            raise ValueError("additivity pairs must be disjoint")
        ma, mb, mu = (mass_from_hitting(t(x)) for x in (a, b, a.union(b)))
        if ma.infinite or mb.infinite or mu.infinite:
            ok = mu.infinite == (ma.infinite or mb.infinite)
            err = allow = None
        else:
            err = ma.mass + mb.mass - mu.mass
            allow = ma.halfwidth + mb.halfwidth + mu.halfwidth + tol
            ok = abs(err) <= allow
        rows.append({"pair": [a.to_json(), b.to_json()], "mu_a": ma.to_json(), "mu_b": mb.to_json(),
                     "mu_union": mu.to_json(), "error": err, "allowance": allow, "pass": bool(ok)})
    return {"masses": [{"set": a.to_json(), **m.to_json()} for a, m in masses],
            "additivity": rows, "pass": all(r["pass"] for r in rows)}


# -- independent increments and Poisson counts ----------------------------------------------

def _pooled_independence(x: np.ndarray, y: np.ndarray) -> dict:
    """Chi-square independence test of two count columns, tail bins pooled.

    Caps grow one at a time, as long as every expected cell of the capped
    table stays at or above 5.
    """
    n = x.size

    def margin(v, c):
        return np.bincount(np.minimum(v, c), minlength=c + 1)

    def adequate(cx, cy):
        return margin(x, cx).min() * margin(y, cy).min() / n >= MIN_EXPECTED

    cx = cy = 0
    grown = True
    while grown:
        grown = False
        if cx < x.max() and adequate(cx + 1, max(cy, 1)):
            cx, grown = cx + 1, True
        if cy < y.max() and adequate(max(cx, 1), cy + 1):
            cy, grown = cy + 1, True
    if cx == 0 or cy == 0:
        return {"statistic": 0.0, "df": 0, "p_value": 1.0}
    table = np.zeros((cx + 1, cy + 1))
    np.add.at(table, (np.minimum(x, cx), np.minimum(y, cy)), 1)
    stat, p, df, _ = stats.chi2_contingency(table, correction=False)
    return {"statistic": float(stat), "df": int(df), "p_value": float(p)}


_TWO_PHI0 = 2 / math.sqrt(2 * math.pi)


def weighted_chi2_sf(x: float, weights: Sequence[float]) -> float:
    """P(Σ w_j Z_j² > x) for independent standard normals Z_j.

    Unit weights collapse into one χ²_r term; each remaining weight w adds
    an integral over its normal variable, E[sf(x − w Z²)].
    """
    w = [float(v) for v in weights if v > 1e-12]
    r = sum(1 for v in w if abs(v - 1) < 1e-9)
    others = [v for v in w if abs(v - 1) >= 1e-9]

    def sf(y: float, rest: list[float]) -> float:
        if y <= 0:
            return 1.0
        if not rest:
            return float(special.chdtrc(r, y)) if r else 0.0
        w0, tail = rest[0], rest[1:]
        top = math.sqrt(y / w0)
        inner, _ = integrate.quad(lambda z: sf(y - w0 * z * z, tail) * _TWO_PHI0 * math.exp(-z * z / 2), 0, top)
        return inner + math.erfc(top / math.sqrt(2))

    return float(min(1.0, max(0.0, sf(x, others))))


def poisson_gof(counts: np.ndarray) -> dict:
    """Chi-square fit of counts to Poisson with mean −log(1 − P(count > 0)).

    That mean is a function of the zero-bin frequency alone, not the
    minimum chi-square estimate, so the statistic is not χ²(bins − 2).
    Its asymptotic law Σ w_j χ²_1 follows from the delta method; the
    p-value comes from that law.
    """
    n = counts.size
    p_hit = float((counts > 0).mean())
    lam = _neglog1m(p_hit)
    if p_hit == 0.0:
        return {"lambda": 0.0, "statistic": 0.0, "df": 0, "p_value": 1.0}
    if math.isinf(lam):
        return {"lambda": None, "statistic": math.inf, "df": 0, "p_value": 0.0}
    # bins 0..c-1 and a tail bin, each with expected count >= 5
    c = 1
    while n * stats.poisson.sf(c, lam) >= MIN_EXPECTED:
        c += 1
    probs = np.append(stats.poisson.pmf(np.arange(c), lam), stats.poisson.sf(c - 1, lam))
    observed = np.bincount(np.minimum(counts, c), minlength=c + 1).astype(float)
    expected = n * probs
    if c < 2:
        return {"lambda": lam, "statistic": 0.0, "df": 0, "p_value": 1.0}
    stat = float(((observed - expected) ** 2 / expected).sum())
    # d probs / d λ, and the linearisation of p̂ − p(λ̂) in p̂ − p(λ)
    k = np.arange(c)
    dp = np.append(probs[:c] * (k / lam - 1), stats.poisson.pmf(c - 1, lam))
    lin = np.eye(c + 1)
    lin[:, 0] += dp / probs[0]
    cov = np.diag(probs) - np.outer(probs, probs)
    scale = 1 / np.sqrt(probs)
    m = scale[:, None] * (lin @ cov @ lin.T) * scale[None, :]
    weights = np.linalg.eigvalsh((m + m.T) / 2)
    return {"lambda": lam, "statistic": stat, "df": c - 1, "weights": [float(v) for v in weights if v > 1e-12],
            "p_value": weighted_chi2_sf(stat, weights)}


def independent_increments_poisson_check(samples, sets: Sequence[IntervalSet], alpha: float = ALPHA) -> dict:
    """Pairwise independence of counts on disjoint sets plus Poisson fits.

    All tests form one Bonferroni family at level ``alpha``.
    """
    for i, a in enumerate(sets):
        for b in sets[i + 1:]:
            if not a.isdisjoint(b):
                raise ValueError("sets must be pairwise disjoint")
    counts = _counts(samples, sets)
    k = counts.shape[1]
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    n_tests = len(pairs) + k
    each = alpha / n_tests
    indep = []
    for i, j in pairs:
        r = _pooled_independence(counts[:, i], counts[:, j])
        indep.append({"sets": [i, j], **r, "pass": r["p_value"] >= each})
    gof = []
    for i in range(k):
        r = poisson_gof(counts[:, i])
        gof.append({"set": sets[i].to_json(), **r, "pass": r["p_value"] >= each})
    ok_i = all(r["pass"] for r in indep)
    ok_g = all(r["pass"] for r in gof)
    return {"pass": ok_i and ok_g, "independence_pass": ok_i, "poisson_pass": ok_g,
            "alpha": alpha, "tests": n_tests, "independence": indep, "poisson": gof}


def chi2_power(effect_w2: float, n: int, df: int, alpha: float) -> float:
    """Power of a chi-square test with Cohen effect size w² at ``n`` samples."""
    crit = stats.chi2.isf(alpha, df)
    return float(stats.ncx2.sf(crit, df, n * effect_w2))


def independence_power(joint: np.ndarray, n: int, alpha: float) -> float:
    """Power of the chi-square independence test against a joint count law."""
    joint = np.asarray(joint, dtype=float)
    joint = joint / joint.sum()
    outer = joint.sum(axis=1, keepdims=True) * joint.sum(axis=0, keepdims=True)
    keep = outer > 0
    w2 = float(((joint - outer)[keep] ** 2 / outer[keep]).sum())
    df = (joint.shape[0] - 1) * (joint.shape[1] - 1)
    return chi2_power(w2, n, df, alpha)


# -- decomposition into a σ-finite part ---------------------------------------------------------

NULL, SIGMA_FINITE, INFINITE = "null", "sigma-finite", "infinite-mass"


@dataclass
class DecompositionReport:
    cells: list
    classes: list
    f_set: IntervalSet
    residual: list = field(default_factory=list)
    method: str = "analytic"
    detector: dict | None = None

    @property
    def f_cells(self) -> list:
        return [c for c, k in zip(self.cells, self.classes) if k != INFINITE]

    @property
    def residual_ok(self) -> bool:
        return all(r["pass"] for r in self.residual)

    def to_json(self) -> dict:
        return {"method": self.method, "F": self.f_set.to_json(),
                "cells": [{"cell": c.to_json(), "class": k} for c, k in zip(self.cells, self.classes)],
                "residual": self.residual, "residual_ok": self.residual_ok, "detector": self.detector}


def grid_cells(lo: float, hi: float, count: int) -> list[IntervalSet]:
    edges = np.linspace(lo, hi, count + 1)
    return [IntervalSet.of((float(a), float(b))) for a, b in zip(edges[:-1], edges[1:])]


def _analytic_class(model, cell: IntervalSet) -> str:
    # P(N = ∞) > 0 forces T > 0 and is much cheaper than T for shifted models
    if model.prob_infinite(cell) > 0.0:
        return INFINITE
    return NULL if model.hitting(cell) == 0.0 else SIGMA_FINITE


def _halves(cell: IntervalSet) -> list[IntervalSet]:
    out = []
    for a, b in cell.components:
        mid = (a + b) / 2
        out += [IntervalSet.of((a, mid)), IntervalSet.of((mid, b))]
    return out


def decompose(model, cells: Sequence[IntervalSet], method: str = "analytic", n: int = 10_000,
              depth: int = 2000, seed: int = 0, min_detections: int = 3) -> DecompositionReport:
    """Split the union of ``cells`` into F and a residual part.

    Cells are classified null (T = 0), infinite-mass (P(N = ∞) > 0) or
    σ-finite. The infinite-mass cells form the greedily chosen disjoint
    family; F is the union of the other cells. Every residual cell and its
    two halves must satisfy the dichotomy T = 0 or P(N = ∞) > 0.

    ``method="detector"`` classifies from samples instead: null when no
    replicate meets the cell, infinite-mass when at least
    ``min_detections`` replicates reach the count threshold at ``depth``.
    It can mistake a large finite count for an infinite one and misses
    P(N = ∞) well below min_detections / n; the report records the
    threshold used.
    """
    cells = list(cells)
    for i, a in enumerate(cells):
        for b in cells[i + 1:]:
            if not a.isdisjoint(b):
                raise ValueError("candidate cells must be pairwise disjoint")
    detector = None
    if method == "analytic":
        def classify(c):
            return _analytic_class(model, c)
    elif method == "detector":
        batch = sample_batch(model, n, depth, seed)
        thr = harmonic_threshold(depth)
        detector = {"threshold": thr, "depth": depth, "n": n, "min_detections": min_detections, "seed": seed}

        def classify(c):
            if not batch.hits(c).any():
                return NULL
            return INFINITE if detect_infinite(batch, c, thr).sum() >= min_detections else SIGMA_FINITE
    else:
        raise ValueError(f"unknown classification method {method!r}")
    classes = [classify(c) for c in cells]
    # greedy disjoint family: on a partition every qualifying cell is taken
    chosen: list[IntervalSet] = []
    for c, k in zip(cells, classes):
        if k == INFINITE and all(c.isdisjoint(d) for d in chosen):
            chosen.append(c)
    f_set = IntervalSet()
    for c, k in zip(cells, classes):
        if k != INFINITE:
            f_set = f_set.union(c)
    residual = []
    for c in chosen:
        sub = [c] + _halves(c)
        verdicts = [classify(s) for s in sub]
        residual.append({"cell": c.to_json(), "classes": verdicts,
                         "pass": all(v in (NULL, INFINITE) for v in verdicts)})
    return DecompositionReport(cells, classes, f_set, residual, method, detector)


def f_difference_is_null(model, r1: DecompositionReport, r2: DecompositionReport) -> dict:
    """Does F change between two runs only on a set the process never hits?"""
    sym = r1.f_set.diff(r2.f_set).union(r2.f_set.diff(r1.f_set))
    t = model.hitting(sym) if not sym.is_empty() else 0.0
    return {"symmetric_difference": sym.to_json(), "T": t, "pass": t == 0.0}
