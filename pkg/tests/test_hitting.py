import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import optimize, stats

from crsets.hitting import (ExactHitting, HittingEstimate, check_axioms, closed_exhaustion,
                            constructive_sup_representation, continuity_from_above_probe,
                            estimate_hitting, hits_up_to, inner_outer_sandwich, interval_semiring,
                            renyi_depth_profile, renyi_verify, wilson_interval)
from crsets.models import example1_model, example2_model, lebesgue_model, sample_batch
from crsets.setalg import CLOSED, DiscreteSet, IntervalSet, dyadic_sets


def score_interval_by_roots(k, n, level):
    """Wilson interval as the set {p : |k/n - p| <= z sqrt(p(1-p)/n)}, found by root search."""
    z = stats.norm.ppf(0.5 + level / 2)
    phat = k / n

    def g(p):
        return abs(phat - p) - z * math.sqrt(p * (1 - p) / n)

    # g < 0 just beside phat, g > 0 at the far end of [0, 1]
    inner_lo = phat - 1e-15 if k == n else phat
    inner_hi = phat + 1e-300 if k == 0 else phat
    lo = 0.0 if k == 0 else optimize.brentq(g, 0.0, inner_lo, xtol=1e-15)
    hi = 1.0 if k == n else optimize.brentq(g, inner_hi, 1.0, xtol=1e-15)
    return lo, hi


@given(st.integers(1, 5000).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))),
       st.sampled_from([0.9, 0.95, 0.99]))
def test_wilson_matches_root_oracle(kn, level):
    k, n = kn
    lo, hi = wilson_interval(k, n, level)
    rlo, rhi = score_interval_by_roots(k, n, level)
    assert lo == pytest.approx(rlo, abs=1e-9) and hi == pytest.approx(rhi, abs=1e-9)
    assert lo <= k / n <= hi


def test_wilson_frozen_value():
    lo, hi = wilson_interval(50, 100, 0.95)
    # centre 1/2, half-width z sqrt(1/400 + z²/40000) / (1 + z²/100) by hand
    assert lo == pytest.approx(0.4038314, abs=1e-6)
    assert hi == pytest.approx(0.5961686, abs=1e-6)


def test_estimate_validation():
    with pytest.raises(ValueError):
        HittingEstimate(None, 1.5, 0, 1, 10, 1)
    with pytest.raises(ValueError):
        HittingEstimate(None, 0.5, 0, 1, 10, 1, truncation_bias_bound=-0.1)


def test_brackets_widen_upwards_only():
    e = HittingEstimate(None, 0.5, 0.45, 0.55, 1000, 3, 0.1)
    assert e.brackets(0.64) and not e.brackets(0.66)
    assert not e.brackets(0.4)
    unknown = HittingEstimate(None, 0.5, 0.45, 0.55, 1000, 3)
    assert unknown.brackets(0.99) and not unknown.decided and math.isinf(unknown.slack)


def test_estimate_hitting_lebesgue():
    a = IntervalSet.of((0, 0.5))
    est = estimate_hitting(lebesgue_model(), a, 20_000, 1, seed=2)
    assert est.truncation_bias_bound == 0.0 and est.decided
    assert est.brackets(1 - math.exp(-0.5))


def test_estimate_is_deterministic():
    a = IntervalSet.of((0.2, 0.4))
    m = example1_model()
    assert estimate_hitting(m, a, 5000, 30, seed=9) == estimate_hitting(m, a, 5000, 30, seed=9, threads=3)


# -- exact discrete laws ---------------------------------------------------------------------

inclusions = st.lists(st.floats(0, 1), min_size=1, max_size=6)


@given(inclusions, st.data())
def test_exact_independent_matches_product_formula(p, data):
    t = ExactHitting.independent(p)
    a = data.draw(st.integers(0, (1 << len(p)) - 1))
    miss = math.prod(1 - p[i] for i in range(len(p)) if a >> i & 1)
    assert t(a) == pytest.approx(1 - miss, abs=1e-12)


def test_exact_rejects_bad_laws():
    with pytest.raises(ValueError):
        ExactHitting(2, [0.5, 0.5, 0.5, 0.5])
    with pytest.raises(ValueError):
        ExactHitting(1, [1.5, -0.5])
    with pytest.raises(ValueError):
        ExactHitting(2, [1.0, 0.0])
    with pytest.raises(ValueError):
        ExactHitting(2, [1, 0, 0, 0])(DiscreteSet(3, 1))


def test_exact_sampling_agrees_with_values():
    t = ExactHitting.random(4, seed=3)
    for a in (1, 6, 15):
        est = t.estimate(a, 20_000, seed=4)
        assert est.brackets(t(a))


@given(st.integers(1, 5), st.integers(0, 10 ** 6))
def test_exact_laws_satisfy_axioms(m, seed):
    t = ExactHitting.random(m, seed)
    sets = list(range(1 << m))
    chain = [(1 << j) - 1 for j in range(1, m + 1)]
    rep = check_axioms(t, sets, chains=[(chain, chain[-1])])
    assert rep["passed"], rep["failures"]


def test_axioms_catch_bad_functions():
    bad_mono = check_axioms(lambda a: 0.0 if a == 3 else 0.5 * (a != 0), [1, 2, 3])
    assert any(f["axiom"] == "monotone" for f in bad_mono["failures"])
    bad_sub = check_axioms(lambda a: {0: 0.0, 1: 0.1, 2: 0.1, 3: 0.9}[a], [1, 2, 3])
    assert any(f["axiom"] == "subadditive" for f in bad_sub["failures"])
    bad_empty = check_axioms(lambda a: 0.2, [1])
    assert any(f["axiom"] == "empty" for f in bad_empty["failures"])


def test_axioms_on_estimates():
    m = lebesgue_model()
    batch = sample_batch(m, 20_000, 1, seed=6)
    from crsets.hitting import estimate_from_batch
    sets = dyadic_sets(14)
    rep = check_axioms(lambda a: estimate_from_batch(m, batch, a), sets)
    assert rep["passed"], rep["failures"]


# -- inner / outer approximation --------------------------------------------------------------

def test_interval_semiring_small():
    assert sorted(interval_semiring(2)) == [0, 1, 2, 3]
    assert len(interval_semiring(5)) == 16


def test_sandwich_m5_all_sets():
    t = ExactHitting.random(5, seed=1)
    rep = inner_outer_sandwich(t, interval_semiring(5))
    assert rep["preconditions_ok"] and rep["sets_checked"] == 32 and rep["passed"]


@given(st.integers(1, 5), st.integers(0, 10 ** 6))
def test_sandwich_random_laws(m, seed):
    rep = inner_outer_sandwich(ExactHitting.random(m, seed, sparsity=0.7), interval_semiring(m))
    assert rep["passed"]


def test_sandwich_reports_failed_preconditions():
    # E = {∅, {0,1}} on three points: the field has 4 sets, but the
    # complement class cannot rebuild {0,1}, and {2} has no inner witness
    rep = inner_outer_sandwich(ExactHitting.random(3, seed=2), [0, 3])
    assert rep["sets_checked"] == 4
    assert not rep["preconditions"]["inner_generates"] and not rep["passed"]


# -- continuity -----------------------------------------------------------------------------------

def test_continuity_from_above_finite_intensity():
    chain = [IntervalSet.of((0, 1 / n)) for n in range(1, 10_001, 100)] + [IntervalSet.of((0, 1e-4))]
    rep = continuity_from_above_probe(lebesgue_model(), chain, IntervalSet(), n_samples=20_000, seed=1)
    assert rep["continuous"] and not rep["discontinuity_witness"]
    assert rep["estimates_consistent"]


def test_continuity_from_above_fails_for_example1():
    chain = [IntervalSet.open((0, 1 / n)) for n in range(1, 200)]
    rep = continuity_from_above_probe(example1_model(), chain, IntervalSet())
    assert rep["discontinuity_witness"] and rep["gap"] == 1.0


def test_continuity_probe_rejects_increasing_chain():
    with pytest.raises(ValueError):
        continuity_from_above_probe(lebesgue_model(), [IntervalSet.of((0, 0.1)), IntervalSet.of((0, 0.2))],
                                    IntervalSet())


# -- Rényi ---------------------------------------------------------------------------------------------

def test_renyi_on_lebesgue():
    rep = renyi_verify(lebesgue_model(), dyadic_sets(20), 20_000, seed=3, depth=1)
    assert rep["passed"]
    assert rep["rows"][0]["analytic"] == pytest.approx(1 - math.exp(-0.5))


def test_renyi_example1_truncated():
    rep = renyi_verify(example1_model(), [IntervalSet.of((0.25, 0.5)), IntervalSet.of((0.1, 0.2))],
                       20_000, seed=4, depth=200)
    assert rep["passed"]


def test_renyi_rejects_non_poisson():
    from crsets.models import binomial_model
    with pytest.raises(ValueError):
        renyi_verify(binomial_model(1), dyadic_sets(2), 100, seed=0)


def test_depth_profile_monotone():
    rep = renyi_depth_profile(example1_model(), IntervalSet.of((0.05, 0.1)), [1, 5, 20, 100], 5000, seed=5)
    assert rep["monotone"] and rep["p_hat"][-1] > rep["p_hat"][0]


def test_hits_up_to_full_depth_equals_hits():
    b = sample_batch(example2_model(), 1000, 50, seed=6)
    a = IntervalSet.of((0, 1))
    assert np.array_equal(hits_up_to(b, a, 50), b.hits(a))


# -- closed exhaustion ----------------------------------------------------------------------------------

@given(st.integers(-20, 20), st.integers(1, 20), st.integers(1, 30))
def test_closed_exhaustion_nested_inside(lo, w, k):
    a = IntervalSet.open((lo / 4, (lo + w) / 4))
    f, g = closed_exhaustion(a, k), closed_exhaustion(a, k + 1)
    assert f.kind == CLOSED
    assert all(a.contains(np.array([x, y])).all() for x, y in f.components)
    assert all(gx <= fx and fy <= gy for (fx, fy), (gx, gy) in zip(f.components, g.components))


@pytest.mark.parametrize("model, a", [
    (lebesgue_model(), IntervalSet.open((0.2, 0.7))),
    (lebesgue_model(), IntervalSet.of((0.2, 0.7))),
    (example1_model(), IntervalSet.open((0.3, 0.9)))])
def test_sup_over_closed_subsets(model, a):
    rep = constructive_sup_representation(model, a)
    assert rep["converged"] and rep["monotone"]
