import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from crsets.hitting import estimate_hitting
from crsets.laws import (INFINITE, NULL, SIGMA_FINITE, FidiSpec, _pool_rare, chi2_homogeneity,
                         closed_set_compare, decompose, f_difference_is_null, fidi_compare,
                         grid_cells, hitting_compare_on_ring, independence_power,
                         independent_increments_poisson_check, mass_from_hitting, poisson_gof,
                         recover_intensity, two_proportion_pvalue, uniqueness_check,
                         weighted_chi2_sf)
from crsets.models import (binomial_model, example1_model, lebesgue_model, mixture_model,
                           sample_batch, split_lebesgue_model)
from crsets.setalg import CLOSED, IntervalSet, dyadic_sets, dyadic_sibling_pairs

SPLIT = [(0, 1, 0.5), (0, 0.5, 0.5), (0.5, 1, 0.5)]
QUARTERS = FidiSpec(dyadic_sets(7)[3:7], cap=3)


# -- tests against scipy's contingency routines ----------------------------------------------

@given(st.integers(0, 10 ** 6))
def test_homogeneity_matches_contingency_without_pooling(seed):
    rng = np.random.default_rng(seed)
    x1, x2 = rng.integers(0, 4, 2000), rng.integers(0, 4, 1500)
    ours = chi2_homogeneity(x1, x2)
    table = np.array([np.bincount(x1, minlength=4), np.bincount(x2, minlength=4)])
    stat, p, df, _ = stats.chi2_contingency(table, correction=False)
    assert ours["df"] == df and ours["statistic"] == pytest.approx(stat) and ours["p_value"] == pytest.approx(p)


@given(st.integers(1, 500), st.integers(1, 500), st.integers(0, 500), st.integers(0, 500))
def test_two_proportion_matches_2x2_chi_square(n1, n2, k1, k2):
    k1, k2 = min(k1, n1), min(k2, n2)
    table = np.array([[k1, n1 - k1], [k2, n2 - k2]])
    if (table.sum(axis=0) == 0).any():
        assert two_proportion_pvalue(k1, n1, k2, n2) == 1.0
        return
    p = stats.chi2_contingency(table, correction=False)[1]
    assert two_proportion_pvalue(k1, n1, k2, n2) == pytest.approx(p, rel=1e-9, abs=1e-300)


@given(st.lists(st.tuples(st.integers(0, 30), st.integers(0, 30)), min_size=1, max_size=12))
def test_pooling_is_row_symmetric_and_adequate(cols):
    table = np.array(cols, dtype=float).T
    a, b = _pool_rare(table), _pool_rare(table[::-1])
    assert np.array_equal(a, b[::-1])
    assert a.sum() == table.sum()
    if a.shape[1] > 1:
        exp = a.sum(axis=1, keepdims=True) * a.sum(axis=0, keepdims=True) / a.sum()
        assert exp.min() >= 5.0 - 1e-9


def test_fidi_spec_validation():
    with pytest.raises(ValueError):
        FidiSpec(())
    with pytest.raises(ValueError):
        FidiSpec(dyadic_sets(1), cap=0)
    spec = FidiSpec(dyadic_sets(2), cap=2)
    assert list(spec.categories(np.array([[0, 0], [5, 1], [2, 2]]))) == [0, 2 + 3, 2 + 6]


# -- comparisons of laws -------------------------------------------------------------------------

def test_fidi_same_law_passes_and_different_fails():
    # the split model has three components, so depth 4 samples it in full
    a1 = sample_batch(lebesgue_model(), 10_000, 4, seed=1)
    a2 = sample_batch(split_lebesgue_model(SPLIT), 10_000, 4, seed=2)
    b = sample_batch(binomial_model(1), 10_000, 4, seed=3)
    assert fidi_compare(a1, a2, QUARTERS)["pass"]
    assert not fidi_compare(a1, b, QUARTERS)["pass"]


def test_fidi_accepts_count_matrices():
    x = np.zeros((10, 2), dtype=int)
    rep = fidi_compare(x, x, FidiSpec(dyadic_sets(2)))
    assert rep["pass"] and rep["df"] == 0


def test_ring_comparison_detects_binomial():
    rep = hitting_compare_on_ring(lebesgue_model(), binomial_model(1), dyadic_sets(6), 10_000, 4, seed=0)
    assert not rep["pass"]
    same = hitting_compare_on_ring(lebesgue_model(), split_lebesgue_model(SPLIT), dyadic_sets(6), 10_000, 4, seed=0)
    assert same["pass"]


def test_uniqueness_check_is_deterministic():
    args = (lebesgue_model(), split_lebesgue_model(SPLIT), dyadic_sets(6), QUARTERS, 5000, 4)
    assert uniqueness_check(*args, seed=3) == uniqueness_check(*args, seed=3)
    assert uniqueness_check(*args, seed=3)["tests"] == 7


def test_closed_set_comparison_example1_split():
    closed = [IntervalSet.closed((0.25, 0.5)), IntervalSet.closed((-0.5, -0.1)), IntervalSet.closed((0, 0.3))]
    chains = [[IntervalSet.open((0.2 - 1 / k, 0.4 + 1 / k)) for k in range(10, 60, 10)]]
    probes = [IntervalSet.of((1.5, 2)), IntervalSet.of((0.1, 0.2))]
    rep = closed_set_compare(example1_model(), example1_model("example1-halves"), closed, chains, probes,
                             FidiSpec([IntervalSet.of((0.25, 0.5)), IntervalSet.of((0.5, 1))]),
                             5000, 40, seed=1)
    assert rep["pass"], rep
    assert all(IntervalSet.from_json(r["set"]).kind == CLOSED for r in rep["closed"])


# -- intensity recovery --------------------------------------------------------------------------

def test_mass_from_exact_value():
    m = mass_from_hitting(1 - math.exp(-0.7))
    assert m.mass == pytest.approx(0.7) and m.halfwidth == 0.0
    assert mass_from_hitting(1.0).infinite


def test_mass_interval_contains_truth():
    est = estimate_hitting(lebesgue_model(), IntervalSet.of((0, 0.3)), 50_000, 1, seed=4)
    m = mass_from_hitting(est)
    assert m.low <= 0.3 <= m.high


@given(st.lists(st.floats(0, 3), min_size=4, max_size=4))
def test_recover_exact_additivity(rates):
    model = split_lebesgue_model([(k / 4, (k + 1) / 4, r) for k, r in enumerate(rates)])
    pairs = dyadic_sibling_pairs(6)
    rep = recover_intensity(model.hitting, [], pairs, tol=1e-9)
    assert rep["pass"]


def test_recover_flags_infinite_masses():
    rep = recover_intensity(example1_model().hitting, [],
                            [(IntervalSet.of((0, 0.1)), IntervalSet.of((0.1, 0.2)))])
    row = rep["additivity"][0]
    assert rep["pass"] and row["mu_a"]["infinite"] and row["mu_union"]["infinite"]


def test_recover_rejects_overlapping_pairs():
    with pytest.raises(ValueError):
        recover_intensity(lebesgue_model().hitting, [], [(IntervalSet.of((0, 0.5)), IntervalSet.of((0.4, 1)))])


def test_recover_from_estimates():
    m = lebesgue_model()
    batch = sample_batch(m, 50_000, 1, seed=8)
    from crsets.hitting import estimate_from_batch
    rep = recover_intensity(lambda a: estimate_from_batch(m, batch, a), [], dyadic_sibling_pairs(20))
    assert rep["pass"]


# -- Poisson characterisation ---------------------------------------------------------------------

def test_weighted_chi2_matches_chi2_and_simulation():
    assert weighted_chi2_sf(7.0, [1, 1, 1]) == pytest.approx(stats.chi2.sf(7.0, 3), rel=1e-9)
    z = np.random.default_rng(0).standard_normal((400_000, 3))
    q = 2.5 * z[:, 0] ** 2 + z[:, 1] ** 2 + 0.4 * z[:, 2] ** 2
    assert weighted_chi2_sf(9.0, [2.5, 1, 0.4]) == pytest.approx((q > 9).mean(), abs=2e-3)
    assert weighted_chi2_sf(-1.0, []) == 1.0 and weighted_chi2_sf(1.0, []) == 0.0


@pytest.mark.parametrize("lam", [0.3, 1.3, 4.0])
def test_poisson_gof_is_calibrated(lam):
    # λ comes from the zero bin alone, so the reference law is a weighted chi-square
    p = np.array([poisson_gof(np.random.default_rng(s).poisson(lam, 5000))["p_value"] for s in range(300)])
    assert (p < 0.05).mean() < 0.05 + 3 * math.sqrt(0.05 * 0.95 / 300)


def test_poisson_gof():
    # calibration is tested above; here only the contrast with a binomial matters
    rng = np.random.default_rng(2)
    assert poisson_gof(rng.poisson(1.3, 20_000))["p_value"] > 1e-4
    assert poisson_gof(rng.binomial(4, 0.3, 20_000))["p_value"] < 1e-6
    assert poisson_gof(np.zeros(10, dtype=int))["p_value"] == 1.0


def test_increments_check_poisson_and_binomial():
    sets = dyadic_sets(6)[2:6]
    ok = independent_increments_poisson_check(sample_batch(lebesgue_model(), 20_000, 1, seed=5), sets)
    assert ok["pass"] and ok["tests"] == 6 + 4
    bad = independent_increments_poisson_check(sample_batch(binomial_model(1), 20_000, 1, seed=5), sets)
    assert not bad["independence_pass"] and not bad["poisson_pass"]


def test_increments_require_disjoint_sets():
    with pytest.raises(ValueError):
        independent_increments_poisson_check(np.zeros((5, 2), dtype=int), dyadic_sets(3)[:3:2])


def test_independence_power_matches_simulation():
    # a weakly dependent 2x2 law; simulate the test it describes
    joint = np.array([[0.26, 0.24], [0.24, 0.26]])
    n, alpha = 1500, 0.01
    analytic = independence_power(joint, n, alpha)
    rng = np.random.default_rng(0)
    rejections = 0
    reps = 2000
    for _ in range(reps):
        table = rng.multinomial(n, joint.ravel()).reshape(2, 2)
        rejections += stats.chi2_contingency(table, correction=False)[1] < alpha
    assert abs(rejections / reps - analytic) < 0.04
    assert 0.1 < analytic < 0.9


def test_independence_power_of_null_is_alpha():
    assert independence_power(np.full((3, 3), 1 / 9), 1000, 0.05) == pytest.approx(0.05)


# -- decomposition ---------------------------------------------------------------------------------

def test_grid_cells_partition():
    cells = grid_cells(-3, 3, 60)
    assert len(cells) == 60 and cells[0].lo == -3 and cells[-1].hi == 3
    assert all(a.hi == b.lo for a, b in zip(cells, cells[1:]))


def test_decompose_mixture_analytic():
    rep = decompose(mixture_model(), grid_cells(-3, 3, 60))
    assert rep.f_set == IntervalSet.of((-3, 2))
    assert rep.residual_ok
    assert set(rep.classes) == {NULL, SIGMA_FINITE, INFINITE}
    fine = decompose(mixture_model(), grid_cells(-3, 3, 120))
    assert f_difference_is_null(mixture_model(), rep, fine)["pass"]


def test_decompose_difference_on_hit_set_is_flagged():
    coarse = decompose(mixture_model(), grid_cells(-3, 3, 60))
    other = decompose(mixture_model(), grid_cells(-3, 1, 40))
    assert not f_difference_is_null(mixture_model(), coarse, other)["pass"] or \
        coarse.f_set.diff(other.f_set).intersect(IntervalSet.of((0, 1))).is_empty()


def test_decompose_rejects_overlapping_cells():
    with pytest.raises(ValueError):
        decompose(lebesgue_model(), [IntervalSet.of((0, 1)), IntervalSet.of((0.5, 2))])
    with pytest.raises(ValueError):
        decompose(lebesgue_model(), grid_cells(0, 1, 2), method="oracle")


def test_decompose_detector_matches_analytic():
    cells = grid_cells(-3, 3, 60)
    rep = decompose(mixture_model(), cells, method="detector", n=10_000, depth=2000, seed=0)
    assert rep.f_set == IntervalSet.of((-3, 2))
    assert rep.detector["threshold"] == 8
