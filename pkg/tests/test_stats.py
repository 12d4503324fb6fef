import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbstlab.stats import (
    InsufficientData,
    betainc,
    mean_stdev,
    summarize_cell,
    t_cdf,
    t_cdf_closed_form,
    welch_t_test,
)

scipy_stats = pytest.importorskip("scipy.stats")
scipy_special = pytest.importorskip("scipy.special")

DATASETS = [
    ([95, 96, 97], [93, 94, 95]),
    ([98.5, 92.1, 100.0, 96.7, 99.2, 94.4, 97.8, 95.0, 100.0, 93.3],
     [88.1, 91.4, 85.0, 90.2, 79.9, 86.6, 92.3, 84.7, 88.8, 81.0]),
    ([60.0, 72.5, 65.1, 70.0, 58.3], [61.2, 66.0, 80.1, 55.5, 70.4, 68.8, 59.9]),
]


def test_mean_stdev_examples():
    assert mean_stdev([2, 4]) == (3.0, pytest.approx(math.sqrt(2)))
    assert mean_stdev([5, 5, 5]) == (5.0, 0.0)
    with pytest.raises(InsufficientData):
        mean_stdev([1])


def test_mean_stdev_matches_reference():
    import numpy as np

    xs = DATASETS[1][0]
    m, s = mean_stdev(xs)
    assert abs(m - np.mean(xs)) < 1e-9
    assert abs(s - np.std(xs, ddof=1)) < 1e-9


@pytest.mark.parametrize("a, b", DATASETS)
def test_welch_matches_scipy(a, b):
    ours = welch_t_test(a, b)
    ref = scipy_stats.ttest_ind(a, b, equal_var=False)
    assert abs(ours.t - ref.statistic) < 1e-6
    assert abs(ours.p_two_sided - ref.pvalue) < 1e-6
    va, vb = scipy_stats.tvar(a) / len(a), scipy_stats.tvar(b) / len(b)
    df = (va + vb) ** 2 / (va**2 / (len(a) - 1) + vb**2 / (len(b) - 1))
    assert abs(ours.df - df) < 1e-6
    assert ours.actual_cl == pytest.approx(100 * (1 - ours.p_two_sided))


def test_small_example_values():
    r = welch_t_test([95, 96, 97], [93, 94, 95])
    assert r.t == pytest.approx(2.449, abs=1e-3)
    assert r.df == pytest.approx(4.0)


@pytest.mark.parametrize("t", [-30.0, -2.5, -0.3, 0.0, 0.7, 1.9, 12.0])
@pytest.mark.parametrize("df", [1, 2])
def test_closed_forms_agree(t, df):
    assert abs(t_cdf(t, df) - t_cdf_closed_form(t, df)) < 1e-9


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 60), st.floats(0.05, 60), st.floats(0.0, 1.0))
def test_betainc_matches_scipy(a, b, x):
    assert abs(betainc(a, b, x) - scipy_special.betainc(a, b, x)) < 1e-9


def test_identical_samples():
    r = welch_t_test([80, 80, 80], [80, 80, 80])
    assert (r.t, r.p_two_sided, r.actual_cl, r.exact_equality) == (0.0, 1.0, 0.0, True)
    r = welch_t_test([80, 81, 82], [80, 81, 82])
    assert r.t == 0.0 and r.actual_cl == pytest.approx(0.0)


def test_constant_but_different():
    r = welch_t_test([90, 90], [80, 80])
    assert r.t == math.inf and r.actual_cl == 100.0


samples = st.lists(st.floats(0, 100, allow_nan=False), min_size=2, max_size=12).filter(
    lambda xs: max(xs) - min(xs) > 1e-3)


@settings(max_examples=100, deadline=None)
@given(samples, samples)
def test_swap_negates_t(a, b):
    x, y = welch_t_test(a, b), welch_t_test(b, a)
    assert x.t == pytest.approx(-y.t)
    assert x.p_two_sided == pytest.approx(y.p_two_sided)
    assert x.actual_cl == pytest.approx(y.actual_cl)


@settings(max_examples=100, deadline=None)
@given(samples, samples, st.floats(-50, 50))
def test_translation_invariance(a, b, c):
    x = welch_t_test(a, b)
    y = welch_t_test([v + c for v in a], [v + c for v in b])
    assert y.t == pytest.approx(x.t, rel=1e-6, abs=1e-6)
    assert y.df == pytest.approx(x.df, rel=1e-6)


def test_summary_equal_vectors():
    cell = summarize_cell([70.0, 80.0, 90.0], [70.0, 80.0, 90.0])
    assert cell.ga_mean == cell.rnd_mean and cell.actual_cl == pytest.approx(0.0)


def test_summary_reproduces_constructed_means():
    ga = [87.27 + d for d in (-2, 2, -1, 1, 0.5, -0.5, 3, -3, 0, 0)]
    rnd = [82.4 + d for d in (1, -1, 2, -2, 0, 0, 0.25, -0.25, 4, -4)]
    cell = summarize_cell(ga, rnd)
    assert cell.ga_mean == pytest.approx(87.27, abs=1e-12)
    assert cell.rnd_mean == pytest.approx(82.4, abs=1e-12)
    assert 0 <= cell.actual_cl <= 100
