import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats as sps

from faircca.errors import (
    AllZeroDifferences,
    ConstantSample,
    SampleTooSmall,
    ShapeMismatch,
    ZeroVariance,
)
from faircca.stats import (
    PairedRuns,
    fairness_hypothesis_pipeline,
    paired_t,
    shapiro_coefficients,
    shapiro_wilk,
    signed_rank_distribution,
    wilcoxon_signed,
)

from oracles import t_cdf_quadrature, wilcoxon_enumerate


# ------------------------------------------------------------- shapiro-wilk

@pytest.mark.parametrize("n", [3, 4, 5, 7, 11, 12, 20, 50, 200])
def test_shapiro_matches_reference_implementation(n):
    rng = np.random.default_rng(n)
    for x in (rng.standard_normal(n), rng.exponential(size=n)):
        W, p = shapiro_wilk(x)
        ref = sps.shapiro(x)
        assert W == pytest.approx(ref.statistic, abs=1e-6)
        assert p == pytest.approx(ref.pvalue, abs=1e-6)


def test_shapiro_coefficients_unit_norm():
    for n in (3, 6, 25, 100):
        a = shapiro_coefficients(n)
        assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-3)
        assert np.allclose(a, -a[::-1])


def test_shapiro_power_against_skewed():
    rng = np.random.default_rng(7)
    rej = np.mean([shapiro_wilk(rng.exponential(size=50))[1] < 0.05 for _ in range(1000)])
    assert rej >= 0.95


def test_shapiro_errors():
    with pytest.raises(SampleTooSmall):
        shapiro_wilk([1.0, 2.0])
    with pytest.raises(ConstantSample):
        shapiro_wilk([3.0, 3.0, 3.0, 3.0])


# ------------------------------------------------------------------ t-test

def test_paired_t_examples():
    T, p = paired_t([-1, -2, -3, -1, -3], [0] * 5)
    assert T == pytest.approx(-4.4721, abs=1e-4)
    assert p == pytest.approx(0.0055, abs=1e-4)
    assert paired_t([1, 2, 3], [1, 2, 3]) == (0.0, 0.5)
    with pytest.raises(ShapeMismatch):
        paired_t([1, 2, 3], [1, 2])
    with pytest.raises(ZeroVariance):
        paired_t([2, 3, 4], [1, 2, 3])


def test_paired_t_alternatives_complement():
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal(12), rng.standard_normal(12)
    _, lo = paired_t(a, b, "less")
    _, hi = paired_t(a, b, "greater")
    _, two = paired_t(a, b, "two-sided")
    assert lo + hi == pytest.approx(1.0)
    assert two == pytest.approx(2 * min(lo, hi))


# ---------------------------------------------------------------- wilcoxon

def test_wilcoxon_examples():
    assert wilcoxon_signed([-1, -2, -3, -4, -5], [0] * 5) == (0.0, pytest.approx(1 / 32))
    W, p = wilcoxon_signed([1, 2, 3, 4, 5], [0] * 5)
    assert W == 15.0 and p == pytest.approx(1.0)
    with pytest.raises(AllZeroDifferences):
        wilcoxon_signed([1, 2], [1, 2])


def test_wilcoxon_normal_branch_matches_reference_with_ties_and_zeros():
    rng = np.random.default_rng(3)
    for n in (30, 40, 80):
        d = rng.integers(-4, 5, n).astype(float)
        assert np.count_nonzero(d) > 25
        W, p = wilcoxon_signed(d, np.zeros(n))
        ref = sps.wilcoxon(d, alternative="less", zero_method="wilcox", method="approx",
                           correction=True)
        assert W == ref.statistic
        assert p == pytest.approx(ref.pvalue, abs=1e-12)


def test_wilcoxon_exact_branch_with_ties():
    d = np.array([1.0, -1.0, 2.0, -2.0, -2.0, 3.0, 0.0, -4.0])
    W, le, _ = wilcoxon_enumerate(d)
    assert wilcoxon_signed(d, np.zeros_like(d)) == (W, pytest.approx(le, abs=1e-12))


def test_wilcoxon_distribution_total():
    counts = signed_rank_distribution(np.array([2, 4, 6]))
    assert counts.sum() == 8
    assert counts[0] == 1 and counts[12] == 1


@settings(max_examples=100, deadline=None)
@given(d=st.lists(st.integers(-6, 6).filter(lambda v: v != 0), min_size=1, max_size=10))
def test_wilcoxon_exact_equals_enumeration(d):
    d = np.array(d, dtype=float)
    W, le, ge = wilcoxon_enumerate(d)
    w1, p_less = wilcoxon_signed(d, np.zeros_like(d), "less")
    _, p_greater = wilcoxon_signed(d, np.zeros_like(d), "greater")
    assert w1 == W
    assert abs(p_less - le) <= 1e-12 and abs(p_greater - ge) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(3, 10))
def test_wilcoxon_swap_gives_complement_without_ties(seed, n):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(n), rng.standard_normal(n)
    W, p = wilcoxon_signed(a, b, "less")
    W2, p2 = wilcoxon_signed(b, a, "less")
    total = n * (n + 1) / 2
    assert W + W2 == total
    # P(W <= w) for the swap equals P(W >= total - w) for the original
    _, ge = wilcoxon_signed(a, b, "greater")
    assert p2 == pytest.approx(ge, abs=1e-12)
    assert 0 <= p <= 1


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(3, 40))
def test_paired_t_matches_quadrature(seed, n):
    rng = np.random.default_rng(seed)
    a, b = rng.standard_normal(n), rng.standard_normal(n) + 0.3
    T, p = paired_t(a, b)
    assert p == pytest.approx(t_cdf_quadrature(T, n - 1), abs=1e-6)


# ---------------------------------------------------------------- pipeline

def test_pipeline_shift_routes_to_t():
    rng = np.random.default_rng(0)
    base = rng.standard_normal(50)
    rep = fairness_hypothesis_pipeline(PairedRuns(base, base - 0.1 + rng.normal(0, 0.01, 50)))
    assert rep.test_used == "paired_t" and rep.decision == "reject_H0"
    assert rep.table_cell()["type"] == "T"


def test_pipeline_identical_runs():
    base = np.random.default_rng(1).standard_normal(20)
    rep = fairness_hypothesis_pipeline(PairedRuns(base, base.copy()))
    assert rep.decision == "not_reject_H0"


def test_pipeline_identical_skewed_runs_flag():
    base = np.random.default_rng(1).exponential(size=30) ** 3
    rep = fairness_hypothesis_pipeline(PairedRuns(base, base.copy()))
    assert rep.decision == "not_reject_H0"
    if rep.test_used == "wilcoxon":
        assert "all_zero_differences" in rep.flags


def test_pipeline_exponential_routes_to_wilcoxon():
    rng = np.random.default_rng(2)
    base = rng.exponential(size=50) ** 2
    rep = fairness_hypothesis_pipeline(PairedRuns(base, base * 0.5))
    assert rep.test_used == "wilcoxon" and rep.table_cell()["type"] == "W"
    assert rep.decision == "reject_H0"


def test_pipeline_constant_samples_are_non_normal():
    rep = fairness_hypothesis_pipeline(PairedRuns(np.zeros(10), np.zeros(10)))
    assert rep.test_used == "wilcoxon" and rep.normality["baseline"]["constant"]
    assert rep.flags == ["all_zero_differences"] and rep.decision == "not_reject_H0"


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), skew=st.booleans())
def test_route_invariant(seed, skew):
    rng = np.random.default_rng(seed)
    base = rng.exponential(size=30) if skew else rng.standard_normal(30)
    prop = base + rng.standard_normal(30) * 0.3
    rep = fairness_hypothesis_pipeline(PairedRuns(base, prop))
    both = rep.normality["baseline"]["p"] > 0.05 and rep.normality["proposed"]["p"] > 0.05
    assert (rep.test_used == "paired_t") == both
    assert 0.0 <= rep.p_value <= 1.0


def test_paired_runs_validation():
    with pytest.raises(SampleTooSmall):
        PairedRuns([1, 2], [1, 2])
    with pytest.raises(ShapeMismatch):
        PairedRuns([1, 2, 3], [1, 2])
