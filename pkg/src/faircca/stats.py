"""Paired one-sided tests for "proposed metric is smaller than baseline".

The pipeline gates on Shapiro-Wilk normality of both samples, then runs a
paired t-test if both look normal and a Wilcoxon signed-rank test
otherwise.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import norm, rankdata
from scipy.stats import t as student_t

from .errors import (
    AllZeroDifferences,
    ConstantSample,
    SampleTooSmall,
    ShapeMismatch,
    ZeroVariance,
)

ALPHA = 0.05
EXACT_WILCOXON_MAX_N = 25

# Royston (1995) polynomial coefficients, lowest order first
_C1 = (0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.544, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)


def _poly(c, x: float) -> float:
    out = 0.0
    for coef in reversed(c):
        out = out * x + coef
    return out


def shapiro_coefficients(n: int) -> np.ndarray:
    """Full length-n antisymmetric weight vector for the W statistic."""
    nn2 = n // 2
    half = np.empty(nn2)
    if n == 3:
        half[0] = math.sqrt(0.5)
    else:
        i = np.arange(1, nn2 + 1)
        m = norm.ppf((i - 0.375) / (n + 0.25))  # lower-half normal scores (negative)
        summ2 = 2.0 * np.sum(m * m)
        ssumm2 = math.sqrt(summ2)
        rsn = 1.0 / math.sqrt(n)
        a1 = _poly(_C1, rsn) - m[0] / ssumm2
        if n > 5:
            a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
            fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2) / (1 - 2 * a1 ** 2 - 2 * a2 ** 2))
            half[1] = a2
            start = 2
        else:
            fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a1 ** 2))
            start = 1
        half[0] = a1
        half[start:] = -m[start:] / fac
    a = np.zeros(n)
    a[:nn2] = -half
    a[n - nn2:] = half[::-1]
    return a


def shapiro_wilk(x) -> tuple[float, float]:
    """Shapiro-Wilk W and p-value (Royston's approximation, 3 <= n <= 5000)."""
    x = np.sort(np.asarray(x, dtype=float).ravel())
    n = x.shape[0]
    if n < 3:
        raise SampleTooSmall(f"Shapiro-Wilk needs n >= 3, got {n}")
    if n > 5000:
        raise SampleTooSmall("Shapiro-Wilk approximation is valid only up to n = 5000")
    rng_ = x[-1] - x[0]
    if rng_ < 1e-19 * max(1.0, abs(x[0])):
        raise ConstantSample("all values are equal")
    xs = (x - x.mean()) / rng_
    a = shapiro_coefficients(n)
    w = float((a @ xs) ** 2 / (xs @ xs))
    w = min(w, 1.0)

    if n == 3:
        p = (6.0 / math.pi) * (math.asin(math.sqrt(w)) - math.pi / 3.0)
        return w, float(min(max(p, 0.0), 1.0))
    w1 = math.log(1.0 - w) if w < 1.0 else -math.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if w1 >= gamma:
            return w, 1e-99
        y = -math.log(gamma - w1)
        mean, sd = _poly(_C3, n), math.exp(_poly(_C4, n))
    else:
        y = w1
        xx = math.log(n)
        mean, sd = _poly(_C5, xx), math.exp(_poly(_C6, xx))
    if y == -math.inf:
        return w, 1.0
    return w, float(norm.sf(y, loc=mean, scale=sd))


def _pair(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ShapeMismatch(f"paired samples differ in length: {a.size} vs {b.size}")
    return a - b


def _tail(cdf_le, sf_ge, alternative: str) -> float:
    if alternative == "less":
        return cdf_le
    if alternative == "greater":
        return sf_ge
    if alternative == "two-sided":
        return min(1.0, 2.0 * min(cdf_le, sf_ge))
    raise ValueError(f"unknown alternative {alternative!r}")


def paired_t(a, b, alternative: str = "less") -> tuple[float, float]:
    """Paired t-test on d = a - b; "less" tests mean(d) < 0."""
    d = _pair(a, b)
    n = d.size
    if n < 2:
        raise SampleTooSmall("paired t-test needs n >= 2")
    if np.all(d == 0):
        return 0.0, _tail(0.5, 0.5, alternative)
    sd = d.std(ddof=1)
    if sd == 0:
        raise ZeroVariance("differences are constant and nonzero")
    T = float(d.mean() / (sd / math.sqrt(n)))
    df = n - 1
    return T, float(_tail(student_t.cdf(T, df), student_t.sf(T, df), alternative))


def signed_rank_distribution(ranks2: np.ndarray) -> np.ndarray:
    """Counts of each attainable doubled-W value over all 2^n sign patterns.

    ``ranks2`` are twice the (possibly tied, half-integer) ranks, so all
    entries are integers.
    """
    ranks2 = np.asarray(ranks2, dtype=np.int64)
    counts = np.zeros(int(ranks2.sum()) + 1)
    counts[0] = 1.0
    for r in ranks2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: counts.size - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed(a, b, alternative: str = "less") -> tuple[float, float]:
    """Wilcoxon signed-rank test on d = a - b (zeros dropped, ties averaged).

    W is the sum of ranks of positive differences.  The p-value is exact
    for up to 25 nonzero differences, otherwise normal with tie-corrected
    variance and continuity correction.
    """
    d = _pair(a, b)
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise AllZeroDifferences("all paired differences are zero")
    ranks = rankdata(np.abs(d))
    W = float(ranks[d > 0].sum())
    if n <= EXACT_WILCOXON_MAX_N:
        r2 = np.rint(2 * ranks).astype(np.int64)
        counts = signed_rank_distribution(r2)
        total = counts.sum()
        w2 = int(round(2 * W))
        le = counts[: w2 + 1].sum() / total
        ge = counts[w2:].sum() / total
        return W, float(_tail(le, ge, alternative))
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(tie_counts ** 3 - tie_counts) / 48.0
    sd = math.sqrt(var)
    le = norm.cdf((W - mean + 0.5) / sd)
    ge = norm.sf((W - mean - 0.5) / sd)
    return W, float(_tail(le, ge, alternative))


@dataclass
class PairedRuns:
    baseline: np.ndarray
    proposed: np.ndarray
    metric: str = ""
    modality: str = ""
    seeds: list | None = None

    def __post_init__(self):
        self.baseline = np.asarray(self.baseline, dtype=float).ravel()
        self.proposed = np.asarray(self.proposed, dtype=float).ravel()
        if self.baseline.shape != self.proposed.shape:
            raise ShapeMismatch("baseline and proposed runs differ in length")
        if self.baseline.size < 3:
            raise SampleTooSmall("need at least 3 paired runs")


@dataclass
class HypothesisReport:
    test_used: str
    statistic: float
    p_value: float
    normality: dict
    decision: str
    metric: str = ""
    modality: str = ""
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def table_cell(self) -> dict:
        return {
            "stat": self.statistic,
            "type": "T" if self.test_used == "paired_t" else "W",
            "p": self.p_value,
            "decision": self.decision,
        }


def _normality(x) -> dict:
    try:
        W, p = shapiro_wilk(x)
    except ConstantSample:
        return {"W": None, "p": None, "is_normal": False, "constant": True}
    return {"W": W, "p": p, "is_normal": bool(p > ALPHA)}


def fairness_hypothesis_pipeline(runs: PairedRuns, alpha: float = ALPHA) -> HypothesisReport:
    """H0: proposed is not smaller than baseline; H1: proposed is smaller.

    Constant samples count as non-normal.  When every paired difference is
    zero the null holds exactly and the report says so instead of raising.
    """
    normality = {"baseline": _normality(runs.baseline), "proposed": _normality(runs.proposed)}
    both_normal = normality["baseline"]["is_normal"] and normality["proposed"]["is_normal"]
    flags = []
    if both_normal:
        test, (stat, p) = "paired_t", paired_t(runs.proposed, runs.baseline, "less")
    else:
        test = "wilcoxon"
        try:
            stat, p = wilcoxon_signed(runs.proposed, runs.baseline, "less")
        except AllZeroDifferences:
            stat, p = 0.0, 1.0
            flags.append("all_zero_differences")
    return HypothesisReport(
        test_used=test,
        statistic=float(stat),
        p_value=float(p),
        normality=normality,
        decision="reject_H0" if p < alpha else "not_reject_H0",
        metric=runs.metric,
        modality=runs.modality,
        flags=flags,
    )
