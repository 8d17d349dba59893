"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` (lines are printed as
they finish and repeated in the terminal summary) or ``python
tests/test_acceptance.py``.
"""
import time

import numpy as np
import pytest

from faircca.cca import fit_cca, standardize
from faircca.experiment import ExperimentConfig, run_hypothesis_suite
from faircca.fair import constraint_residuals, fairness_gamma, fit_frcca, pct_change
from faircca.metrics import EvaluationFrame, dpg, eog, gsg
from faircca.stats import paired_t, shapiro_wilk, wilcoxon_signed
from faircca.synth import SynthConfig, generate_dataset

import conftest
from oracles import max_correlation, t_cdf_quadrature, wilcoxon_enumerate


def report(n: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line, flush=True)
    assert ok, line


def test_criterion_1_constraint_satisfaction():
    t0 = time.perf_counter()
    worst_c = worst_o = 0.0
    for seed in range(20):
        ds = generate_dataset(SynthConfig(seed=seed))
        for R in (2, 7):
            m = fit_frcca(ds.X, ds.Y, ds.z, R)
            worst_c = max(worst_c, *constraint_residuals(m, ds.X, ds.Y, ds.z))
            worst_o = max(worst_o, m.orthonormality_residual(ds.X, ds.Y))
    secs = time.perf_counter() - t0
    ok = worst_c <= 1e-8 and worst_o <= 1e-8 and secs < 30
    report(1, ok, f"max constraint {worst_c:.2e}, max orthonormality {worst_o:.2e} "
                  f"(<= 1e-8) over 20 datasets in {secs:.1f}s (< 30s)")


def test_criterion_2_planted_recovery():
    t0 = time.perf_counter()
    cfg = SynthConfig(n_samples=50_000, dx=10, dy=12, planted_rho=[0.8, 0.6, 0.3, 0.5], seed=0)
    ds = generate_dataset(cfg)
    rho = fit_cca(ds.X, ds.Y, 4).rho
    secs = time.perf_counter() - t0
    err = np.abs(rho - np.array([0.8, 0.6, 0.5, 0.3])).max()
    report(2, err <= 0.02 and secs < 20,
           f"fitted rho {np.round(rho, 4).tolist()}, max error {err:.4f} (<= 0.02), {secs:.1f}s (< 20s)")


def test_criterion_3_small_instance_oracle():
    worst = {"cca": 0.0, "frcca": 0.0}
    for i in range(50):
        rng = np.random.default_rng(1000 + i)
        L = rng.standard_normal((200, 1))
        X = L @ rng.standard_normal((1, 3)) + rng.standard_normal((200, 3))
        Y = L @ rng.standard_normal((1, 3)) + rng.standard_normal((200, 3))
        z = np.where(X[:, 0] + rng.standard_normal(200) > 0, 2, 1)
        Xs, _ = standardize(X)
        Ys, _ = standardize(Y)
        orng = np.random.default_rng(i)
        cca = fit_cca(X, Y, 1, ridge=1e-6)
        worst["cca"] = max(worst["cca"], abs(cca.rho[0] - max_correlation(Xs, Ys, orng)))
        fr = fit_frcca(X, Y, z, 1, ridge=1e-6)
        ref = max_correlation(Xs @ fr.rx.basis, Ys @ fr.ry.basis, orng)
        worst["frcca"] = max(worst["frcca"], abs(fr.rho[0] - ref))
    ok = max(worst.values()) <= 1e-4
    report(3, ok, f"max |rho - direct maximizer| cca {worst['cca']:.2e}, "
                  f"frcca {worst['frcca']:.2e} over 50 instances (<= 1e-4)")


def test_criterion_4_unsupervised_fairness_gain():
    ds = generate_dataset(SynthConfig())
    R = 7
    base, prop = fit_cca(ds.X, ds.Y, R), fit_frcca(ds.X, ds.Y, ds.z, R)
    g_base = fairness_gamma(base, ds.X, ds.Y, ds.z)
    g_prop = fairness_gamma(prop, ds.X, ds.Y, ds.z)
    d_fair = pct_change(g_prop, g_base, "fair")
    d_corr = pct_change(prop.rho, base.rho, "corr")
    ok = bool(np.all(g_base > 0) and np.allclose(d_fair, 100.0, atol=1e-6) and d_corr.mean() >= -10)
    report(4, ok, f"delta_fair {np.round(d_fair, 6).tolist()} (all 100%), "
                  f"mean delta_corr {d_corr.mean():.2f}% (>= -10%)")


@pytest.mark.slow
def test_criterion_5_downstream_fairness_improvement():
    t0 = time.perf_counter()
    base = dict(synth={"seed": 0}, classifiers=["svm"], scorers=["dpg"], n_iter=50)
    suite = run_hypothesis_suite(ExperimentConfig(methods=["frcca"], **base),
                                 ExperimentConfig(methods=["cca"], **base), n_seeds=50)
    secs = time.perf_counter() - t0
    cells = {(m, mod): suite.table[m][mod] for m in ("DPG", "EOG") for mod in ("X", "Y")}
    ok = all(c["p"] < 0.05 for c in cells.values()) and secs < 900
    detail = ", ".join(f"{m}/{mod} {c['type']}={c['stat']:.4g} p={c['p']:.3g}"
                       for (m, mod), c in cells.items())
    report(5, ok, f"{detail} (all p < 0.05), {secs:.0f}s (< 900s)")


def test_criterion_6_timing_envelope():
    ds = generate_dataset(SynthConfig())
    fit_cca(ds.X, ds.Y, 4)  # warm-up
    t_cca, t_fr = [], []
    for _ in range(10):
        t0 = time.perf_counter()
        fit_cca(ds.X, ds.Y, 4)
        t_cca.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        fit_frcca(ds.X, ds.Y, ds.z, 4)
        t_fr.append(time.perf_counter() - t0)
    a, b = np.mean(t_cca), np.mean(t_fr)
    ok = b <= 3 * a and max(t_cca + t_fr) <= 5
    report(6, ok, f"mean fit cca {a * 1e3:.2f}ms, frcca {b * 1e3:.2f}ms, "
                  f"ratio {b / a:.2f} (<= 3), slowest {max(t_cca + t_fr):.3f}s (<= 5s)")


def test_criterion_7_statistical_tests():
    rng = np.random.default_rng(2024)
    w_err = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 11))
        d = rng.integers(-5, 6, n).astype(float)
        d[d == 0] = 1.0
        W, le, ge = wilcoxon_enumerate(d)
        _, p_less = wilcoxon_signed(d, np.zeros(n), "less")
        _, p_greater = wilcoxon_signed(d, np.zeros(n), "greater")
        w_err = max(w_err, abs(p_less - le), abs(p_greater - ge))
    t_err = 0.0
    for _ in range(100):
        n = int(rng.integers(3, 60))
        a, b = rng.standard_normal(n), rng.standard_normal(n) + rng.uniform(-1, 1)
        T, p = paired_t(a, b)
        t_err = max(t_err, abs(p - t_cdf_quadrature(T, n - 1)))
    size = np.mean([shapiro_wilk(rng.standard_normal(50))[1] < 0.05 for _ in range(1000)])
    ok = w_err <= 1e-12 and t_err <= 1e-6 and 0.03 <= size <= 0.07
    report(7, ok, f"wilcoxon max err {w_err:.1e} (<= 1e-12), paired-t max err {t_err:.1e} (<= 1e-6), "
                  f"Shapiro-Wilk size {size:.3f} (in [0.03, 0.07])")


def test_criterion_8_metric_properties():
    rng = np.random.default_rng(8)
    relabel = monotone = 0.0
    for _ in range(200):
        n = int(rng.integers(20, 300))
        g = rng.integers(0, 2, n)
        g[:2] = [0, 1]
        y = rng.integers(0, 2, n)
        s = rng.random(n)
        f = EvaluationFrame(s, (s > 0.5).astype(int), y, g)
        r = EvaluationFrame(s, f.predictions, y, 1 - g)
        relabel = max(relabel, abs(dpg(f) - dpg(r)), abs(eog(f) - eog(r)), abs(gsg(f) - gsg(r)))
        t = np.log(s / (1 - s)) * rng.uniform(0.5, 3)  # strictly increasing
        m = EvaluationFrame(t, f.predictions, y, g)
        monotone = max(monotone, abs(dpg(f) - dpg(m)), abs(eog(f) - eog(m)), abs(gsg(f) - gsg(m)))
    n = 10_000
    g, y = rng.integers(0, 2, n), rng.integers(0, 2, n)
    pred = (rng.random(n) < np.where(y == 1, 0.7, 0.3)).astype(int)
    eog_null = eog(EvaluationFrame(pred, pred, y, g))
    dpg_null = dpg(EvaluationFrame(pred, pred, y, g))
    s = rng.random(20_000)
    gsg_null = gsg(EvaluationFrame(s, (s > 0.5).astype(int),
                                   (rng.random(20_000) < s).astype(int), rng.integers(0, 2, 20_000)))
    ok = relabel <= 1e-12 and monotone <= 1e-12 and eog_null <= 0.05 and dpg_null <= 0.05 and gsg_null <= 0.03
    report(8, ok, f"relabel diff {relabel:.1e}, monotone diff {monotone:.1e} (<= 1e-12); "
                  f"null EOG {eog_null:.4f}, DPG {dpg_null:.4f} (<= 0.05), GSG {gsg_null:.4f} (<= 0.03)")


if __name__ == "__main__":
    import sys

    failed = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_criterion_")):
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
