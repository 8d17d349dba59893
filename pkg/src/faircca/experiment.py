"""End-to-end experiments: data loading, representation fitting, tuned
downstream classification over several split seeds, and reports."""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import classify, metrics
from .cca import DEFAULT_RIDGE, dumps_model, fit_cca, standardize
from .errors import ConfigError, FairCCAError, NonBinaryColumn, ParseError, RowCountMismatch
from .fair import constraint_residuals, fairness_gamma, fit_frcca, pct_change
from .stats import PairedRuns, fairness_hypothesis_pipeline
from .synth import SynthConfig, generate_dataset

log = logging.getLogger(__name__)

METHODS = ("raw", "cca", "frcca")
MODALITIES = ("X", "Y")
GAP_METRICS = ("gsg", "dpg", "eog")
REPORT_FIELDS = ("dpg", "eog", "gsg", "accuracy", "precision", "recall", "roc_auc")


# --------------------------------------------------------------------- data io

def _read_matrix(path, expect_cols: int | None = None) -> np.ndarray:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise ParseError(path, 1, 1, "")
    start = 0
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        start = 1  # header row
    width = len(rows[start - 1]) if start else len(rows[0])
    out = np.empty((len(rows) - start, width))
    for i, row in enumerate(rows[start:]):
        if len(row) != width:
            raise ParseError(path, i + start + 1, len(row), ",".join(row))
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise ParseError(path, i + start + 1, j + 1, cell) from None
    if expect_cols is not None and out.shape[1] != expect_cols:
        raise ParseError(path, start + 1, out.shape[1], f"expected {expect_cols} columns")
    return out


def _binary_column(path) -> np.ndarray:
    v = _read_matrix(path, 1)[:, 0]
    values = np.unique(v)
    if values.size != 2:
        raise NonBinaryColumn(f"{path}: expected 2 distinct values, found {values.size}")
    return np.where(v == values[0], 1, 2)


def ingest_csv(x, y, z, labels):
    """Read the four input files; group and label codes become {1, 2}."""
    X = _read_matrix(x)
    Y = _read_matrix(y)
    zv = _binary_column(z)
    lv = _binary_column(labels)
    n = {X.shape[0], Y.shape[0], zv.shape[0], lv.shape[0]}
    if len(n) != 1:
        raise RowCountMismatch(
            f"row counts differ: x={X.shape[0]} y={Y.shape[0]} z={zv.shape[0]} labels={lv.shape[0]}"
        )
    return X, Y, zv, lv


def write_matrix(path, M: np.ndarray, prefix: str = "f") -> None:
    M = np.asarray(M, dtype=float)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"{prefix}{j + 1}" for j in range(M.shape[1])])
        for row in M:
            w.writerow([repr(float(v)) for v in row])


def write_column(path, v, name: str) -> None:
    with Path(path).open("w", newline="") as fh:
        fh.write(name + "\n")
        for value in v:
            fh.write(f"{int(value)}\n")


def write_dataset(out_dir, ds) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "x.csv", ds.X)
    write_matrix(out / "y.csv", ds.Y)
    write_column(out / "z.csv", ds.z, "z")
    write_column(out / "labels.csv", ds.y, "label")
    (out / "manifest.json").write_text(dumps_model(ds.manifest()) + "\n")


# ----------------------------------------------------------------- configuration

@dataclass
class ExperimentConfig:
    synth: dict | None = None
    csv: dict | None = None  # {"x": path, "y": path, "z": path, "labels": path}
    methods: list = field(default_factory=lambda: list(METHODS))
    rank: int = 2  # classification stage
    corr_rank: int = 7  # unsupervised comparison stage
    ridge: float = DEFAULT_RIDGE
    train_fraction: float = 0.7
    stratify: bool = True
    tuning_seed: int = 0
    eval_seeds: list = field(default_factory=lambda: [1, 2, 3, 4, 5])
    classifiers: list = field(default_factory=lambda: ["svm"])
    scorers: list = field(default_factory=lambda: ["dpg"])
    n_iter: int = 50
    gsg_bins: int = 10
    logreg_lambda: float = 1.0
    fixed_params: dict | None = None  # skip the search and use these SVM params
    timing_repeats: int = 10

    def validate(self) -> None:
        if (self.synth is None) == (self.csv is None):
            raise ConfigError("exactly one of 'synth' or 'csv' must be given")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must be in (0, 1)")
        if not self.eval_seeds:
            raise ConfigError("eval_seeds must be non-empty")
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise ConfigError(f"unknown methods {sorted(bad)}")
        bad = set(self.classifiers) - {"svm", "logreg"}
        if bad or not self.classifiers:
            raise ConfigError(f"unknown classifiers {sorted(bad)}")
        bad = set(self.scorers) - classify.SCORERS
        if bad or not self.scorers:
            raise ConfigError(f"unknown scorers {sorted(bad)}")
        if self.rank < 1 or self.corr_rank < 1:
            raise ConfigError("ranks must be positive")
        if self.ridge < 0:
            raise ConfigError("ridge must be non-negative")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Data:
    X: np.ndarray
    Y: np.ndarray
    z: np.ndarray  # {1, 2}
    labels: np.ndarray  # {1, 2}

    @property
    def groups01(self) -> np.ndarray:
        return (self.z == 2).astype(int)

    @property
    def labels01(self) -> np.ndarray:
        return (self.labels == 2).astype(int)


def load_data(config: ExperimentConfig) -> Data:
    if config.synth is not None:
        ds = generate_dataset(SynthConfig.from_dict(config.synth))
        return Data(ds.X, ds.Y, ds.z, ds.y)
    paths = config.csv
    missing = {"x", "y", "z", "labels"} - set(paths)
    if missing:
        raise ConfigError(f"csv source needs paths for {sorted(missing)}")
    return Data(*ingest_csv(paths["x"], paths["y"], paths["z"], paths["labels"]))


# ------------------------------------------------------------------- pipeline

@dataclass
class RunRecord:
    seed: int
    method: str
    modality: str
    classifier: str
    scorer: str
    report: dict | None
    params: dict | None
    fit_time: float
    diagnostics: dict = field(default_factory=dict)
    error: str | None = None

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("fit_time")  # wall-clock lives in timing.json so runs.jsonl stays reproducible
        return d


def fit_representation(method: str, data: Data, train: np.ndarray, rank: int, ridge: float):
    """Fit on the training rows; returns (transform(view, rows), diagnostics, seconds)."""
    X, Y = data.X[train], data.Y[train]
    t0 = time.perf_counter()
    if method == "raw":
        _, sx = standardize(X)
        _, sy = standardize(Y)
        elapsed = time.perf_counter() - t0

        def transform(view, rows):
            return (sx if view == "X" else sy).apply((data.X if view == "X" else data.Y)[rows])
        return transform, {}, elapsed
    if method == "cca":
        model = fit_cca(X, Y, rank, ridge)
    else:
        model = fit_frcca(X, Y, data.z[train], rank, ridge)
    elapsed = time.perf_counter() - t0
    diag = {"rho": model.rho.tolist()}
    if method == "frcca":
        rx, ry = constraint_residuals(model, X, Y, data.z[train])
        diag["gamma_residual"] = max(rx, ry)

    def transform(view, rows):
        side = "x" if view == "X" else "y"
        return model.project((data.X if view == "X" else data.Y)[rows], side)
    return transform, diag, elapsed


def _split(data: Data, config: ExperimentConfig, seed: int):
    if config.stratify:
        return classify.stratified_split(data.labels, config.train_fraction, seed)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.labels.shape[0])
    k = int(round(config.train_fraction * perm.size))
    return np.sort(perm[:k]), np.sort(perm[k:])


def tune(data: Data, config: ExperimentConfig, methods) -> dict:
    """Best hyperparameters per (method, modality, classifier, scorer)."""
    train, _ = _split(data, config, config.tuning_seed)
    y, g = data.labels01, data.groups01
    best = {}
    for method in methods:
        try:
            transform, _, _ = fit_representation(method, data, train, config.rank, config.ridge)
        except FairCCAError as exc:
            # evaluate() records the failure for every cell of this method
            log.warning("tuning skipped for %s: %s", method, exc)
            continue
        for modality in MODALITIES:
            F = transform(modality, train)
            for clf in config.classifiers:
                for scorer in config.scorers:
                    key = (method, modality, clf, scorer)
                    if clf == "logreg":
                        best[key] = {"kind": "logreg", "lambda": config.logreg_lambda,
                                     "scorer": scorer, "cv_score": None}
                    elif config.fixed_params is not None:
                        best[key] = {"kind": "svm", **config.fixed_params,
                                     "scorer": scorer, "cv_score": None}
                    else:
                        space = classify.SearchSpace(n_iter=config.n_iter, scorer=scorer,
                                                     n_bins=config.gsg_bins)
                        try:
                            res = classify.random_search(F, y[train], g[train], space,
                                                         config.tuning_seed)
                        except FairCCAError as exc:
                            log.warning("search failed for %s: %s", key, exc)
                            continue
                        best[key] = res.best_json(scorer)
    return best


def evaluate(data: Data, config: ExperimentConfig, methods, seeds, best: dict) -> list[RunRecord]:
    y, g = data.labels01, data.groups01
    records = []
    for seed in seeds:
        train, test = _split(data, config, seed)
        for method in methods:
            try:
                transform, diag, secs = fit_representation(method, data, train, config.rank, config.ridge)
            except FairCCAError as exc:
                for modality in MODALITIES:
                    for clf in config.classifiers:
                        for scorer in config.scorers:
                            records.append(RunRecord(seed, method, modality, clf, scorer, None,
                                                     None, 0.0, error=f"{type(exc).__name__}: {exc}"))
                continue
            for modality in MODALITIES:
                Ftr, Fte = transform(modality, train), transform(modality, test)
                for clf in config.classifiers:
                    for scorer in config.scorers:
                        params = best.get((method, modality, clf, scorer))
                        if params is None:
                            records.append(RunRecord(seed, method, modality, clf, scorer, None, None,
                                                     secs, dict(diag), "tuning failed"))
                            continue
                        try:
                            model = classify.fit_from_params(params, Ftr, y[train])
                            frame = metrics.EvaluationFrame(
                                classify.probability_scores(model, Fte),
                                classify.predict_labels(model, Fte), y[test], g[test])
                            rep = metrics.fairness_report(
                                frame, config.gsg_bins, seed=seed, method=method, modality=modality)
                            records.append(RunRecord(seed, method, modality, clf, scorer,
                                                     rep.to_dict(), params, secs, dict(diag)))
                        except FairCCAError as exc:
                            records.append(RunRecord(seed, method, modality, clf, scorer, None, params,
                                                     secs, dict(diag), f"{type(exc).__name__}: {exc}"))
    return records


def summarize(records: list[RunRecord]) -> dict:
    """Mean and std (ddof=0) per cell, keyed classifier/scorer/method/modality."""
    cells: dict = {}
    for r in records:
        if r.report is None:
            continue
        key = f"{r.classifier}/{r.scorer}/{r.method}/{r.modality}"
        cells.setdefault(key, []).append(r.report)
    out = {}
    for key, reps in cells.items():
        out[key] = {
            f: {"mean": float(np.mean([rep[f] for rep in reps])),
                "std": float(np.std([rep[f] for rep in reps]))}
            for f in REPORT_FIELDS
        }
        out[key]["n"] = len(reps)
    return out


def correlation_deltas(data: Data, rank: int, ridge: float) -> list[dict]:
    """Per-dimension percent change of rho and gamma, FR-CCA against CCA."""
    base = fit_cca(data.X, data.Y, rank, ridge)
    prop = fit_frcca(data.X, data.Y, data.z, rank, ridge)
    d_corr = pct_change(prop.rho, base.rho, "corr")
    g_base = fairness_gamma(base, data.X, data.Y, data.z)
    g_prop = fairness_gamma(prop, data.X, data.Y, data.z)
    d_fair = pct_change(g_prop, g_base, "fair")
    return [
        {"dim": r + 1, "delta_corr_pct": float(d_corr[r]), "delta_fair_pct": float(d_fair[r]),
         "rho_cca": float(base.rho[r]), "rho_frcca": float(prop.rho[r]),
         "gamma_cca": float(g_base[r]), "gamma_frcca": float(g_prop[r])}
        for r in range(rank)
    ]


def time_fits(data: Data, rank: int, ridge: float, repeats: int = 10) -> dict:
    """Wall-clock seconds for CCA and FR-CCA fits on the full data."""
    out = {}
    for name, fit in (("cca", lambda: fit_cca(data.X, data.Y, rank, ridge)),
                      ("frcca", lambda: fit_frcca(data.X, data.Y, data.z, rank, ridge))):
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fit()
            times.append(time.perf_counter() - t0)
        out[name] = {"mean": float(np.mean(times)), "std": float(np.std(times)), "runs": times}
    return out


@dataclass
class ExperimentResult:
    records: list
    summary: dict
    deltas: list
    timing: dict
    best_params: dict

    def write(self, out_dir, fmt: str = "json") -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "runs.jsonl").open("w") as fh:
            for r in self.records:
                fh.write(json.dumps(r.to_json(), sort_keys=False) + "\n")
        (out / "summary.json").write_text(json.dumps(self.summary, indent=1) + "\n")
        if self.deltas:
            with (out / "deltas.tsv").open("w") as fh:
                fh.write("dim\tdelta_corr_pct\tdelta_fair_pct\n")
                for row in self.deltas:
                    fh.write(f"{row['dim']}\t{row['delta_corr_pct']:.17g}\t{row['delta_fair_pct']:.17g}\n")
            (out / "deltas_detail.json").write_text(json.dumps(self.deltas, indent=1) + "\n")
        best = [{"method": k[0], "modality": k[1], "classifier": k[2], **v}
                for k, v in self.best_params.items()]
        (out / "best_params.json").write_text(json.dumps(best, indent=1) + "\n")
        (out / "timing.json").write_text(json.dumps(self.timing, indent=1) + "\n")
        if fmt == "tsv":
            with (out / "summary.tsv").open("w") as fh:
                fh.write("cell\t" + "\t".join(f"{f}_mean\t{f}_std" for f in REPORT_FIELDS) + "\n")
                for key, cell in self.summary.items():
                    vals = "\t".join(f"{cell[f]['mean']:.6g}\t{cell[f]['std']:.6g}" for f in REPORT_FIELDS)
                    fh.write(f"{key}\t{vals}\n")


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    config.validate()
    data = load_data(config)
    methods = list(config.methods)
    best = tune(data, config, methods)
    records = evaluate(data, config, methods, config.eval_seeds, best)

    deltas = []
    if "cca" in methods and "frcca" in methods:
        try:
            deltas = correlation_deltas(data, config.corr_rank, config.ridge)
        except FairCCAError as exc:
            log.warning("correlation deltas skipped: %s", exc)
    timing = {"per_run": [{"seed": r.seed, "method": r.method, "modality": r.modality,
                           "fit_time": r.fit_time} for r in records]}
    if {"cca", "frcca"} <= set(methods):
        timing["benchmark"] = time_fits(data, config.corr_rank, config.ridge, config.timing_repeats)
    return ExperimentResult(records, summarize(records), deltas, timing, best)


@dataclass
class HypothesisSuite:
    reports: list
    table: dict
    proposed: str
    baseline: str
    seeds: list

    def to_dict(self) -> dict:
        return {
            "proposed": self.proposed,
            "baseline": self.baseline,
            "n_seeds": len(self.seeds),
            "seeds": self.seeds,
            "table": self.table,
            "reports": [r.to_dict() for r in self.reports],
        }

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "hypotest.json").write_text(json.dumps(self.to_dict(), indent=1) + "\n")


def run_hypothesis_suite(proposed: ExperimentConfig, baseline: ExperimentConfig,
                         n_seeds: int = 50) -> HypothesisSuite:
    """Pair per-seed gap metrics of two configurations and test each cell.

    Each configuration contributes its first method, classifier and scorer.
    Both must read the same data; evaluation seeds are
    ``tuning_seed + 1 ... tuning_seed + n_seeds`` of the proposed config.
    """
    proposed.validate()
    baseline.validate()
    if (proposed.synth, proposed.csv) != (baseline.synth, baseline.csv):
        raise ConfigError("hypothesis suite needs both configurations on the same data")
    data = load_data(proposed)
    seeds = [proposed.tuning_seed + 1 + i for i in range(n_seeds)]
    per_side = {}
    for side, cfg in (("proposed", proposed), ("baseline", baseline)):
        method = cfg.methods[0]
        cfg1 = ExperimentConfig(**{**cfg.to_dict(), "methods": [method],
                                   "classifiers": cfg.classifiers[:1], "scorers": cfg.scorers[:1]})
        best = tune(data, cfg1, [method])
        recs = evaluate(data, cfg1, [method], seeds, best)
        per_side[side] = (method, {(r.seed, r.modality): r for r in recs})

    reports, table = [], {}
    for metric in GAP_METRICS:
        table[metric.upper()] = {}
        for modality in MODALITIES:
            a = [per_side["proposed"][1][(s, modality)] for s in seeds]
            b = [per_side["baseline"][1][(s, modality)] for s in seeds]
            ok = [i for i in range(n_seeds) if a[i].report is not None and b[i].report is not None]
            runs = PairedRuns(
                baseline=[b[i].report[metric] for i in ok],
                proposed=[a[i].report[metric] for i in ok],
                metric=metric.upper(), modality=modality, seeds=[seeds[i] for i in ok],
            )
            rep = fairness_hypothesis_pipeline(runs)
            reports.append(rep)
            table[metric.upper()][modality] = rep.table_cell()
    return HypothesisSuite(reports, table, per_side["proposed"][0], per_side["baseline"][0], seeds)
