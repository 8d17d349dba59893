"""Group fairness gaps and standard classification metrics.

All inputs are binary 0/1 arrays (1 = positive label / second group) except
``scores``, which are real-valued and only need to be monotone in the
classifier's confidence.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from .errors import MissingGroup, ShapeMismatch


@dataclass(frozen=True)
class EvaluationFrame:
    scores: np.ndarray
    predictions: np.ndarray
    labels: np.ndarray
    groups: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("scores", "predictions", "labels", "groups"):
            arrays[name] = np.asarray(getattr(self, name), dtype=float).ravel()
            object.__setattr__(self, name, arrays[name])
        if len({a.shape[0] for a in arrays.values()}) != 1:
            raise ShapeMismatch("frame vectors have different lengths")


def _group_masks(groups: np.ndarray):
    g0, g1 = groups == 0, groups == 1
    if not g0.any() or not g1.any():
        raise MissingGroup("both groups must be present")
    return g0, g1


def dpg(frame: EvaluationFrame, signed: bool = False) -> float:
    """Demographic parity gap on hard predictions."""
    g0, g1 = _group_masks(frame.groups)
    gap = frame.predictions[g0].mean() - frame.predictions[g1].mean()
    return float(gap if signed else abs(gap))


def eog(frame: EvaluationFrame, signed: bool = False) -> float:
    """Equalized odds gap: mean over label strata of the between-group gap.

    Strata missing a group are skipped and the remaining ones reweighted.
    """
    _group_masks(frame.groups)
    gaps = []
    for y in (0, 1):
        in_y = frame.labels == y
        a0, a1 = in_y & (frame.groups == 0), in_y & (frame.groups == 1)
        if a0.any() and a1.any():
            gaps.append(frame.predictions[a0].mean() - frame.predictions[a1].mean())
    if not gaps:
        return 0.0
    gaps = np.asarray(gaps)
    return float(gaps.mean() if signed else np.abs(gaps).mean())


def quantile_bins(scores: np.ndarray, n_bins: int) -> np.ndarray:
    """Bin index per score, using empirical quantile edges.

    Edges are taken on the tie-averaged ranks rather than the raw values, so
    the assignment is exactly invariant under strictly increasing maps (raw
    value interpolation can round a boundary point into either bin).
    """
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    ranks = rankdata(scores)
    inner = np.quantile(ranks, np.arange(1, n_bins) / n_bins)
    return np.searchsorted(np.unique(inner), ranks, side="left")


def gsg(frame: EvaluationFrame, n_bins: int = 10) -> float:
    """Group sufficiency gap via quantile binning of the scores.

    Identical scores collapse into one bin, which reduces to the
    between-group label-rate gap.
    """
    _group_masks(frame.groups)
    bins = quantile_bins(frame.scores, n_bins)
    n = frame.labels.shape[0]
    total = 0.0
    for k in np.unique(bins):
        in_bin = bins == k
        m = frame.labels[in_bin].mean()
        nb = in_bin.sum()
        for a in (0, 1):
            cell = in_bin & (frame.groups == a)
            if cell.any():
                total += (nb / n) * (cell.sum() / nb) * abs(m - frame.labels[cell].mean())
    return float(total)


def roc_auc(scores, labels) -> float:
    """Mann-Whitney estimate; tied pairs count one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos, n_neg = pos.sum(), (~pos).sum()
    if n_pos == 0 or n_neg == 0:
        raise MissingGroup("roc_auc needs both labels")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def classification_metrics(frame: EvaluationFrame) -> dict:
    pred, truth = frame.predictions, frame.labels
    tp = float(np.sum((pred == 1) & (truth == 1)))
    fp = float(np.sum((pred == 1) & (truth == 0)))
    fn = float(np.sum((pred == 0) & (truth == 1)))
    flags = []
    if tp + fp == 0:
        precision = 0.0
        flags.append("undefined_precision")
    else:
        precision = tp / (tp + fp)
    recall = tp / (tp + fn) if tp + fn else 0.0
    return {
        "accuracy": float(np.mean(pred == truth)),
        "precision": precision,
        "recall": recall,
        "roc_auc": roc_auc(frame.scores, truth),
        "flags": flags,
    }


@dataclass
class FairnessReport:
    dpg: float
    eog: float
    gsg: float
    accuracy: float
    precision: float
    recall: float
    roc_auc: float
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def fairness_report(frame: EvaluationFrame, n_bins: int = 10, **metadata) -> FairnessReport:
    cm = classification_metrics(frame)
    meta = dict(metadata)
    meta["gap_inputs"] = {"dpg": "predictions", "eog": "predictions", "gsg": "scores"}
    if cm["flags"]:
        meta["flags"] = cm["flags"]
    return FairnessReport(
        dpg=dpg(frame),
        eog=eog(frame),
        gsg=gsg(frame, n_bins),
        accuracy=cm["accuracy"],
        precision=cm["precision"],
        recall=cm["recall"],
        roc_auc=cm["roc_auc"],
        metadata=meta,
    )
