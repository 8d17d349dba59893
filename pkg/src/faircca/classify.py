"""Downstream classifiers and the stratified-CV random hyperparameter search.

Labels are 0/1 throughout (1 is the positive class).  The SVM is a C-SVC
trained on its dual by sequential minimal optimization with second-order
working-set selection; logistic regression is L2-penalized and solved by
Newton's method.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ClassTooSmall, ConfigError, NonConvergence, ShapeMismatch, SingleClass
from . import metrics

log = logging.getLogger(__name__)

KKT_TOL = 1e-3
TAU = 1e-12
MAX_PASSES = 10_000


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"  # rbf | sigmoid | linear
    gamma: float | str = "scale"  # positive float, "scale" or "auto"
    coef0: float = 0.0

    def resolve_gamma(self, X: np.ndarray) -> float:
        if self.gamma == "scale":
            var = X.var()
            return 1.0 / (X.shape[1] * var) if var > 0 else 1.0
        if self.gamma == "auto":
            return 1.0 / X.shape[1]
        g = float(self.gamma)
        if g <= 0:
            raise ConfigError("gamma must be positive")
        return g


def kernel_matrix(A: np.ndarray, B: np.ndarray, kind: str, gamma: float, coef0: float) -> np.ndarray:
    if kind == "linear":
        return A @ B.T
    if kind == "rbf":
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2 * A @ B.T
        return np.exp(-gamma * np.maximum(sq, 0.0))
    if kind == "sigmoid":
        return np.tanh(gamma * (A @ B.T) + coef0)
    raise ConfigError(f"unknown kernel {kind!r}")


@dataclass
class TrainedClassifier:
    kind: str  # svm | logreg
    bias: float
    weights: np.ndarray | None = None  # logreg
    dual_coef: np.ndarray | None = None  # alpha_i * y_i on the support vectors
    support: np.ndarray | None = None  # support vector rows
    kernel: KernelSpec | None = None
    gamma: float | None = None  # resolved
    info: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return (self.weights if self.kind == "logreg" else self.support).shape[-1]


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y).ravel()
    if X.shape[0] != y.shape[0]:
        raise ShapeMismatch("X and y have different lengths")
    if not np.isin(y, (0, 1)).all():
        raise ShapeMismatch("labels must be 0/1")
    if np.unique(y).size < 2:
        raise SingleClass("training labels contain a single class")
    return X, y.astype(float)


def logreg_loss(w: np.ndarray, b: float, X, y, lam: float) -> float:
    s = X @ w + b
    # log(1 + exp(s)) - y*s, summed, numerically stable
    return float(np.sum(np.logaddexp(0.0, s) - y * s) + 0.5 * lam * w @ w)


def logreg_grad(w: np.ndarray, b: float, X, y, lam: float) -> np.ndarray:
    r = expit(X @ w + b) - y
    return np.concatenate([X.T @ r + lam * w, [r.sum()]])


def train_logreg(X, y, lam: float = 1.0, tol: float = 1e-8, max_iter: int = 100) -> TrainedClassifier:
    """Minimize the L2-penalized negative log-likelihood (bias unpenalized)."""
    X, y = _check_xy(X, y)
    n, d = X.shape
    A = np.hstack([X, np.ones((n, 1))])
    reg = np.full(d + 1, lam)
    reg[-1] = 0.0
    theta = np.zeros(d + 1)
    for it in range(max_iter):
        p = expit(A @ theta)
        g = A.T @ (p - y) + reg * theta
        if np.linalg.norm(g) <= tol:
            break
        H = (A * (p * (1 - p))[:, None]).T @ A + np.diag(reg)
        # tiny floor keeps H invertible when lam = 0 on separable data
        step = np.linalg.solve(H + 1e-12 * np.eye(d + 1), g)
        t = 1.0
        f0 = logreg_loss(theta[:-1], theta[-1], X, y, lam)
        while t > 1e-10:
            cand = theta - t * step
            if logreg_loss(cand[:-1], cand[-1], X, y, lam) <= f0 - 1e-4 * t * g @ step:
                break
            t *= 0.5
        theta = cand
    else:
        p = expit(A @ theta)
        g = A.T @ (p - y) + reg * theta
        if np.linalg.norm(g) > tol:
            raise NonConvergence(f"logistic regression gradient norm {np.linalg.norm(g):.2e}")
    return TrainedClassifier("logreg", float(theta[-1]), weights=theta[:-1].copy(),
                             info={"iterations": it})


def _smo(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_iter: int,
         track: bool):
    """Solve min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0 with Q = yy'K.

    y is +-1.  Returns (alpha, rho, iterations, objective history); the
    decision function is sum_i alpha_i y_i K(x_i, x) - rho.
    """
    n = y.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    diag = np.diag(K).copy()
    pos = y > 0
    history = [0.0] if track else None
    it = 0
    while True:
        at_upper = alpha >= C
        at_lower = alpha <= 0
        vy = -y * G
        up = np.where(pos, ~at_upper, ~at_lower)
        low = np.where(pos, ~at_lower, ~at_upper)
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(vy[up])])
        gmax = vy[i]
        gmin = vy[low].min()
        if gmax - gmin < tol:
            break
        if it >= max_iter:
            raise NonConvergence(f"SMO did not reach KKT tolerance in {max_iter} iterations "
                                 f"(violation {gmax - gmin:.3e})")
        Ki = K[i]
        cand = low & (vy < gmax)
        bdiff = gmax - vy[cand]
        quad = diag[i] + diag[cand] - 2.0 * Ki[cand]
        quad[quad <= 0] = TAU
        j = int(np.flatnonzero(cand)[np.argmin(-(bdiff * bdiff) / quad)])

        yi, yj = y[i], y[j]
        ai, aj = alpha[i], alpha[j]
        Kij = Ki[j]
        if yi != yj:
            # Q_ij = -Kij for opposite labels
            q = diag[i] + diag[j] - 2.0 * Kij
            if q <= 0:
                q = TAU
            delta = (-G[i] - G[j]) / q
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            q = diag[i] + diag[j] - 2.0 * Kij
            if q <= 0:
                q = TAU
            delta = (G[i] - G[j]) / q
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        dai, daj = ni - ai, nj - aj
        alpha[i], alpha[j] = ni, nj
        G += y * (yi * dai * Ki + yj * daj * K[j])
        it += 1
        if track:
            history.append(0.5 * alpha @ (G - 1.0))

    # offset from free vectors, else midpoint of the feasible interval
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = yG[free].mean()
    else:
        at_upper = alpha >= C
        ub_mask = (at_upper & ~pos) | (~at_upper & pos)
        lb_mask = (at_upper & pos) | (~at_upper & ~pos)
        ub = yG[ub_mask].min() if ub_mask.any() else np.inf
        lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
        rho = (ub + lb) / 2 if np.isfinite(ub) and np.isfinite(lb) else 0.0
    return alpha, float(rho), it, history


def train_svm(X, y, C: float = 1.0, kernel: KernelSpec | None = None,
              tol: float = KKT_TOL, max_passes: int = MAX_PASSES,
              track_objective: bool = False) -> TrainedClassifier:
    """C-SVC.  ``max_passes`` counts sweeps of N working-set updates each."""
    X, y01 = _check_xy(X, y)
    if C <= 0:
        raise ConfigError("C must be positive")
    kernel = kernel or KernelSpec()
    gamma = kernel.resolve_gamma(X) if kernel.kind != "linear" else 0.0
    ys = 2.0 * y01 - 1.0
    K = kernel_matrix(X, X, kernel.kind, gamma, kernel.coef0)
    alpha, rho, it, hist = _smo(K, ys, float(C), tol, max_passes * X.shape[0], track_objective)
    sv = alpha > 0
    info = {"iterations": it, "n_support": int(sv.sum())}
    if track_objective:
        # SVM dual objective (to be maximized)
        info["dual_objective"] = [-h for h in hist]
    return TrainedClassifier(
        "svm", -rho, dual_coef=(alpha * ys)[sv], support=X[sv].copy(),
        kernel=kernel, gamma=gamma, info=info,
    )


def predict_scores(model: TrainedClassifier, X) -> np.ndarray:
    """Decision values (SVM) or positive-class probabilities (logreg)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != model.n_features:
        raise ShapeMismatch(f"expected {model.n_features} features, got {X.shape[1]}")
    if model.kind == "logreg":
        return expit(X @ model.weights + model.bias)
    K = kernel_matrix(X, model.support, model.kernel.kind, model.gamma, model.kernel.coef0)
    return K @ model.dual_coef + model.bias


def predict_labels(model: TrainedClassifier, X) -> np.ndarray:
    """Threshold scores; ties go to class 0."""
    s = predict_scores(model, X)
    thr = 0.5 if model.kind == "logreg" else 0.0
    return (s > thr).astype(int)


def probability_scores(model: TrainedClassifier, X) -> np.ndarray:
    """Scores in [0, 1] for calibration-style metrics (monotone map, no refit)."""
    s = predict_scores(model, X)
    return s if model.kind == "logreg" else expit(s)


def stratified_kfold(y, k: int = 5, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Shuffle each class, then deal its members round-robin into ``k`` folds."""
    y = np.asarray(y).ravel()
    classes, counts = np.unique(y, return_counts=True)
    if k < 2:
        raise ConfigError("k must be at least 2")
    if counts.min() < k:
        raise ClassTooSmall(f"class {classes[counts.argmin()]} has {counts.min()} < {k} members")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(y.shape[0], dtype=int)
    offset = 0
    for c in classes:
        idx = rng.permutation(np.flatnonzero(y == c))
        # continue the round-robin across classes so fold sizes stay balanced
        fold_of[idx] = (np.arange(idx.size) + offset) % k
        offset += idx.size
    out = []
    for f in range(k):
        test = np.flatnonzero(fold_of == f)
        train = np.flatnonzero(fold_of != f)
        out.append((train, test))
    return out


def stratified_split(y, train_fraction: float = 0.7, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Label-stratified train/test split."""
    if not 0 < train_fraction < 1:
        raise ConfigError("train_fraction must be in (0, 1)")
    y = np.asarray(y).ravel()
    rng = np.random.default_rng(seed)
    train = []
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        train.append(idx[: int(round(train_fraction * idx.size))])
    train = np.sort(np.concatenate(train))
    test = np.setdiff1d(np.arange(y.shape[0]), train)
    return train, test


@dataclass
class SearchSpace:
    C: tuple = (0.1, 200.0)
    gamma: tuple = (0.1, 200.0)
    coef0: tuple = (0.0, 50.0)
    kernels: tuple = ("rbf", "sigmoid")
    p_numeric_gamma: float = 0.8
    n_iter: int = 50
    k_folds: int = 5
    scorer: str = "dpg"
    n_bins: int = 10


LOWER_IS_BETTER = {"dpg", "eog", "gsg"}
SCORERS = LOWER_IS_BETTER | {"accuracy"}


def sample_params(space: SearchSpace, rng: np.random.Generator) -> dict:
    kind = space.kernels[rng.integers(len(space.kernels))]
    C = float(rng.uniform(*space.C))
    if rng.random() < space.p_numeric_gamma:
        gamma = float(rng.uniform(*space.gamma))
    else:
        gamma = ("scale", "auto")[rng.integers(2)]
    coef0 = float(rng.uniform(*space.coef0))
    return {"kind": "svm", "C": C, "kernel": kind, "gamma": gamma,
            "coef0": coef0 if kind == "sigmoid" else 0.0}


def fit_from_params(params: dict, X, y) -> TrainedClassifier:
    if params.get("kind", "svm") == "logreg":
        return train_logreg(X, y, params.get("lambda", 1.0))
    spec = KernelSpec(params["kernel"], params["gamma"], params.get("coef0", 0.0))
    return train_svm(X, y, params["C"], spec)


def score_predictions(scorer: str, model, X, y, z, n_bins: int = 10) -> float:
    frame = metrics.EvaluationFrame(probability_scores(model, X), predict_labels(model, X), y, z)
    if scorer == "dpg":
        return metrics.dpg(frame)
    if scorer == "eog":
        return metrics.eog(frame)
    if scorer == "gsg":
        return metrics.gsg(frame, n_bins)
    if scorer == "accuracy":
        return float(np.mean(frame.predictions == frame.labels))
    raise ConfigError(f"unknown scorer {scorer!r}")


@dataclass
class SearchResult:
    best: dict
    cv_score: float
    table: list

    def best_json(self, scorer: str) -> dict:
        return {**{k: self.best[k] for k in ("kind", "C", "kernel", "gamma", "coef0")},
                "scorer": scorer, "cv_score": self.cv_score}


def random_search(X, y, z, space: SearchSpace | None = None, seed: int = 0) -> SearchResult:
    """Random search over SVM hyperparameters scored by stratified k-fold CV.

    Fairness scorers are minimized, accuracy maximized; the mean over folds
    is the selection statistic and ties keep the earliest draw.  Candidates
    whose SVM fails to converge are recorded with a NaN score and skipped.
    """
    space = space or SearchSpace()
    if space.scorer not in SCORERS:
        raise ConfigError(f"unknown scorer {space.scorer!r}")
    if space.n_iter < 1:
        raise ConfigError("n_iter must be at least 1")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).ravel()
    z = np.asarray(z).ravel()
    rng = np.random.default_rng(seed)
    draws = [sample_params(space, rng) for _ in range(space.n_iter)]
    folds = stratified_kfold(y, space.k_folds, seed)
    table = []
    for idx, params in enumerate(draws):
        fold_scores = []
        try:
            for tr, te in folds:
                model = fit_from_params(params, X[tr], y[tr])
                fold_scores.append(score_predictions(space.scorer, model, X[te], y[te], z[te], space.n_bins))
            score = float(np.mean(fold_scores))
        except NonConvergence as exc:
            log.warning("candidate %d skipped: %s", idx, exc)
            score = float("nan")
        table.append({"index": idx, **params, "fold_scores": fold_scores, "cv_score": score})

    scores = np.array([row["cv_score"] for row in table])
    valid = np.flatnonzero(~np.isnan(scores))
    if valid.size == 0:
        raise NonConvergence("no candidate configuration converged")
    sign = 1.0 if space.scorer in LOWER_IS_BETTER else -1.0
    best = int(valid[np.argmin(sign * scores[valid])])  # argmin returns the first tie
    return SearchResult(draws[best], float(scores[best]), table)
