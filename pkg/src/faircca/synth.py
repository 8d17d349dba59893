"""Two-view Gaussian data with planted canonical correlations, a sensitive
attribute driven by the features, and labels biased by that attribute."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DegenerateAttribute,
    DegenerateLabels,
    NotPSD,
    RankTooLarge,
    RetryExhausted,
)

MAX_RETRIES = 10


@dataclass
class SynthConfig:
    n_samples: int = 500
    dx: int = 55
    dy: int = 60
    planted_rho: list = field(default_factory=lambda: [0.8, 0.6, 0.3, 0.5])
    eps_x: float = 0.1
    eps_y: float = 0.1
    mu_x: list | None = None  # None -> zeros
    mu_y: list | None = None
    alpha: float = 0.5
    beta: float = 0.5
    a: list | None = None  # None -> drawn from the seed
    b: list | None = None
    seed: int = 0

    def validate(self) -> None:
        r = len(self.planted_rho)
        if self.n_samples < 1 or self.dx < 1 or self.dy < 1:
            raise ConfigError("n_samples, dx and dy must be positive")
        if r < 1 or r > min(self.dx, self.dy):
            raise RankTooLarge(f"{r} planted correlations exceed min(dx, dy)")
        if not all(0 < p < 1 for p in self.planted_rho):
            raise ConfigError("planted correlations must lie strictly inside (0, 1)")
        if self.eps_x <= 0 or self.eps_y <= 0:
            raise ConfigError("noise levels must be positive")
        if self.a is not None and len(self.a) != math.ceil(self.dx / 2):
            raise ConfigError(f"a needs {math.ceil(self.dx / 2)} entries (odd X columns)")
        if self.b is not None and len(self.b) != self.dy // 2:
            raise ConfigError(f"b needs {self.dy // 2} entries (even Y columns)")
        for name, mu, d in (("mu_x", self.mu_x, self.dx), ("mu_y", self.mu_y, self.dy)):
            if mu is not None and len(mu) != d:
                raise ConfigError(f"{name} needs {d} entries")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synth config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SynthDataset:
    X: np.ndarray
    Y: np.ndarray
    z: np.ndarray  # values in {1, 2}
    y: np.ndarray  # values in {1, 2}
    ground_truth: dict
    config: SynthConfig
    jitter: float = 0.0
    attempt: int = 0

    def manifest(self) -> dict:
        cfg = self.config.to_dict()
        cfg["a"] = self.ground_truth["a"].tolist()
        cfg["b"] = self.ground_truth["b"].tolist()
        return {
            "config": cfg,
            "psd_jitter": self.jitter,
            "attempt": self.attempt,
            "indexing": {
                "attribute_x_columns": "odd, 1-based (1,3,5,...)",
                "attribute_y_columns": "even, 1-based (2,4,6,...)",
                "label_x_columns": "1..floor(dx/2), 1-based inclusive",
                "label_y_columns": "floor(dy/2)..dy, 1-based inclusive",
            },
            "ground_truth": {
                "U": self.ground_truth["U"].tolist(),
                "V": self.ground_truth["V"].tolist(),
                "rho": self.ground_truth["rho"].tolist(),
            },
            "counts": {
                "group_1": int(np.sum(self.z == 1)),
                "group_2": int(np.sum(self.z == 2)),
                "label_1": int(np.sum(self.y == 1)),
                "label_2": int(np.sum(self.y == 2)),
            },
        }


def haar_orthonormal(d: int, r: int, rng: np.random.Generator) -> np.ndarray:
    """d x r matrix with orthonormal columns, Haar distributed."""
    if r > d:
        raise RankTooLarge(f"cannot draw {r} orthonormal columns in dimension {d}")
    G = rng.standard_normal((d, r))
    Q, Rm = np.linalg.qr(G)
    # sign correction makes the distribution exactly Haar
    s = np.sign(np.diag(Rm))
    s[s == 0] = 1.0
    return Q * s


def _view_covariance(W: np.ndarray, eps: float) -> np.ndarray:
    Q, Rm = np.linalg.qr(W)
    d = W.shape[0]
    Rp = np.linalg.pinv(Rm)
    return Q @ Rp.T @ Rp @ Q.T + eps * (np.eye(d) - Q @ Q.T)


def build_joint_covariance(U, V, rho, eps_x: float, eps_y: float):
    """Joint covariance of [x; y] whose canonical pairs are (U, V, rho).

    Returns ``(Sigma, jitter)``; ``jitter`` is the multiple of the identity
    added to restore positive semidefiniteness (0 when none was needed).
    """
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    rho = np.asarray(rho, dtype=float)
    Sx = _view_covariance(U, eps_x)
    Sy = _view_covariance(V, eps_y)
    Sxy = Sx @ U @ np.diag(rho) @ V.T @ Sy
    S = np.block([[Sx, Sxy], [Sxy.T, Sy]])
    S = (S + S.T) / 2
    lam = np.linalg.eigvalsh(S)[0]
    jitter = 0.0
    if lam < -1e-6:
        raise NotPSD(f"joint covariance has eigenvalue {lam:.3e}")
    if lam < 0:
        jitter = abs(lam) + 1e-10
        S = S + jitter * np.eye(S.shape[0])
    return S, jitter


def sample_views(config: SynthConfig, rng: np.random.Generator, Sigma=None):
    """Draw N rows from the joint Gaussian; returns ``(X, Y)``.

    ``Sigma`` is built from fresh Haar directions when not given.
    """
    if Sigma is None:
        r = len(config.planted_rho)
        U = haar_orthonormal(config.dx, r, rng)
        V = haar_orthonormal(config.dy, r, rng)
        Sigma, _ = build_joint_covariance(U, V, config.planted_rho, config.eps_x, config.eps_y)
    mu = np.concatenate([
        np.zeros(config.dx) if config.mu_x is None else np.asarray(config.mu_x, float),
        np.zeros(config.dy) if config.mu_y is None else np.asarray(config.mu_y, float),
    ])
    L = np.linalg.cholesky(Sigma)
    W = mu + rng.standard_normal((config.n_samples, Sigma.shape[0])) @ L.T
    return W[:, : config.dx], W[:, config.dx:]


def gen_sensitive(X, Y, alpha: float, beta: float, a, b) -> np.ndarray:
    """Binary attribute in {1, 2} from exponentiated feature blends."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    x_odd = X[:, 0::2]
    y_even = Y[:, 1::2]
    if a.shape[0] != x_odd.shape[1] or b.shape[0] != y_even.shape[1]:
        raise ConfigError(
            f"need {x_odd.shape[1]} x-coefficients and {y_even.shape[1]} y-coefficients"
        )
    raw = alpha * np.exp(x_odd @ a) + beta * np.exp(y_even @ b)
    if np.ptp(raw) == 0:
        raise DegenerateAttribute("all attribute scores are equal")
    return np.where(raw <= raw.mean(), 1, 2)


def gen_labels(X, Y, z) -> np.ndarray:
    """Binary label in {1, 2}; the attribute enters through exp(z)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    z = np.asarray(z, dtype=float)
    dx, dy = X.shape[1], Y.shape[1]
    start_y = max(dy // 2, 1) - 1  # 1-based floor(dy/2) inclusive
    c = X[:, : dx // 2].sum(axis=1) + Y[:, start_y:].sum(axis=1) + np.exp(z)
    if np.ptp(c) == 0:
        raise DegenerateLabels("all label scores are equal")
    return np.where(c <= c.mean(), 1, 2)


def generate_dataset(config: SynthConfig) -> SynthDataset:
    """Deterministic in ``config`` (including ``seed``).

    Draws with a single attribute group or label class are retried with the
    sub-seed ``(seed, attempt)``.
    """
    config.validate()
    r = len(config.planted_rho)
    rho = np.asarray(config.planted_rho, dtype=float)
    nx, ny = math.ceil(config.dx / 2), config.dy // 2
    for attempt in range(MAX_RETRIES + 1):
        rng = np.random.default_rng(config.seed if attempt == 0 else [config.seed, attempt])
        U = haar_orthonormal(config.dx, r, rng)
        V = haar_orthonormal(config.dy, r, rng)
        a = (np.asarray(config.a, float) if config.a is not None
             else rng.normal(0.0, 1.0 / math.sqrt(nx), nx))
        b = (np.asarray(config.b, float) if config.b is not None
             else rng.normal(0.0, 1.0 / math.sqrt(max(ny, 1)), ny))
        Sigma, jitter = build_joint_covariance(U, V, rho, config.eps_x, config.eps_y)
        X, Y = sample_views(config, rng, Sigma)
        try:
            z = gen_sensitive(X, Y, config.alpha, config.beta, a, b)
            y = gen_labels(X, Y, z)
        except (DegenerateAttribute, DegenerateLabels):
            continue
        if len(np.unique(z)) == 2 and len(np.unique(y)) == 2:
            truth = {"U": U, "V": V, "rho": rho, "a": a, "b": b}
            return SynthDataset(X, Y, z, y, truth, config, jitter, attempt)
    raise RetryExhausted(f"no non-degenerate draw after {MAX_RETRIES} retries")
