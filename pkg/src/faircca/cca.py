"""Classical CCA by covariance whitening and SVD."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConstantColumn,
    DegenerateDirection,
    RankTooLarge,
    ShapeMismatch,
    SingularCovariance,
)

EIG_FLOOR = 1e-12
DEFAULT_RIDGE = 1e-8


def as_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a finite 2-D float array."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ShapeMismatch(f"{name} must be a non-empty 2-D matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ShapeMismatch(f"{name} contains non-finite entries")
    return X


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray

    def apply(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != self.means.shape[0]:
            raise ShapeMismatch(
                f"expected {self.means.shape[0]} columns, got {X.shape[1]}"
            )
        return (X - self.means) / self.stds

    def inverse(self, Xs) -> np.ndarray:
        return np.asarray(Xs, dtype=float) * self.stds + self.means


def standardize(X) -> tuple[np.ndarray, Standardizer]:
    """Center each column and scale it to unit population std."""
    X = as_matrix(X)
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    bad = np.flatnonzero(stds < 1e-12)
    if bad.size:
        raise ConstantColumn(int(bad[0]))
    st = Standardizer(means, stds)
    return st.apply(X), st


def inv_sqrt_psd(C: np.ndarray, ridge: float) -> np.ndarray:
    """Symmetric inverse square root of a covariance matrix."""
    w, Q = np.linalg.eigh(C)
    if w.min() < EIG_FLOOR:
        if ridge == 0:
            raise SingularCovariance(
                f"covariance eigenvalue {w.min():.3e} below {EIG_FLOOR:g}; use ridge > 0"
            )
        w = np.maximum(w, EIG_FLOOR)
    return (Q / np.sqrt(w)) @ Q.T


def _fix_signs(U: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # largest-magnitude entry of each u_r positive; v_r follows to keep rho >= 0
    idx = np.argmax(np.abs(U), axis=0)
    s = np.sign(U[idx, np.arange(U.shape[1])])
    s[s == 0] = 1.0
    return U * s, V * s


@dataclass(frozen=True)
class CanonicalModel:
    U: np.ndarray
    V: np.ndarray
    rho: np.ndarray
    x_standardizer: Standardizer
    y_standardizer: Standardizer
    ridge: float

    @property
    def R(self) -> int:
        return self.U.shape[1]

    def project(self, X, side: str = "x") -> np.ndarray:
        st, W = (self.x_standardizer, self.U) if side == "x" else (self.y_standardizer, self.V)
        return st.apply(X) @ W

    def orthonormality_residual(self, X, Y) -> float:
        A, B = self.project(X, "x"), self.project(Y, "y")
        n = A.shape[0]
        eye = np.eye(self.R)
        ex = A.T @ A / n + self.ridge * self.U.T @ self.U - eye
        ey = B.T @ B / n + self.ridge * self.V.T @ self.V - eye
        return float(max(np.abs(ex).max(), np.abs(ey).max()))

    def to_dict(self) -> dict:
        return {
            "R": self.R,
            "ridge": self.ridge,
            "rho": self.rho.tolist(),
            "U": self.U.tolist(),
            "V": self.V.tolist(),
            "x_mean": self.x_standardizer.means.tolist(),
            "x_std": self.x_standardizer.stds.tolist(),
            "y_mean": self.y_standardizer.means.tolist(),
            "y_std": self.y_standardizer.stds.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CanonicalModel":
        arr = lambda k: np.asarray(d[k], dtype=float)  # noqa: E731
        U, V = arr("U"), arr("V")
        if U.ndim != 2 or V.ndim != 2 or U.shape[1] != d["R"] or V.shape[1] != d["R"]:
            raise ShapeMismatch("projection shapes disagree with R")
        return cls(
            U=U,
            V=V,
            rho=arr("rho"),
            x_standardizer=Standardizer(arr("x_mean"), arr("x_std")),
            y_standardizer=Standardizer(arr("y_mean"), arr("y_std")),
            ridge=float(d["ridge"]),
        )


def dumps_model(d: dict) -> str:
    """JSON with floats written at 17 significant digits (exact round-trip)."""
    return json.dumps(_fmt17(d), indent=1).replace('"@@', "").replace('@@"', "")


def _fmt17(obj):
    if isinstance(obj, float):
        return f"@@{obj:.17g}@@" if np.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: _fmt17(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_fmt17(v) for v in obj]
    return obj


def fit_cca(X, Y, R: int, ridge: float = DEFAULT_RIDGE) -> CanonicalModel:
    """Fit CCA with ``R`` components.

    Both views are standardized, covariances use 1/N normalization and
    ``ridge`` is added to the diagonals of the auto-covariances.  The
    returned ``U``, ``V`` act on standardized data and satisfy
    ``U.T @ (Xs.T @ Xs / N + ridge I) @ U = I``.
    """
    X, Y = as_matrix(X, "X"), as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ShapeMismatch(f"row counts differ: {X.shape[0]} vs {Y.shape[0]}")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    n, dx = X.shape
    dy = Y.shape[1]
    if not 1 <= R <= min(dx, dy):
        raise RankTooLarge(f"R={R} outside [1, {min(dx, dy)}]")

    Xs, sx = standardize(X)
    Ys, sy = standardize(Y)
    Cxx = Xs.T @ Xs / n + ridge * np.eye(dx)
    Cyy = Ys.T @ Ys / n + ridge * np.eye(dy)
    Cxy = Xs.T @ Ys / n

    Wx = inv_sqrt_psd(Cxx, ridge)
    Wy = inv_sqrt_psd(Cyy, ridge)
    P, s, Qt = np.linalg.svd(Wx @ Cxy @ Wy, full_matrices=False)
    U = Wx @ P[:, :R]
    V = Wy @ Qt[:R].T
    U, V = _fix_signs(U, V)
    rho = np.clip(s[:R], 0.0, 1.0)
    return CanonicalModel(U, V, rho, sx, sy, float(ridge))


def project(X, model, side: str = "x") -> np.ndarray:
    """Standardize with the model's stored statistics, then project."""
    if side not in ("x", "y"):
        raise ValueError("side must be 'x' or 'y'")
    return model.project(X, side)


def canonical_correlations(model, X, Y) -> np.ndarray:
    """Per-component correlation of the projected views, on any data."""
    X, Y = as_matrix(X, "X"), as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ShapeMismatch("row counts differ")
    if X.shape[0] < 2:
        raise ShapeMismatch("need at least 2 rows")
    A = project(X, model, "x")
    B = project(Y, model, "y")
    num = np.einsum("ij,ij->j", A, B)
    den_a = np.einsum("ij,ij->j", A, A)
    den_b = np.einsum("ij,ij->j", B, B)
    if np.any(den_a < 1e-14) or np.any(den_b < 1e-14):
        raise DegenerateDirection("projected direction has (near) zero variance")
    return num / np.sqrt(den_a * den_b)


def orthonormality_residual(model, X, Y) -> float:
    """Max deviation of the ridged whitening constraints from identity."""
    return model.orthonormality_residual(X, Y)
