"""Fair representation CCA: CCA restricted to directions uncorrelated with a
binary sensitive attribute.

A projection ``u`` leaves every affine functional of ``Xs @ u`` uncorrelated
with the attribute exactly when ``u`` is orthogonal to ``Xs.T @ zc`` (``zc``
the centered attribute).  So the fit builds an orthonormal basis of that
orthogonal complement for each view, runs ordinary CCA on the reduced views
and maps the directions back.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cca import DEFAULT_RIDGE, CanonicalModel, Standardizer, as_matrix, fit_cca, standardize
from .errors import (
    AttributeOrthogonal,
    DegenerateAttribute,
    NonBinaryColumn,
    RankTooLarge,
    ShapeMismatch,
    ZeroBaseline,
)


@dataclass(frozen=True)
class SensitiveVector:
    groups: np.ndarray  # 0/1
    centered: np.ndarray


def center_sensitive(z, standardize_z: bool = False) -> SensitiveVector:
    """Map a two-valued attribute to {0, 1} and subtract its mean.

    Values are ordered ascending, so {1, 2} codes become {0, 1}.  With
    ``standardize_z`` the centered vector is also divided by its std; this
    does not change the nullspace.
    """
    z = np.asarray(z, dtype=float).ravel()
    values = np.unique(z)
    if values.size > 2:
        raise NonBinaryColumn(f"sensitive attribute has {values.size} distinct values")
    if values.size < 2:
        raise DegenerateAttribute("sensitive attribute has a single group")
    groups = (z == values[1]).astype(float)
    centered = groups - groups.mean()
    if standardize_z:
        centered = centered / centered.std()
    return SensitiveVector(groups, centered)


def _as_sensitive(z) -> SensitiveVector:
    return z if isinstance(z, SensitiveVector) else center_sensitive(z)


@dataclass(frozen=True)
class NullspaceBasis:
    basis: np.ndarray
    removed_direction: np.ndarray


def nullspace_basis(Xs, zc) -> NullspaceBasis:
    """Orthonormal basis of the complement of ``Xs.T @ zc``.

    ``Xs`` is expected to be standardized already.  The basis is the set of
    left singular vectors of the D x 1 matrix ``Xs.T @ zc`` after the first.
    """
    Xs = as_matrix(Xs)
    zc = _as_sensitive(zc)
    if Xs.shape[0] != zc.centered.shape[0]:
        raise ShapeMismatch("attribute length differs from row count")
    if Xs.shape[1] < 2:
        raise RankTooLarge("need at least 2 features to leave a nullspace")
    g = Xs.T @ zc.centered
    norm = np.linalg.norm(g)
    if norm < 1e-10:
        raise AttributeOrthogonal(
            "features are already uncorrelated with the attribute; use plain CCA"
        )
    Ux, _, _ = np.linalg.svd(g[:, None], full_matrices=True)
    B = Ux[:, 1:]
    idx = np.argmax(np.abs(B), axis=0)
    B = B * np.sign(B[idx, np.arange(B.shape[1])])
    return NullspaceBasis(B, g / norm)


@dataclass(frozen=True)
class FairCanonicalModel:
    inner: CanonicalModel
    U: np.ndarray
    V: np.ndarray
    rx: NullspaceBasis
    ry: NullspaceBasis
    x_standardizer: Standardizer
    y_standardizer: Standardizer

    @property
    def R(self) -> int:
        return self.inner.R

    @property
    def rho(self) -> np.ndarray:
        return self.inner.rho

    @property
    def ridge(self) -> float:
        return self.inner.ridge

    def reduce(self, X, side: str = "x") -> np.ndarray:
        if side == "x":
            return self.x_standardizer.apply(X) @ self.rx.basis
        return self.y_standardizer.apply(X) @ self.ry.basis

    def project(self, X, side: str = "x") -> np.ndarray:
        return self.inner.project(self.reduce(X, side), side)

    def orthonormality_residual(self, X, Y) -> float:
        return self.inner.orthonormality_residual(self.reduce(X, "x"), self.reduce(Y, "y"))

    def to_dict(self) -> dict:
        return {
            "method": "frcca",
            "R": self.R,
            "ridge": self.ridge,
            "rho": self.rho.tolist(),
            "U": self.U.tolist(),
            "V": self.V.tolist(),
            "x_mean": self.x_standardizer.means.tolist(),
            "x_std": self.x_standardizer.stds.tolist(),
            "y_mean": self.y_standardizer.means.tolist(),
            "y_std": self.y_standardizer.stds.tolist(),
            "rx": self.rx.basis.tolist(),
            "ry": self.ry.basis.tolist(),
            "inner": self.inner.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FairCanonicalModel":
        arr = lambda k: np.asarray(d[k], dtype=float)  # noqa: E731
        inner = CanonicalModel.from_dict(d["inner"])
        rx, ry = arr("rx"), arr("ry")
        return cls(
            inner=inner,
            U=arr("U"),
            V=arr("V"),
            rx=NullspaceBasis(rx, _complement(rx)),
            ry=NullspaceBasis(ry, _complement(ry)),
            x_standardizer=Standardizer(arr("x_mean"), arr("x_std")),
            y_standardizer=Standardizer(arr("y_mean"), arr("y_std")),
        )


def _complement(B: np.ndarray) -> np.ndarray:
    Q, _ = np.linalg.qr(B, mode="complete")
    return Q[:, -1]


def fit_frcca(X, Y, z, R: int, ridge: float = DEFAULT_RIDGE,
              standardize_z: bool = False) -> FairCanonicalModel:
    X, Y = as_matrix(X, "X"), as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ShapeMismatch(f"row counts differ: {X.shape[0]} vs {Y.shape[0]}")
    bound = min(X.shape[1] - 1, Y.shape[1] - 1)
    if not 1 <= R <= bound:
        raise RankTooLarge(f"R={R} outside [1, {bound}] (one dimension per view is removed)")
    zc = center_sensitive(z, standardize_z)
    if zc.centered.shape[0] != X.shape[0]:
        raise ShapeMismatch("attribute length differs from row count")

    Xs, sx = standardize(X)
    Ys, sy = standardize(Y)
    rx = nullspace_basis(Xs, zc)
    ry = nullspace_basis(Ys, zc)
    inner = fit_cca(Xs @ rx.basis, Ys @ ry.basis, R, ridge)
    U = rx.basis @ (inner.U / inner.x_standardizer.stds[:, None])
    V = ry.basis @ (inner.V / inner.y_standardizer.stds[:, None])
    return FairCanonicalModel(inner, U, V, rx, ry, sx, sy)


def constraint_residuals(model, X, Y, z) -> tuple[float, float]:
    """Max-abs entries of U'Xs'zc and V'Ys'zc."""
    gx, gy = _gammas(model, X, Y, z)
    return float(np.abs(gx).max()), float(np.abs(gy).max())


def _gammas(model, X, Y, z):
    zc = _as_sensitive(z)
    A = model.project(X, "x")
    B = model.project(Y, "y")
    if A.shape[0] != zc.centered.shape[0] or B.shape[0] != zc.centered.shape[0]:
        raise ShapeMismatch("attribute length differs from row count")
    # zc sums to zero, so the projection's centering offset drops out
    return A.T @ zc.centered, B.T @ zc.centered


def fairness_gamma(model, X, Y, z, signed: bool = False) -> np.ndarray:
    """Per-component leakage of the attribute into the projections.

    Averages ``|U'Xs'zc|`` and ``|V'Ys'zc|`` per component; ``signed=True``
    averages the raw entries instead.
    """
    gx, gy = _gammas(model, X, Y, z)
    if signed:
        return (gx + gy) / 2
    return (np.abs(gx) + np.abs(gy)) / 2


def pct_change(proposed, baseline, kind: str = "corr") -> np.ndarray:
    """Percent change from baseline; for ``kind="fair"`` a decrease is a gain."""
    p = np.asarray(proposed, dtype=float)
    b = np.asarray(baseline, dtype=float)
    if p.shape != b.shape:
        raise ShapeMismatch("proposed and baseline lengths differ")
    zero = np.flatnonzero(b == 0)
    if zero.size:
        raise ZeroBaseline(int(zero[0]))
    if kind == "corr":
        return (p - b) / b * 100.0
    if kind == "fair":
        return -(p - b) / b * 100.0
    raise ValueError(f"unknown kind {kind!r}")
