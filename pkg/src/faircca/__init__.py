"""Fair representation CCA: CCA whose projections are linearly uncorrelated
with a binary sensitive attribute, plus data generation, downstream
classification, fairness metrics and paired significance tests."""

__version__ = "0.1.0"

from .cca import CanonicalModel, canonical_correlations, fit_cca, project, standardize  # noqa: E402
from .fair import (  # noqa: E402
    FairCanonicalModel,
    center_sensitive,
    fairness_gamma,
    fit_frcca,
    nullspace_basis,
    pct_change,
)

__all__ = [
    "CanonicalModel",
    "FairCanonicalModel",
    "canonical_correlations",
    "center_sensitive",
    "fairness_gamma",
    "fit_cca",
    "fit_frcca",
    "nullspace_basis",
    "pct_change",
    "project",
    "standardize",
]
