"""Result container shared by the two-step pipelines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class WeightedFit:
    """Coefficients of a weighted subsample fit and their estimated covariance.

    ``covariance`` estimates ``Var(beta)`` directly (no further scaling).
    ``members`` are full-data row indices of the subsample, with multiplicity.
    """

    beta: np.ndarray
    covariance: np.ndarray
    converged: bool
    iterations: int
    max_score_norm: float
    q: int
    n: int
    members: np.ndarray = field(repr=False, default=None)
    probs: np.ndarray = field(repr=False, default=None)
    names: tuple | None = None

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))
