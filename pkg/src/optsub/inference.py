"""Wald tests and Benjamini-Hochberg adjustment."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

from .errors import OutOfRange


def wald_tests(fit) -> tuple[np.ndarray, np.ndarray]:
    """Two-sided Wald ``z`` and ``p`` per coefficient of a fit with a covariance."""
    beta = np.asarray(fit.beta, dtype=float)
    se = np.sqrt(np.clip(np.diag(np.asarray(fit.covariance, dtype=float)), 0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(beta == 0, 0.0, beta / se)
    p = 2.0 * ndtr(-np.abs(z))
    return z, p


def bh_adjust(pvals) -> np.ndarray:
    """Step-up false-discovery-rate adjusted p-values, in input order."""
    p = np.asarray(pvals, dtype=float).reshape(-1)
    if p.size == 0:
        return p
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise OutOfRange("p-values must lie in [0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    scaled = p[order] * m / np.arange(1, m + 1)
    adjusted = np.minimum(np.minimum.accumulate(scaled[::-1])[::-1], 1.0)
    out = np.empty(m)
    out[order] = adjusted
    return out
