"""Two-step optimal subsampling for logistic regression without rare events.

Both classes are subsampled. The pilot uses class-proportional
probabilities; the main draw uses the A- or L-optimal probabilities over
all records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cox_subsampling import PILOT_STREAM, STEP15_STREAM, STEP2_STREAM, _criterion, normalize_scores
from .errors import OneClassEmpty, QExceedsN
from .fit import WeightedFit
from .logistic import BinaryDataset, fit_logistic, inverse, k_balanced, k_balanced_full, m_x, mu
from .numerics import sandwich
from .sampling import draw_indices, make_rng
from .sizing import PowerSize, SizingReport, power_z

DEFAULT_Q0 = 5000


def proportional_probs(data: BinaryDataset) -> np.ndarray:
    """Half of the mass on each class, uniform within a class."""
    if data.n0 < 1 or data.n1 < 1:
        raise OneClassEmpty("both classes must be present")
    return np.where(data.y == 1, 0.5 / data.n1, 0.5 / data.n0)


def balanced_a_probs(beta, data: BinaryDataset, m=None) -> np.ndarray:
    m = m_x(beta, data) if m is None else m
    resid = np.abs(data.y - mu(beta, data.x))
    return normalize_scores(resid * np.linalg.norm(data.x @ inverse(m), axis=1))


def balanced_l_probs(beta, data: BinaryDataset) -> np.ndarray:
    resid = np.abs(data.y - mu(beta, data.x))
    return normalize_scores(resid * np.linalg.norm(data.x, axis=1))


def balanced_probs(beta, data: BinaryDataset, criterion: str) -> np.ndarray:
    c = _criterion(criterion)
    if c == "A":
        return balanced_a_probs(beta, data)
    if c == "L":
        return balanced_l_probs(beta, data)
    return np.full(data.n, 1.0 / data.n)


@dataclass(frozen=True)
class BalancedPilot:
    beta_prop: np.ndarray
    probs_opt: np.ndarray
    criterion: str
    q0: int


@dataclass(frozen=True)
class BalancedStep15:
    m_check_inv: np.ndarray
    h_check: np.ndarray
    n: int
    q0: int


def draw_all(data: BinaryDataset, probs: np.ndarray, q: int, rng) -> BinaryDataset:
    picks = draw_indices(probs, q, rng)
    return data.weighted_subsample(picks, probs[picks], q)


def run_pilot(data: BinaryDataset, q0: int = DEFAULT_Q0, criterion: str = "A", seed: int = 0) -> BalancedPilot:
    if q0 < data.dim:
        raise ValueError(f"q0 must be at least {data.dim}")
    pilot = draw_all(data, proportional_probs(data), q0, make_rng(seed, PILOT_STREAM))
    fit = fit_logistic(pilot)
    return BalancedPilot(fit.beta, balanced_probs(fit.beta, data, criterion), _criterion(criterion), q0)


def balanced_step_15(data: BinaryDataset, pilot: BalancedPilot, seed: int = 0) -> BalancedStep15:
    sub = draw_all(data, pilot.probs_opt, pilot.q0, make_rng(seed, STEP15_STREAM))
    m_inv = inverse(m_x(pilot.beta_prop, sub))
    h = sandwich(m_inv, k_balanced(pilot.beta_prop, sub))
    return BalancedStep15(m_inv, h, data.n_total, pilot.q0)


def balanced_re_curve(s15: BalancedStep15, q_grid) -> SizingReport:
    """``|q0/q H| / |n^-1 M^-1|``; exactly proportional to ``1/q``."""
    q_grid = np.asarray(q_grid, dtype=np.int64)
    if np.any(q_grid < 1):
        raise ValueError("q values must be at least 1")
    if np.any(q_grid > s15.n):
        raise QExceedsN(f"q values above n={s15.n} are not meaningful for this design")
    ratio = np.linalg.norm(s15.h_check, "fro") / np.linalg.norm(s15.m_check_inv / s15.n, "fro")
    re = s15.q0 * ratio / q_grid.astype(float)
    return SizingReport(q_grid=q_grid, re=re)


def balanced_qn_for_power(s15: BalancedStep15, p: int, beta_star: float, alpha: float = 0.05, gamma: float = 0.8) -> PowerSize:
    """``ceil(q0 z^2 H_pp / beta*^2)``; infeasible when it exceeds ``n``."""
    if beta_star == 0:
        raise ValueError("beta_star must be nonzero")
    z = power_z(alpha, gamma)
    raw = s15.q0 * z**2 * s15.h_check[p, p] / beta_star**2
    q = max(math.ceil(raw), 1)
    return PowerSize(q, q <= s15.n, raw)


def weighted_fit(sub: BinaryDataset, init=None) -> WeightedFit:
    """Fit a subsample; covariance ``M^-1 K M^-1`` from the subsample."""
    fit = fit_logistic(sub, init=init)
    m_inv = inverse(m_x(fit.beta, sub))
    cov = sandwich(m_inv, k_balanced(fit.beta, sub))
    return WeightedFit(
        beta=fit.beta,
        covariance=cov,
        converged=fit.converged,
        iterations=fit.iterations,
        max_score_norm=fit.max_score_norm,
        q=sub.q,
        n=sub.n_total,
        members=sub.source,
        probs=sub.probs,
        names=sub.names,
    )


def fit_subsample(data: BinaryDataset, probs: np.ndarray, q: int, seed: int = 0, init=None) -> WeightedFit:
    sub = draw_all(data, probs, q, make_rng(seed, STEP2_STREAM))
    return weighted_fit(sub, init=init)


def run_two_step_balanced(data: BinaryDataset, q0: int, q_n: int, criterion: str = "A", seed: int = 0):
    """Steps 1 and 2. Returns ``(pilot, fit)``."""
    pilot = run_pilot(data, q0, criterion, seed)
    return pilot, fit_subsample(data, pilot.probs_opt, q_n, seed, init=pilot.beta_prop)


def full_data_re(data: BinaryDataset, beta_ts, beta_full, probs: np.ndarray, q_grid) -> np.ndarray:
    """``|M^-1 K^B M^-1| / |n^-1 M^-1|`` from full-data matrices, ``K^B`` at each ``q``."""
    m_inv = inverse(m_x(beta_ts, data))
    base_full = inverse(m_x(beta_full, data)) / data.n_total
    denom = np.linalg.norm(base_full, "fro")
    return np.array(
        [np.linalg.norm(sandwich(m_inv, k_balanced_full(beta_ts, data, probs, int(q))), "fro") / denom for q in q_grid]
    )
