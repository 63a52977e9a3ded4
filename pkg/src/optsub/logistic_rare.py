"""Two-step optimal subsampling for logistic regression with rare events.

All cases are kept; only non-cases are subsampled, with replacement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cox_subsampling import PILOT_STREAM, STEP15_STREAM, STEP2_STREAM, _criterion, normalize_scores
from .fit import WeightedFit
from .logistic import BinaryDataset, fit_logistic, inverse, k_rare_draws, k_rare_full, m_x, mu
from .numerics import sandwich
from .sampling import draw_indices, make_rng
from .sizing import PowerSize, SizingReport, power_z, rare_design_q


def rare_a_probs(beta, data: BinaryDataset, m=None) -> np.ndarray:
    """``mu_m |M^-1 x_m|`` normalized over the non-cases (``data.noncases`` order)."""
    m = m_x(beta, data) if m is None else m
    x = data.x[data.noncases]
    return normalize_scores(mu(beta, x) * np.linalg.norm(x @ inverse(m), axis=1))


def rare_l_probs(beta, data: BinaryDataset) -> np.ndarray:
    x = data.x[data.noncases]
    return normalize_scores(mu(beta, x) * np.linalg.norm(x, axis=1))


def rare_probs(beta, data: BinaryDataset, criterion: str) -> np.ndarray:
    c = _criterion(criterion)
    if c == "A":
        return rare_a_probs(beta, data)
    if c == "L":
        return rare_l_probs(beta, data)
    return np.full(data.n0, 1.0 / data.n0)


def default_q0(data: BinaryDataset, c0: float = 1.0) -> int:
    return max(int(round(c0 * data.n1)), data.dim + 1)


@dataclass(frozen=True)
class RarePilot:
    beta_u: np.ndarray
    probs_opt: np.ndarray
    criterion: str
    q0: int


@dataclass(frozen=True)
class RareStep15:
    m_check_inv: np.ndarray
    k_check: np.ndarray
    n: int
    q0: int

    @property
    def noise(self) -> np.ndarray:
        return sandwich(self.m_check_inv, self.k_check)

    @property
    def h_check(self) -> np.ndarray:
        return self.m_check_inv + (self.n / self.q0) * self.noise


def draw_rare(data: BinaryDataset, probs: np.ndarray, q: int, rng) -> BinaryDataset:
    picks = draw_indices(probs, q, rng)
    return data.rare_subsample(data.noncases[picks], probs[picks], q)


def run_pilot(data: BinaryDataset, q0: int, criterion: str = "A", seed: int = 0) -> RarePilot:
    """Uniform pilot over the non-cases, weighted fit, optimal probabilities."""
    if data.n1 < 1:
        raise ValueError("the data contain no cases")
    if q0 < data.dim:
        raise ValueError(f"q0 must be at least {data.dim}")
    uniform = np.full(data.n0, 1.0 / data.n0)
    pilot = draw_rare(data, uniform, q0, make_rng(seed, PILOT_STREAM))
    fit = fit_logistic(pilot)
    return RarePilot(fit.beta, rare_probs(fit.beta, data, criterion), _criterion(criterion), q0)


def rare_step_15(data: BinaryDataset, pilot: RarePilot, seed: int = 0) -> RareStep15:
    sub = draw_rare(data, pilot.probs_opt, pilot.q0, make_rng(seed, STEP15_STREAM))
    return RareStep15(
        m_check_inv=inverse(m_x(pilot.beta_u, sub)),
        k_check=k_rare_draws(pilot.beta_u, sub),
        n=data.n_total,
        q0=pilot.q0,
    )


def rare_re_curve(s15: RareStep15, q_grid, target_p: int | None = None) -> SizingReport:
    """``|n^-1 M^-1 + q^-1 M^-1 K M^-1| / |n^-1 M^-1|`` along ``q_grid``."""
    q_grid = np.asarray(q_grid, dtype=np.int64)
    if np.any(q_grid < 1):
        raise ValueError("q values must be at least 1")
    base = s15.m_check_inv / s15.n
    noise = s15.noise
    if target_p is None:
        denom = np.linalg.norm(base, "fro")
        re = np.array([np.linalg.norm(base + noise / q, "fro") / denom for q in q_grid])
    else:
        p = target_p
        re = np.array([(base[p, p] + noise[p, p] / q) / base[p, p] for q in q_grid])
    return SizingReport(q_grid=q_grid, re=re, target_covariate=target_p)


def rare_qn_for_power(s15: RareStep15, p: int, beta_star: float, alpha: float = 0.05, gamma: float = 0.8, n: int | None = None) -> PowerSize:
    if beta_star == 0:
        raise ValueError("beta_star must be nonzero")
    n = s15.n if n is None else n
    z = power_z(alpha, gamma)
    return rare_design_q(s15.noise[p, p], s15.m_check_inv[p, p], beta_star, z, n)


def weighted_fit(sub: BinaryDataset, init=None) -> WeightedFit:
    """Fit a rare-design subsample; covariance ``n^-1 M^-1 + q^-1 M^-1 K M^-1``."""
    fit = fit_logistic(sub, init=init)
    m_inv = inverse(m_x(fit.beta, sub))
    cov = m_inv / sub.n_total + sandwich(m_inv, k_rare_draws(fit.beta, sub)) / sub.q
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
    sub = draw_rare(data, probs, q, make_rng(seed, STEP2_STREAM))
    return weighted_fit(sub, init=init)


def run_two_step_rare(data: BinaryDataset, q0: int, q_n: int, criterion: str = "A", seed: int = 0):
    """Steps 1 and 2. Returns ``(pilot, fit)``."""
    pilot = run_pilot(data, q0, criterion, seed)
    return pilot, fit_subsample(data, pilot.probs_opt, q_n, seed, init=pilot.beta_u)


def fit_uniform_rare(data: BinaryDataset, q_n: int, seed: int = 0) -> WeightedFit:
    """One-step estimator: uniform draw of ``q_n`` non-cases plus all cases."""
    return fit_subsample(data, np.full(data.n0, 1.0 / data.n0), q_n, seed)


def full_data_re(data: BinaryDataset, beta_ts, beta_full, probs: np.ndarray, q_grid, target_p: int | None = None) -> np.ndarray:
    """Relative efficiency from full-data ``M_X`` and ``K`` at ``beta_ts``."""
    n = data.n_total
    m_inv = inverse(m_x(beta_ts, data))
    noise = sandwich(m_inv, k_rare_full(beta_ts, data, probs))
    base_full = inverse(m_x(beta_full, data)) / n
    out = []
    for q in np.asarray(q_grid, dtype=float):
        num = m_inv / n + noise / q
        if target_p is None:
            out.append(np.linalg.norm(num, "fro") / np.linalg.norm(base_full, "fro"))
        else:
            out.append(num[target_p, target_p] / base_full[target_p, target_p])
    return np.array(out)
