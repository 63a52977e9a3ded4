"""Two-step optimal subsampling for Cox regression and subsample-size selection.

Pipeline: uniform pilot over the censored rows (step 1), an extra small
draw under the approximated optimal probabilities used only to estimate
variance components (step 1.5), then the main optimal subsample and
weighted refit (step 2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllZeroScores, Singular
from .fit import WeightedFit
from .numerics import NotPositiveDefinite, invert_spd, sandwich
from .sampling import draw_indices, make_rng
from .sizing import PowerSize, SizingReport, power_z, rare_design_q
from .survival import SurvivalDataset, a_vectors, fit_cox, phi_from_draws, phi_from_vectors, pl_information

CRITERIA = ("A", "L", "uniform")

# RNG stream ids under the user seed
PILOT_STREAM, STEP15_STREAM, STEP2_STREAM = 1, 2, 3


def _inverse(info: np.ndarray) -> np.ndarray:
    try:
        return invert_spd(info)
    except NotPositiveDefinite as exc:
        raise Singular(str(exc)) from exc


def normalize_scores(scores: np.ndarray) -> np.ndarray:
    total = scores.sum()
    if not total > 0:
        raise AllZeroScores("every sampling score is zero")
    return scores / total


def probs_from_vectors(a: np.ndarray, criterion: str, info_inv: np.ndarray | None = None) -> np.ndarray:
    """Normalized ``|I^-1 a_m|`` (A), ``|a_m|`` (L) or uniform probabilities."""
    criterion = _criterion(criterion)
    if criterion == "uniform":
        return np.full(a.shape[0], 1.0 / a.shape[0])
    if criterion == "A":
        a = a @ info_inv  # info_inv is symmetric
    return normalize_scores(np.linalg.norm(a, axis=1))


def a_optimal_probs(beta, data: SurvivalDataset, info=None) -> np.ndarray:
    """A-optimal probabilities over the censored rows, in ``data.censored`` order."""
    info = pl_information(beta, data) if info is None else info
    return probs_from_vectors(a_vectors(beta, data), "A", _inverse(info))


def l_optimal_probs(beta, data: SurvivalDataset) -> np.ndarray:
    return probs_from_vectors(a_vectors(beta, data), "L")


def _criterion(criterion: str) -> str:
    c = criterion if criterion == "uniform" else criterion.upper()
    if c not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}, got {criterion!r}")
    return c


def optimal_probs(beta, data: SurvivalDataset, criterion: str) -> np.ndarray:
    c = _criterion(criterion)
    if c == "A":
        return a_optimal_probs(beta, data)
    if c == "L":
        return l_optimal_probs(beta, data)
    return np.full(data.n_c, 1.0 / data.n_c)


def default_q0(data: SurvivalDataset, c0: float = 2.0) -> int:
    return max(int(round(c0 * data.n_e)), data.r + 1)


@dataclass(frozen=True)
class CoxPilot:
    beta_u: np.ndarray
    probs_opt: np.ndarray
    criterion: str
    q0: int
    iterations: int = 0


@dataclass(frozen=True)
class CoxStep15:
    info_inv_q15: np.ndarray
    phi_q15: np.ndarray
    n: int
    q0: int

    @property
    def noise(self) -> np.ndarray:
        """``I^-1 phi I^-1`` at the pilot estimate."""
        return sandwich(self.info_inv_q15, self.phi_q15)


def draw_subsample(data: SurvivalDataset, probs: np.ndarray, q: int, rng) -> SurvivalDataset:
    """All events plus ``q`` censored rows drawn with replacement from ``probs``."""
    picks = draw_indices(probs, q, rng)
    return data.subsample(data.censored[picks], probs[picks], q)


def run_pilot(data: SurvivalDataset, q0: int, criterion: str = "A", seed: int = 0) -> CoxPilot:
    """Step 1: uniform pilot, weighted fit, approximated optimal probabilities."""
    if data.n_e < 1:
        raise ValueError("the data contain no events")
    if q0 < data.r + 1:
        raise ValueError(f"q0 must be at least r+1={data.r + 1}")
    uniform = np.full(data.n_c, 1.0 / data.n_c)
    pilot = draw_subsample(data, uniform, q0, make_rng(seed, PILOT_STREAM))
    fit = fit_cox(pilot)
    probs = optimal_probs(fit.beta, data, criterion)
    return CoxPilot(fit.beta, probs, _criterion(criterion), q0, fit.iterations)


def step_15(data: SurvivalDataset, pilot: CoxPilot, seed: int = 0) -> CoxStep15:
    """Step 1.5: variance components from a fresh ``q0`` draw under ``pilot.probs_opt``.

    Reuses the pilot coefficients; nothing is refitted.
    """
    sub = draw_subsample(data, pilot.probs_opt, pilot.q0, make_rng(seed, STEP15_STREAM))
    info_inv = _inverse(pl_information(pilot.beta_u, sub))
    cens = sub.censored
    phi = phi_from_draws(a_vectors(pilot.beta_u, sub, cens), sub.probs[cens], data.n_total, pilot.q0)
    return CoxStep15(info_inv, phi, data.n_total, pilot.q0)


def re_curve(s15: CoxStep15, q_grid, target_p: int | None = None) -> SizingReport:
    """Estimated relative efficiency of the two-step estimator for each ``q``."""
    q_grid = np.asarray(q_grid, dtype=np.int64)
    if np.any(q_grid < 1):
        raise ValueError("q values must be at least 1")
    base = s15.info_inv_q15 / s15.n
    noise = s15.noise
    re = np.array([_ratio(base, noise, q, target_p) for q in q_grid])
    return SizingReport(q_grid=q_grid, re=re, target_covariate=target_p)


def _ratio(base: np.ndarray, noise: np.ndarray, q: float, target_p: int | None) -> float:
    if target_p is None:
        return float(np.linalg.norm(base + noise / q, "fro") / np.linalg.norm(base, "fro"))
    return float((base[target_p, target_p] + noise[target_p, target_p] / q) / base[target_p, target_p])


def qn_for_power(s15: CoxStep15, p: int, beta_star: float, alpha: float = 0.05, gamma: float = 0.8, n: int | None = None) -> PowerSize:
    """Censored subsample size giving power ``gamma`` for ``H0: beta_p = 0`` at level ``alpha``."""
    if beta_star == 0:
        raise ValueError("beta_star must be nonzero")
    n = s15.n if n is None else n
    z = power_z(alpha, gamma)
    return rare_design_q(s15.noise[p, p], s15.info_inv_q15[p, p], beta_star, z, n)


def fit_subsample(data: SurvivalDataset, probs: np.ndarray, q: int, seed: int = 0, init=None) -> WeightedFit:
    """Step 2: draw ``q`` censored rows under ``probs`` and refit with weights."""
    sub = draw_subsample(data, probs, q, make_rng(seed, STEP2_STREAM))
    return weighted_fit(sub, init=init)


def weighted_fit(sub: SurvivalDataset, init=None) -> WeightedFit:
    """Fit a subsample and attach ``n^-1 I^-1 + q^-1 I^-1 phi I^-1``."""
    fit = fit_cox(sub, init=init)
    info_inv = _inverse(fit.information)
    cens = sub.censored
    phi = phi_from_draws(a_vectors(fit.beta, sub, cens), sub.probs[cens], sub.n_total, sub.q)
    cov = info_inv / sub.n_total + sandwich(info_inv, phi) / sub.q
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


def run_two_step(data: SurvivalDataset, q0: int, q_n: int, criterion: str = "A", seed: int = 0):
    """Steps 1 and 2. Returns ``(pilot, fit)``."""
    pilot = run_pilot(data, q0, criterion, seed)
    return pilot, fit_subsample(data, pilot.probs_opt, q_n, seed, init=pilot.beta_u)


def full_data_re(data: SurvivalDataset, beta_ts, beta_full, probs: np.ndarray, q_grid, target_p: int | None = None) -> np.ndarray:
    """Relative efficiency from full-data quantities (the target of :func:`re_curve`)."""
    n = data.n_total
    info_inv_ts = _inverse(pl_information(beta_ts, data))
    phi = phi_from_vectors(a_vectors(beta_ts, data), probs, n)
    noise = sandwich(info_inv_ts, phi)
    base_full = _inverse(pl_information(beta_full, data)) / n
    out = []
    for q in np.asarray(q_grid, dtype=float):
        num = info_inv_ts / n + noise / q
        if target_p is None:
            out.append(np.linalg.norm(num, "fro") / np.linalg.norm(base_full, "fro"))
        else:
            out.append(num[target_p, target_p] / base_full[target_p, target_p])
    return np.array(out)
