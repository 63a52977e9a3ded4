"""Synthetic data generators and Monte-Carlo experiment harness."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import cox_subsampling as cox
from . import logistic_balanced as bal
from . import logistic_rare as rare
from .errors import DimensionMismatch, OptsubError
from .inference import wald_tests
from .logistic import BinaryDataset, fit_logistic
from .sampling import make_rng
from .sizing import normal_quantile
from .survival import SurvivalDataset, fit_cox

COX_BETA = (0.3, -0.5, 0.1, -0.1, 0.1, -0.3)
COX_JUMP = {"I": 0.075, "II": 0.15, "III": 0.05}
UNIF_UPPER = {"I": (4.0,) * 6, "II": (1.0, 6.0, 2.0, 2.0, 1.0, 6.0)}
CHANGE_POINT = 6.0
LOGISTIC_DESIGNS = ("mzNormal", "mixNormal", "T3", "EXP")

# stream ids below the (seed, rep) prefix
COVARIATE_STREAM, FAILURE_STREAM, CENSOR_STREAM, OUTCOME_STREAM = 11, 12, 13, 14


@dataclass(frozen=True)
class CoxSimConfig:
    setting: str = "I"
    n: int = 15_000
    beta: tuple = COX_BETA
    censor_rate: float = 0.2
    hazard_floor: float = 0.001
    hazard_jump: float | None = None
    seed: int = 0
    rep: int = 0

    def __post_init__(self):
        if self.setting not in COX_JUMP:
            raise ValueError(f"setting must be one of {tuple(COX_JUMP)}")
        if self.hazard_jump is None:
            object.__setattr__(self, "hazard_jump", COX_JUMP[self.setting])
        if min(self.censor_rate, self.hazard_floor, self.hazard_jump) <= 0 or self.n < 1:
            raise ValueError("rates and n must be positive")
        if len(self.beta) != 6:
            raise DimensionMismatch("six coefficients are required")


@dataclass(frozen=True)
class LogisticSimConfig:
    design: str = "mzNormal"
    n: int = 100_000
    beta0: float = -6.0
    beta_rest: tuple = (0.5,) * 6
    seed: int = 0
    rep: int = 0

    def __post_init__(self):
        if self.design not in LOGISTIC_DESIGNS:
            raise ValueError(f"design must be one of {LOGISTIC_DESIGNS}")
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def beta(self) -> np.ndarray:
        return np.r_[self.beta0, np.asarray(self.beta_rest, dtype=float)]


def _rng(config, stream: int) -> np.random.Generator:
    return make_rng(config.seed, config.rep, stream)


def cox_covariates(setting: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if setting in UNIF_UPPER:
        return rng.uniform(0.0, 1.0, (n, 6)) * np.asarray(UNIF_UPPER[setting])
    x = np.empty((n, 6))
    x[:, :3] = rng.uniform(0.0, 4.0, (n, 3))
    eps = rng.standard_normal((n, 3)) * np.sqrt([0.1, 1.0, 1.5]) + np.array([0.0, 0.0, 1.0])
    x[:, 3] = 0.5 * x[:, 0] + 0.5 * x[:, 1] + eps[:, 0]
    x[:, 4] = x[:, 0] + eps[:, 1]
    x[:, 5] = x[:, 0] + eps[:, 2]
    return x


def invert_baseline(h: np.ndarray, floor: float, jump: float, change: float = CHANGE_POINT) -> np.ndarray:
    """Solve ``floor*min(t,c) + jump*max(t-c,0) = h`` for ``t``."""
    knee = floor * change
    return np.where(h < knee, h / floor, change + (h - knee) / jump)


def gen_cox(config: CoxSimConfig) -> SurvivalDataset:
    x = cox_covariates(config.setting, config.n, _rng(config, COVARIATE_STREAM))
    eta = x @ np.asarray(config.beta, dtype=float)
    e = _rng(config, FAILURE_STREAM).standard_exponential(config.n)
    v = invert_baseline(e * np.exp(-eta), config.hazard_floor, config.hazard_jump)
    c = _rng(config, CENSOR_STREAM).standard_exponential(config.n) / config.censor_rate
    return SurvivalDataset(np.minimum(v, c), (v <= c).astype(np.int8), x)


def _exchangeable(dim: int = 6, rho: float = 0.5) -> np.ndarray:
    return np.full((dim, dim), rho) + (1 - rho) * np.eye(dim)


def logistic_covariates(design: str, n: int, rng: np.random.Generator, dim: int = 6) -> np.ndarray:
    chol = np.linalg.cholesky(_exchangeable(dim))
    if design == "EXP":
        return rng.exponential(0.5, (n, dim))
    z = rng.standard_normal((n, dim)) @ chol.T
    if design == "mzNormal":
        return z
    if design == "mixNormal":
        return z + np.where(rng.uniform(size=(n, 1)) < 0.5, 1.0, -1.0)
    # t3 as a normal scale mixture
    return z / np.sqrt(rng.chisquare(3, (n, 1)) / 3) / 10


def gen_logistic(config: LogisticSimConfig) -> BinaryDataset:
    beta = config.beta
    x = logistic_covariates(config.design, config.n, _rng(config, COVARIATE_STREAM), beta.size - 1)
    eta = beta[0] + x @ beta[1:]
    prob = 1.0 / (1.0 + np.exp(-eta))
    y = (_rng(config, OUTCOME_STREAM).uniform(size=config.n) < prob).astype(np.int8)
    return BinaryDataset(y, x)


def rmse(estimates, reference) -> float:
    """Mean over replications of the Euclidean error."""
    est = np.atleast_2d(np.asarray(estimates, dtype=float))
    ref = np.asarray(reference, dtype=float)
    if est.size == 0:
        raise ValueError("no estimates")
    if ref.ndim == 1:
        ref = np.broadcast_to(ref, est.shape) if ref.shape[0] == est.shape[1] else None
    if ref is None or ref.shape != est.shape:
        raise DimensionMismatch("estimates and reference dimensions differ")
    return float(np.mean(np.linalg.norm(est - ref, axis=1)))


@dataclass(frozen=True)
class PowerDesign:
    """A sizing experiment: which model, which data, which coefficient."""

    model: str
    config: object
    target: int
    beta_star: float
    q0: int | None = None
    criterion: str = "A"
    c0: float = 2.0

    def __post_init__(self):
        if self.model not in ("cox", "rare", "balanced"):
            raise ValueError("model must be cox, rare or balanced")


def default_power_design(model: str, config=None, criterion: str = "A") -> PowerDesign:
    """Reference power-sizing designs; the tested coefficient is set to its true value."""
    if model == "cox":
        config = config or CoxSimConfig("I", n=150_000, hazard_jump=0.005)
        return PowerDesign("cox", config, 4, config.beta[4], criterion=criterion)
    if model == "rare":
        config = config or LogisticSimConfig("mzNormal", 100_000, -3.5, (0.1,) * 6)
        return PowerDesign("rare", config, 5, float(config.beta[5]), q0=1000, criterion=criterion)
    config = config or LogisticSimConfig("mzNormal", 100_000, 1.0, (0.1,) * 6)
    return PowerDesign("balanced", config, 6, float(config.beta[6]), q0=1000, criterion=criterion)


@dataclass
class PowerRep:
    q: dict = field(default_factory=dict)
    feasible: dict = field(default_factory=dict)
    reject: dict = field(default_factory=dict)
    failed: dict = field(default_factory=dict)


def _power_rep(design: PowerDesign, rep: int, gammas, alpha: float) -> PowerRep:
    out = PowerRep()
    seed = design.config.seed * 1_000_003 + rep
    crit = normal_quantile(1 - alpha / 2)
    if design.model == "cox":
        data = gen_cox(replace(design.config, rep=rep))
        q0 = design.q0 or cox.default_q0(data, design.c0)
        pilot = cox.run_pilot(data, q0, design.criterion, seed)
        s15 = cox.step_15(data, pilot, seed)
        size = lambda g: cox.qn_for_power(s15, design.target, design.beta_star, alpha, g)
        refit = lambda q: cox.fit_subsample(data, pilot.probs_opt, q, seed, init=pilot.beta_u)
    elif design.model == "rare":
        data = gen_logistic(replace(design.config, rep=rep))
        q0 = design.q0 or rare.default_q0(data, design.c0)
        pilot = rare.run_pilot(data, q0, design.criterion, seed)
        s15 = rare.rare_step_15(data, pilot, seed)
        size = lambda g: rare.rare_qn_for_power(s15, design.target, design.beta_star, alpha, g)
        refit = lambda q: rare.fit_subsample(data, pilot.probs_opt, q, seed, init=pilot.beta_u)
    else:
        data = gen_logistic(replace(design.config, rep=rep))
        pilot = bal.run_pilot(data, design.q0 or bal.DEFAULT_Q0, design.criterion, seed)
        s15 = bal.balanced_step_15(data, pilot, seed)
        size = lambda g: bal.balanced_qn_for_power(s15, design.target, design.beta_star, alpha, g)
        refit = lambda q: bal.fit_subsample(data, pilot.probs_opt, q, seed, init=pilot.beta_prop)
    for g in gammas:
        ps = size(g)
        out.q[g], out.feasible[g] = ps.q, ps.feasible
        if not ps.feasible:
            continue
        try:
            fit = refit(ps.q)
        except OptsubError:
            out.failed[g] = True
            continue
        z = wald_tests(fit)[0][design.target]
        out.reject[g] = bool(abs(z) > crit)
    return out


def _run_reps(fn, args_list, workers: int):
    if workers <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*args_list)))


def power_experiment(design: PowerDesign, gammas=(0.8,), alpha: float = 0.05, reps: int = 200, workers: int = 1) -> list[dict]:
    """Empirical power of the Wald test at the sized subsample, per nominal power.

    Each replication draws a fresh dataset, runs the pilot and the variance
    step once, sizes ``q`` for every ``gamma`` and refits at that size.
    Infeasible sizes are counted and excluded from the power estimate.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    gammas = tuple(float(g) for g in gammas)
    results = _run_reps(_power_rep, [(design, r, gammas, alpha) for r in range(reps)], workers)
    rows = []
    for g in gammas:
        qs = np.array([r.q[g] for r in results if r.feasible[g]], dtype=float)
        rejects = [r.reject[g] for r in results if g in r.reject]
        rows.append(
            {
                "gamma": g,
                "empirical_power": float(np.mean(rejects)) if rejects else math.nan,
                "mean_q": float(qs.mean()) if qs.size else math.nan,
                "sd_q": float(qs.std(ddof=1)) if qs.size > 1 else math.nan,
                "infeasible": sum(not r.feasible[g] for r in results),
                "failed": sum(g in r.failed for r in results),
                "reps": reps,
            }
        )
    return rows


def _rmse_rep(config: LogisticSimConfig, rep: int, q0: int, q_n: int, criteria) -> dict:
    data = gen_logistic(replace(config, rep=rep))
    seed = config.seed * 1_000_003 + rep
    mle = fit_logistic(data).beta
    out = {"MLE": mle}
    for c in criteria:
        if c == "uniform":
            out[c] = rare.fit_uniform_rare(data, q_n, seed).beta
        else:
            out[c] = rare.run_two_step_rare(data, q0, q_n, c, seed)[1].beta
    return out


def rmse_experiment(config: LogisticSimConfig, q0: int = 1000, q_n: int = 5000, reps: int = 100, criteria=("A", "L", "uniform"), workers: int = 1) -> list[dict]:
    """RMSE of rare-design estimators against the truth and against the full-data fit."""
    results = _run_reps(_rmse_rep, [(config, r, q0, q_n, criteria) for r in range(reps)], workers)
    truth = config.beta
    mles = np.array([r["MLE"] for r in results])
    rows = [{"method": "MLE", "rmse_truth": rmse(mles, truth), "rmse_mle": 0.0, "reps": reps}]
    for c in criteria:
        est = np.array([r[c] for r in results])
        per_rep = np.linalg.norm(est - truth, axis=1)
        rows.append(
            {
                "method": c,
                "rmse_truth": rmse(est, truth),
                "rmse_mle": rmse(est, mles),
                "se_truth": float(per_rep.std(ddof=1) / math.sqrt(reps)) if reps > 1 else math.nan,
                "reps": reps,
            }
        )
    return rows


def rmse_per_rep(config: LogisticSimConfig, q0: int, q_n: int, reps: int, criteria=("A", "L", "uniform"), workers: int = 1) -> dict:
    """Per-replication Euclidean errors against the truth, keyed by method."""
    results = _run_reps(_rmse_rep, [(config, r, q0, q_n, criteria) for r in range(reps)], workers)
    return {c: np.array([np.linalg.norm(r[c] - config.beta) for r in results]) for c in ("MLE", *criteria)}


def _re_rep(model: str, config, rep: int, multipliers, c0: float, q0: int | None, criterion: str) -> dict:
    seed = config.seed * 1_000_003 + rep
    if model == "cox":
        data = gen_cox(replace(config, rep=rep))
        scale = data.n_e
        q0 = q0 or cox.default_q0(data, c0)
        pilot = cox.run_pilot(data, q0, criterion, seed)
        est = cox.re_curve(cox.step_15(data, pilot, seed), [int(m * scale) for m in multipliers]).re
        full_beta = fit_cox(data).beta
        fit_at = lambda q: cox.fit_subsample(data, pilot.probs_opt, q, seed, init=pilot.beta_u).beta
        full_re = lambda b, q: cox.full_data_re(data, b, full_beta, pilot.probs_opt, [q])[0]
    elif model == "rare":
        data = gen_logistic(replace(config, rep=rep))
        scale = data.n1
        q0 = q0 or rare.default_q0(data, c0)
        pilot = rare.run_pilot(data, q0, criterion, seed)
        est = rare.rare_re_curve(rare.rare_step_15(data, pilot, seed), [int(m * scale) for m in multipliers]).re
        full_beta = fit_logistic(data).beta
        fit_at = lambda q: rare.fit_subsample(data, pilot.probs_opt, q, seed, init=pilot.beta_u).beta
        full_re = lambda b, q: rare.full_data_re(data, b, full_beta, pilot.probs_opt, [q])[0]
    else:
        data = gen_logistic(replace(config, rep=rep))
        scale = 1
        pilot = bal.run_pilot(data, q0 or bal.DEFAULT_Q0, criterion, seed)
        est = bal.balanced_re_curve(bal.balanced_step_15(data, pilot, seed), [int(m) for m in multipliers]).re
        full_beta = fit_logistic(data).beta
        fit_at = lambda q: bal.fit_subsample(data, pilot.probs_opt, q, seed, init=pilot.beta_prop).beta
        full_re = lambda b, q: bal.full_data_re(data, b, full_beta, pilot.probs_opt, [q])[0]
    qs = [int(m * scale) for m in multipliers]
    target = np.array([full_re(fit_at(q), q) for q in qs])
    return {"q": np.array(qs), "estimated": np.asarray(est), "full_data": target}


def re_experiment(model: str, config, multipliers=range(1, 10), reps: int = 50, c0: float = 2.0, q0: int | None = None, criterion: str = "A", workers: int = 1) -> list[dict]:
    """Step-1.5 relative efficiency against the full-data value at the two-step estimate.

    For the rare designs ``q = m * (number of events)``; for the balanced
    design the multipliers are the subsample sizes themselves.
    """
    multipliers = tuple(multipliers)
    args = [(model, config, r, multipliers, c0, q0, criterion) for r in range(reps)]
    return _run_reps(_re_rep, args, workers)
