"""Cox proportional-hazards machinery on counting-process data.

Every routine accepts a :class:`SurvivalDataset`. A subsample is the same
type carrying per-member weights, the sampling probability of each
censored member, the number of censored draws ``q`` and the size of the
full data ``n_total`` (all ``1/n`` scalings use the full-data size).

Ties among event times are handled with the Breslow convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, EmptyRiskSet, NotConverged, Singular, ZeroProbability
from .numerics import NotPositiveDefinite, invert_spd, sandwich, solve_spd


@dataclass(frozen=True)
class SurvivalRecord:
    exit: float
    status: int
    covariates: tuple
    entry: float = 0.0

    def __post_init__(self):
        if not self.exit > self.entry:
            raise ValueError(f"exit time {self.exit} must exceed entry time {self.entry}")
        if self.status not in (0, 1):
            raise ValueError(f"status must be 0 or 1, got {self.status}")
        if not np.all(np.isfinite(self.covariates)):
            raise ValueError("covariates must be finite")


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Counting-process survival data, optionally a weighted subsample.

    Parameters
    ----------
    exit, status : array_like, shape (n,)
        Exit (observed) time and event indicator.
    x : array_like, shape (n, r)
        Covariates.
    entry : array_like, shape (n,), optional
        Entry time, default 0. A subject is at risk at ``t`` when
        ``entry < t <= exit``.
    weights : array_like, optional
        Per-row weights, default 1.
    n_total : int, optional
        Size of the full data the scalings refer to. Defaults to ``n``.
    probs : array_like, optional
        Sampling probability of each censored member (NaN for events).
    q : int, optional
        Number of censored draws that produced this subsample.
    source : array_like, optional
        Row index of each member in the parent dataset.
    """

    exit: np.ndarray
    status: np.ndarray
    x: np.ndarray
    entry: np.ndarray | None = None
    weights: np.ndarray | None = None
    n_total: int | None = None
    probs: np.ndarray | None = None
    q: int | None = None
    source: np.ndarray | None = None
    names: tuple | None = field(default=None)

    def __post_init__(self):
        exit_ = np.asarray(self.exit, dtype=float).reshape(-1)
        n = exit_.shape[0]
        status = np.asarray(self.status).reshape(-1).astype(np.int8)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(n, -1) if n else x.reshape(0, max(x.size, 1))
        entry = np.zeros(n) if self.entry is None else np.asarray(self.entry, dtype=float).reshape(-1)
        weights = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float).reshape(-1)
        if not (status.shape[0] == x.shape[0] == entry.shape[0] == weights.shape[0] == n):
            raise DimensionMismatch("exit, status, x, entry and weights must have the same length")
        if n:
            if np.any(exit_ <= entry):
                raise ValueError("every exit time must exceed its entry time")
            if np.any((status != 0) & (status != 1)):
                raise ValueError("status must be 0 or 1")
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(exit_)) and np.all(np.isfinite(entry))):
                raise ValueError("non-finite values in survival data")
            if np.any(weights <= 0) or not np.all(np.isfinite(weights)):
                raise ValueError("weights must be positive and finite")
        object.__setattr__(self, "exit", exit_)
        object.__setattr__(self, "status", status)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "entry", entry)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "n_total", int(self.n_total if self.n_total is not None else n))

    @classmethod
    def from_records(cls, records, **kwargs) -> "SurvivalDataset":
        records = list(records)
        return cls(
            exit=[r.exit for r in records],
            status=[r.status for r in records],
            x=np.array([r.covariates for r in records], dtype=float).reshape(len(records), -1),
            entry=[r.entry for r in records],
            **kwargs,
        )

    @property
    def n(self) -> int:
        return self.exit.shape[0]

    @property
    def r(self) -> int:
        return self.x.shape[1]

    @cached_property
    def events(self) -> np.ndarray:
        return np.flatnonzero(self.status == 1)

    @cached_property
    def censored(self) -> np.ndarray:
        return np.flatnonzero(self.status == 0)

    @property
    def n_e(self) -> int:
        return self.events.size

    @property
    def n_c(self) -> int:
        return self.censored.size

    @property
    def tau(self) -> float:
        return float(self.exit.max()) if self.n else 0.0

    @property
    def is_subsample(self) -> bool:
        return self.q is not None

    def subsample(self, members, member_probs, q: int | None = None) -> "SurvivalDataset":
        """All events plus the drawn censored ``members`` (with multiplicity).

        Censored members get weight ``1 / (p_i q)``; events get weight 1.
        """
        members = np.asarray(members, dtype=np.int64)
        member_probs = np.asarray(member_probs, dtype=float)
        q = members.size if q is None else int(q)
        if np.any(self.status[members] != 0):
            raise ValueError("subsample members must be censored rows")
        if np.any(member_probs <= 0):
            raise ZeroProbability("a drawn member has nonpositive sampling probability")
        rows = np.concatenate([self.events, members])
        weights = np.concatenate([np.ones(self.n_e), 1.0 / (member_probs * q)])
        probs = np.concatenate([np.full(self.n_e, np.nan), member_probs])
        return SurvivalDataset(
            exit=self.exit[rows],
            status=self.status[rows],
            x=self.x[rows],
            entry=self.entry[rows],
            weights=weights,
            n_total=self.n_total,
            probs=probs,
            q=q,
            source=rows,
            names=self.names,
        )


class RiskSweep:
    """Risk-set aggregates at every distinct event time for one ``beta``.

    Aggregates are stored relative to ``exp(shift)`` with ``shift = max(eta)``
    so that large linear predictors do not overflow; ratios are unaffected.
    """

    def __init__(self, beta, data: SurvivalDataset, second_moment: bool = True):
        beta = np.asarray(beta, dtype=float).reshape(-1)
        if beta.shape[0] != data.r:
            raise DimensionMismatch(f"beta has length {beta.shape[0]}, data has {data.r} covariates")
        self.data = data
        self.beta = beta
        x = data.x
        self.eta = x @ beta
        self.shift = float(self.eta.max()) if data.n else 0.0
        self.risk = np.exp(self.eta - self.shift)
        wr = data.weights * self.risk

        ev = data.events
        self.times, self.counts = np.unique(data.exit[ev], return_counts=True)
        k = self.times.size

        ord_exit = np.argsort(data.exit, kind="stable")
        i_exit = np.searchsorted(data.exit[ord_exit], self.times, side="left")
        late_entry = np.any(data.entry >= (self.times[0] if k else np.inf))
        if late_entry:
            ord_entry = np.argsort(data.entry, kind="stable")
            i_entry = np.searchsorted(data.entry[ord_entry], self.times, side="left")

        def at_times(v):
            tail = _suffix_sums(v[ord_exit])[i_exit]
            if late_entry:
                tail = tail - _suffix_sums(v[ord_entry])[i_entry]
            return tail

        self.s0 = at_times(wr)
        if k and np.any(self.s0 <= 0):
            raise EmptyRiskSet("empty risk set at an event time")
        self.s1 = at_times(wr[:, None] * x)
        self.xbar = self.s1 / self.s0[:, None] if k else np.zeros((0, data.r))
        self.s2 = None
        if second_moment:
            # one column pair at a time: an n x r x r temporary dominates peak memory on large subsamples
            self.s2 = np.empty((k, data.r, data.r))
            for a in range(data.r):
                wx = wr * x[:, a]
                for b in range(a, data.r):
                    self.s2[:, a, b] = self.s2[:, b, a] = at_times(wx * x[:, b])

    def loglik(self) -> float:
        d = self.data
        return float(self.eta[d.events].sum() - np.sum(self.counts * (np.log(self.s0) + self.shift)))

    def score(self) -> np.ndarray:
        d = self.data
        return d.x[d.events].sum(axis=0) - (self.counts[:, None] * self.xbar).sum(axis=0)

    def information(self) -> np.ndarray:
        """Negative Hessian of the log-PL divided by the full-data size."""
        if self.s2 is None:
            raise ValueError("sweep was built without second moments")
        cov = self.s2 / self.s0[:, None, None] - self.xbar[:, :, None] * self.xbar[:, None, :]
        info = np.tensordot(self.counts, cov, axes=1) / self.data.n_total
        return 0.5 * (info + info.T)

    def cumulative_hazard(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.counts / self.s0)]) * np.exp(-self.shift)
        return cum[np.searchsorted(self.times, t, side="right")]

    def a_vectors(self, rows=None) -> np.ndarray:
        """Per-row influence vectors ``a_i`` for ``rows`` (default: censored rows)."""
        d = self.data
        rows = d.censored if rows is None else np.asarray(rows, dtype=np.int64)
        inc0 = self.counts / self.s0
        c0 = np.concatenate([[0.0], np.cumsum(inc0)])
        c1 = np.vstack([np.zeros((1, d.r)), np.cumsum(inc0[:, None] * self.xbar, axis=0)])
        hi = np.searchsorted(self.times, d.exit[rows], side="right")
        lo = np.searchsorted(self.times, d.entry[rows], side="right")
        x = d.x[rows]
        return self.risk[rows, None] * (x * (c0[hi] - c0[lo])[:, None] - (c1[hi] - c1[lo]))


def _suffix_sums(v: np.ndarray) -> np.ndarray:
    """``out[i] = v[i:].sum()`` with an extra trailing zero row."""
    out = np.zeros((v.shape[0] + 1,) + v.shape[1:])
    out[:-1] = np.cumsum(v[::-1], axis=0)[::-1]
    return out


def risk_aggregates(beta, data: SurvivalDataset, t: float):
    """``S0, S1, S2`` at time ``t`` (weighted when ``data`` carries weights)."""
    beta = np.asarray(beta, dtype=float).reshape(-1)
    at_risk = (data.entry < t) & (data.exit >= t)
    if not np.any(at_risk):
        raise EmptyRiskSet(f"nobody at risk at t={t}")
    x = data.x[at_risk]
    wr = data.weights[at_risk] * np.exp(x @ beta)
    return float(wr.sum()), wr @ x, (x * wr[:, None]).T @ x


def pl_score(beta, data: SurvivalDataset) -> np.ndarray:
    if data.n_e == 0:
        return np.zeros(data.r)
    return RiskSweep(beta, data, second_moment=False).score()


def pl_loglik(beta, data: SurvivalDataset) -> float:
    if data.n_e == 0:
        return 0.0
    return RiskSweep(beta, data, second_moment=False).loglik()


def pl_information(beta, data: SurvivalDataset) -> np.ndarray:
    if data.n_e == 0:
        return np.zeros((data.r, data.r))
    return RiskSweep(beta, data).information()


def breslow(beta, data: SurvivalDataset, t) -> float | np.ndarray:
    """Breslow cumulative baseline hazard at ``t``."""
    if data.n_e == 0:
        return np.zeros_like(np.asarray(t, dtype=float)) if np.ndim(t) else 0.0
    out = RiskSweep(beta, data, second_moment=False).cumulative_hazard(t)
    return float(out) if np.ndim(out) == 0 else out


def a_vectors(beta, data: SurvivalDataset, rows=None) -> np.ndarray:
    """Influence vectors of the censored rows (or of ``rows``).

    On a subsample the aggregates are the weighted ones, giving the
    subsample counterparts.
    """
    if data.n_e == 0:
        n_rows = data.n_c if rows is None else len(rows)
        return np.zeros((n_rows, data.r))
    return RiskSweep(beta, data, second_moment=False).a_vectors(rows)


def phi_from_vectors(a: np.ndarray, probs: np.ndarray, n: int) -> np.ndarray:
    """Full-data form: ``n^-2 (sum a a^T / p - (sum a)(sum a)^T)``."""
    a = np.asarray(a, dtype=float)
    probs = np.asarray(probs, dtype=float)
    nonzero = np.any(a != 0, axis=1)
    if np.any(nonzero & (probs <= 0)):
        raise ZeroProbability("nonzero influence vector with zero sampling probability")
    keep = probs > 0
    scaled = a[keep] / np.sqrt(probs[keep])[:, None]
    total = a.sum(axis=0)
    out = (scaled.T @ scaled - np.outer(total, total)) / float(n) ** 2
    return 0.5 * (out + out.T)


def phi_from_draws(a: np.ndarray, probs: np.ndarray, n: int, q: int) -> np.ndarray:
    """Subsample form: ``n^-2 (q^-1 sum a a^T / p^2 - q^-2 (sum a/p)(sum a/p)^T)``."""
    a = np.asarray(a, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if np.any(probs <= 0):
        raise ZeroProbability("drawn member with nonpositive sampling probability")
    y = a / probs[:, None]
    total = y.sum(axis=0)
    out = (y.T @ y / q - np.outer(total, total) / q**2) / float(n) ** 2
    return 0.5 * (out + out.T)


def phi_matrix(probs, beta, data: SurvivalDataset) -> np.ndarray:
    """Subsampling-noise matrix of the censored part.

    On full data ``probs`` is one probability per censored row. On a
    subsample ``probs`` may be omitted (``None``) to use the probabilities
    the members were drawn with.
    """
    if data.is_subsample:
        cens = data.censored
        p = data.probs[cens] if probs is None else np.asarray(probs, dtype=float)
        return phi_from_draws(a_vectors(beta, data, cens), p, data.n_total, data.q)
    return phi_from_vectors(a_vectors(beta, data), probs, data.n_total)


def cox_variance(probs, beta, data: SurvivalDataset, q: float) -> np.ndarray:
    """Asymptotic covariance of ``sqrt(n)(beta_tilde - beta)``.

    ``I^-1 + (n/q) I^-1 phi I^-1``; divide by ``n`` for the covariance of
    the estimator itself.
    """
    try:
        info_inv = invert_spd(pl_information(beta, data))
    except NotPositiveDefinite as exc:
        raise Singular(str(exc)) from exc
    phi = phi_matrix(probs, beta, data)
    return info_inv + (data.n_total / q) * sandwich(info_inv, phi)


@dataclass(frozen=True)
class CoxFit:
    beta: np.ndarray
    information: np.ndarray
    iterations: int
    converged: bool
    max_score_norm: float
    loglik: float


MAX_HALVINGS = 20
DIVERGENCE = 50.0


def fit_cox(data: SurvivalDataset, init=None, tol: float = 1e-8, max_iter: int = 25, strict: bool = True) -> CoxFit:
    """Maximize the (weighted) log partial likelihood by damped Newton.

    Raises :class:`NotConverged` when ``|beta|`` exceeds the divergence
    guard, or when ``max_iter`` is exhausted and ``strict`` is true.
    """
    if data.n_e == 0:
        raise ValueError("at least one event is required")
    beta = np.zeros(data.r) if init is None else np.array(init, dtype=float)
    sweep = RiskSweep(beta, data)
    ll = sweep.loglik()
    for it in range(1, max_iter + 1):
        score = sweep.score()
        info = sweep.information() * data.n_total
        try:
            step = solve_spd(info, score)
        except NotPositiveDefinite as exc:
            raise Singular(f"information matrix is singular at iteration {it}") from exc
        if np.max(np.abs(score)) <= tol and np.max(np.abs(step)) <= np.sqrt(tol):
            return CoxFit(beta, sweep.information(), it - 1, True, float(np.max(np.abs(score))), ll)
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            candidate = beta + scale * step
            new = RiskSweep(candidate, data)
            new_ll = new.loglik()
            if new_ll >= ll - 1e-12 * (1 + abs(ll)):
                break
            scale *= 0.5
        beta, sweep, ll = candidate, new, new_ll
        if np.max(np.abs(beta)) > DIVERGENCE:
            raise NotConverged(f"coefficients diverging (|beta|_inf={np.max(np.abs(beta)):.3g})")
        if np.max(np.abs(scale * step)) <= 1e-12 * (1 + np.max(np.abs(beta))):
            score = sweep.score()
            return CoxFit(beta, sweep.information(), it, True, float(np.max(np.abs(score))), ll)
    score = sweep.score()
    fit = CoxFit(beta, sweep.information(), max_iter, False, float(np.max(np.abs(score))), ll)
    if strict:
        raise NotConverged(f"no convergence in {max_iter} iterations (|score|_inf={fit.max_score_norm:.3g})")
    return fit
