"""Weighted logistic regression and the matrices behind its subsampling variances.

As for the Cox module, a subsample is a :class:`BinaryDataset` carrying
weights, member sampling probabilities, the draw count ``q`` and the
full-data size ``n_total``; every ``1/n`` factor uses ``n_total``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import expit

from .errors import DimensionMismatch, NotConverged, OneClassEmpty, Separation, Singular, ZeroProbability
from .numerics import NotPositiveDefinite, invert_spd, sandwich, solve_spd, weighted_gram

ETA_LIMIT = 700.0


@dataclass(frozen=True, eq=False)
class BinaryDataset:
    """Binary outcomes with an intercept column in ``x[:, 0]``.

    Pass ``add_intercept=False`` when ``x`` already starts with a column of
    ones (as in subsamples built by the methods below).
    """

    y: np.ndarray
    x: np.ndarray
    add_intercept: bool = True
    weights: np.ndarray | None = None
    n_total: int | None = None
    probs: np.ndarray | None = None
    q: int | None = None
    source: np.ndarray | None = None
    names: tuple | None = field(default=None)

    def __post_init__(self):
        y = np.asarray(self.y).reshape(-1)
        n = y.shape[0]
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(n, -1)
        if self.add_intercept:
            x = np.hstack([np.ones((n, 1)), x])
        if x.shape[0] != n:
            raise DimensionMismatch("y and x lengths differ")
        if n and np.any(x[:, 0] != 1.0):
            raise ValueError("first covariate column must be the intercept (all ones)")
        if n and np.any((y != 0) & (y != 1)):
            raise ValueError("labels must be 0 or 1")
        if not np.all(np.isfinite(x)):
            raise ValueError("non-finite covariates")
        weights = np.ones(n) if self.weights is None else np.asarray(self.weights, dtype=float).reshape(-1)
        if weights.shape[0] != n:
            raise DimensionMismatch("weights length differs from y")
        object.__setattr__(self, "y", y.astype(np.int8))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "add_intercept", False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "n_total", int(self.n_total if self.n_total is not None else n))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @cached_property
    def cases(self) -> np.ndarray:
        return np.flatnonzero(self.y == 1)

    @cached_property
    def noncases(self) -> np.ndarray:
        return np.flatnonzero(self.y == 0)

    @property
    def n1(self) -> int:
        return self.cases.size

    @property
    def n0(self) -> int:
        return self.noncases.size

    @property
    def is_subsample(self) -> bool:
        return self.q is not None

    def _take(self, rows, weights, probs, q) -> "BinaryDataset":
        return BinaryDataset(
            y=self.y[rows],
            x=self.x[rows],
            add_intercept=False,
            weights=weights,
            n_total=self.n_total,
            probs=probs,
            q=q,
            source=rows,
            names=self.names,
        )

    def rare_subsample(self, members, member_probs, q: int | None = None) -> "BinaryDataset":
        """All cases plus drawn non-cases ``members`` weighted ``1/(pi q)``."""
        members = np.asarray(members, dtype=np.int64)
        member_probs = np.asarray(member_probs, dtype=float)
        q = members.size if q is None else int(q)
        if np.any(self.y[members] != 0):
            raise ValueError("rare-design members must be non-cases")
        if np.any(member_probs <= 0):
            raise ZeroProbability("a drawn member has nonpositive probability")
        rows = np.concatenate([self.cases, members])
        weights = np.concatenate([np.ones(self.n1), 1.0 / (member_probs * q)])
        probs = np.concatenate([np.full(self.n1, np.nan), member_probs])
        return self._take(rows, weights, probs, q)

    def weighted_subsample(self, members, member_probs, q: int | None = None) -> "BinaryDataset":
        """Drawn ``members`` from the whole data, weighted ``1/(pi q)``."""
        members = np.asarray(members, dtype=np.int64)
        member_probs = np.asarray(member_probs, dtype=float)
        q = members.size if q is None else int(q)
        if np.any(member_probs <= 0):
            raise ZeroProbability("a drawn member has nonpositive probability")
        return self._take(members, 1.0 / (member_probs * q), member_probs, q)


def mu(beta, x) -> np.ndarray | float:
    """Success probability, stable for linear predictors up to ``|700|``."""
    eta = np.clip(np.asarray(x, dtype=float) @ np.asarray(beta, dtype=float), -ETA_LIMIT, ETA_LIMIT)
    out = expit(eta)
    return float(out) if np.ndim(out) == 0 else out


def loglik(beta, data: BinaryDataset, weights=None) -> float:
    w = data.weights if weights is None else np.asarray(weights, dtype=float)
    eta = data.x @ beta
    return float(np.sum(w * (data.y * eta - np.logaddexp(0.0, eta))))


def score(beta, data: BinaryDataset, weights=None) -> np.ndarray:
    w = data.weights if weights is None else np.asarray(weights, dtype=float)
    return data.x.T @ (w * (data.y - mu(beta, data.x)))


def m_x(beta, data: BinaryDataset, weights=None) -> np.ndarray:
    """``n^-1 sum w_i mu_i (1 - mu_i) x_i x_i^T`` with the full-data ``n``."""
    w = data.weights if weights is None else np.asarray(weights, dtype=float)
    m = mu(beta, data.x)
    return weighted_gram(data.x, w * m * (1 - m)) / data.n_total


@dataclass(frozen=True)
class LogisticFit:
    beta: np.ndarray
    converged: bool
    iterations: int
    max_score_norm: float
    loglik: float


MAX_HALVINGS = 20
DIVERGENCE = 50.0


def fit_logistic(data: BinaryDataset, weights=None, init=None, tol: float = 1e-8, max_iter: int = 50, strict: bool = True) -> LogisticFit:
    """Maximize the weighted (pseudo) log-likelihood by damped Newton."""
    w = data.weights if weights is None else np.asarray(weights, dtype=float)
    present = np.unique(data.y[w > 0])
    if present.size < 2:
        raise OneClassEmpty("both classes must be present in the weighted sample")
    beta = np.zeros(data.dim) if init is None else np.array(init, dtype=float)
    ll = loglik(beta, data, w)
    for it in range(1, max_iter + 1):
        u = score(beta, data, w)
        hess = m_x(beta, data, w) * data.n_total
        try:
            step = solve_spd(hess, u)
        except NotPositiveDefinite as exc:
            if np.max(np.abs(beta)) > 0.5 * DIVERGENCE:
                raise Separation("information collapsed while coefficients grew") from exc
            raise Singular(f"weighted information is singular at iteration {it}") from exc
        if np.max(np.abs(u)) <= tol and np.max(np.abs(step)) <= np.sqrt(tol):
            return LogisticFit(beta, True, it - 1, float(np.max(np.abs(u))), ll)
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            candidate = beta + scale * step
            new_ll = loglik(candidate, data, w)
            if new_ll >= ll - 1e-12 * (1 + abs(ll)):
                break
            scale *= 0.5
        beta, ll = candidate, new_ll
        if np.max(np.abs(beta)) > DIVERGENCE:
            raise Separation(f"coefficients diverging (|beta|_inf={np.max(np.abs(beta)):.3g}); classes may be separated")
        if np.max(np.abs(scale * step)) <= 1e-12 * (1 + np.max(np.abs(beta))):
            u = score(beta, data, w)
            return LogisticFit(beta, True, it, float(np.max(np.abs(u))), ll)
    u = score(beta, data, w)
    fit = LogisticFit(beta, False, max_iter, float(np.max(np.abs(u))), ll)
    if fit.max_score_norm <= tol:
        # score vanished while Newton steps stay large: the maximizer is at infinity
        raise Separation(f"score vanished with coefficients still moving (|beta|_inf={np.max(np.abs(beta)):.3g})")
    if strict:
        raise NotConverged(f"no convergence in {max_iter} iterations (|score|_inf={fit.max_score_norm:.3g})")
    return fit


def k_rare_full(beta, data: BinaryDataset, probs) -> np.ndarray:
    """``n^-2 (sum mu^2 x x^T / pi - (sum mu x)(sum mu x)^T)`` over the non-cases."""
    nc = data.noncases
    probs = np.asarray(probs, dtype=float)
    x = data.x[nc]
    m = mu(beta, x)
    if np.any((m > 0) & (probs <= 0)):
        raise ZeroProbability("non-case with positive mean has zero probability")
    keep = probs > 0
    g = weighted_gram(x[keep], m[keep] ** 2 / probs[keep])
    s = m @ x
    out = (g - np.outer(s, s)) / float(data.n_total) ** 2
    return 0.5 * (out + out.T)


def k_rare_draws(beta, sub: BinaryDataset) -> np.ndarray:
    """Subsample counterpart over the drawn non-cases of ``sub``."""
    nc = sub.noncases
    probs = sub.probs[nc]
    if np.any(probs <= 0):
        raise ZeroProbability("drawn member with nonpositive probability")
    x = sub.x[nc]
    y = mu(beta, x)[:, None] * x / probs[:, None]
    s = y.sum(axis=0)
    q = sub.q
    out = (y.T @ y / q - np.outer(s, s) / q**2) / float(sub.n_total) ** 2
    return 0.5 * (out + out.T)


def k_rare(probs, beta, data: BinaryDataset) -> np.ndarray:
    """Full-data form on full data; subsample form when ``data`` is a subsample."""
    if data.is_subsample:
        return k_rare_draws(beta, data)
    return k_rare_full(beta, data, probs)


def k_balanced(beta, sub: BinaryDataset, n: int | None = None) -> np.ndarray:
    """``n^-2 sum w_i^2 (D_i - mu_i)^2 x_i x_i^T`` over the subsample."""
    n = sub.n_total if n is None else n
    r = sub.y - mu(beta, sub.x)
    return weighted_gram(sub.x, (sub.weights * r) ** 2) / float(n) ** 2


def k_balanced_full(beta, data: BinaryDataset, probs, q: int) -> np.ndarray:
    """``n^-2 sum_i (pi_i q)^-1 (D_i - mu_i)^2 x_i x_i^T`` over the whole data."""
    probs = np.asarray(probs, dtype=float)
    r2 = (data.y - mu(beta, data.x)) ** 2
    if np.any((r2 > 0) & (probs <= 0)):
        raise ZeroProbability("record with nonzero residual has zero probability")
    w = np.where(probs > 0, r2 / np.where(probs > 0, probs * q, 1.0), 0.0)
    return weighted_gram(data.x, w) / float(data.n_total) ** 2


def inverse(m: np.ndarray) -> np.ndarray:
    try:
        return invert_spd(m)
    except NotPositiveDefinite as exc:
        raise Singular(str(exc)) from exc


def h_sandwich(mode: str, m: np.ndarray, k: np.ndarray, n: int | None = None, q: float | None = None) -> np.ndarray:
    """``M^-1 + (n/q) M^-1 K M^-1`` (rare) or ``M^-1 K M^-1`` (balanced)."""
    m_inv = inverse(m)
    if mode == "rare":
        if n is None or q is None:
            raise ValueError("rare mode needs n and q")
        return m_inv + (n / q) * sandwich(m_inv, k)
    if mode == "balanced":
        return sandwich(m_inv, k)
    raise ValueError(f"mode must be 'rare' or 'balanced', got {mode!r}")
