"""Multi-pass Cox two-step subsampling over a batch stream that does not fit in memory.

Events are assumed to fit in memory (the rare-event regime); censored
rows are only ever held in fixed-size reservoirs and the current batch.

Pass 1 keeps the events and a uniform reservoir of censored rows, and
fits the pilot. Pass 2 accumulates full-data risk-set sums at the pilot
coefficients. Pass 3 draws the variance-step and main subsamples with
probabilities proportional to the chosen criterion. A fourth pass is made
only when the main size has to be chosen after the variance step.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import cox_subsampling as cox
from .errors import EmptyPool, EmptyRiskSet
from .fit import WeightedFit
from .sampling import Reservoir
from .survival import SurvivalDataset, a_vectors, fit_cox, phi_from_draws, pl_information

ENTRY, TIME, STATUS, COV = 0, 1, 2, 3


def derive_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1, dtype=np.uint64)[0])


class RiskAccumulator:
    """Streams ``S0, S1, S2`` at fixed event times, relative to ``exp(shift)``."""

    def __init__(self, beta, times: np.ndarray, shift: float = 0.0, second_moment: bool = True):
        self.beta = np.asarray(beta, dtype=float)
        self.times = np.asarray(times, dtype=float)
        k, r = self.times.size, self.beta.size
        self.shift = float(shift)
        self._d0 = np.zeros(k + 1)
        self._d1 = np.zeros((k + 1, r))
        self._d2 = np.zeros((k + 1, r, r)) if second_moment else None
        self._pairs = np.triu_indices(r)

    def add(self, entry: np.ndarray, exit_: np.ndarray, x: np.ndarray, weights=None) -> None:
        eta = x @ self.beta
        top = float(eta.max(initial=-np.inf))
        if top > self.shift:
            scale = np.exp(self.shift - top)
            self._d0 *= scale
            self._d1 *= scale
            if self._d2 is not None:
                self._d2 *= scale
            self.shift = top
        risk = np.exp(eta - self.shift)
        if weights is not None:
            risk = risk * weights
        # row contributes to event times in (entry, exit]
        lo = np.searchsorted(self.times, entry, side="right")
        hi = np.searchsorted(self.times, exit_, side="right")
        live = lo < hi
        lo, hi, risk, x = lo[live], hi[live], risk[live], x[live]
        m = self.times.size + 1

        def spread(v):
            return np.bincount(lo, v, m) - np.bincount(hi, v, m)

        self._d0 += spread(risk)
        for j in range(x.shape[1]):
            self._d1[:, j] += spread(risk * x[:, j])
        if self._d2 is not None:
            for a, b in zip(*self._pairs):
                v = spread(risk * x[:, a] * x[:, b])
                self._d2[:, a, b] += v
                if a != b:
                    self._d2[:, b, a] += v

    @property
    def s0(self) -> np.ndarray:
        return np.cumsum(self._d0)[:-1]

    @property
    def s1(self) -> np.ndarray:
        return np.cumsum(self._d1, axis=0)[:-1]

    @property
    def s2(self) -> np.ndarray:
        return np.cumsum(self._d2, axis=0)[:-1]


@dataclass
class CoxAggregates:
    """Full-data risk-set sums at the distinct event times."""

    beta: np.ndarray
    times: np.ndarray
    counts: np.ndarray
    s0: np.ndarray
    s1: np.ndarray
    shift: float
    information: np.ndarray
    _c0: np.ndarray = field(init=False, repr=False)
    _c1: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if np.any(self.s0 <= 0):
            raise EmptyRiskSet("empty risk set at an event time")
        inc0 = self.counts / self.s0
        xbar = self.s1 / self.s0[:, None]
        self._c0 = np.concatenate([[0.0], np.cumsum(inc0)])
        self._c1 = np.vstack([np.zeros((1, self.s1.shape[1])), np.cumsum(inc0[:, None] * xbar, axis=0)])

    def a_vectors(self, entry: np.ndarray, exit_: np.ndarray, x: np.ndarray) -> np.ndarray:
        risk = np.exp(x @ self.beta - self.shift)
        hi = np.searchsorted(self.times, exit_, side="right")
        lo = np.searchsorted(self.times, entry, side="right")
        return risk[:, None] * (x * (self._c0[hi] - self._c0[lo])[:, None] - (self._c1[hi] - self._c1[lo]))


def _to_dataset(rows: np.ndarray, **kwargs) -> SurvivalDataset:
    return SurvivalDataset(rows[:, TIME], rows[:, STATUS], rows[:, COV:], entry=rows[:, ENTRY], **kwargs)


def _subsample(events: np.ndarray, res: Reservoir, n: int, names) -> SurvivalDataset:
    probs = res.probabilities
    q = res.capacity
    rows = np.vstack([events, res.payloads])
    weights = np.concatenate([np.ones(events.shape[0]), 1.0 / (probs * q)])
    all_probs = np.concatenate([np.full(events.shape[0], np.nan), probs])
    source = np.concatenate([np.full(events.shape[0], -1), res.ordinals])
    return _to_dataset(rows, weights=weights, n_total=n, probs=all_probs, q=q, source=source, names=names)


@dataclass
class StreamResult:
    n: int
    n_e: int
    n_c: int
    q0: int
    q_n: int
    beta_pilot: np.ndarray
    step15: cox.CoxStep15
    fit: WeightedFit
    passes: int
    timings: dict


def _censored_weights(agg: CoxAggregates, criterion: str, info_inv: np.ndarray | None) -> Callable[[np.ndarray], np.ndarray]:
    def weight_fn(batch: np.ndarray) -> np.ndarray:
        w = np.zeros(batch.shape[0])
        cens = batch[:, STATUS] == 0
        if criterion == "uniform":
            w[cens] = 1.0
            return w
        b = batch[cens]
        a = agg.a_vectors(b[:, ENTRY], b[:, TIME], b[:, COV:])
        if criterion == "A":
            a = a @ info_inv
        w[cens] = np.linalg.norm(a, axis=1)
        return w

    return weight_fn


def stream_two_step(
    batches: Iterable[np.ndarray],
    q0: int | None = None,
    q_n: int | Callable[[cox.CoxStep15, int], int] | None = None,
    criterion: str = "A",
    seed: int = 0,
    c0: float = 2.0,
    names=None,
) -> StreamResult:
    """Run pilot, variance step and main weighted fit with bounded memory.

    ``batches`` must be re-iterable (each iteration replays the data).
    ``q_n`` is a fixed size or a function ``(step15, n_e) -> size``; the
    default is ``5 * n_e``.
    """
    criterion = cox._criterion(criterion)
    timings = {}

    t = time.perf_counter()
    events, n, n_c = [], 0, 0
    pilot_q = q0
    pilot_res = Reservoir(q0, seed=derive_seed(seed, cox.PILOT_STREAM)) if q0 is not None else None
    for batch in batches:
        ev = batch[:, STATUS] == 1
        events.append(batch[ev])
        n += batch.shape[0]
        n_c += int((~ev).sum())
        if pilot_res is not None:
            pilot_res.update(batch, (~ev).astype(float))
    if n == 0:
        raise EmptyPool("the stream is empty")
    events = np.vstack(events)
    n_e = events.shape[0]
    passes = 1
    if n_e == 0:
        raise ValueError("the data contain no events")
    if n_c == 0:
        raise EmptyPool("the data contain no censored rows")
    if q0 is None:
        # q0 depends on n_e, so the uniform pilot needs its own pass
        pilot_q = max(int(round(c0 * n_e)), events.shape[1] - COV + 1)
        pilot_res = Reservoir(pilot_q, seed=derive_seed(seed, cox.PILOT_STREAM))
        for batch in batches:
            pilot_res.update(batch, (batch[:, STATUS] == 0).astype(float))
        passes += 1
    pilot = _subsample(events, pilot_res, n, names)
    pilot_fit = fit_cox(pilot)
    beta_u = pilot_fit.beta
    timings["pilot"] = time.perf_counter() - t

    t = time.perf_counter()
    times, counts = np.unique(events[:, TIME], return_counts=True)
    acc = RiskAccumulator(beta_u, times, shift=float(np.max(pilot.x @ beta_u)))
    for batch in batches:
        acc.add(batch[:, ENTRY], batch[:, TIME], batch[:, COV:])
    passes += 1
    s0, s1, s2 = acc.s0, acc.s1, acc.s2
    if np.any(s0 <= 0):
        raise EmptyRiskSet("empty risk set at an event time")
    xbar = s1 / s0[:, None]
    info = np.tensordot(counts, s2 / s0[:, None, None] - xbar[:, :, None] * xbar[:, None, :], axes=1) / n
    info = 0.5 * (info + info.T)
    agg = CoxAggregates(beta_u, times, counts, s0, s1, acc.shift, info)
    info_inv = cox._inverse(info) if criterion == "A" else None
    weight_fn = _censored_weights(agg, criterion, info_inv)
    timings["aggregates"] = time.perf_counter() - t

    t = time.perf_counter()
    fixed_q = q_n if isinstance(q_n, (int, np.integer)) else None
    res15 = Reservoir(pilot_q, seed=derive_seed(seed, cox.STEP15_STREAM))
    res2 = Reservoir(int(fixed_q), seed=derive_seed(seed, cox.STEP2_STREAM)) if fixed_q else None
    for batch in batches:
        w = weight_fn(batch)
        res15.update(batch, w)
        if res2 is not None:
            res2.update(batch, w)
    passes += 1
    sub15 = _subsample(events, res15, n, names)
    cens = sub15.censored
    phi = phi_from_draws(a_vectors(beta_u, sub15, cens), sub15.probs[cens], n, pilot_q)
    s15 = cox.CoxStep15(cox._inverse(pl_information(beta_u, sub15)), phi, n, pilot_q)
    timings["variance_step"] = time.perf_counter() - t

    t = time.perf_counter()
    if res2 is None:
        size = q_n(s15, n_e) if callable(q_n) else 5 * n_e
        res2 = Reservoir(int(size), seed=derive_seed(seed, cox.STEP2_STREAM))
        for batch in batches:
            res2.update(batch, weight_fn(batch))
        passes += 1
    fit = cox.weighted_fit(_subsample(events, res2, n, names), init=beta_u)
    timings["main_fit"] = time.perf_counter() - t
    return StreamResult(n, n_e, n_c, pilot_q, res2.capacity, beta_u, s15, fit, passes, timings)
