"""Weighted sampling with replacement, in memory and in a single streaming pass.

The streaming sampler keeps ``q`` independent single-item weighted
reservoirs. Each slot holds the record with the largest key
``u ** (1 / w)`` seen so far, which makes its final record equal to
record ``i`` with probability ``w_i / sum(w)``. Slots are updated a whole
batch at a time: the largest key within a batch of total weight ``W_b`` is
distributed as ``V ** (1 / W_b)`` and the record attaining it is drawn
proportionally to ``w`` independently of its value, so the batch update is
the per-record key rule evaluated exactly, at ``O(q)`` cost per batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import AllZeroWeights, EmptyPool

PROB_TOL = 1e-9


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent, reproducible generator for ``(seed, *stream)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, stream)])))


@dataclass(frozen=True)
class DiscreteSampler:
    probabilities: np.ndarray
    seed: int = 0

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim != 1:
            raise ValueError("probabilities must be 1-d")
        if p.size and (np.any(p < 0) or abs(p.sum() - 1.0) > PROB_TOL):
            raise ValueError(f"probabilities must be nonnegative and sum to 1 (sum={p.sum()!r})")
        object.__setattr__(self, "probabilities", p)

    @property
    def cumulative(self) -> np.ndarray:
        c = np.cumsum(self.probabilities)
        return c / c[-1]


def draw_indices(probabilities: np.ndarray, q: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``q`` i.i.d. indices from ``probabilities`` using ``rng``."""
    p = np.asarray(probabilities, dtype=float)
    if p.size == 0:
        raise EmptyPool("cannot sample from an empty pool")
    if q < 1:
        raise ValueError("q must be at least 1")
    cum = np.cumsum(p)
    if cum[-1] <= 0:
        raise AllZeroWeights("all probabilities are zero")
    u = rng.random(q) * cum[-1]
    idx = np.searchsorted(cum, u, side="right")
    # guard against landing on a trailing zero-mass index through rounding
    idx = np.minimum(idx, p.size - 1)
    bad = p[idx] <= 0
    if np.any(bad):
        positive = np.flatnonzero(p > 0)
        idx[bad] = positive[np.searchsorted(positive, idx[bad]).clip(max=positive.size - 1)]
    return idx


def sample_with_replacement(sampler: DiscreteSampler, q: int) -> np.ndarray:
    return draw_indices(sampler.probabilities, q, make_rng(sampler.seed))


@dataclass
class Reservoir:
    """``capacity`` independent weighted single-item reservoirs.

    Payloads are rows of the batches fed to :meth:`update`. ``weights``
    holds the raw weight of each slot's record; :attr:`probabilities`
    normalizes it by the streamed weight total.
    """

    capacity: int
    seed: int = 0
    log_keys: np.ndarray = field(init=False)
    payloads: np.ndarray | None = field(init=False, default=None)
    weights: np.ndarray = field(init=False)
    ordinals: np.ndarray = field(init=False)
    total_weight: float = field(init=False, default=0.0)
    records_seen: int = field(init=False, default=0)
    batches_seen: int = field(init=False, default=0)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.log_keys = np.full(self.capacity, -np.inf)
        self.weights = np.zeros(self.capacity)
        self.ordinals = np.full(self.capacity, -1, dtype=np.int64)

    def update(self, batch: np.ndarray, weights: np.ndarray) -> None:
        batch = np.asarray(batch)
        w = np.asarray(weights, dtype=float)
        if w.shape[0] != batch.shape[0]:
            raise ValueError("weights and batch lengths differ")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        rng = make_rng(self.seed, self.batches_seen)
        offset = self.records_seen
        self.records_seen += batch.shape[0]
        self.batches_seen += 1
        batch_weight = float(w.sum())
        if batch_weight <= 0:
            return
        self.total_weight += batch_weight
        if self.payloads is None:
            self.payloads = np.zeros((self.capacity,) + batch.shape[1:], dtype=batch.dtype)
        # log of the largest key u**(1/w) within this batch, per slot
        candidate = np.log(rng.random(self.capacity)) / batch_weight
        replace = np.flatnonzero(candidate > self.log_keys)
        if replace.size == 0:
            return
        winners = draw_indices(w, replace.size, rng)
        self.log_keys[replace] = candidate[replace]
        self.payloads[replace] = batch[winners]
        self.weights[replace] = w[winners]
        self.ordinals[replace] = offset + winners

    @property
    def keys(self) -> np.ndarray:
        return np.exp(self.log_keys)

    @property
    def probabilities(self) -> np.ndarray:
        if self.total_weight <= 0:
            raise AllZeroWeights("no record with positive weight was streamed")
        return self.weights / self.total_weight


def reservoir_sample_stream(
    batches: Iterable[np.ndarray],
    q: int,
    weight_fn: Callable[[np.ndarray], np.ndarray],
    seed: int = 0,
) -> Reservoir:
    """Sample ``q`` records with replacement, proportional to ``weight_fn``, in one pass.

    ``weight_fn`` maps a batch (rows = records) to a nonnegative weight per
    record. Batches are consumed in order and never revisited.
    """
    res = Reservoir(q, seed=seed)
    seen_any = False
    for batch in batches:
        seen_any = True
        res.update(batch, weight_fn(batch))
    if not seen_any:
        raise EmptyPool("no batches were supplied")
    if res.total_weight <= 0:
        raise AllZeroWeights("every streamed record had zero weight")
    return res
