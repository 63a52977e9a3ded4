"""Subsample-size curves shared by the Cox and logistic pipelines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri


def normal_quantile(p: float) -> float:
    return float(ndtri(p))


def power_z(alpha: float, gamma: float) -> float:
    """``Z_{1-alpha/2} + Z_gamma``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    return normal_quantile(1 - alpha / 2) + normal_quantile(gamma)


@dataclass(frozen=True)
class PowerSize:
    """Required subsample size for a single-coefficient Wald test.

    ``q`` is the signed ceiling from the sizing formula; ``feasible`` is
    false when the target power cannot be reached (negative or
    undefined ``q``, or ``q`` beyond the data size where that applies).
    """

    q: int | None
    feasible: bool
    raw: float

    def __int__(self):
        return int(self.q)


def rare_design_q(noise_pp: float, full_var_pp: float, beta_star: float, z: float, n: int) -> PowerSize:
    """``ceil(K_pp z^2 / (beta*^2 - n^-1 V_pp z^2))`` for designs that keep all events."""
    denom = beta_star**2 - full_var_pp * z**2 / n
    if denom <= 0:
        raw = -math.inf if denom == 0 else noise_pp * z**2 / denom
        q = None if denom == 0 else math.ceil(raw)
        return PowerSize(q, False, raw)
    raw = noise_pp * z**2 / denom
    return PowerSize(max(math.ceil(raw), 1), True, raw)


@dataclass
class SizingReport:
    """Relative-efficiency curve and/or power-based sizes.

    ``re`` holds one value per entry of ``q_grid``; ``power`` maps each
    requested nominal power to its :class:`PowerSize`.
    """

    q_grid: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    re: np.ndarray = field(default_factory=lambda: np.zeros(0))
    target_covariate: int | None = None
    power: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def minimal_q(self, re_target: float) -> int | None:
        """Smallest grid value whose RE does not exceed ``re_target``."""
        ok = np.flatnonzero(self.re <= re_target)
        return int(self.q_grid[ok[0]]) if ok.size else None

    def rows(self):
        for q, re in zip(self.q_grid, self.re):
            yield {"q": int(q), "re": float(re)}

    def to_dict(self) -> dict:
        return {
            "q_grid": [int(v) for v in self.q_grid],
            "re": [float(v) for v in self.re],
            "target_covariate": self.target_covariate,
            "power": {
                f"{g:g}": {"q": s.q, "feasible": s.feasible, "raw": s.raw}
                for g, s in self.power.items()
            },
            "notes": list(self.notes),
        }
