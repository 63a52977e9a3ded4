"""PNG renderings of sizing curves and power tables."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_re_curve(q, re, path, target: float | None = None, title: str = "Relative efficiency") -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(q, re, marker="o", lw=1.2)
    if target is not None:
        ax.axhline(target, color="grey", ls="--", lw=0.8)
    ax.set_xlabel("subsample size q")
    ax.set_ylabel("RE(q)")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_size_curve(gammas, sizes, path, n: int | None = None, title: str = "Subsample size for power") -> None:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(gammas, sizes, marker="o", lw=1.2)
    if n is not None:
        ax.axhline(n, color="grey", ls="--", lw=0.8)
    ax.set_xlabel("nominal power")
    ax.set_ylabel("required q")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_power_table(rows, path, title: str = "Nominal versus empirical power") -> None:
    """``rows`` are dicts with ``gamma`` and one or more ``empirical_power*`` keys."""
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    gammas = [r["gamma"] for r in rows]
    for key in sorted({k for r in rows for k in r if k.startswith("empirical_power")}):
        ax.plot(gammas, [r.get(key) for r in rows], marker="o", lw=1, label=key.replace("empirical_power", "").strip("_") or "empirical")
    lo, hi = min(gammas) - 0.05, max(gammas) + 0.05
    ax.plot([lo, hi], [lo, hi], color="black", lw=0.8)
    ax.set_xlabel("nominal power")
    ax.set_ylabel("empirical power")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
