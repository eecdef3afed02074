"""PNG figures for run reports, rendered off-screen."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


def plot_trace(path: str | Path, steps: np.ndarray, values: np.ndarray, ks: np.ndarray) -> Path:
    """Objective value against optimizer step, one colour per penalty stage."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for k in np.unique(ks):
        sel = ks == k
        ax.plot(steps[sel], values[sel], lw=1, label=f"k={k:g}")
    ax.set_xlabel("step")
    ax.set_ylabel("penalized value")
    ax.legend(loc="best")
    return _save(fig, Path(path))


def plot_cumulative(path: str | Path, series: dict[str, Sequence[float]]) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for name, profits in series.items():
        ax.plot(np.cumsum(profits), lw=1, label=name)
    ax.axhline(0.0, color="grey", lw=0.5)
    ax.set_xlabel("test path")
    ax.set_ylabel("cumulative profit")
    ax.legend(loc="best")
    return _save(fig, Path(path))


def plot_histogram(path: str | Path, series: dict[str, Sequence[float]], bins: int = 40) -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for name, profits in series.items():
        ax.hist(np.asarray(profits, dtype=float), bins=bins, alpha=0.5, label=name)
    ax.set_xlabel("profit per path")
    ax.set_ylabel("count")
    ax.legend(loc="best")
    return _save(fig, Path(path))
