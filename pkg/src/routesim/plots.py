"""Figure rendering for run reports.

Each function draws one figure to a PNG next to the run's CSV output. The Agg
backend is forced so the CLI works headless; PNG metadata is stripped so
repeated runs stay byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = dict(dpi=110, metadata={"Software": None})


def _finish(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
    return path


def plot_load(load_series, title: str, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(np.arange(len(load_series)), load_series, lw=0.6, color="tab:blue")
    ax.set_xlabel("time step")
    ax.set_ylabel("packets in flight")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def plot_spectrum(frequencies, power, slope, fit_lo, fit_hi, title: str, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    mask = power > 0
    ax.loglog(frequencies[mask], power[mask], lw=0.8, color="tab:blue")
    if np.isfinite(slope):
        band = (frequencies >= fit_lo) & (frequencies <= fit_hi) & mask
        if band.any():
            f = frequencies[band]
            anchor = power[band][0]
            ax.loglog(f, anchor * (f / f[0]) ** slope, "k--", lw=1.2,
                      label=f"slope {slope:.2f}")
            ax.legend()
    ax.set_xlabel("frequency (cycles/step)")
    ax.set_ylabel("power")
    ax.set_title(title)
    ax.grid(alpha=0.3, which="both")
    return _finish(fig, path)


def plot_loglog_density(centers, density, xlabel: str, title: str, path: Path,
                        slope: float = float("nan"), fit_lo: float = 0.0, fit_hi: float = 0.0) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    mask = density > 0
    ax.loglog(centers[mask], density[mask], "o-", ms=3, lw=0.8, color="tab:blue")
    if np.isfinite(slope) and fit_hi > fit_lo:
        band = mask & (centers >= fit_lo) & (centers <= fit_hi)
        if band.any():
            x = centers[band]
            anchor = density[band][0]
            ax.loglog(x, anchor * (x / x[0]) ** slope, "k--", lw=1.2,
                      label=f"slope {slope:.2f}")
            ax.legend()
    ax.set_xlabel(xlabel)
    ax.set_ylabel("density")
    ax.set_title(title)
    ax.grid(alpha=0.3, which="both")
    return _finish(fig, path)


def plot_mean_delivery(sample_steps, cumulative_mean, window_mean, window: int,
                       title: str, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(sample_steps, cumulative_mean, lw=1.2, color="tab:blue", label="cumulative mean")
    ax.plot(sample_steps, window_mean, lw=0.7, color="tab:orange", alpha=0.8,
            label=f"{window}-step window")
    ax.set_xlabel("time step")
    ax.set_ylabel("mean delivery time (steps)")
    ax.set_title(title)
    ax.legend()
    ax.grid(alpha=0.3)
    return _finish(fig, path)


def plot_learning(learning_steps, learning_fractions, title: str, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(learning_steps, learning_fractions, lw=1.2, color="tab:green")
    ax.set_xlabel("time step")
    ax.set_ylabel("fraction of directed edges tried")
    ax.set_ylim(0, 1.02)
    ax.set_title(title)
    ax.grid(alpha=0.3)
    return _finish(fig, path)
