"""Observables computed from simulation output.

Everything here is a pure function of arrays: the load time series and its
power spectrum, log-log slope fits, linear/logarithmic histograms, the
waiting-interval distribution, running delivery-time means, the learning
fraction, and the jam verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .routing import Algorithm


@dataclass
class Counters:
    created: int = 0
    delivered: int = 0
    forwarded: int = 0
    blocked: int = 0
    suppressed: int = 0


@dataclass(frozen=True)
class JamVerdict:
    """Outcome of jam detection on a load series.

    `threshold_crossed` / `first_crossing_step` track the hard capacity
    criterion (load above threshold_fraction * n * queue_cap).
    `sustained_growth` is the final-20%-of-run trend diagnostic: positive
    fitted trend whose total rise exceeds 10% of the window mean. The
    reported `jammed` verdict is the threshold crossing OR strong growth
    over the final half of the run: a positive fitted rise exceeding 30%
    of the window mean (`growth_fraction` > 0.30) that also dominates the
    window's residual scatter by 6x, which separates unbounded growth from
    the strongly autocorrelated but bounded wandering of a stable load.
    """

    jammed: bool
    threshold: float
    threshold_crossed: bool
    first_crossing_step: int | None
    sustained_growth: bool
    growth_fraction: float


@dataclass(frozen=True)
class Spectrum:
    """Segment-averaged periodogram with a power-law fit over its mid band."""

    frequencies: np.ndarray  # cycles/step, strictly increasing, DC excluded
    power: np.ndarray        # mean squared DFT magnitude per bin
    slope: float             # log-log fit over [fit_lo, fit_hi]; nan if unfittable
    fit_lo: float
    fit_hi: float


@dataclass
class RunReport:
    """Per-run observables emitted by the engine for analysis."""

    algorithm: Algorithm
    seed: int
    steps: int
    node_count: int
    queue_cap: int
    load_series: np.ndarray          # in-flight packets after each step
    delivery_created: np.ndarray     # per delivered packet: creation step,
    delivery_completed: np.ndarray   # delivery step,
    delivery_hops: np.ndarray        # and path length in hops
    dt_values: np.ndarray            # distinct transmission gaps observed
    dt_counts: np.ndarray            # multiplicity of each gap
    learning_steps: np.ndarray
    learning_fractions: np.ndarray
    jam: JamVerdict
    counters: Counters = field(default_factory=Counters)

    @property
    def delivery_times(self) -> np.ndarray:
        return self.delivery_completed - self.delivery_created

    def mean_load(self, tail_fraction: float = 0.5) -> float:
        """Mean in-flight load over the final `tail_fraction` of the run."""
        start = int(len(self.load_series) * (1 - tail_fraction))
        return float(self.load_series[start:].mean()) if len(self.load_series) else 0.0

    def learning_at(self, step: int) -> float:
        """Learning fraction at the last sample taken at or before `step`."""
        idx = int(np.searchsorted(self.learning_steps, step, side="right")) - 1
        return float(self.learning_fractions[max(idx, 0)])


def power_spectrum(series, segment_length: int = 4096, fit_decades: float = 2.0) -> Spectrum:
    """Segment-averaged periodogram of a time series.

    The series is cut into non-overlapping segments of `segment_length`, each
    segment is mean-removed, and squared DFT magnitudes are averaged across
    segments; the DC bin is dropped. A log-log slope is fitted over the middle
    `fit_decades` frequency decades (nan when the band has too few positive
    points, e.g. for a constant series).
    """
    x = np.asarray(series, dtype=np.float64)
    if segment_length < 8:
        raise ValueError(f"segment_length must be >= 8, got {segment_length}")
    n_seg = len(x) // segment_length
    if n_seg < 1:
        raise ValueError(
            f"series of length {len(x)} is shorter than segment_length {segment_length}"
        )
    segments = x[: n_seg * segment_length].reshape(n_seg, segment_length)
    segments = segments - segments.mean(axis=1, keepdims=True)
    power = (np.abs(np.fft.rfft(segments, axis=1)) ** 2).mean(axis=0)[1:]
    freqs = np.fft.rfftfreq(segment_length)[1:]
    lo, hi = middle_decades(freqs, fit_decades)
    try:
        slope, _ = fit_loglog_slope(freqs, power, lo, hi)
    except ValueError:
        slope = float("nan")
    return Spectrum(frequencies=freqs, power=power, slope=slope, fit_lo=lo, fit_hi=hi)


def middle_decades(x, n_decades: float = 2.0) -> tuple[float, float]:
    """Centered band of `n_decades` decades inside the span of positive x."""
    x = np.asarray(x, dtype=np.float64)
    x = x[x > 0]
    if len(x) == 0:
        raise ValueError("no positive values to take a band from")
    lo, hi = np.log10(x.min()), np.log10(x.max())
    if hi - lo <= n_decades:
        return float(10 ** lo), float(10 ** hi)
    mid = (lo + hi) / 2
    return float(10 ** (mid - n_decades / 2)), float(10 ** (mid + n_decades / 2))


def fit_loglog_slope(x, y, lo: float, hi: float) -> tuple[float, float]:
    """Least-squares line through (log10 x, log10 y) for points with lo <= x <= hi.

    Returns (slope, intercept). Requires at least 5 points in range, all with
    positive x and y.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    mask = (x >= lo) & (x <= hi)
    if np.any(mask & ((x <= 0) | (y <= 0))):
        raise ValueError("nonpositive value inside the fit range")
    if int(mask.sum()) < 5:
        raise ValueError(f"only {int(mask.sum())} points in [{lo}, {hi}], need >= 5")
    slope, intercept = np.polyfit(np.log10(x[mask]), np.log10(y[mask]), 1)
    return float(slope), float(intercept)


def histogram(
    samples, *, width: float | None = None, ratio: float | None = None, counts=None
) -> tuple[np.ndarray, np.ndarray]:
    """Normalized density histogram with linear or logarithmic bins.

    Exactly one of `width` (linear bin width) or `ratio` (geometric edge
    ratio, > 1) must be given. `counts` turns `samples` into a compressed
    multiset: samples[i] occurs counts[i] times. Density integrates to 1
    against the linear bin measure. Logarithmic binning requires strictly
    positive samples.
    """
    if (width is None) == (ratio is None):
        raise ValueError("give exactly one of width= or ratio=")
    x = np.asarray(samples, dtype=np.float64)
    w = None if counts is None else np.asarray(counts, dtype=np.float64)
    if len(x) == 0 or (w is not None and w.sum() == 0):
        raise ValueError("empty sample set")
    lo = float(x.min())
    hi = float(x.max())
    if width is not None:
        if width <= 0:
            raise ValueError(f"width must be positive, got {width}")
        nbins = int(np.floor((hi - lo) / width + 0.5)) + 1
        edges = lo - width / 2 + width * np.arange(nbins + 1)
        centers = lo + width * np.arange(nbins)
    else:
        if ratio <= 1:
            raise ValueError(f"ratio must exceed 1, got {ratio}")
        if lo <= 0:
            raise ValueError("logarithmic binning needs positive samples")
        nbins = int(np.floor(np.log(hi / lo) / np.log(ratio) + 0.5)) + 1
        edges = lo / np.sqrt(ratio) * ratio ** np.arange(nbins + 1)
        centers = lo * ratio ** np.arange(nbins)
    hist, _ = np.histogram(x, bins=edges, weights=w)
    total = hist.sum()
    density = hist / (total * np.diff(edges))
    return centers, density


def learning_fraction(state) -> float:
    """Fraction of directed edges whose flow statistic has left its start value."""
    table = getattr(state, "stats", state)
    return table.learned_count / table.n_slots


def detect_jam(load_series, n: int, queue_cap: int, threshold_fraction: float = 0.25) -> JamVerdict:
    """Decide whether a load series shows jamming.

    See JamVerdict for the exact rule. Robust on short or empty series
    (everything degrades to "not jammed").
    """
    load = np.asarray(load_series, dtype=np.float64)
    threshold = threshold_fraction * n * queue_cap
    above = np.flatnonzero(load > threshold)
    threshold_crossed = len(above) > 0
    first_crossing = int(above[0]) if threshold_crossed else None
    d_slope, d_mean, d_len, _ = _window_growth(load, 0.2)
    rise, mean, resid_sd = _window_rise(load, 0.5)
    growth_fraction = rise / mean if mean > 0 else 0.0
    strong_growth = rise > 0 and growth_fraction > 0.30 and rise > 6 * resid_sd
    return JamVerdict(
        jammed=threshold_crossed or strong_growth,
        threshold=threshold,
        threshold_crossed=threshold_crossed,
        first_crossing_step=first_crossing,
        sustained_growth=d_slope > 0 and d_slope * d_len > 0.10 * d_mean,
        growth_fraction=growth_fraction,
    )


def _window_growth(load: np.ndarray, window_fraction: float) -> tuple[float, float, int, float]:
    """(fitted slope, mean, length, residual sd) over the final window."""
    start = int(len(load) * (1 - window_fraction))
    window = load[start:]
    if len(window) < 5:
        return 0.0, float(window.mean()) if len(window) else 0.0, len(window), 0.0
    x = np.arange(len(window))
    slope, intercept = np.polyfit(x, window, 1)
    resid_sd = float((window - (slope * x + intercept)).std())
    return float(slope), float(window.mean()), len(window), resid_sd


def _window_rise(load: np.ndarray, window_fraction: float) -> tuple[float, float, float]:
    """Total fitted rise, mean, and residual sd over the final window."""
    slope, mean, length, resid_sd = _window_growth(load, window_fraction)
    return slope * length, mean, resid_sd


def delivery_time_series(
    delivery_completed,
    delivery_times,
    steps: int,
    window: int = 1000,
    interval: int = 100,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cumulative and windowed mean delivery time sampled along the run.

    Returns (sample_steps, cumulative_mean, window_mean); a sample with no
    deliveries yet (or none inside the trailing window) is nan. Assumes
    delivery_completed is nondecreasing, which the engine guarantees.
    """
    completed = np.asarray(delivery_completed, dtype=np.int64)
    durations = np.asarray(delivery_times, dtype=np.float64)
    ts = np.arange(interval, steps + 1, interval, dtype=np.int64)
    if len(ts) == 0 or ts[-1] != steps:
        ts = np.append(ts, steps)
    cum = np.concatenate([[0.0], np.cumsum(durations)])
    hi = np.searchsorted(completed, ts, side="right")
    lo = np.searchsorted(completed, ts - window, side="right")
    with np.errstate(invalid="ignore", divide="ignore"):
        cum_mean = np.where(hi > 0, cum[hi] / np.maximum(hi, 1), np.nan)
        in_window = hi - lo
        win_mean = np.where(in_window > 0, (cum[hi] - cum[lo]) / np.maximum(in_window, 1), np.nan)
    return ts, cum_mean, win_mean
