"""Phase statistics of simulated or measured oscillation records.

Relative phases are measured in cycles against the modulation. For an
upward zero crossing at time ``t_n`` the phase is
``q_n = frac(-(omega_mod t_n + phase0) / (2 pi))``, which advances by
``+alpha`` per period when the oscillation runs at ``1 / (1 - alpha)`` times
the modulation frequency. This matches the convention of
:mod:`seolock.envelope` and the phase map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Optional, Sequence

import numpy as np
from scipy.signal import welch

__all__ = [
    "PhaseSeries",
    "PhaseHistogram",
    "zero_crossing_times",
    "zero_crossing_phase",
    "phase_histogram",
    "histogram_peaks",
    "unwrap_phase",
    "winding_from_phase",
    "power_spectrum",
    "phase_diffusion",
]


@dataclass(frozen=True)
class PhaseSeries:
    """One relative phase per oscillation period.

    Attributes
    ----------
    q : ndarray
        Wrapped phases in [0, 1).
    period_index : ndarray of int
        Index of the period each phase belongs to (increasing).
    """

    q: np.ndarray
    period_index: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        idx = np.asarray(self.period_index, dtype=np.int64)
        if q.shape != idx.shape:
            raise ValueError("q and period_index must have the same length")
        if q.size and (q.min() < 0.0 or q.max() >= 1.0):
            raise ValueError("phases must lie in [0, 1)")
        if np.any(np.diff(idx) <= 0):
            raise ValueError("period_index must be strictly increasing")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "period_index", idx)

    @classmethod
    def from_lift(cls, lifted) -> "PhaseSeries":
        lifted = np.asarray(lifted, dtype=np.float64)
        w = lifted - np.floor(lifted)
        w[w >= 1.0] = 0.0  # rounding guard
        return cls(w, np.arange(lifted.size))

    def __len__(self):
        return self.q.size


@dataclass(frozen=True)
class PhaseHistogram:
    bin_edges: np.ndarray
    density: np.ndarray

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])


def zero_crossing_times(signal, dt: float, t0: float = 0.0,
                        min_separation: Optional[float] = None) -> np.ndarray:
    """Times of upward zero crossings of the mean-removed signal (linear interpolation).

    With ``min_separation`` set, a crossing closer than that to the previous
    kept one is discarded; this removes the extra crossings noise produces
    around each true one.
    """
    x = np.asarray(signal, dtype=np.float64)
    x = x - x.mean()
    i = np.flatnonzero((x[:-1] < 0.0) & (x[1:] >= 0.0))
    frac = -x[i] / (x[i + 1] - x[i])
    times = t0 + (i + frac) * dt
    if min_separation is None or times.size < 2:
        return times
    keep = np.ones(times.size, dtype=bool)
    last = times[0]
    for j in range(1, times.size):
        if times[j] - last < min_separation:
            keep[j] = False
        else:
            last = times[j]
    return times[keep]


def zero_crossing_phase(signal, dt: float, mod_freq: float, mod_phase0: float = 0.0,
                        t0: float = 0.0, min_separation: Optional[float] = None) -> PhaseSeries:
    """Relative phase of each upward zero crossing against the modulation.

    Parameters
    ----------
    signal : array_like
        Uniformly sampled oscillation record; should carry at least 20 samples
        per period for the interpolation to be accurate to ``dt / period``.
    dt : float
        Sampling interval (s).
    mod_freq : float
        Angular frequency of the modulation (rad/s).
    mod_phase0 : float
        Modulation phase at ``t0``.
    min_separation : float, optional
        Debounce interval passed to :func:`zero_crossing_times`.
    """
    times = zero_crossing_times(signal, dt, t0, min_separation)
    if times.size < 2:
        raise ValueError("non-oscillatory input: fewer than two upward zero crossings")
    lift = -(mod_freq * (times - t0) + mod_phase0) / (2.0 * math.pi)
    return PhaseSeries.from_lift(lift)


def phase_histogram(ps: PhaseSeries, n_bins: int = 50) -> PhaseHistogram:
    """Normalised density of the phases on [0, 1)."""
    if len(ps) == 0:
        raise ValueError("empty phase series")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    density, edges = np.histogram(ps.q, bins=n_bins, range=(0.0, 1.0), density=True)
    return PhaseHistogram(bin_edges=edges, density=density)


def histogram_peaks(h: PhaseHistogram, level: float = 1.5) -> list[float]:
    """Centres of the circular runs of bins whose density exceeds ``level``.

    The uniform density is 1, so the default picks out bins holding at least
    half as many samples again as a flat distribution would.
    """
    above = h.density > level
    n = above.size
    if above.all():
        return [0.5]
    if not above.any():
        return []
    # rotate so the scan starts on a bin below the level
    start = int(np.flatnonzero(~above)[0])
    rolled = np.roll(above, -start)
    centres = h.bin_centers
    peaks, run = [], []
    for j in range(n):
        if rolled[j]:
            run.append((j + start) % n)
        elif run:
            peaks.append(run)
            run = []
    if run:
        peaks.append(run)
    out = []
    for r in peaks:
        w = h.density[r]
        # circular weighted mean of the run's bin centres
        ang = 2 * math.pi * centres[r]
        c = math.atan2(float(w @ np.sin(ang)), float(w @ np.cos(ang))) / (2 * math.pi)
        out.append(c % 1.0)
    return sorted(out)


def unwrap_phase(ps: PhaseSeries, nominal_advance: float = 0.0) -> np.ndarray:
    """Lift of the phases, assuming each step stays within half a cycle of the nominal advance.

    A gap of ``m`` periods between samples is compared with ``m`` nominal
    advances.
    """
    if len(ps) == 0:
        return np.zeros(0)
    d = np.diff(ps.q)
    m = np.diff(ps.period_index)
    excess = d - m * nominal_advance
    # wrap into (-1/2, 1/2]
    excess = excess - np.ceil(excess - 0.5)
    steps = m * nominal_advance + excess
    return ps.q[0] + np.concatenate([[0.0], np.cumsum(steps)])


def winding_from_phase(ps: PhaseSeries, nominal_advance: float = 0.0) -> float:
    """Mean phase advance per period of the unwrapped series."""
    if len(ps) < 2:
        raise ValueError("need at least two phases")
    lift = unwrap_phase(ps, nominal_advance)
    return float((lift[-1] - lift[0]) / (ps.period_index[-1] - ps.period_index[0]))


def power_spectrum(signal, dt: float, n_segments: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """One-sided averaged-periodogram PSD (Hann window, 50 % overlap).

    The record is split into ``n_segments`` half-overlapping segments. The
    density is scaled so that ``sum(psd) * df`` is the signal variance.
    Returns ``(freqs in Hz, psd)``.
    """
    x = np.asarray(signal, dtype=np.float64)
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    if x.size < 2 * n_segments * 256:
        raise ValueError(f"need at least {2 * n_segments * 256} samples for {n_segments} segments")
    nperseg = int(2 * x.size // (n_segments + 1))
    return welch(x, fs=1.0 / dt, window="hann", nperseg=nperseg, noverlap=nperseg // 2,
                 detrend="constant", scaling="density", return_onesided=True)


def phase_diffusion(ensemble: Sequence[PhaseSeries], nominal_advance: float = 0.0,
                    start: int = 0) -> tuple[float, float]:
    """Growth rate of the ensemble phase variance per period.

    Members are aligned on the period indices they all share. Each member is
    unwrapped and referred to its phase at the first shared index; the
    variance across members is fitted by a straight line in the period index,
    skipping the first ``start`` shared periods. Returns
    ``(slope, r_squared)``; an ensemble of identical members gives
    ``(0.0, 1.0)``.
    """
    if len(ensemble) < 20:
        raise ValueError("need at least 20 ensemble members")
    common = reduce(np.intersect1d, [ps.period_index for ps in ensemble])
    if common.size - start < 3:
        raise ValueError("series too short for a fit")
    lifts = np.array([unwrap_phase(ps, nominal_advance)[np.searchsorted(ps.period_index, common)]
                      for ps in ensemble])
    lifts -= lifts[:, :1]
    lifts, idx = lifts[:, start:], common[start:].astype(np.float64)
    if np.all(lifts == lifts[:1]):
        return 0.0, 1.0
    var = lifts.var(axis=0)
    slope, intercept = np.polyfit(idx, var, 1)
    resid = var - (slope * idx + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(((var - var.mean()) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(r2)
