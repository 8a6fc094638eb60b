"""Parameter scans of the phase map: staircases, tongue maps and plateau edges.

Every grid cell is an independent winding-number estimate, so cells are
split into contiguous chunks and evaluated on a thread pool. The compiled
kernels release the GIL; results do not depend on the number of threads
because each cell is computed from the same inputs in the same way.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from ._backend import kernels
from .circle_map import (
    DEFAULT_AVERAGE,
    DEFAULT_TRANSIENT,
    MIN_AVERAGE,
    MapParams,
    farey_sequence,
    harmonic_table,
)

__all__ = [
    "ScanGrid",
    "ScanResult",
    "Staircase",
    "Plateau",
    "EDGE_BAND",
    "DEFAULT_PLATEAU_TOL",
    "resolve_threads",
    "winding_row",
    "staircase_scan",
    "arnold_tongue_scan",
    "plateau_detect",
    "tongue_edge_trace",
]

# alpha values this close to 0 or 1 are dropped from scans
EDGE_BAND = 1e-4
DEFAULT_PLATEAU_TOL = 1e-4


@dataclass(frozen=True)
class ScanGrid:
    """Rectangular grid over (alpha, beta_f); ``n_beta = 1`` gives a single row."""

    alpha_min: float
    alpha_max: float
    n_alpha: int
    beta_min: float = 0.0
    beta_max: float = 0.0
    n_beta: int = 1

    def __post_init__(self):
        if not 0.0 < self.alpha_min < self.alpha_max < 1.0:
            raise ValueError("need 0 < alpha_min < alpha_max < 1")
        if self.n_alpha < 2:
            raise ValueError("n_alpha must be >= 2")
        if self.beta_min < 0.0 or self.beta_max < 0.0:
            raise ValueError("beta bounds must be >= 0")
        if self.beta_max < self.beta_min:
            raise ValueError("beta_max must be >= beta_min")
        if self.n_beta < 1:
            raise ValueError("n_beta must be >= 1")

    @property
    def alphas(self) -> np.ndarray:
        a = np.linspace(self.alpha_min, self.alpha_max, self.n_alpha)
        return a[(a >= EDGE_BAND) & (a <= 1.0 - EDGE_BAND)]

    @property
    def betas(self) -> np.ndarray:
        if self.n_beta == 1:
            return np.array([self.beta_min])
        return np.linspace(self.beta_min, self.beta_max, self.n_beta)


@dataclass(frozen=True)
class ScanResult:
    grid: ScanGrid
    alphas: np.ndarray
    betas: np.ndarray
    W: np.ndarray  # (n_beta, n_alpha)
    dW_dalpha: np.ndarray


@dataclass(frozen=True)
class Staircase:
    """Winding number along one row of fixed ``beta_f``, sorted by alpha."""

    beta_f: float
    alpha: np.ndarray
    W: np.ndarray

    def __iter__(self):
        return iter(zip(self.alpha.tolist(), self.W.tolist()))

    def __len__(self):
        return self.alpha.size


@dataclass(frozen=True)
class Plateau:
    rational: Fraction
    alpha_lo: float
    alpha_hi: float
    n_points: int

    @property
    def width(self) -> float:
        return self.alpha_hi - self.alpha_lo


def resolve_threads(threads: Optional[int]) -> int:
    """``None`` or 0 means one worker per available CPU."""
    if threads is None or threads == 0:
        try:
            return max(1, len(os.sched_getaffinity(0)))
        except AttributeError:
            return os.cpu_count() or 1
    if threads < 0:
        raise ValueError("threads must be >= 0")
    return int(threads)


def winding_row(alphas: np.ndarray, template: MapParams, beta_f: float, *,
                q0: float = 0.0, n_transient: int = DEFAULT_TRANSIENT,
                n_avg: int = DEFAULT_AVERAGE, threads: Optional[int] = 1) -> np.ndarray:
    """Winding numbers for many alpha values sharing waveform, phase and ``beta_f``."""
    if n_avg < MIN_AVERAGE:
        raise ValueError(f"n_avg must be >= {MIN_AVERAGE}")
    alphas = np.ascontiguousarray(alphas, dtype=np.float64)
    if alphas.size == 0:
        return np.empty(0)
    # harmonic amplitudes and phases do not depend on alpha
    harmonics = template.replace(alpha=0.5, beta_f=beta_f).harmonics
    ks, amp, off = harmonic_table(alphas, harmonics)

    n_workers = min(resolve_threads(threads), alphas.size)
    if n_workers <= 1:
        return kernels.winding_batch(q0, alphas, ks, amp, off, n_transient, n_avg)
    bounds = np.linspace(0, alphas.size, n_workers + 1).astype(int)

    def work(i):
        s = slice(bounds[i], bounds[i + 1])
        return kernels.winding_batch(q0, alphas[s], ks, np.ascontiguousarray(amp[s]),
                                     np.ascontiguousarray(off[s]), n_transient, n_avg)

    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        parts = list(pool.map(work, range(n_workers)))
    return np.concatenate(parts)


def staircase_scan(alphas: Sequence[float] | ScanGrid, beta_f: float, template: MapParams,
                   *, n_transient: int = DEFAULT_TRANSIENT, n_avg: int = DEFAULT_AVERAGE,
                   q0: float = 0.0, threads: Optional[int] = 1) -> Staircase:
    """W(alpha) at fixed ``beta_f``.

    ``alphas`` may be a :class:`ScanGrid` (its alpha axis is used) or an
    explicit sequence; values in the edge band around 0 and 1 are dropped.
    """
    if isinstance(alphas, ScanGrid):
        a = alphas.alphas
    else:
        a = np.sort(np.asarray(alphas, dtype=np.float64))
        a = a[(a >= EDGE_BAND) & (a <= 1.0 - EDGE_BAND)]
    W = winding_row(a, template, beta_f, q0=q0, n_transient=n_transient,
                    n_avg=n_avg, threads=threads)
    return Staircase(beta_f=float(beta_f), alpha=a, W=W)


def arnold_tongue_scan(grid: ScanGrid, template: MapParams, *,
                       n_transient: int = DEFAULT_TRANSIENT, n_avg: int = DEFAULT_AVERAGE,
                       q0: float = 0.0, threads: Optional[int] = 1) -> ScanResult:
    """W over the whole grid plus dW/dalpha (central differences, one-sided at the ends)."""
    alphas, betas = grid.alphas, grid.betas
    if alphas.size < 2:
        raise ValueError("grid has fewer than two alpha values outside the edge band")
    W = np.empty((betas.size, alphas.size))
    for i, b in enumerate(betas):
        W[i] = winding_row(alphas, template, b, q0=q0, n_transient=n_transient,
                           n_avg=n_avg, threads=threads)
    dW = np.gradient(W, alphas, axis=1, edge_order=1)
    return ScanResult(grid=grid, alphas=alphas, betas=betas, W=W, dW_dalpha=dW)


def plateau_detect(series: Staircase, farey_order: int = 5,
                   plateau_tol: float = DEFAULT_PLATEAU_TOL) -> list[Plateau]:
    """Longest run of grid points with ``|W - n1/n2| < plateau_tol`` for each Farey fraction.

    Runs shorter than two grid points are not resolved and are dropped.
    """
    alpha = np.asarray(series.alpha)
    W = np.asarray(series.W)
    if alpha.size and np.any(np.diff(alpha) < 0):
        raise ValueError("series must be sorted by alpha")
    out = []
    for frac in farey_sequence(farey_order):
        inside = np.abs(W - float(frac)) < plateau_tol
        best = _longest_run(inside)
        if best is None:
            continue
        lo, hi = best
        if hi - lo + 1 < 2:
            continue
        out.append(Plateau(frac, float(alpha[lo]), float(alpha[hi]), hi - lo + 1))
    return out


def _longest_run(mask: np.ndarray):
    if not mask.any():
        return None
    padded = np.concatenate([[False], mask, [False]])
    d = np.diff(padded.astype(np.int8))
    starts = np.flatnonzero(d == 1)
    stops = np.flatnonzero(d == -1) - 1
    i = int(np.argmax(stops - starts))
    return int(starts[i]), int(stops[i])


def _locked(alpha: float, target: float, template: MapParams, beta_f: float, tol: float,
            n_transient: int, n_avg: int) -> bool:
    if not EDGE_BAND <= alpha <= 1.0 - EDGE_BAND:
        return False
    w = winding_row(np.array([alpha]), template, beta_f, n_transient=n_transient, n_avg=n_avg)
    return abs(w[0] - target) < tol


def tongue_edge_trace(target: Fraction, beta_values: Iterable[float], template: MapParams,
                      *, plateau_tol: float = DEFAULT_PLATEAU_TOL, xtol: float = 1e-8,
                      search_width: float = 0.05, n_seed: int = 201,
                      n_transient: int = DEFAULT_TRANSIENT, n_avg: int = DEFAULT_AVERAGE
                      ) -> list[tuple[float, float, float]]:
    """Edges ``(beta_f, alpha_lo, alpha_hi)`` of the plateau at ``target`` for each ``beta_f``.

    A locked seed point is searched on a grid within ``search_width`` of the
    target (nearest first), then each edge is bracketed by outward doubling
    and bisected to ``xtol``. Values of ``beta_f`` without a plateau are
    skipped.
    """
    t = float(target)
    if not 0.0 < t < 1.0:
        raise ValueError("target must lie inside (0, 1)")
    kw = dict(n_transient=n_transient, n_avg=n_avg)
    out = []
    for b in beta_values:
        b = float(b)
        offsets = np.linspace(-search_width, search_width, n_seed)
        seeds = t + offsets[np.argsort(np.abs(offsets), kind="stable")]
        seed = next((a for a in seeds if _locked(a, t, template, b, plateau_tol, **kw)), None)
        if seed is None:
            continue
        edges = []
        for direction in (-1.0, 1.0):
            inside, step = seed, xtol
            while True:
                probe = inside + direction * step
                if not _locked(probe, t, template, b, plateau_tol, **kw):
                    outside = probe
                    break
                inside = probe
                step *= 2.0
            while abs(outside - inside) > xtol:
                mid = 0.5 * (inside + outside)
                if _locked(mid, t, template, b, plateau_tol, **kw):
                    inside = mid
                else:
                    outside = mid
            edges.append(inside)
        out.append((b, float(edges[0]), float(edges[1])))
    return out
