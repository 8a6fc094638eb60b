"""Once-per-period phase map of a modulated self-oscillator.

The relative phase ``q`` (in cycles) between the self-oscillation and a
sinusoidal power modulation at ``(1 - alpha)`` times the oscillation
frequency advances by one oscillation period as::

    f(q) = q + alpha + 2 beta sin(pi alpha) cos(pi alpha + 2 pi q)
                       / ((1 - alpha) (1 - (1 - alpha)**2))

A periodic, non-sinusoidal modulation is handled harmonic by harmonic.
Harmonic ``k`` oscillates at the frequency ratio ``r_k = k (1 - alpha)`` and
contributes::

    2 beta_k sin(pi r_k) / (r_k (1 - r_k**2)) * cos(k pi (alpha + 2 q) + phase_k)

For ``k = 1`` this is the sinusoidal term above. For ``k > 1`` the phase
dependence ``2 pi k q`` follows from integrating a forcing at ``k`` times the
modulation frequency over one oscillation period; the envelope model in
:mod:`seolock.envelope` reproduces it to first order in the amplitude.

All functions are pure; nothing here holds state.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from ._backend import kernels

__all__ = [
    "Sinusoidal",
    "Rectangular",
    "Harmonic",
    "Rational",
    "MapParams",
    "Orbit",
    "LimitCycle",
    "SecondIterateFixedPoint",
    "ratio_gain",
    "map_step",
    "map_derivative",
    "iterate_orbit",
    "winding_number",
    "find_limit_cycle",
    "second_iterate_fixed_point",
    "tongue_boundary_half",
    "farey_sequence",
    "invertibility_margin",
    "DEFAULT_TRANSIENT",
    "DEFAULT_AVERAGE",
]

DEFAULT_TRANSIENT = 1_000
DEFAULT_AVERAGE = 100_000
MIN_AVERAGE = 1_000

_TONGUE_PREFACTOR = (81.0 / (128.0 * math.pi)) ** (1.0 / 3.0)

#: Reduced fraction in [0, 1]; ``Fraction`` already normalises by the gcd.
Rational = Fraction


@dataclass(frozen=True)
class Sinusoidal:
    """Single-tone modulation."""


@dataclass(frozen=True)
class Rectangular:
    """Zero-mean pulse train with the given duty cycle.

    ``beta_f`` is half the peak-to-peak swing, so a 50 % duty wave swings
    between ``-beta_f`` and ``+beta_f``. The expansion keeps the first
    ``n_harmonics`` non-vanishing Fourier components.
    """

    duty: float = 0.5
    n_harmonics: int = 7

    def __post_init__(self):
        if not 0.0 < self.duty < 1.0:
            raise ValueError(f"duty must lie in (0, 1), got {self.duty}")
        if int(self.n_harmonics) != self.n_harmonics or self.n_harmonics < 1:
            raise ValueError(f"n_harmonics must be a positive integer, got {self.n_harmonics}")


Waveform = Union[Sinusoidal, Rectangular]


@dataclass(frozen=True)
class Harmonic:
    k: int
    beta: float
    phase: float = 0.0


def rectangular_harmonics(beta_f: float, duty: float, n_harmonics: int,
                          phase: float = 0.0) -> tuple[Harmonic, ...]:
    """Fourier components of a zero-mean rectangular wave centred on t = 0.

    Component ``k`` has amplitude ``4 beta_f sin(pi k duty) / (pi k)``; a
    negative amplitude is stored as a phase shift of pi. A time shift of the
    whole waveform by ``phase`` (radians of the fundamental) shifts harmonic
    ``k`` by ``k * phase``.
    """
    out = []
    k = 0
    while len(out) < n_harmonics:
        k += 1
        s = math.sin(math.pi * k * duty)
        if abs(s) < 1e-12:
            continue
        a = 4.0 * beta_f * s / (math.pi * k)
        extra = math.pi if a < 0 else 0.0
        out.append(Harmonic(k, abs(a), k * phase + extra))
        if k > 1000 * n_harmonics:  # unreachable for duty in (0, 1)
            break
    return tuple(out)


@dataclass(frozen=True)
class MapParams:
    """Dimensionless parameters of the phase map.

    Parameters
    ----------
    alpha : float
        One minus the ratio of modulation frequency to oscillation frequency;
        strictly inside (0, 1).
    beta_f : float
        Dimensionless modulation amplitude, ``>= 0``.
    waveform : Sinusoidal or Rectangular
        Modulation shape. Rectangular waves are expanded into harmonics here.
    phase : float
        Phase of the modulation (radians of the fundamental).
    """

    alpha: float
    beta_f: float
    waveform: Waveform = field(default_factory=Sinusoidal)
    phase: float = 0.0
    harmonics: tuple[Harmonic, ...] = field(init=False, repr=False)

    def __post_init__(self):
        alpha = float(self.alpha)
        beta_f = float(self.beta_f)
        if not math.isfinite(alpha) or not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie strictly inside (0, 1), got {self.alpha}")
        if not math.isfinite(beta_f) or beta_f < 0.0:
            raise ValueError(f"beta_f must be finite and >= 0, got {self.beta_f}")
        if not math.isfinite(self.phase):
            raise ValueError("phase must be finite")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta_f", beta_f)
        if isinstance(self.waveform, Sinusoidal):
            harmonics = (Harmonic(1, beta_f, float(self.phase)),)
        elif isinstance(self.waveform, Rectangular):
            harmonics = rectangular_harmonics(beta_f, self.waveform.duty,
                                              self.waveform.n_harmonics, self.phase)
        else:
            raise TypeError(f"unknown waveform {self.waveform!r}")
        object.__setattr__(self, "harmonics", harmonics)

    def replace(self, **changes) -> "MapParams":
        kw = dict(alpha=self.alpha, beta_f=self.beta_f, waveform=self.waveform,
                  phase=self.phase)
        kw.update(changes)
        return MapParams(**kw)

    @property
    def ks(self) -> np.ndarray:
        return np.array([h.k for h in self.harmonics], dtype=np.int64)

    def coefficients(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(ks, amp, off)`` so that the perturbation is ``sum amp cos(2 pi ks q + off)``."""
        ks, amp, off = harmonic_table(np.array([self.alpha]), self.harmonics)
        return ks, amp[0], off[0]


def ratio_gain(r):
    """``sin(pi r) / (r (1 - r**2))`` with its removable singularities at r = 0 and r = 1.

    Evaluated through ``sinc`` so neither limit suffers cancellation.
    """
    r = np.asarray(r, dtype=np.float64)
    low = r < 0.5
    with np.errstate(divide="ignore", invalid="ignore"):
        g_low = math.pi * np.sinc(r) / ((1.0 - r) * (1.0 + r))
        g_high = math.pi * np.sinc(1.0 - r) / (r * (1.0 + r))
    return np.where(low, g_low, g_high)


def harmonic_table(alpha: np.ndarray, harmonics) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Kernel coefficients for an array of ``alpha`` values sharing one harmonic set.

    Returns ``ks`` (shape ``(nh,)``) and ``amp``, ``off`` (shape ``(len(alpha), nh)``).
    """
    alpha = np.asarray(alpha, dtype=np.float64).reshape(-1)
    ks = np.array([h.k for h in harmonics], dtype=np.int64)
    betas = np.array([h.beta for h in harmonics], dtype=np.float64)
    phases = np.array([h.phase for h in harmonics], dtype=np.float64)
    r = ks[None, :] * (1.0 - alpha[:, None])
    amp = 2.0 * betas[None, :] * ratio_gain(r)
    off = math.pi * ks[None, :] * alpha[:, None] + phases[None, :]
    return ks, np.ascontiguousarray(amp), np.ascontiguousarray(off)


def _perturbation(q, ks, amp, off):
    q = np.asarray(q, dtype=np.float64)
    frac = q - np.floor(q)
    return np.sum(amp * np.cos(2.0 * math.pi * ks * frac[..., None] + off), axis=-1)


def _perturbation_slope(q, ks, amp, off):
    q = np.asarray(q, dtype=np.float64)
    frac = q - np.floor(q)
    return np.sum(-2.0 * math.pi * ks * amp * np.sin(2.0 * math.pi * ks * frac[..., None] + off),
                  axis=-1)


def map_step(q, p: MapParams):
    """Apply the phase map once to a lifted phase (scalar or array)."""
    q_arr = np.asarray(q, dtype=np.float64)
    if not np.all(np.isfinite(q_arr)):
        raise ValueError("phase must be finite")
    ks, amp, off = p.coefficients()
    out = q_arr + p.alpha + _perturbation(q_arr, ks, amp, off)
    return float(out) if out.ndim == 0 else out


def map_derivative(q, p: MapParams):
    """``f'(q)``."""
    ks, amp, off = p.coefficients()
    out = 1.0 + _perturbation_slope(q, ks, amp, off)
    return float(out) if np.ndim(out) == 0 else out


def _iterate_with_slope(q, n: int, p: MapParams):
    """``f^n(q)`` and ``(f^n)'(q)`` for an array of starting phases."""
    ks, amp, off = p.coefficients()
    q = np.array(q, dtype=np.float64)
    slope = np.ones_like(q)
    for _ in range(n):
        slope = slope * (1.0 + _perturbation_slope(q, ks, amp, off))
        q = q + p.alpha + _perturbation(q, ks, amp, off)
    return q, slope


@dataclass(frozen=True)
class Orbit:
    lifted: np.ndarray
    wrapped: np.ndarray


def iterate_orbit(q0: float, n: int, p: MapParams) -> Orbit:
    """Lifted and wrapped orbit ``q_0, ..., q_n``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not math.isfinite(q0):
        raise ValueError("phase must be finite")
    ks, amp, off = p.coefficients()
    lifted = kernels.iterate_lift(float(q0), int(n), p.alpha, ks, amp, off)
    return Orbit(lifted=lifted, wrapped=lifted - np.floor(lifted))


def winding_number(p: MapParams, q0: float = 0.0, n_transient: int = DEFAULT_TRANSIENT,
                   n_avg: int = DEFAULT_AVERAGE) -> float:
    """Mean advance per iteration of the lift after a transient.

    ``n_avg`` below 1000 is rejected; the estimate for a locked orbit is
    exact to rounding, for an unlocked one it converges like ``1/n_avg``.
    """
    if n_avg < MIN_AVERAGE:
        raise ValueError(f"n_avg must be >= {MIN_AVERAGE}")
    if n_transient < 0:
        raise ValueError("n_transient must be >= 0")
    ks, amp, off = p.coefficients()
    w = kernels.winding_batch(float(q0), np.array([p.alpha]), ks, amp[None, :],
                              off[None, :], int(n_transient), int(n_avg))
    return float(w[0])


@dataclass(frozen=True)
class LimitCycle:
    period_n2: int
    rotation_n1: int
    points: np.ndarray
    multiplier: float

    @property
    def winding(self) -> Fraction:
        return Fraction(self.rotation_n1, self.period_n2)

    @property
    def stable(self) -> bool:
        return abs(self.multiplier) < 1.0


def _distinct_mod1(points, tol=1e-9) -> bool:
    pts = np.sort(np.mod(points, 1.0))
    if pts.size < 2:
        return True
    gaps = np.diff(np.concatenate([pts, [pts[0] + 1.0]]))
    return bool(np.all(gaps > tol))


def find_limit_cycle(p: MapParams, n2_max: int = 5, tol: float = 1e-9,
                     n_grid: int = 512) -> Optional[LimitCycle]:
    """Smallest-period stable periodic orbit with period up to ``n2_max``.

    Roots of ``f^n2(q) - q - n1`` are bracketed on an ``n_grid``-point grid
    over one period of ``q`` and refined with Brent's method. A root is
    accepted when its residual is below ``tol``, its orbit has exactly
    ``n2`` distinct points on the circle and ``|(f^n2)'| < 1``.
    Returns ``None`` when no such orbit exists.
    """
    if n2_max < 1:
        raise ValueError("n2_max must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    grid = np.linspace(0.0, 1.0, n_grid + 1)
    for n2 in range(1, n2_max + 1):
        g, _ = _iterate_with_slope(grid, n2, p)
        g = g - grid
        g[-1] = g[0]  # lift equivariance
        for n1 in range(math.ceil(g.min()), math.floor(g.max()) + 1):
            h = g - n1

            def residual(q, n1=n1, n2=n2):
                return float(_iterate_with_slope(np.array([q]), n2, p)[0][0] - q - n1)

            roots = []
            for i in range(n_grid):
                if h[i] == 0.0:
                    roots.append(grid[i])
                elif h[i] * h[i + 1] < 0.0:
                    roots.append(brentq(residual, grid[i], grid[i + 1], xtol=1e-14,
                                        rtol=4 * np.finfo(float).eps))
            for q_star in roots:
                if abs(residual(q_star)) >= tol:
                    continue
                orbit = iterate_orbit(q_star, n2, p)
                _, slope = _iterate_with_slope(np.array([q_star]), n2, p)
                mult = float(slope[0])
                points = orbit.wrapped[:n2]
                if abs(mult) < 1.0 and _distinct_mod1(points):
                    return LimitCycle(period_n2=n2, rotation_n1=n1, points=points.copy(),
                                      multiplier=mult)
    return None


@dataclass(frozen=True)
class SecondIterateFixedPoint:
    q: float
    derivative: float
    degenerate: bool = False


def second_iterate_fixed_point(p: MapParams, n_grid: int = 2048
                               ) -> Optional[SecondIterateFixedPoint]:
    """Fixed point of ``f(f(q)) - 1`` nearest to stability, with ``(f o f)'`` there.

    Meant for sinusoidal modulation with ``alpha`` near 1/2. When every ``q``
    is a fixed point (zero amplitude at ``alpha = 1/2``) the result is flagged
    ``degenerate``. Returns ``None`` when no fixed point exists or the root
    refinement fails (the latter with a ``RuntimeWarning``).
    """
    if not isinstance(p.waveform, Sinusoidal):
        raise ValueError("second_iterate_fixed_point expects a sinusoidal waveform")
    grid = np.linspace(0.0, 1.0, n_grid + 1)
    f2, _ = _iterate_with_slope(grid, 2, p)
    h = f2 - grid - 1.0
    h[-1] = h[0]
    if np.max(np.abs(h)) < 1e-14:
        return SecondIterateFixedPoint(q=0.0, derivative=1.0, degenerate=True)

    def residual(q):
        return float(_iterate_with_slope(np.array([q]), 2, p)[0][0] - q - 1.0)

    best = None
    for i in range(n_grid):
        if h[i] == 0.0:
            q_star = grid[i]
        elif h[i] * h[i + 1] < 0.0:
            try:
                q_star = brentq(residual, grid[i], grid[i + 1], xtol=1e-14, maxiter=200)
            except RuntimeError as exc:
                warnings.warn(f"fixed-point refinement did not converge: {exc}", RuntimeWarning)
                return None
        else:
            continue
        d = float(_iterate_with_slope(np.array([q_star]), 2, p)[1][0])
        if best is None or abs(d) < abs(best.derivative):
            best = SecondIterateFixedPoint(q=float(q_star), derivative=d)
    return best


def tongue_boundary_half(epsilon: float) -> float:
    """Analytic edge of the 1/2 tongue: ``beta_f = (81 / (128 pi))**(1/3) |epsilon|**(2/3)``.

    ``epsilon = alpha - 1/2``; negative values use ``|epsilon|`` since the
    tongue is taken as symmetric.
    """
    return _TONGUE_PREFACTOR * abs(epsilon) ** (2.0 / 3.0)


def farey_sequence(order: int) -> list[Fraction]:
    """Reduced fractions in [0, 1] with denominator ``<= order``, ascending."""
    if int(order) != order or order < 1:
        raise ValueError("order must be a positive integer")
    a, b, c, d = 0, 1, 1, order
    out = [Fraction(a, b)]
    while c <= order:
        k = (order + b) // d
        a, b, c, d = c, d, k * c - a, k * d - b
        out.append(Fraction(a, b))
    return out


def invertibility_margin(p: MapParams, n_grid: int = 4096) -> float:
    """``max_q |d(perturbation)/dq|``; below 1 the map is a circle diffeomorphism."""
    ks, amp, off = p.coefficients()
    if not np.any(amp):
        return 0.0
    if ks.size == 1:
        return float(2.0 * math.pi * ks[0] * abs(amp[0]))
    n = n_grid * int(ks.max())
    grid = np.arange(n) / n
    slope = np.abs(_perturbation_slope(grid, ks, amp, off))
    i = int(np.argmax(slope))
    h = 1.0 / n
    res = minimize_scalar(lambda q: -abs(float(_perturbation_slope(q, ks, amp, off))),
                          bounds=(grid[i] - h, grid[i] + h), method="bounded",
                          options={"xatol": 1e-12})
    return float(max(slope[i], -res.fun))
