"""Slow-envelope model of the self-oscillation under power modulation.

The complex amplitude obeys::

    dA = -(Gamma_eff + i Omega_eff) A dt + xi(t) dt + dW
    Gamma_eff = Gamma0 + Gamma2 |A|^2,   Omega_eff = Omega0 + Omega2 |A|^2

with white noise of intensity ``2 Theta`` per quadrature. Above threshold
(``Gamma0 < 0 < Gamma2``) the free solution settles on the circle
``|A| = A_r0 = sqrt(-Gamma0 / Gamma2)`` and turns clockwise,
``A ~ exp(-i Omega_H t)`` with ``Omega_H = Omega0 + Omega2 A_r0**2``.
The mechanical displacement about its static value is ``A + conj(A)``, so
the displacement amplitude is ``2 |A|``.

Phase convention
----------------
The self-oscillation phase is ``arg A`` (decreasing in time). Period ``n``
ends when ``arg A`` crosses ``-2 pi n`` measured from a reference of 0, and
the relative phase assigned to it is::

    q_n = n + 1/2 - (omega_mod t_n + phase0) / (2 pi)

With this choice the once-per-period update of ``q_n`` is the map in
:mod:`seolock.circle_map` to first order in the modulation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ._backend import kernels
from .circle_map import (
    Harmonic,
    MapParams,
    Rectangular,
    Sinusoidal,
    iterate_orbit,
    map_step,
    rectangular_harmonics,
)

__all__ = [
    "BelowThreshold",
    "NumericalBlowUp",
    "EnvelopeParams",
    "ModulationSpec",
    "ThermalCoupling",
    "EnvelopeTrajectory",
    "MapComparison",
    "seo_amplitude",
    "hopf_frequency",
    "modulation_frequency",
    "calibration_power",
    "thermal_response",
    "thermal_force",
    "forcing_components",
    "default_step",
    "integrate_envelope",
    "integrate_ensemble",
    "crossing_phases",
    "derive_map_params",
    "compare_with_map",
    "BLOWUP_FACTOR",
]

BLOWUP_FACTOR = 1e6
_CHUNK = 1 << 16


class BelowThreshold(ValueError):
    """Raised when ``Gamma0 >= 0``: no self-oscillation to speak of."""


class NumericalBlowUp(RuntimeError):
    """Integration left the physically meaningful range."""

    def __init__(self, message: str, time: float, step: int):
        super().__init__(message)
        self.time = time
        self.step = step


@dataclass(frozen=True)
class EnvelopeParams:
    """Coefficients of the amplitude equation (SI units, rates in 1/s).

    Parameters
    ----------
    Gamma0, Gamma2 : float
        Linear damping (negative above threshold) and its |A|^2 coefficient.
    Omega0, Omega2 : float
        Frequency and its |A|^2 coefficient.
    Theta : float
        Noise intensity in m^2/s.
    kappa : float
        Thermal relaxation rate.
    """

    Gamma0: float
    Gamma2: float
    Omega0: float
    Omega2: float = 0.0
    Theta: float = 0.0
    kappa: float = 1.0

    def __post_init__(self):
        for name in ("Gamma0", "Gamma2", "Omega0", "Omega2", "Theta", "kappa"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.Gamma2 <= 0:
            raise ValueError("Gamma2 must be > 0 (supercritical case)")
        if self.Omega0 <= 0:
            raise ValueError("Omega0 must be > 0")
        if self.Theta < 0:
            raise ValueError("Theta must be >= 0")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")

    def replace(self, **changes) -> "EnvelopeParams":
        kw = {k: getattr(self, k) for k in ("Gamma0", "Gamma2", "Omega0", "Omega2",
                                           "Theta", "kappa")}
        kw.update(changes)
        return EnvelopeParams(**kw)


@dataclass(frozen=True)
class ThermalCoupling:
    """Couplings that turn a power modulation into a force.

    ``theta`` is the force per unit mass and kelvin, ``eta`` the heating rate
    per watt and ``I0`` the cavity intensity factor at the working point.
    """

    theta: float
    eta: float
    I0: float


@dataclass(frozen=True)
class ModulationSpec:
    """Periodic power modulation.

    Exactly one of ``P_p`` (peak power in W) and ``beta_f`` (dimensionless map
    amplitude) is given; the other is derived on demand. ``ratio`` is the
    modulation frequency in units of the self-oscillation frequency, i.e.
    ``1 - alpha``.
    """

    ratio: float
    waveform: Union[Sinusoidal, Rectangular] = field(default_factory=Sinusoidal)
    P_p: Optional[float] = None
    beta_f: Optional[float] = None
    phase0: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.ratio) and self.ratio > 0):
            raise ValueError("ratio must be > 0")
        if (self.P_p is None) == (self.beta_f is None):
            raise ValueError("give exactly one of P_p and beta_f")
        amp = self.P_p if self.P_p is not None else self.beta_f
        if not (math.isfinite(amp) and amp >= 0):
            raise ValueError("modulation amplitude must be finite and >= 0")

    @property
    def amplitude(self) -> float:
        return self.P_p if self.P_p is not None else self.beta_f

    def harmonics(self) -> tuple[Harmonic, ...]:
        """Cosine components ``amp cos(k omega t + phase)`` of the modulation, phase0 included."""
        if isinstance(self.waveform, Sinusoidal):
            return (Harmonic(1, self.amplitude, self.phase0),)
        return rectangular_harmonics(self.amplitude, self.waveform.duty,
                                     self.waveform.n_harmonics, self.phase0)


@dataclass(frozen=True)
class EnvelopeTrajectory:
    times: np.ndarray
    A: np.ndarray
    seed: Optional[int]
    dt: float
    stride: int


def seo_amplitude(p: EnvelopeParams) -> float:
    """``sqrt(-Gamma0 / Gamma2)``; raises :class:`BelowThreshold` for ``Gamma0 >= 0``."""
    if p.Gamma2 <= 0:
        raise ValueError("Gamma2 must be > 0")
    if p.Gamma0 >= 0:
        raise BelowThreshold(f"below threshold: Gamma0 = {p.Gamma0} >= 0, no self-oscillation")
    return math.sqrt(-p.Gamma0 / p.Gamma2)


def hopf_frequency(p: EnvelopeParams) -> float:
    """Angular frequency of the free self-oscillation."""
    a = seo_amplitude(p)
    return p.Omega0 + p.Omega2 * a * a


def modulation_frequency(p: EnvelopeParams, mod: ModulationSpec) -> float:
    return mod.ratio * hopf_frequency(p)


def calibration_power(p: EnvelopeParams, coupling: ThermalCoupling) -> float:
    """Power (W) corresponding to ``beta_f = 1``: ``Omega_H**3 A_r0 / (theta eta I0)``."""
    denom = coupling.theta * coupling.eta * coupling.I0
    if denom == 0:
        raise ValueError("theta * eta * I0 must be nonzero")
    return hopf_frequency(p) ** 3 * seo_amplitude(p) / denom


def thermal_response(t, mod: ModulationSpec, coupling: ThermalCoupling, kappa: float,
                     omega_mod: float):
    """Steady periodic temperature response to the modulated power (K).

    Each component ``P_k cos(w t + phi)`` drives
    ``eta I0 P_k (kappa cos(w t + phi) + w sin(w t + phi)) / (kappa**2 + w**2)``.
    """
    if mod.P_p is None:
        raise ValueError("thermal_response needs a power amplitude P_p")
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    for h in mod.harmonics():
        w = h.k * omega_mod
        arg = w * t + h.phase
        out = out + coupling.eta * coupling.I0 * h.beta * (
            kappa * np.cos(arg) + w * np.sin(arg)) / (kappa * kappa + w * w)
    return float(out) if out.ndim == 0 else out


def thermal_force(t, mod: ModulationSpec, coupling: ThermalCoupling, kappa: float,
                  Omega0: float, omega_mod: float):
    """Envelope forcing ``theta T_R1(t) / Omega0`` (m/s)."""
    return coupling.theta * thermal_response(t, mod, coupling, kappa, omega_mod) / Omega0


def _phase_free(mod: ModulationSpec) -> ModulationSpec:
    return ModulationSpec(ratio=mod.ratio, waveform=mod.waveform, P_p=mod.P_p,
                          beta_f=mod.beta_f, phase0=0.0)


def forcing_components(p: EnvelopeParams, mod: ModulationSpec,
                       coupling: Optional[ThermalCoupling] = None
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Forcing as ``sum amp sin(w t + phase)``; returns ``(amp, w, phase)``.

    A power amplitude goes through the thermal filter (``coupling`` required).
    A ``beta_f`` amplitude is turned into the forcing whose once-per-period
    effect is exactly the map term of each harmonic to first order: harmonic
    ``k`` at frequency ratio ``r_k = k r`` gets amplitude
    ``2 pi beta_k A_r0 Omega_H / (r r_k)``.
    """
    omega_h = hopf_frequency(p)
    omega_mod = mod.ratio * omega_h
    amp, w, ph = [], [], []
    if mod.P_p is not None:
        if coupling is None:
            raise ValueError("a power amplitude needs a ThermalCoupling")
        scale = coupling.theta * coupling.eta * coupling.I0 / p.Omega0
        for h in mod.harmonics():
            wk = h.k * omega_mod
            amp.append(scale * h.beta / math.hypot(p.kappa, wk))
            w.append(wk)
            # kappa cos(x) + w sin(x) = hypot(kappa, w) sin(x + atan2(kappa, w))
            ph.append(h.phase + math.atan2(p.kappa, wk))
    else:
        a_r0 = seo_amplitude(p)
        r = mod.ratio
        for h in _phase_free(mod).harmonics():
            rk = h.k * r
            amp.append(2.0 * math.pi * h.beta * a_r0 * omega_h / (r * rk))
            w.append(h.k * omega_mod)
            ph.append(h.k * mod.phase0 - h.phase)
    return np.array(amp), np.array(w), np.array(ph)


def default_step(p: EnvelopeParams) -> float:
    """Two hundred steps per free oscillation period."""
    return 2.0 * math.pi / (200.0 * p.Omega0)


def _member_rng(seed: int, member: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(member)])))


def integrate_envelope(p: EnvelopeParams, mod: Optional[ModulationSpec], A_init: complex,
                       t_span: float, dt: Optional[float] = None, seed: Optional[int] = 0,
                       *, coupling: Optional[ThermalCoupling] = None, stride: int = 1,
                       member: int = 0) -> EnvelopeTrajectory:
    """Euler-Maruyama integration of the amplitude equation from ``t = 0``.

    The state is advanced in a frame rotating at ``Omega_H`` and rotated back
    for output, so the returned ``A`` is the lab-frame amplitude. The
    deterministic forcing is evaluated at the middle of each step. Gaussian
    increments of variance ``2 Theta dt`` per quadrature come from a Philox
    stream keyed by ``(seed, member)`` and are drawn in fixed-size chunks, so
    a trajectory does not depend on how it is sampled.

    Parameters
    ----------
    mod : ModulationSpec or None
        ``None`` means constant power.
    t_span : float
        Duration; ``round(t_span / dt)`` steps are taken.
    stride : int
        Keep one sample every ``stride`` steps.

    Raises
    ------
    NumericalBlowUp
        If ``|A|`` exceeds ``1e6 A_r0`` or becomes non-finite.
    """
    a_r0 = seo_amplitude(p)
    omega_h = p.Omega0 + p.Omega2 * a_r0 * a_r0
    if dt is None:
        dt = default_step(p)
    if not (dt > 0 and dt <= 2.0 * math.pi / (50.0 * p.Omega0) * (1 + 1e-12)):
        raise ValueError("dt must be in (0, 2 pi / (50 Omega0)]")
    if not t_span > 0:
        raise ValueError("t_span must be > 0")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    a0 = complex(A_init)
    if not (math.isfinite(a0.real) and math.isfinite(a0.imag)):
        raise ValueError("A_init must be finite")
    n_steps = int(round(t_span / dt))
    if mod is None or mod.amplitude == 0:
        f_amp = f_w = f_ph = np.zeros(0)
    else:
        f_amp, f_w, f_ph = forcing_components(p, mod, coupling)
    noisy = p.Theta > 0 and seed is not None
    if p.Theta > 0 and seed is None:
        raise ValueError("a seed is required when Theta > 0")
    rng = _member_rng(seed, member) if noisy else None
    sigma = math.sqrt(2.0 * p.Theta * dt)
    limit = BLOWUP_FACTOR * a_r0
    chunk = stride * max(1, _CHUNK // stride)

    pieces = []
    state = a0  # rotating frame; coincides with the lab frame at t = 0
    # the kernel returns lab-frame samples and the rotating-frame end state
    done = 0
    while done < n_steps:
        n = min(chunk, n_steps - done)
        noise = (sigma * rng.standard_normal((n, 2)) if noisy
                 else np.zeros((0, 2)))
        samples, state, steps, blew = kernels.envelope_em(
            state, done, dt, n, stride, p.Gamma0, p.Gamma2, p.Omega0 - omega_h,
            p.Omega2, omega_h, f_amp, f_w, f_ph, noise, limit)
        if blew:
            t_fail = (done + steps) * dt
            raise NumericalBlowUp(
                f"envelope amplitude exceeded {BLOWUP_FACTOR:g} A_r0 or became non-finite "
                f"at t = {t_fail:.6g} s (step {done + steps})", t_fail, done + steps)
        pieces.append(samples if done == 0 else samples[1:])
        done += n
    A = np.concatenate(pieces)
    times = (np.arange(A.size) * stride) * dt
    return EnvelopeTrajectory(times=times, A=A, seed=seed, dt=dt, stride=stride)


def integrate_ensemble(p: EnvelopeParams, mod: Optional[ModulationSpec], A_init: complex,
                       t_span: float, n_members: int, dt: Optional[float] = None,
                       seed: int = 0, *, coupling: Optional[ThermalCoupling] = None,
                       stride: int = 1, threads: Optional[int] = 1) -> list[EnvelopeTrajectory]:
    """Independent trajectories, member ``i`` on the stream ``(seed, i)``."""
    from concurrent.futures import ThreadPoolExecutor

    from .scans import resolve_threads

    def one(i):
        return integrate_envelope(p, mod, A_init, t_span, dt, seed, coupling=coupling,
                                  stride=stride, member=i)

    n_workers = min(resolve_threads(threads), n_members)
    if n_workers <= 1:
        return [one(i) for i in range(n_members)]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(one, range(n_members)))


def crossing_phases(traj: EnvelopeTrajectory, omega_mod: float, phase0: float = 0.0
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Per-period relative phase of the envelope against the modulation.

    Finds the times at which the unwrapped ``arg A`` passes ``-2 pi n`` (linear
    interpolation between samples) and returns ``(n, q_n)`` with
    ``q_n = n + 1/2 - (omega_mod t_n + phase0) / (2 pi)``; ``q_n`` is a lift.
    """
    ph = np.unwrap(np.angle(traj.A))
    # count full turns relative to the reference direction 0
    levels = np.arange(math.ceil(-ph[0] / (2 * math.pi) - 1e-12),
                       math.floor(-ph[-1] / (2 * math.pi)) + 1)
    if levels.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    if np.any(np.diff(ph) >= 0):
        # noisy runs can stall; keep the first passage through each level
        ph = np.minimum.accumulate(ph)
    t_n = np.interp(-2 * math.pi * levels, ph[::-1], traj.times[::-1])
    n = levels.astype(np.int64)
    q = n + 0.5 - (omega_mod * t_n + phase0) / (2 * math.pi)
    return n, q


def derive_map_params(p: EnvelopeParams, mod: ModulationSpec,
                      coupling: Optional[ThermalCoupling] = None) -> MapParams:
    """Map parameters for a modulated envelope.

    ``alpha = 1 - ratio``. A power amplitude is converted with
    ``beta_f = P_p theta eta I0 / (Omega_H**3 A_r0)``.
    """
    seo_amplitude(p)  # threshold check
    if mod.beta_f is not None:
        beta = mod.beta_f
    else:
        if coupling is None:
            raise ValueError("a power amplitude needs a ThermalCoupling")
        beta = mod.P_p / calibration_power(p, coupling)
    return MapParams(alpha=1.0 - mod.ratio, beta_f=beta, waveform=mod.waveform)


@dataclass(frozen=True)
class MapComparison:
    n: np.ndarray
    q_map: np.ndarray
    q_envelope: np.ndarray
    one_step_error: np.ndarray

    @property
    def abs_error(self) -> np.ndarray:
        return np.abs(self.q_map - self.q_envelope)

    @property
    def max_error(self) -> float:
        return float(self.abs_error.max())


def compare_with_map(p: EnvelopeParams, mod: ModulationSpec, n_periods: int = 100,
                     dt: Optional[float] = None,
                     coupling: Optional[ThermalCoupling] = None) -> MapComparison:
    """Run the noise-free envelope from ``A_r0`` and iterate the map from the same phase.

    ``q_map`` is the map orbit started at the first envelope phase;
    ``one_step_error`` compares each envelope step with one map step from the
    previous envelope phase.
    """
    p0 = p.replace(Theta=0.0)
    mp = derive_map_params(p0, mod, coupling)
    omega_h = hopf_frequency(p0)
    t_span = (n_periods + 2) * 2 * math.pi / omega_h
    traj = integrate_envelope(p0, mod, seo_amplitude(p0), t_span, dt, None, coupling=coupling)
    n, q_env = crossing_phases(traj, mod.ratio * omega_h, mod.phase0)
    if q_env.size < n_periods + 1:
        raise RuntimeError("envelope run produced too few periods")
    n, q_env = n[:n_periods + 1], q_env[:n_periods + 1]
    q_map = iterate_orbit(float(q_env[0]), n_periods, mp).lifted
    one = np.concatenate([[0.0], np.abs(map_step(q_env[:-1], mp) - q_env[1:])])
    return MapComparison(n=n, q_map=q_map, q_envelope=q_env, one_step_error=one)
