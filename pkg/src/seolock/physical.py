"""Full device model: a mirror on a thermally tuned spring inside a fibre cavity.

Displacement ``x`` and the temperature rise ``T`` of the resonator obey::

    x'' + 2 gamma0 x' + (omega0 - beta T)**2 x = theta T
    T'  = eta P_L(t) I(x) - kappa T

``theta`` is a force per unit mass and kelvin. The cavity intensity factor
``I(x)`` is an Airy-type resonance of period ``lambda / 2`` in ``x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Callable, Optional, Union

import numpy as np
from scipy.constants import k as K_BOLTZMANN

from ._backend import kernels
from .envelope import (
    BLOWUP_FACTOR,
    EnvelopeParams,
    ModulationSpec,
    NumericalBlowUp,
    ThermalCoupling,
)

__all__ = [
    "PhysicalParams",
    "FullTrajectory",
    "cavity_intensity",
    "reflectivity",
    "intensity_taylor",
    "static_equilibrium",
    "static_displacement",
    "tuned_resonance",
    "envelope_from_physical",
    "thermal_coupling",
    "modulated_power",
    "integrate_full",
    "steady_amplitude",
    "DEFAULT_OMEGA0",
]

DEFAULT_OMEGA0 = 2.0 * math.pi * 236.3e3
_Q = 3800.0
_CHUNK = 1 << 16


@dataclass(frozen=True)
class PhysicalParams:
    """Device parameters in SI units.

    The measured values (quality factor 3800, finesse 2.1, mass 1.1 pg,
    wavelength 1545.498 nm, 12 mW, 236.3 kHz) are the defaults; the thermal
    couplings are illustrative values that put the device at twice its
    oscillation threshold with a ~10 nm oscillation amplitude.

    ``x_R`` locates the cavity resonance. When left as ``None`` it is chosen
    so that the static equilibrium sits ``detuning`` away from resonance.
    """

    m: float = 1.1e-12
    gamma0: float = DEFAULT_OMEGA0 / (2.0 * _Q)
    omega0: float = DEFAULT_OMEGA0
    beta: float = 2.0 * math.pi * 20.0
    theta: float = 5.8e3
    eta: float = 8.4e6
    kappa: float = 1.0e4
    wavelength: float = 1545.498e-9
    finesse: float = 2.1
    beta_plus: float = 0.6
    beta_minus: float = 0.2
    P0: float = 12e-3
    gamma2: float = 2.0e18
    T_eff: float = 77.0
    detuning: Optional[float] = None
    x_R: Optional[float] = None

    def __post_init__(self):
        for name in ("m", "gamma0", "omega0", "kappa", "wavelength", "finesse"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be > 0")
        for name in ("beta", "theta", "eta", "P0", "gamma2", "T_eff"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.P0 < 0 or self.eta < 0 or self.gamma2 < 0 or self.T_eff < 0:
            raise ValueError("P0, eta, gamma2 and T_eff must be >= 0")
        if not 0 < self.beta_minus < self.beta_plus:
            raise ValueError("need 0 < beta_minus < beta_plus")
        if self.detuning is None:
            object.__setattr__(self, "detuning", self.wavelength / 8.0)
        if self.x_R is None:
            object.__setattr__(self, "x_R", tuned_resonance(self, self.detuning))

    def replace(self, **changes) -> "PhysicalParams":
        """Copy with changes; ``x_R`` is re-derived unless given explicitly."""
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw["x_R"] = None
        kw.update(changes)
        return PhysicalParams(**kw)

    @property
    def quality_factor(self) -> float:
        return self.omega0 / (2.0 * self.gamma0)

    @property
    def peak_intensity(self) -> float:
        return self.finesse * (1.0 - self.beta_minus ** 2 / self.beta_plus ** 2)

    @property
    def x_work(self) -> float:
        return self.x_R + self.detuning


@dataclass(frozen=True)
class FullTrajectory:
    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    T_R: np.ndarray


def _intensity_parts(p: PhysicalParams):
    c = p.finesse * (1.0 - p.beta_minus ** 2 / p.beta_plus ** 2) * p.beta_plus ** 2
    return c, 4.0 * math.pi / p.wavelength, p.beta_plus ** 2


def _intensity_at_detuning(xd, p: PhysicalParams):
    c, kopt, bp2 = _intensity_parts(p)
    return c / (1.0 - np.cos(kopt * xd) + bp2)


def cavity_intensity(x, p: PhysicalParams):
    """``I(x) = finesse (1 - b-^2/b+^2) b+^2 / (1 - cos(4 pi (x - x_R) / lambda) + b+^2)``."""
    out = _intensity_at_detuning(np.asarray(x, dtype=np.float64) - p.x_R, p)
    return float(out) if np.ndim(out) == 0 else out


def reflectivity(x, p: PhysicalParams):
    """Steady-state reflection probability ``1 - I(x) / finesse``."""
    out = 1.0 - np.asarray(cavity_intensity(x, p)) / p.finesse
    return float(out) if np.ndim(out) == 0 else out


def intensity_taylor(x_work: Optional[float], p: PhysicalParams) -> tuple[float, float, float]:
    """``(I, dI/dx, d2I/dx2)`` at ``x_work`` (the static working point if ``None``)."""
    if x_work is None:
        x_work = p.x_work
    c, kopt, bp2 = _intensity_parts(p)
    phi = kopt * (x_work - p.x_R)
    s, co = math.sin(phi), math.cos(phi)
    den = 1.0 - co + bp2
    i0 = c / den
    i1 = -c * kopt * s / den ** 2
    i2 = c * kopt ** 2 * (2.0 * s * s / den ** 3 - co / den ** 2)
    return i0, i1, i2


def tuned_resonance(p: PhysicalParams, detuning: float) -> float:
    """``x_R`` such that the static equilibrium lies ``detuning`` above the resonance."""
    i_s = float(_intensity_at_detuning(detuning, p))
    T_s = p.eta * p.P0 * i_s / p.kappa
    w = p.omega0 - p.beta * T_s
    if w <= 0:
        raise ValueError("static heating drives the mechanical frequency to zero")
    x_s = p.theta * T_s / (w * w)
    return x_s - detuning


def static_equilibrium(p: PhysicalParams) -> tuple[float, float]:
    """Exact static ``(x, T)`` at the working point for constant power ``P0``."""
    i0 = float(cavity_intensity(p.x_work, p))
    T_s = p.eta * p.P0 * i0 / p.kappa
    w = p.omega0 - p.beta * T_s
    return p.theta * T_s / (w * w), T_s


def static_displacement(p: PhysicalParams) -> float:
    """Averaged optically induced displacement ``eta theta P0 I0 / (kappa omega0**2)``."""
    i0, _, _ = intensity_taylor(None, p)
    return p.eta * p.theta * p.P0 * i0 / (p.kappa * p.omega0 ** 2)


def envelope_from_physical(p: PhysicalParams, gamma2: Optional[float] = None,
                           P0: Optional[float] = None,
                           T_eff: Optional[float] = None) -> EnvelopeParams:
    """Amplitude-equation coefficients from averaging the full model around the working point.

    The static power ``P0`` enters all four coefficients::

        Gamma0 = gamma0 + eta theta P0 I0' / (2 omega0**2)
        Gamma2 = gamma2 + eta beta P0 I0'' / (4 omega0)
        Omega0 = omega0 - eta beta P0 I0 / kappa
        Omega2 = -eta beta P0 I0'' / kappa
        Theta  = gamma0 k_B T_eff / (4 m omega0**2)
    """
    g2 = p.gamma2 if gamma2 is None else gamma2
    P = p.P0 if P0 is None else P0
    T = p.T_eff if T_eff is None else T_eff
    i0, i1, i2 = intensity_taylor(None, p)
    return EnvelopeParams(
        Gamma0=p.gamma0 + p.eta * p.theta * P * i1 / (2.0 * p.omega0 ** 2),
        Gamma2=g2 + p.eta * p.beta * P * i2 / (4.0 * p.omega0),
        Omega0=p.omega0 - p.eta * p.beta * P * i0 / p.kappa,
        Omega2=-p.eta * p.beta * P * i2 / p.kappa,
        Theta=p.gamma0 * K_BOLTZMANN * T / (4.0 * p.m * p.omega0 ** 2),
        kappa=p.kappa,
    )


def thermal_coupling(p: PhysicalParams) -> ThermalCoupling:
    i0, _, _ = intensity_taylor(None, p)
    return ThermalCoupling(theta=p.theta, eta=p.eta, I0=i0)


def modulated_power(P0: float, mod: Optional[ModulationSpec], omega_mod: float
                    ) -> Callable[[np.ndarray], np.ndarray]:
    """``P_L(t) = P0 + sum_k P_k cos(k omega_mod t + phi_k)``; needs a power amplitude."""
    if mod is None:
        return lambda t: np.full(np.shape(t), float(P0))
    if mod.P_p is None:
        raise ValueError("the full model needs the modulation as a power amplitude P_p")
    comps = mod.harmonics()

    def power(t):
        t = np.asarray(t, dtype=np.float64)
        out = np.full(t.shape, float(P0))
        for h in comps:
            out += h.beta * np.cos(h.k * omega_mod * t + h.phase)
        return out

    return power


def integrate_full(p: PhysicalParams, power: Union[float, Callable[[np.ndarray], np.ndarray]],
                   x_init: float, v_init: float, T_init: float, t_span: float,
                   dt: Optional[float] = None, *, stride: int = 1) -> FullTrajectory:
    """Fixed-step RK4 for the coupled mechanical and thermal equations.

    ``power`` is a constant or a vectorised ``P_L(t)``; it is sampled on the
    half-step grid that RK4 needs. Integration runs in chunks so memory stays
    bounded for long runs.

    Raises
    ------
    NumericalBlowUp
        If ``|x|`` exceeds ``1e6`` wavelengths or a value becomes non-finite.
    """
    if dt is None:
        dt = 2.0 * math.pi / (200.0 * p.omega0)
    if not (dt > 0 and dt <= 2.0 * math.pi / (100.0 * p.omega0) * (1 + 1e-12)):
        raise ValueError("dt must be in (0, 2 pi / (100 omega0)]")
    if not t_span > 0:
        raise ValueError("t_span must be > 0")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if callable(power):
        p_of_t = power
    else:
        P = float(power)
        p_of_t = lambda t: np.full(np.shape(t), P)  # noqa: E731
    c, kopt, bp2 = _intensity_parts(p)
    limit = BLOWUP_FACTOR * p.wavelength
    n_steps = int(round(t_span / dt))
    chunk = stride * max(1, _CHUNK // stride)

    xs, vs, Ts = [], [], []
    x, v, T = float(x_init), float(v_init), float(T_init)
    done = 0
    while done < n_steps:
        n = min(chunk, n_steps - done)
        t_half = (done + 0.5 * np.arange(2 * n + 1)) * dt
        p_half = np.ascontiguousarray(p_of_t(t_half), dtype=np.float64)
        xk, vk, Tk, steps, blew, (x, v, T) = kernels.full_rk4(
            x, v, T, dt, n, stride, p.gamma0, p.omega0, p.beta, p.theta, p.eta,
            p.kappa, c, kopt, p.x_R, bp2, p_half, limit)
        if blew:
            t_fail = (done + steps) * dt
            raise NumericalBlowUp(
                f"displacement exceeded {BLOWUP_FACTOR:g} wavelengths or became non-finite "
                f"at t = {t_fail:.6g} s (step {done + steps})", t_fail, done + steps)
        xs.append(xk if done == 0 else xk[1:])
        vs.append(vk if done == 0 else vk[1:])
        Ts.append(Tk if done == 0 else Tk[1:])
        done += n
    x_arr = np.concatenate(xs)
    T_arr = np.concatenate(Ts)
    times = (np.arange(x_arr.size) * stride) * dt
    return FullTrajectory(times=times, x=x_arr, v=np.concatenate(vs), T_R=T_arr)


def steady_amplitude(traj: FullTrajectory, window: float = 0.1) -> float:
    """Half the peak-to-peak displacement over the final ``window`` fraction of the run."""
    n = max(2, int(traj.x.size * window))
    tail = traj.x[-n:]
    return 0.5 * float(tail.max() - tail.min())
