import math

import numpy as np
import pytest
from scipy.constants import k as k_B

from conftest import scaled_device
from seolock.envelope import ModulationSpec, NumericalBlowUp, seo_amplitude
from seolock.physical import (
    PhysicalParams,
    cavity_intensity,
    envelope_from_physical,
    integrate_full,
    intensity_taylor,
    modulated_power,
    reflectivity,
    static_displacement,
    static_equilibrium,
    steady_amplitude,
    thermal_coupling,
)

P = PhysicalParams()


def test_defaults_and_validation():
    assert P.quality_factor == pytest.approx(3800)
    assert P.detuning == pytest.approx(P.wavelength / 8)
    with pytest.raises(ValueError):
        PhysicalParams(beta_minus=0.7)
    with pytest.raises(ValueError):
        PhysicalParams(kappa=0.0)


# ---- cavity response -------------------------------------------------------

def test_intensity_maximum_on_resonance():
    assert cavity_intensity(P.x_R, P) == pytest.approx(P.finesse * (1 - (0.2 / 0.6) ** 2))


def test_intensity_minimum_quarter_wave_off():
    c = P.finesse * (1 - (0.2 / 0.6) ** 2) * 0.36
    assert cavity_intensity(P.x_R + P.wavelength / 4, P) == pytest.approx(c / (2 + 0.36))


def test_intensity_periodic_and_bounded():
    x = P.x_R + np.linspace(-2e-6, 2e-6, 4001)
    i = cavity_intensity(x, P)
    np.testing.assert_allclose(cavity_intensity(x + P.wavelength / 2, P), i, rtol=1e-9)
    assert np.all(i > 0) and np.all(i <= P.peak_intensity * (1 + 1e-15))


def test_reflectivity_range():
    assert reflectivity(P.x_R, P) == pytest.approx((0.2 / 0.6) ** 2)
    x = P.x_R + np.linspace(-1e-6, 1e-6, 2001)
    r = reflectivity(x, P)
    assert np.all(r >= (0.2 / 0.6) ** 2 - 1e-15) and np.all(r <= 1)
    far = PhysicalParams(beta_plus=0.05, beta_minus=0.01)
    assert reflectivity(far.x_R + far.wavelength / 4, far) > 0.99


def test_taylor_at_resonance():
    i0, i1, i2 = intensity_taylor(P.x_R, P)
    assert i0 == pytest.approx(P.peak_intensity)
    assert i1 == 0.0
    assert i2 < 0


@pytest.mark.parametrize("offset", [None, 3e-8, -2.2e-7])
def test_taylor_matches_finite_differences(offset):
    x = P.x_work if offset is None else P.x_R + offset
    h = 1e-12
    i0, i1, i2 = intensity_taylor(x, P)
    assert i0 == pytest.approx(cavity_intensity(x, P), rel=1e-15)
    fd1 = (cavity_intensity(x + h, P) - cavity_intensity(x - h, P)) / (2 * h)
    assert i1 == pytest.approx(fd1, rel=1e-6)
    fd2 = (intensity_taylor(x + h, P)[1] - intensity_taylor(x - h, P)[1]) / (2 * h)
    assert i2 == pytest.approx(fd2, rel=1e-6)


# ---- static response -------------------------------------------------------

def test_static_displacement():
    assert static_displacement(P.replace(P0=0.0)) == 0.0
    assert static_displacement(P.replace(P0=2 * P.P0)) == pytest.approx(
        2 * static_displacement(P), rel=1e-12)
    x0 = static_displacement(P)
    assert 0 < x0 < P.wavelength


def test_static_equilibrium_at_working_point():
    x_s, T_s = static_equilibrium(P)
    assert x_s == pytest.approx(P.x_work, rel=1e-12)
    assert T_s == pytest.approx(P.eta * P.P0 * cavity_intensity(x_s, P) / P.kappa, rel=1e-12)


# ---- envelope coefficients -------------------------------------------------

def test_decoupled_limit():
    e = envelope_from_physical(P.replace(eta=0.0))
    assert e.Gamma0 == pytest.approx(P.gamma0)
    assert e.Gamma2 == pytest.approx(P.gamma2)
    assert e.Omega0 == pytest.approx(P.omega0)
    assert e.Omega2 == 0.0


def test_default_device_is_above_threshold():
    i1 = intensity_taylor(None, P)[1]
    assert i1 < 0
    e = envelope_from_physical(P)
    assert e.Gamma0 < 0
    assert 1e-9 < seo_amplitude(e) < 1e-7


def test_noise_intensity_formula():
    e = envelope_from_physical(P)
    assert e.Theta == pytest.approx(P.gamma0 * k_B * 77.0 / (4 * P.m * P.omega0 ** 2), rel=1e-12)
    assert envelope_from_physical(P, T_eff=0.0).Theta == 0.0


def test_thermal_coupling_uses_working_point():
    c = thermal_coupling(P)
    assert c.I0 == pytest.approx(intensity_taylor(None, P)[0])


def test_modulated_power():
    f = modulated_power(1.0, ModulationSpec(0.5, P_p=0.2), omega_mod=2.0)
    assert f(np.array([0.0]))[0] == pytest.approx(1.2)
    assert f(np.array([math.pi / 2]))[0] == pytest.approx(0.8)
    with pytest.raises(ValueError):
        modulated_power(1.0, ModulationSpec(0.5, beta_f=0.01), 1.0)


# ---- time integration -------------------------------------------------------

def test_ringdown_without_heating():
    p = scaled_device(50.0, 0.15, eta=0.0)
    tr = integrate_full(p, p.P0, 1.0, 0.0, 0.0, 200.0)
    # decay at gamma0 from the peaks of |x|
    peaks = np.flatnonzero((tr.x[1:-1] > tr.x[:-2]) & (tr.x[1:-1] >= tr.x[2:])) + 1
    rate = -np.polyfit(tr.times[peaks], np.log(tr.x[peaks]), 1)[0]
    assert rate == pytest.approx(p.gamma0, rel=1e-3)
    period = np.diff(tr.times[peaks]).mean()
    damped = math.sqrt(p.omega0 ** 2 - p.gamma0 ** 2)
    assert 2 * math.pi / period == pytest.approx(damped, rel=1e-3)


def test_energy_never_increases_without_heating():
    p = scaled_device(50.0, 0.15, eta=0.0)
    tr = integrate_full(p, p.P0, 1.0, 0.3, 0.0, 100.0, stride=3)
    energy = 0.5 * tr.v ** 2 + 0.5 * p.omega0 ** 2 * tr.x ** 2
    assert np.all(np.diff(energy) <= 0)


def test_adiabatic_temperature_for_fast_relaxation():
    p = scaled_device(1e4, 0.15, kappa=50.0)
    x_s, T_s = static_equilibrium(p)
    dt = 2 * math.pi / 2000
    tr = integrate_full(p, p.P0, x_s + 0.3, 0.0, T_s, 40.0, dt)
    late = tr.times > 5.0  # thermal transient gone after ~250 relaxation times
    adiabatic = p.eta * p.P0 * cavity_intensity(tr.x[late], p) / p.kappa
    T = tr.T_R[late]
    swing = np.ptp(adiabatic)
    assert np.abs(T - adiabatic).max() <= 0.05 * swing


def test_self_oscillation_grows_then_saturates():
    p = scaled_device(1e4, 0.15)
    e = envelope_from_physical(p)
    x_s, T_s = static_equilibrium(p)
    tr = integrate_full(p, p.P0, x_s + 0.01, 0.0, T_s, 12 / abs(e.Gamma0), stride=20)
    n = tr.x.size
    seg = [0.5 * np.ptp(tr.x[i * n // 20:(i + 1) * n // 20]) for i in range(20)]
    assert seg[3] > 5 * seg[0]
    assert seg[-1] == pytest.approx(seg[-5], rel=1e-3)


@pytest.mark.slow
def test_full_model_matches_envelope_amplitude():
    p = scaled_device(1e5, 0.15)
    assert p.omega0 / p.kappa >= 10
    e = envelope_from_physical(p)
    a_r0 = seo_amplitude(e)
    x_s, T_s = static_equilibrium(p)
    tr = integrate_full(p, p.P0, x_s + 2 * a_r0, 0.0, T_s, 5 / abs(e.Gamma0), stride=50)
    # the displacement is A + conj(A), so its amplitude is 2 |A|
    assert steady_amplitude(tr, 0.02) == pytest.approx(2 * a_r0, rel=0.10)


def test_step_floor_and_blow_up():
    p = scaled_device(50.0, 0.15, eta=0.0)
    with pytest.raises(ValueError):
        integrate_full(p, p.P0, 0.0, 0.0, 0.0, 10.0, dt=2 * math.pi / 50)
    with pytest.raises(NumericalBlowUp):
        integrate_full(p, p.P0, 1e7 * p.wavelength, 0.0, 0.0, 1.0)
