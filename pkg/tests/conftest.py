import math

import pytest
from hypothesis import settings

from seolock.envelope import EnvelopeParams
from seolock.physical import PhysicalParams

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

# Dimensionless envelope used throughout: threshold at twice the damping,
# unit amplitude scale, unit Hopf frequency.
ENVELOPE = dict(Gamma0=-0.2, Gamma2=0.2, Omega0=1.0, Omega2=0.0, kappa=0.1)

# Intensity-curve slope and curvature at the lambda/8 working point, used to
# dial in scaled device parameters with a prescribed envelope.
_C = 0.672
_DEN = 1.36
SLOPE_FACTOR = _C / _DEN ** 2
CURVATURE_FACTOR = 2 * _C / _DEN ** 3


def scaled_device(quality: float, amplitude: float, **overrides) -> PhysicalParams:
    """Unit-mass, unit-frequency device tuned to twice threshold.

    The optical wavelength is 4 pi so that the lambda/8 detuning sits at
    x_D = pi / 2, and theta and beta are chosen so that the envelope has
    Gamma0 = -gamma0 and an oscillation amplitude of ``amplitude``.
    """
    g0 = 1.0 / (2.0 * quality)
    P0 = 0.01
    kw = dict(m=1.0, gamma0=g0, omega0=1.0, kappa=0.1, wavelength=4 * math.pi, finesse=2.1,
              beta_plus=0.6, beta_minus=0.2, eta=1.0, P0=P0, gamma2=0.0, T_eff=0.0,
              theta=4 * g0 / (P0 * SLOPE_FACTOR),
              beta=4 * (g0 / amplitude ** 2) / (P0 * CURVATURE_FACTOR))
    kw.update(overrides)
    return PhysicalParams(**kw)


@pytest.fixture
def envelope_params():
    return EnvelopeParams(**ENVELOPE)


# One line per acceptance criterion, filled in by tests/test_acceptance.py and
# repeated at the end of the pytest report.
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
