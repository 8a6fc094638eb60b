"""Phase locking of self-excited oscillation in a modulated optomechanical cavity.

Submodules
----------
circle_map
    Once-per-period phase map, winding numbers, limit cycles, Farey fractions.
scans
    Devil's staircase and Arnold-tongue scans, plateau detection, edge tracing.
envelope
    Slow complex-amplitude model with thermal forcing and white noise.
physical
    Full resonator/thermal device model and the envelope coefficients it implies.
analysis
    Zero-crossing phases, phase histograms, spectra, phase diffusion.
cli
    ``seolock`` command-line entry point.
"""
from ._backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
