"""Numerical toolkit for the two-phase damped-Euler/Navier-Stokes linearization.

Modules:
    model       physical parameters and derived linearization constants
    spectral    Fourier symbols, spectra, projectors, propagators
    asymptotics expansion lemmas and measured remainder orders
    green       mollified Green's-matrix synthesis and radial oracles
    waves       envelope ratios, front tracking, decay-exponent fits
    convolve    convolution-inequality certification
    evolve      pseudospectral nonlinear solver
    cli         command-line verification campaigns
"""

from .model import ModelParams, DerivedParams, InvalidParams, derive, canonical_params

__version__ = "0.1.0"

__all__ = [
    "ModelParams",
    "DerivedParams",
    "InvalidParams",
    "derive",
    "canonical_params",
    "__version__",
]
