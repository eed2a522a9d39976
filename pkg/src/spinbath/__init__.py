"""Toolkit for depolarization dynamics of dense, dipolar-coupled spin ensembles.

A fraction of the spins ("fluctuators") relax incoherently at a fast rate
and act as localized magnetic noise sources for their neighbours.  The
package provides the closed-form rate model built on that picture, the
brute-force quantum oracle that validates it, Monte Carlo disorder
averaging over fluctuator baths, classical rate-equation kinetics, a 2D
charge-diffusion solver, and nonlinear least-squares fitters, all wired
into a reproducible CLI.

Internal unit conventions live in :mod:`spinbath.units`.
"""

__version__ = "0.1.0"

from .units import Frame, make_frame, nv_axes, ppm_to_density
from .dipolar import DipolarCoefficients, coeffs_ghq

__all__ = [
    "__version__",
    "Frame",
    "make_frame",
    "nv_axes",
    "ppm_to_density",
    "DipolarCoefficients",
    "coeffs_ghq",
]
