"""Canonical unit system, physical constants, and local-frame geometry.

Every module works in a single fixed unit system:

* angular frequency: rad/us
* length:            nm
* time:              us
* number density:    nm^-3

With these choices the dipolar prefactor ``J0 / r^3`` and typical
fluctuator rates are O(1)-O(100), comfortably away from float
under/overflow.  Microwave quantities quoted as "(2pi) f MHz" convert as
``omega = 2*pi*f`` because 1 MHz equals 1/us.

Classical rate-equation decay constants (plain kHz, no 2pi) are *not*
angular frequencies; :mod:`spinbath.kinetics` documents its own scaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# Dipolar interaction prefactor, (2pi) 52 MHz nm^3 -> rad/us * nm^3.
J0 = TWO_PI * 52.0

# Zero-field splitting between |m_s=0> and |m_s=+-1>, (2pi) 2.87 GHz.
# Recorded for documentation; the rotating-frame models never use it.
CRYSTAL_FIELD_SPLITTING = TWO_PI * 2870.0

# Carbon site density of diamond, 1.76e23 cm^-3 = 176 nm^-3.
DIAMOND_SITE_DENSITY = 176.0


def angular_from_mhz(f_mhz):
    """Convert a "(2pi) MHz" frequency to rad/us."""
    return TWO_PI * np.asarray(f_mhz, dtype=float)


def mhz_from_angular(omega):
    """Convert rad/us back to the "(2pi) MHz" convention."""
    return np.asarray(omega, dtype=float) / TWO_PI


def gaussian_sigma_from_fwhm(fwhm):
    """Standard deviation of a Gaussian with the given full width at half maximum."""
    return np.asarray(fwhm, dtype=float) / (2.0 * np.sqrt(2.0 * np.log(2.0)))


def ppm_to_density(ppm: float) -> float:
    """Defect concentration in parts-per-million of lattice sites -> nm^-3.

    Uses the diamond carbon density 1.76e23 cm^-3, so 1 ppm = 1.76e-4 nm^-3.
    At 45 ppm this gives a mean spacing (1/n)^(1/3) of about 5 nm.
    """
    if ppm < 0:
        raise ValueError(f"concentration must be nonnegative, got {ppm} ppm")
    return ppm * 1e-6 * DIAMOND_SITE_DENSITY


def density_to_ppm(density: float) -> float:
    """Inverse of :func:`ppm_to_density`."""
    if density < 0:
        raise ValueError(f"density must be nonnegative, got {density} nm^-3")
    return density / (1e-6 * DIAMOND_SITE_DENSITY)


def mean_spacing(density: float) -> float:
    """Typical nearest-defect distance (1/n)^(1/3) in nm."""
    if density <= 0:
        raise ValueError(f"density must be positive, got {density} nm^-3")
    return density ** (-1.0 / 3.0)


@dataclass(frozen=True)
class Frame:
    """Right-handed orthonormal triad (x, y, z) defining a spin's local frame.

    ``z`` is the quantization axis; ``x``/``y`` fix the transverse gauge.
    Instances are immutable and safe to share across threads.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        for v in (self.x, self.y, self.z):
            v.setflags(write=False)


# The four crystallographic quantization axes, labeled A-D.
_NV_AXES = {
    "A": np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0),
    "B": np.array([1.0, -1.0, -1.0]) / np.sqrt(3.0),
    "C": np.array([-1.0, 1.0, -1.0]) / np.sqrt(3.0),
    "D": np.array([-1.0, -1.0, 1.0]) / np.sqrt(3.0),
}
for _v in _NV_AXES.values():
    _v.setflags(write=False)

GROUP_LABELS = tuple(_NV_AXES)


def nv_axes() -> dict[str, np.ndarray]:
    """Unit vectors of the four defect orientation groups, keyed ``A``-``D``."""
    return {label: axis.copy() for label, axis in _NV_AXES.items()}


def group_axis(label: str) -> np.ndarray:
    """Quantization axis for one orientation group label."""
    try:
        return _NV_AXES[label].copy()
    except KeyError:
        raise ValueError(f"unknown group {label!r}, expected one of {GROUP_LABELS}") from None


def reference_transverse(axis: np.ndarray) -> np.ndarray:
    """Deterministic transverse reference: global x rejected from ``axis``.

    Falls back to the global y axis when ``axis`` is within ~1e-6 of the
    global x direction.  The transverse gauge is physically irrelevant
    (rates depend only on gauge-invariant combinations), so any
    deterministic convention works.
    """
    axis = np.asarray(axis, dtype=float)
    ref = np.array([1.0, 0.0, 0.0])
    perp = ref - np.dot(ref, axis) * axis
    if np.linalg.norm(perp) < 1e-6:
        ref = np.array([0.0, 1.0, 0.0])
        perp = ref - np.dot(ref, axis) * axis
    return perp / np.linalg.norm(perp)


def make_frame(axis, azimuth: float = 0.0) -> Frame:
    """Build a local frame with quantization axis ``axis``.

    The transverse pair starts from :func:`reference_transverse` and is
    rotated about ``axis`` by ``azimuth`` (radians).  ``axis`` must be a
    unit vector to within 1e-9.
    """
    axis = np.asarray(axis, dtype=float)
    if axis.shape != (3,):
        raise ValueError(f"axis must be a 3-vector, got shape {axis.shape}")
    norm = np.linalg.norm(axis)
    if abs(norm - 1.0) > 1e-9:
        raise ValueError(f"axis must be a unit vector, |axis| = {norm:.12g}")
    x0 = reference_transverse(axis)
    y0 = np.cross(axis, x0)
    x = np.cos(azimuth) * x0 + np.sin(azimuth) * y0
    y = np.cross(axis, x)
    return Frame(x=x, y=y, z=axis.copy())


def group_frame(label: str, azimuth: float = 0.0) -> Frame:
    """Frame whose z axis is the given orientation group's axis."""
    return make_frame(group_axis(label), azimuth)
