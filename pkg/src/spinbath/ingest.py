"""Differential-readout ingestion for measured decay curves.

Spin polarization is read out through fluorescence with and without an
extra pi-pulse before the readout window.  Slow drifts (charge-state
relaxation, laser power) enter both channels identically, so the channel
difference isolates the spin signal; Poisson counting noise propagates
into the curve uncertainties.
"""

from __future__ import annotations

import numpy as np

from .curves import CurveSeries

EARLIEST = "earliest"
EQUILIBRIUM = "equilibrium"


def read_raw_csv(path):
    """Read ``t,f_no_pi,f_pi[,reps]`` rows (same dialect as curve CSVs)."""
    rows = []
    header = None
    units = None
    meta = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, val = body.split(":", 1)
                    meta[key.strip()] = val.strip()
                continue
            cells = [c.strip() for c in line.split(",")]
            if header is None:
                header = cells
                if header[:3] != ["t", "f_no_pi", "f_pi"]:
                    raise ValueError(f"unexpected raw-readout header {header!r}")
                continue
            if units is None:
                units = cells
                continue
            rows.append(cells)
    if header is None or units is None or not rows:
        raise ValueError(f"{path}: not a raw readout file")
    t = np.array([float(r[0]) for r in rows])
    f_no = np.array([float(r[1]) for r in rows])
    f_pi = np.array([float(r[2]) for r in rows])
    return t, f_no, f_pi, units[0] or "us", meta


def ingest_differential(t, f_no_pi, f_pi, normalization=EARLIEST, t_unit="us") -> CurveSeries:
    """Polarization curve from fluorescence with/without the extra pi-pulse.

    ``earliest`` normalizes the channel difference by its first-time value
    (curves start at exactly 1); ``equilibrium`` divides each channel by
    its own latest-time value before subtracting.  Counts carry Poisson
    uncertainties; the common-mode background cancels in the difference.
    """
    t = np.asarray(t, dtype=float)
    f_no = np.asarray(f_no_pi, dtype=float)
    f_pi = np.asarray(f_pi, dtype=float)
    if len(t) < 2:
        raise ValueError("need at least two readout records")
    if t.shape != f_no.shape or t.shape != f_pi.shape:
        raise ValueError("record columns must have equal length")
    if np.any(np.diff(t) < 0):
        raise ValueError("times must be nondecreasing")
    if np.any(f_no < 0) or np.any(f_pi < 0):
        raise ValueError("counts must be nonnegative")

    diff = f_no - f_pi
    var_diff = f_no + f_pi  # Poisson

    if normalization == EARLIEST:
        ref = diff[0]
        var_ref = var_diff[0]
        if ref <= 0:
            raise ValueError(
                "difference at the earliest time is not positive: inverted or unpolarized data"
            )
        p = diff / ref
        # Independent-counts propagation; the shared normalizer correlation
        # is ignored, which overstates the first-point uncertainty slightly.
        sigma = np.abs(p) * np.sqrt(
            var_diff / np.maximum(diff**2, 1e-300) + var_ref / ref**2
        )
        sigma[0] = np.sqrt(var_ref) / ref
    elif normalization == EQUILIBRIUM:
        eq_no, eq_pi = f_no[-1], f_pi[-1]
        if eq_no <= 0 or eq_pi <= 0:
            raise ValueError("equilibrium normalization needs positive late-time counts")
        p = f_no / eq_no - f_pi / eq_pi
        sigma = np.sqrt(f_no / eq_no**2 + f_pi / eq_pi**2)
        if p[0] <= 0:
            raise ValueError(
                "difference at the earliest time is not positive: inverted or unpolarized data"
            )
    else:
        raise ValueError(f"normalization must be {EARLIEST!r} or {EQUILIBRIUM!r}")

    sigma = np.clip(sigma, 1e-12, None)
    return CurveSeries(
        x=t,
        y=p,
        sigma=sigma,
        x_unit=t_unit,
        y_unit="",
        meta={"normalization": normalization},
    )
