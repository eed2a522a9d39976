"""Three-level classical rate equations for spin-state-dependent decay.

Populations are ordered ``(P(-1), P(0), P(+1))``.  ``gamma1`` couples the
|Delta m| = 1 links and ``gamma2`` the |Delta m| = 2 link.  Rates and
times only enter as products, so any reciprocal pair of units works
(kHz with ms, or 1/us with us); fitted values are conventionally quoted
in plain kHz.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm


def rate_generator(gamma1: float, gamma2: float) -> np.ndarray:
    """Generator matrix over (P(-1), P(0), P(+1)); columns sum to zero."""
    if gamma1 < 0 or gamma2 < 0:
        raise ValueError(f"rates must be nonnegative, got {gamma1}, {gamma2}")
    g1, g2 = float(gamma1), float(gamma2)
    return np.array(
        [
            [-g1 - g2, g1, g2],
            [g1, -2.0 * g1, g1],
            [g2, g1, -g1 - g2],
        ]
    )


def evolve_populations(p0, gamma1, gamma2, t):
    """Propagate a population triple by the matrix exponential.

    ``t`` may be a scalar or an array; arrays return shape ``(len(t), 3)``.
    """
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (3,):
        raise ValueError("p0 must be a population triple")
    if np.any(p0 < -1e-12) or abs(p0.sum() - 1.0) > 1e-10:
        raise ValueError("p0 must be a probability vector summing to 1")
    gen = rate_generator(gamma1, gamma2)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0):
        raise ValueError("times must be nonnegative")
    out = np.stack([expm(gen * tk) @ p0 for tk in times])
    return out[0] if np.ndim(t) == 0 else out


def population_diffs_analytic(gamma1, gamma2, t):
    """Closed-form (P(-1)-P(0), P(0)-P(+1)) after preparation in |-1>.

    d1 = (e^-(g1+2 g2) t + e^-3 g1 t) / 2,
    d2 = (e^-(g1+2 g2) t - e^-3 g1 t) / 2.
    """
    t = np.asarray(t, dtype=float)
    slow = np.exp(-(gamma1 + 2.0 * gamma2) * t)
    fast = np.exp(-3.0 * gamma1 * t)
    return 0.5 * (slow + fast), 0.5 * (slow - fast)


def population_diffs_stretched(gamma1, gamma2, t):
    """Stretched variants: each exponent replaced by its square root.

    Models ensemble-averaged data where the rates vary from spin to spin.
    """
    t = np.clip(np.asarray(t, dtype=float), 0.0, None)
    slow = np.exp(-np.sqrt((gamma1 + 2.0 * gamma2) * t))
    fast = np.exp(-np.sqrt(3.0 * gamma1 * t))
    return 0.5 * (slow + fast), 0.5 * (slow - fast)
