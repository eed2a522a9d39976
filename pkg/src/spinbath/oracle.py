"""Brute-force two-particle Lindblad oracle and the effective rates it checks.

One probe spin (spin-1) and one fluctuator (spin-1) form a 9-dimensional
system.  The fluctuator relaxes through six incoherent channels of equal
rate ``gamma_f`` (all ordered pairs of its three levels), which drives it
to the maximally mixed state and turns the coherent dipolar coupling into
an effective decay of the probe spin.  This module provides

* the secular dipolar Hamiltonian in the product basis,
* the fluctuator spectral response function (closed form),
* Born-Markov effective transition rates between probe eigenstates,
* the closed-form single-fluctuator decay rate, and
* direct master-equation propagation that validates all of the above.

Basis convention: single-particle states are ordered ``(+1, 0, -1)``; the
product basis index is ``3*i_spin + i_fluctuator``.

Sign convention: the printed closed form of the spectral response has
denominator ``i(omega + omega_ab) - 2 gamma_f`` and therefore a negative
real part; the literal correlation-function integral is its negative.
Transition rates are built from the magnitude of the real part, anchored
to the (unambiguously positive) golden-rule decay rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .units import J0, Frame
from .dipolar import coeffs_ghq

SPIN_STATES = (+1, 0, -1)
_STATE_INDEX = {+1: 0, 0: 1, -1: 2}

SZ = np.diag([1.0, 0.0, -1.0])


class IntegrationError(RuntimeError):
    """Master-equation propagation failed to meet its tolerances."""


def state_index(m: int) -> int:
    """Index of magnetic sublevel ``m`` in the ``(+1, 0, -1)`` ordering."""
    try:
        return _STATE_INDEX[m]
    except KeyError:
        raise ValueError(f"m must be one of {SPIN_STATES}, got {m}") from None


@dataclass(frozen=True)
class DecayChannel:
    """One incoherent fluctuator transition ``|to><from|`` at ``rate``."""

    from_state: int
    to_state: int
    rate: float

    def __post_init__(self):
        if self.from_state == self.to_state:
            raise ValueError("decay channel must connect distinct states")
        if self.rate < 0:
            raise ValueError(f"rate must be nonnegative, got {self.rate}")
        state_index(self.from_state)
        state_index(self.to_state)


def depolarizing_channels(gamma_f: float) -> tuple[DecayChannel, ...]:
    """The six equal-rate channels (+-1 <-> 0 and +1 <-> -1)."""
    if gamma_f <= 0:
        raise ValueError(f"gamma_f must be positive, got {gamma_f}")
    pairs = [(-1, +1), (+1, -1), (0, +1), (+1, 0), (0, -1), (-1, 0)]
    return tuple(DecayChannel(a, b, gamma_f) for a, b in pairs)


def _ket9(i_spin: int, i_fluct: int) -> np.ndarray:
    v = np.zeros(9, dtype=complex)
    v[3 * i_spin + i_fluct] = 1.0
    return v


def build_secular_hdd(r_vec, frame_s: Frame, frame_f: Frame) -> np.ndarray:
    """Secular dipolar Hamiltonian of the pair, 9x9 Hermitian, rad/us.

    ``-(J0/r^3) [ (g+ih)(|+1,0><0,+1| + |0,-1><-1,0|) + h.c. + q Sz Sz ]``
    with (g, h, q) evaluated for the given frames and bond direction.
    """
    r_vec = np.asarray(r_vec, dtype=float)
    r = np.linalg.norm(r_vec)
    if r <= 0:
        raise ValueError("pair separation must be nonzero")
    c = coeffs_ghq(frame_s, frame_f, r_vec / r)
    k = J0 / r**3

    i_p, i_0, i_m = (state_index(m) for m in (+1, 0, -1))
    flip = np.outer(_ket9(i_p, i_0), _ket9(i_0, i_p).conj())
    flip += np.outer(_ket9(i_0, i_m), _ket9(i_m, i_0).conj())
    h = (c.g + 1j * c.h) * flip
    h = h + h.conj().T
    h += c.q * np.kron(SZ, SZ)
    return -k * h


def spectral_response(omega, alpha, beta, omega_ab, gamma_f) -> complex:
    """Closed-form spectral response of the six-channel fluctuator.

    ``alpha``/``beta`` are fluctuator levels (+1, 0, -1); ``omega_ab`` is
    their energy difference.  For ``alpha != beta`` the response is a
    Lorentzian of half width ``2 gamma_f`` centred at ``-omega_ab``; the
    degenerate branch diverges at ``omega = 0`` (pure dephasing of
    degenerate states) and is rejected there.  See the module note on the
    overall sign.
    """
    if gamma_f <= 0:
        raise ValueError(f"gamma_f must be positive, got {gamma_f}")
    state_index(alpha)
    state_index(beta)
    if alpha != beta:
        return (1.0 / 3.0) / (1j * (omega + omega_ab) - 2.0 * gamma_f)
    if omega == 0:
        raise ValueError("degenerate response is singular at omega = 0")
    return (1.0 / 9.0) * (1.0 / (1j * omega) + 2.0 / (1j * omega - 3.0 * gamma_f))


def _rate_kernel(total_detuning, gamma_f):
    """|Re S| for distinct levels: (1/3) * 2 gamma_f / (x^2 + 4 gamma_f^2)."""
    return (2.0 * gamma_f / 3.0) / (total_detuning**2 + 4.0 * gamma_f**2)


@dataclass(frozen=True)
class EffectiveRates:
    """Probe-spin transition rates and energy corrections, 3x3 each.

    ``gamma[i, j]`` is the population transfer rate from eigenstate ``i``
    to ``j`` in the ``(+1, 0, -1)`` ordering; the diagonal is zero by
    convention.
    """

    gamma: np.ndarray
    delta: np.ndarray


def effective_rates(h_int, spin_energies, fluct_energies, gamma_f) -> EffectiveRates:
    """Born-Markov rates induced on the probe by a fluctuator bath of one.

    ``h_int`` is the 9x9 interaction (Hermitian to 1e-9); the energies are
    length-3 arrays over the ``(+1, 0, -1)`` eigenstates of each particle.
    Rates use the magnitude convention so they are nonnegative; the
    imaginary part of the degenerate branch at zero frequency (a principal
    value) is dropped.
    """
    h_int = np.asarray(h_int, dtype=complex)
    if h_int.shape != (9, 9):
        raise ValueError(f"h_int must be 9x9, got {h_int.shape}")
    if np.max(np.abs(h_int - h_int.conj().T)) > 1e-9:
        raise ValueError("h_int must be Hermitian")
    spin_energies = np.asarray(spin_energies, dtype=float)
    fluct_energies = np.asarray(fluct_energies, dtype=float)
    if gamma_f <= 0:
        raise ValueError(f"gamma_f must be positive, got {gamma_f}")

    c = h_int.reshape(3, 3, 3, 3)  # [i, alpha, j, beta]
    gamma = np.zeros((3, 3))
    delta = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            w_ij = spin_energies[i] - spin_energies[j]
            for a in range(3):
                for b in range(3):
                    amp2 = abs(c[i, a, j, b]) ** 2
                    if amp2 == 0.0:
                        continue
                    w_ab = fluct_energies[a] - fluct_energies[b]
                    if a != b:
                        gamma[i, j] += 2.0 * amp2 * _rate_kernel(w_ij + w_ab, gamma_f)
                        s = spectral_response(w_ij, SPIN_STATES[a], SPIN_STATES[b], w_ab, gamma_f)
                        delta[i, j] += 2.0 * amp2 * s.imag
                    else:
                        # Degenerate branch: |Re| = (2/3) gamma_f / (w^2 + 9 gamma_f^2);
                        # the 1/(i w) piece is purely imaginary (principal value).
                        gamma[i, j] += 2.0 * amp2 * (2.0 / 3.0) * gamma_f / (
                            w_ij**2 + 9.0 * gamma_f**2
                        )
                        if w_ij != 0.0:
                            delta[i, j] += 2.0 * amp2 * (
                                -1.0 / (9.0 * w_ij)
                                - (2.0 / 9.0) * w_ij / (w_ij**2 + 9.0 * gamma_f**2)
                            )
    return EffectiveRates(gamma=gamma, delta=delta)


def golden_rule_rate(r_nm, g, h, detuning, gamma_f) -> float:
    """Single-fluctuator decay rate of one probe transition, rad/us.

    ``(J0^2/r^6) (g^2 + h^2) (2/3) * 2 gamma_f / (detuning^2 + 4 gamma_f^2)``
    where ``detuning`` is the energy mismatch between the exchanged
    transitions of probe and fluctuator.
    """
    if r_nm <= 0:
        raise ValueError(f"separation must be positive, got {r_nm} nm")
    if gamma_f <= 0:
        raise ValueError(f"gamma_f must be positive, got {gamma_f}")
    k2 = (J0 / r_nm**3) ** 2
    amp2 = g * g + h * h
    return k2 * amp2 * (2.0 / 3.0) * 2.0 * gamma_f / (detuning**2 + 4.0 * gamma_f**2)


def check_density_matrix(rho, trace_tol=1e-9, herm_tol=1e-9, eig_floor=-1e-7):
    """Validate Hermiticity, unit trace, and near-positivity of ``rho``."""
    rho = np.asarray(rho, dtype=complex)
    herm = np.max(np.abs(rho - rho.conj().T))
    tr = abs(np.trace(rho).real - 1.0) + abs(np.trace(rho).imag)
    if herm > herm_tol or tr > trace_tol:
        raise IntegrationError(
            f"state validation failed: hermiticity defect {herm:.3g}, trace defect {tr:.3g}"
        )
    w = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if w.min() < eig_floor:
        raise IntegrationError(f"state has negative eigenvalue {w.min():.3g}")
    return rho


def product_state(spin_populations, fluct_populations) -> np.ndarray:
    """Diagonal product state from two population triples in (+1, 0, -1) order."""
    ps = np.asarray(spin_populations, dtype=float)
    pf = np.asarray(fluct_populations, dtype=float)
    return np.kron(np.diag(ps), np.diag(pf)).astype(complex)


def spin_populations(rho) -> np.ndarray:
    """Probe-spin populations (trace over the fluctuator), (+1, 0, -1) order."""
    r = np.asarray(rho, dtype=complex).reshape(3, 3, 3, 3)
    return np.real(np.einsum("ifjf->ij", r)).diagonal().copy()


def liouvillian(h, channels) -> np.ndarray:
    """81x81 generator of ``rho_dot = -i[H, rho] + sum_k D[L_k] rho``.

    Channels act on the fluctuator (second tensor factor); ``vec`` is
    row-major.
    """
    h = np.asarray(h, dtype=complex)
    eye9 = np.eye(9)
    gen = -1j * (np.kron(h, eye9) - np.kron(eye9, h.T))
    eye3 = np.eye(3)
    for ch in channels:
        op3 = np.sqrt(ch.rate) * np.outer(eye3[state_index(ch.to_state)], eye3[state_index(ch.from_state)])
        op = np.kron(eye3, op3)
        opdop = op.conj().T @ op
        gen += np.kron(op, op.conj())
        gen -= 0.5 * (np.kron(opdop, eye9) + np.kron(eye9, opdop.T))
    return gen


def propagate_lindblad(rho0, h, channels, t, rtol=1e-8, atol=1e-10):
    """Propagate the pair state to time(s) ``t`` with adaptive Runge-Kutta.

    ``t`` may be a scalar (returns one 9x9 state) or an increasing array
    (returns a stack).  Trace and Hermiticity are verified to 1e-9 at
    every returned time.
    """
    rho0 = check_density_matrix(rho0, trace_tol=1e-9, herm_tol=1e-10)
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0):
        raise ValueError("times must be nonnegative")
    scalar = np.ndim(t) == 0

    gen = liouvillian(h, channels)
    t_end = float(times.max())
    if t_end == 0.0:
        out = np.repeat(rho0[None, :, :], len(times), axis=0)
        return out[0] if scalar else out

    sol = solve_ivp(
        lambda _, y: gen @ y,
        (0.0, t_end),
        rho0.flatten(),
        t_eval=times,
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    if not sol.success:
        raise IntegrationError(f"propagation failed: {sol.message}")
    states = sol.y.T.reshape(-1, 9, 9)
    for k, rho in enumerate(states):
        try:
            check_density_matrix(rho)
        except IntegrationError as err:
            raise IntegrationError(f"at t = {times[k]:.6g} us: {err}") from None
    return states[0] if scalar else states


@dataclass(frozen=True)
class OracleRate:
    """Exponential-fit result from direct propagation."""

    rate: float
    log_residual: float
    exponential: bool


def oracle_decay_rate(
    r_vec,
    frame_s: Frame,
    frame_f: Frame,
    detuning,
    gamma_f,
    t_max=None,
    n_times=40,
    coupling_scale=1.0,
    residual_threshold=0.05,
) -> OracleRate:
    """Fit the propagated probe polarization decay to a single exponential.

    The probe starts in |-1> against a maximally mixed fluctuator; the
    observable is the population difference P(-1) - P(+1), which decays at
    the single-transition exchange rate.  ``detuning`` offsets both
    fluctuator transitions by the same mismatch.  The rate comes from a
    log-linear fit over the first decade of decay; a large fit residual
    sets ``exponential = False``.
    """
    r_vec = np.asarray(r_vec, dtype=float)
    r = np.linalg.norm(r_vec)
    c = coeffs_ghq(frame_s, frame_f, r_vec / r)
    predicted = coupling_scale**2 * golden_rule_rate(r, c.g, c.h, detuning, gamma_f)

    if t_max is None:
        if predicted <= 0:
            t_max = 10.0 / gamma_f
        else:
            t_max = 2.4 / predicted
    times = np.linspace(0.0, float(t_max), int(n_times))

    h = np.kron(np.eye(3), np.diag([detuning, 0.0, -detuning])).astype(complex)
    h += coupling_scale * build_secular_hdd(r_vec, frame_s, frame_f)
    rho0 = product_state([0.0, 0.0, 1.0], [1 / 3, 1 / 3, 1 / 3])

    states = propagate_lindblad(rho0, h, depolarizing_channels(gamma_f), times)
    pops = np.array([spin_populations(s) for s in states])
    diff = pops[:, 2] - pops[:, 0]

    mask = diff >= 0.1 * diff[0]
    if mask.sum() < 3:
        mask = np.ones_like(diff, dtype=bool)
    tt, dd = times[mask], diff[mask]
    if np.any(dd <= 0):
        return OracleRate(rate=0.0, log_residual=np.inf, exponential=False)
    slope, intercept = np.polyfit(tt, np.log(dd), 1)
    resid = float(np.std(np.log(dd) - (slope * tt + intercept)))
    return OracleRate(rate=float(-slope), log_residual=resid, exponential=resid <= residual_threshold)
