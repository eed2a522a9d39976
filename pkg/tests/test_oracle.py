import numpy as np
import pytest
from scipy.integrate import quad

from spinbath import oracle
from spinbath.dipolar import coeffs_ghq
from spinbath.units import J0, angular_from_mhz, make_frame

GAMMA_F = angular_from_mhz(3.3)
CANONICAL = make_frame(np.array([0.0, 0.0, 1.0]))


def _random_frame(rng):
    v = rng.normal(size=3)
    return make_frame(v / np.linalg.norm(v), azimuth=rng.uniform(0, 2 * np.pi))


# ---------------------------------------------------------------------------
# Secular pair Hamiltonian
# ---------------------------------------------------------------------------


def test_hdd_hermitian():
    rng = np.random.default_rng(0)
    for _ in range(50):
        r_vec = rng.normal(size=3) * 5.0
        h = oracle.build_secular_hdd(r_vec, _random_frame(rng), _random_frame(rng))
        assert np.max(np.abs(h - h.conj().T)) <= 1e-12


def test_hdd_no_double_quantum_block():
    rng = np.random.default_rng(1)
    for _ in range(50):
        r_vec = rng.normal(size=3) * 5.0
        h = oracle.build_secular_hdd(r_vec, _random_frame(rng), _random_frame(rng))
        # spin +1 rows (0..2) never connect to spin -1 columns (6..8)
        assert np.max(np.abs(h[0:3, 6:9])) == 0.0
        assert np.max(np.abs(h[6:9, 0:3])) == 0.0


def test_hdd_ising_element():
    rng = np.random.default_rng(2)
    fs, ff = _random_frame(rng), _random_frame(rng)
    r_vec = np.array([3.0, -4.0, 1.0])
    r = np.linalg.norm(r_vec)
    c = coeffs_ghq(fs, ff, r_vec / r)
    h = oracle.build_secular_hdd(r_vec, fs, ff)
    # |+1,+1> diagonal element carries -(J0/r^3) q
    assert h[0, 0] == pytest.approx(-(J0 / r**3) * c.q, rel=1e-12)


def test_hdd_flip_flop_element():
    rng = np.random.default_rng(3)
    fs, ff = _random_frame(rng), _random_frame(rng)
    r_vec = np.array([2.0, 1.0, -5.0])
    r = np.linalg.norm(r_vec)
    c = coeffs_ghq(fs, ff, r_vec / r)
    h = oracle.build_secular_hdd(r_vec, fs, ff)
    # <+1,0| H |0,+1> = -(J0/r^3)(g + i h): product indices 1 and 3
    assert h[1, 3] == pytest.approx(-(J0 / r**3) * (c.g + 1j * c.h), rel=1e-12)


def test_hdd_rejects_zero_separation():
    with pytest.raises(ValueError):
        oracle.build_secular_hdd(np.zeros(3), CANONICAL, CANONICAL)


# ---------------------------------------------------------------------------
# Spectral response
# ---------------------------------------------------------------------------


def test_spectral_response_on_resonance():
    s = oracle.spectral_response(5.0, +1, 0, -5.0, GAMMA_F)
    assert s == pytest.approx(-1.0 / (6.0 * GAMMA_F), abs=1e-15)


def test_spectral_response_lorentzian_half_width():
    peak = abs(oracle.spectral_response(0.0, +1, 0, 0.0, GAMMA_F).real)
    half = abs(oracle.spectral_response(2.0 * GAMMA_F, +1, 0, 0.0, GAMMA_F).real)
    assert half == pytest.approx(peak / 2.0, rel=1e-12)


def test_spectral_response_degenerate_singularity():
    with pytest.raises(ValueError):
        oracle.spectral_response(0.0, +1, +1, 0.0, GAMMA_F)


def _fluct_liouvillian(energies, gamma_f):
    h2 = np.diag(energies).astype(complex)
    eye = np.eye(3)
    gen = -1j * (np.kron(h2, eye) - np.kron(eye, h2.T))
    for ch in oracle.depolarizing_channels(gamma_f):
        op = np.sqrt(ch.rate) * np.outer(eye[oracle.state_index(ch.to_state)], eye[oracle.state_index(ch.from_state)])
        opdop = op.conj().T @ op
        gen += np.kron(op, op.conj())
        gen -= 0.5 * (np.kron(opdop, eye) + np.kron(eye, opdop.T))
    return gen


def direct_spectral_integral(omega, alpha, beta, energies, gamma_f):
    """Literal correlation-function integral via numerical propagation."""
    gen = _fluct_liouvillian(energies, gamma_f)
    evals, evecs = np.linalg.eig(gen)
    inv = np.linalg.inv(evecs)
    a, b = oracle.state_index(alpha), oracle.state_index(beta)
    eye = np.eye(3)
    x0 = (np.outer(eye[b], eye[a]) / 3.0).flatten()
    coef = inv @ x0

    def element(tau):
        x_t = evecs @ (np.exp(evals * tau) * coef)
        return x_t.reshape(3, 3)[b, a]

    tail = None
    if alpha == beta:
        tail = 1.0 / 9.0  # stationary part, integrated analytically (Abel)

    def f_re(tau):
        val = element(tau)
        if tail is not None:
            val = val - tail
        return (np.exp(1j * omega * tau) * val).real

    def f_im(tau):
        val = element(tau)
        if tail is not None:
            val = val - tail
        return (np.exp(1j * omega * tau) * val).imag

    upper = 60.0 / gamma_f
    re, _ = quad(f_re, 0.0, upper, limit=3000)
    im, _ = quad(f_im, 0.0, upper, limit=3000)
    total = re + 1j * im
    if tail is not None:
        total += tail * (1j / omega)
    return total


@pytest.mark.parametrize(
    "omega_factor,alpha,beta",
    [(0.3, +1, 0), (-2.0, 0, -1), (5.0, +1, -1), (1.7, 0, 0)],
)
def test_spectral_response_matches_direct_integration(omega_factor, alpha, beta):
    energies = np.array([9.0, 0.0, -9.0])
    omega = omega_factor * GAMMA_F
    omega_ab = energies[oracle.state_index(alpha)] - energies[oracle.state_index(beta)]
    closed = oracle.spectral_response(omega, alpha, beta, omega_ab, GAMMA_F)
    direct = direct_spectral_integral(omega, alpha, beta, energies, GAMMA_F)
    # The printed closed form is the negative of the literal integral.
    assert abs(closed + direct) <= 1e-6


# ---------------------------------------------------------------------------
# Effective rates
# ---------------------------------------------------------------------------


def test_effective_rates_zero_coupling():
    res = oracle.effective_rates(np.zeros((9, 9)), np.zeros(3), np.zeros(3), GAMMA_F)
    assert np.all(res.gamma == 0.0)
    assert np.all(res.delta == 0.0)


def test_effective_rates_no_double_quantum():
    rng = np.random.default_rng(4)
    h = oracle.build_secular_hdd(np.array([0.0, 0.0, 6.0]), _random_frame(rng), _random_frame(rng))
    res = oracle.effective_rates(h, np.zeros(3), np.zeros(3), GAMMA_F)
    assert res.gamma[0, 2] == 0.0
    assert res.gamma[2, 0] == 0.0
    assert np.all(res.gamma >= 0.0)
    assert np.all(np.diag(res.gamma) == 0.0)


def test_effective_rates_reduce_to_golden_rule():
    rng = np.random.default_rng(5)
    fs, ff = _random_frame(rng), _random_frame(rng)
    r_vec = np.array([0.0, 0.0, 6.0])
    c = coeffs_ghq(fs, ff, np.array([0.0, 0.0, 1.0]))
    h = oracle.build_secular_hdd(r_vec, fs, ff)
    res = oracle.effective_rates(h, np.zeros(3), np.zeros(3), GAMMA_F)
    expected = oracle.golden_rule_rate(6.0, c.g, c.h, 0.0, GAMMA_F)
    assert res.gamma[1, 2] == pytest.approx(expected, rel=1e-10)
    assert res.gamma[1, 0] == pytest.approx(expected, rel=1e-10)


def test_effective_rates_rejects_non_hermitian():
    h = np.zeros((9, 9), dtype=complex)
    h[0, 1] = 1.0
    with pytest.raises(ValueError):
        oracle.effective_rates(h, np.zeros(3), np.zeros(3), GAMMA_F)


# ---------------------------------------------------------------------------
# Golden-rule rate
# ---------------------------------------------------------------------------


def test_golden_rule_off_resonant_suppression():
    near = oracle.golden_rule_rate(5.0, 1.0, 0.0, 0.0, GAMMA_F)
    far = oracle.golden_rule_rate(5.0, 1.0, 0.0, 1e6 * GAMMA_F, GAMMA_F)
    assert far < 1e-9 * near


def test_golden_rule_reference_value():
    # (J0/125)^2 / (3 gamma_f) ~ (2pi) 17.5 kHz at unit amplitude
    val = oracle.golden_rule_rate(5.0, 1.0, 0.0, 0.0, GAMMA_F)
    assert val == pytest.approx((J0 / 125.0) ** 2 / (3.0 * GAMMA_F), rel=1e-12)
    assert val == pytest.approx(2.0 * np.pi * 0.0175, rel=5e-3)


def test_golden_rule_half_width():
    full = oracle.golden_rule_rate(5.0, 0.3, 0.4, 0.0, GAMMA_F)
    half = oracle.golden_rule_rate(5.0, 0.3, 0.4, 2.0 * GAMMA_F, GAMMA_F)
    assert half == pytest.approx(full / 2.0, rel=1e-12)


def test_golden_rule_domain_errors():
    with pytest.raises(ValueError):
        oracle.golden_rule_rate(0.0, 1.0, 0.0, 0.0, GAMMA_F)
    with pytest.raises(ValueError):
        oracle.golden_rule_rate(5.0, 1.0, 0.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# Lindblad propagation
# ---------------------------------------------------------------------------


def test_propagate_identity_evolution():
    rho0 = oracle.product_state([0.2, 0.5, 0.3], [0.6, 0.3, 0.1])
    out = oracle.propagate_lindblad(rho0, np.zeros((9, 9)), (), np.array([0.0, 1.0, 5.0]))
    for state in out:
        assert np.max(np.abs(state - rho0)) <= 1e-9


def test_propagate_uncoupled_spin_constant():
    rho0 = oracle.product_state([0.0, 1.0, 0.0], [1 / 3, 1 / 3, 1 / 3])
    channels = oracle.depolarizing_channels(GAMMA_F)
    out = oracle.propagate_lindblad(rho0, np.zeros((9, 9)), channels, np.array([0.0, 0.5, 2.0]))
    for state in out:
        assert oracle.spin_populations(state) == pytest.approx([0.0, 1.0, 0.0], abs=1e-9)


def test_fluctuator_steady_state_maximally_mixed():
    rho0 = oracle.product_state([1.0, 0.0, 0.0], [1.0, 0.0, 0.0])
    channels = oracle.depolarizing_channels(GAMMA_F)
    state = oracle.propagate_lindblad(rho0, np.zeros((9, 9)), channels, 30.0 / GAMMA_F)
    fluct = np.real(np.einsum("fifj->ij", np.asarray(state).reshape(3, 3, 3, 3)))
    assert np.diag(fluct) == pytest.approx([1 / 3, 1 / 3, 1 / 3], abs=1e-6)


def test_propagate_preserves_trace_and_hermiticity():
    rng = np.random.default_rng(6)
    fs, ff = _random_frame(rng), _random_frame(rng)
    h = oracle.build_secular_hdd(np.array([0.0, 0.0, 5.0]), fs, ff)
    rho0 = oracle.product_state([0.0, 0.0, 1.0], [1 / 3, 1 / 3, 1 / 3])
    times = np.linspace(0.0, 10.0, 7)
    states = oracle.propagate_lindblad(rho0, h, oracle.depolarizing_channels(GAMMA_F), times)
    for state in states:
        assert abs(np.trace(state).real - 1.0) <= 1e-9
        assert np.max(np.abs(state - state.conj().T)) <= 1e-9
        assert np.linalg.eigvalsh(state).min() >= -1e-7


def test_propagate_rejects_invalid_state():
    bad = np.eye(9, dtype=complex)  # trace 9
    with pytest.raises(oracle.IntegrationError):
        oracle.propagate_lindblad(bad, np.zeros((9, 9)), (), 1.0)


def test_zero_initialized_spin_decays_at_three_link_rate():
    # From |0> both single-quantum links drain at the same rate, so the
    # deviation from the mixed state decays at three times the link rate.
    r_vec = np.array([0.0, 0.0, 5.0])
    h = np.kron(np.eye(3), np.diag([0.0, 0.0, 0.0])).astype(complex)
    h += oracle.build_secular_hdd(r_vec, CANONICAL, CANONICAL)
    rho0 = oracle.product_state([0.0, 1.0, 0.0], [1 / 3, 1 / 3, 1 / 3])
    link = oracle.golden_rule_rate(5.0, -1.0, 0.0, 0.0, GAMMA_F)
    times = np.linspace(0.0, 1.2 / (3.0 * link), 25)
    states = oracle.propagate_lindblad(rho0, h, oracle.depolarizing_channels(GAMMA_F), times)
    signal = np.array([oracle.spin_populations(s)[1] - 1.0 / 3.0 for s in states])
    slope = np.polyfit(times, np.log(signal / signal[0]), 1)[0]
    assert -slope == pytest.approx(3.0 * link, rel=0.15)


def test_oracle_rate_zero_coupling():
    res = oracle.oracle_decay_rate(
        np.array([0.0, 0.0, 6.0]), CANONICAL, CANONICAL, 0.0, GAMMA_F,
        t_max=5.0, coupling_scale=0.0,
    )
    assert abs(res.rate) <= 1e-6


def test_oracle_rate_matches_golden_rule_and_scaling():
    rates = {}
    for r in (6.0, 8.0):
        res = oracle.oracle_decay_rate(np.array([0.0, 0.0, r]), CANONICAL, CANONICAL, 0.0, GAMMA_F)
        ref = oracle.golden_rule_rate(r, -1.0, 0.0, 0.0, GAMMA_F)
        assert res.exponential
        assert res.rate == pytest.approx(ref, rel=0.15)
        rates[r] = res.rate
    assert rates[6.0] / rates[8.0] == pytest.approx((8.0 / 6.0) ** 6, rel=0.15)


def test_oracle_rate_lorentzian_detuning():
    on = oracle.oracle_decay_rate(np.array([0.0, 0.0, 6.0]), CANONICAL, CANONICAL, 0.0, GAMMA_F)
    off = oracle.oracle_decay_rate(
        np.array([0.0, 0.0, 6.0]), CANONICAL, CANONICAL, 2.0 * GAMMA_F, GAMMA_F
    )
    assert off.rate == pytest.approx(on.rate / 2.0, rel=0.15)


def test_decay_channel_validation():
    with pytest.raises(ValueError):
        oracle.DecayChannel(from_state=0, to_state=0, rate=1.0)
    with pytest.raises(ValueError):
        oracle.DecayChannel(from_state=0, to_state=+1, rate=-1.0)
    with pytest.raises(ValueError):
        oracle.depolarizing_channels(0.0)
