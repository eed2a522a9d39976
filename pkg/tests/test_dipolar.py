import numpy as np
import pytest

from spinbath import dipolar
from spinbath.units import J0, group_axis, make_frame

CANONICAL = make_frame(np.array([0.0, 0.0, 1.0]))


def _random_frame(rng):
    v = rng.normal(size=3)
    return make_frame(v / np.linalg.norm(v), azimuth=rng.uniform(0, 2 * np.pi))


def _ghq_transcription(frame_s, frame_f, r_hat):
    """Independent plain-scalar transcription of the coefficient formulas."""
    rx_s = sum(r_hat[k] * frame_s.x[k] for k in range(3))
    ry_s = sum(r_hat[k] * frame_s.y[k] for k in range(3))
    rz_s = sum(r_hat[k] * frame_s.z[k] for k in range(3))
    rx_f = sum(r_hat[k] * frame_f.x[k] for k in range(3))
    ry_f = sum(r_hat[k] * frame_f.y[k] for k in range(3))
    rz_f = sum(r_hat[k] * frame_f.z[k] for k in range(3))
    xx = sum(frame_s.x[k] * frame_f.x[k] for k in range(3))
    yy = sum(frame_s.y[k] * frame_f.y[k] for k in range(3))
    xy = sum(frame_s.x[k] * frame_f.y[k] for k in range(3))
    yx = sum(frame_s.y[k] * frame_f.x[k] for k in range(3))
    zz = sum(frame_s.z[k] * frame_f.z[k] for k in range(3))
    g = 0.5 * (3 * rx_s * rx_f - xx + 3 * ry_s * ry_f - yy)
    h = 0.5 * (3 * rx_s * ry_f - xy - 3 * ry_s * rx_f + yx)
    q = 3 * rz_s * rz_f - zz
    return g, h, q


def test_collinear_case():
    c = dipolar.coeffs_ghq(CANONICAL, CANONICAL, np.array([0.0, 0.0, 1.0]))
    assert (c.g, c.h, c.q) == pytest.approx((-1.0, 0.0, 2.0), abs=1e-14)


def test_transverse_case():
    c = dipolar.coeffs_ghq(CANONICAL, CANONICAL, np.array([1.0, 0.0, 0.0]))
    assert (c.g, c.h, c.q) == pytest.approx((0.5, 0.0, -1.0), abs=1e-14)


def test_against_independent_transcription():
    rng = np.random.default_rng(2)
    for _ in range(300):
        fs, ff = _random_frame(rng), _random_frame(rng)
        v = rng.normal(size=3)
        r_hat = v / np.linalg.norm(v)
        c = dipolar.coeffs_ghq(fs, ff, r_hat)
        g, h, q = _ghq_transcription(fs, ff, r_hat)
        assert (c.g, c.h, c.q) == pytest.approx((g, h, q), abs=1e-12)


def test_coefficients_bounded():
    rng = np.random.default_rng(3)
    for _ in range(500):
        fs, ff = _random_frame(rng), _random_frame(rng)
        v = rng.normal(size=3)
        c = dipolar.coeffs_ghq(fs, ff, v / np.linalg.norm(v))
        assert abs(c.g) <= 2.0 and abs(c.h) <= 2.0 and abs(c.q) <= 2.0


def test_parity_in_bond_direction():
    rng = np.random.default_rng(4)
    for _ in range(200):
        fs, ff = _random_frame(rng), _random_frame(rng)
        v = rng.normal(size=3)
        r_hat = v / np.linalg.norm(v)
        a = dipolar.coeffs_ghq(fs, ff, r_hat)
        b = dipolar.coeffs_ghq(fs, ff, -r_hat)
        assert (a.g, a.h, a.q) == pytest.approx((b.g, b.h, b.q), abs=1e-13)


def test_exchange_symmetry():
    rng = np.random.default_rng(5)
    for _ in range(200):
        fs, ff = _random_frame(rng), _random_frame(rng)
        v = rng.normal(size=3)
        r_hat = v / np.linalg.norm(v)
        a = dipolar.coeffs_ghq(fs, ff, r_hat)
        b = dipolar.coeffs_ghq(ff, fs, r_hat)
        assert (b.g, b.h, b.q) == pytest.approx((a.g, -a.h, a.q), abs=1e-13)


def test_gauge_invariance_like_and_opposed():
    rng = np.random.default_rng(6)
    for _ in range(2000):
        v = rng.normal(size=3)
        axis_s = v / np.linalg.norm(v)
        v = rng.normal(size=3)
        axis_f = v / np.linalg.norm(v)
        v = rng.normal(size=3)
        r_hat = v / np.linalg.norm(v)
        base_s = make_frame(axis_s, rng.uniform(0, 2 * np.pi))
        base_f = make_frame(axis_f, rng.uniform(0, 2 * np.pi))
        rot_s = make_frame(axis_s, rng.uniform(0, 2 * np.pi))
        rot_f = make_frame(axis_f, rng.uniform(0, 2 * np.pi))
        a = dipolar.coeffs_ghq(base_s, base_f, r_hat)
        b = dipolar.coeffs_ghq(rot_s, rot_f, r_hat)
        assert a.flip_flop_sq == pytest.approx(b.flip_flop_sq, abs=1e-10)
        assert dipolar.opposed_amplitude_sq(base_s, base_f, r_hat) == pytest.approx(
            dipolar.opposed_amplitude_sq(rot_s, rot_f, r_hat), abs=1e-10
        )
        assert a.q == pytest.approx(b.q, abs=1e-10)


def test_aligned_same_group_ising_identity():
    # With identical frames, h = 0 and q = -2 g for every bond direction;
    # this underpins the exact flip-flop cancellation in the driven basis.
    rng = np.random.default_rng(7)
    for _ in range(500):
        fr = _random_frame(rng)
        v = rng.normal(size=3)
        c = dipolar.coeffs_ghq(fr, fr, v / np.linalg.norm(v))
        assert c.h == pytest.approx(0.0, abs=1e-13)
        assert c.q == pytest.approx(-2.0 * c.g, abs=1e-12)


def test_rejects_non_unit_bond():
    with pytest.raises(ValueError):
        dipolar.coeffs_ghq(CANONICAL, CANONICAL, np.array([0.0, 0.0, 1.5]))


def test_flip_flop_strength_zero_coeffs():
    c = dipolar.DipolarCoefficients(g=0.0, h=0.0, q=1.0)
    assert dipolar.flip_flop_strength(5.0, c) == 0.0


def test_flip_flop_strength_value():
    # (J0 / 125)^2 at unit amplitude: ((2pi) 0.416 MHz)^2 ~ 6.83 rad^2/us^2
    c = dipolar.DipolarCoefficients(g=1.0, h=0.0, q=0.0)
    val = dipolar.flip_flop_strength(5.0, c)
    assert val == pytest.approx((J0 / 125.0) ** 2, rel=1e-12)
    assert val == pytest.approx(6.837, rel=2e-3)


def test_flip_flop_strength_r6_scaling():
    c = dipolar.DipolarCoefficients(g=0.7, h=0.4, q=0.0)
    assert dipolar.flip_flop_strength(10.0, c) == pytest.approx(
        dipolar.flip_flop_strength(5.0, c) / 64.0, rel=1e-12
    )


def test_flip_flop_strength_rejects_nonpositive_r():
    c = dipolar.DipolarCoefficients(g=1.0, h=0.0, q=0.0)
    with pytest.raises(ValueError):
        dipolar.flip_flop_strength(0.0, c)


def test_same_group_average_matches_analytic():
    mean, err = dipolar.angular_average_matrix_element(dipolar.SAME_GROUP, samples=10**5, seed=10)
    assert abs(mean - dipolar.SAME_GROUP_AVERAGE) <= 3.0 * err


def test_different_group_average_matches_frozen_constant():
    mean, err = dipolar.angular_average_matrix_element(dipolar.DIFFERENT_GROUP, samples=10**5, seed=11)
    assert abs(mean - 0.6507) <= 3.0 * err


def test_same_below_different():
    same, _ = dipolar.angular_average_matrix_element(dipolar.SAME_GROUP, samples=10**5, seed=12)
    diff, _ = dipolar.angular_average_matrix_element(dipolar.DIFFERENT_GROUP, samples=10**5, seed=12)
    assert same < diff


def test_average_invariant_across_axis_pairs():
    labels = "ABCD"
    means = []
    for i in range(4):
        for j in range(4):
            if i == j:
                continue
            mean, err = dipolar.angular_average_matrix_element(
                dipolar.DIFFERENT_GROUP, samples=4 * 10**4, seed=13, axes=(labels[i], labels[j])
            )
            means.append((mean, err))
    values = np.array([m for m, _ in means])
    errs = np.array([e for _, e in means])
    assert np.max(np.abs(values - values.mean())) <= 3.0 * np.max(errs) * np.sqrt(2.0)


def test_average_input_validation():
    with pytest.raises(ValueError):
        dipolar.angular_average_matrix_element(dipolar.SAME_GROUP, samples=100)
    with pytest.raises(ValueError):
        dipolar.angular_average_matrix_element("bogus", samples=10**4)
    with pytest.raises(ValueError):
        dipolar.angular_average_matrix_element(dipolar.DIFFERENT_GROUP, samples=10**4, axes=("B", "B"))


def test_group_axes_accessible():
    assert np.dot(group_axis("B"), group_axis("C")) == pytest.approx(-1.0 / 3.0, abs=1e-12)
