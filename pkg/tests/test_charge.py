import numpy as np
import pytest

from spinbath import charge
from spinbath.curves import CurveSeries


def _gaussian_grid(sigma, pitch, n, amplitude=1.0):
    coords = (np.arange(n) - n // 2) * pitch
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    return charge.ChargeGrid(values=amplitude * np.exp(-(xx**2 + yy**2) / (2 * sigma**2)), pitch=pitch)


def test_balanced_profile_integrates_to_zero():
    grid = charge.init_profile()
    scale = np.abs(grid.values).sum() * grid.pitch**2
    assert abs(grid.integral()) <= 1e-8 * scale


def test_center_value_is_amplitude_difference():
    grid = charge.init_profile(depletion_amp=0.8, surplus_amp=0.3)
    assert grid.center_value() == pytest.approx(0.3 - 0.8, rel=1e-12)


def test_profile_dip_with_ring():
    grid = charge.init_profile()
    n = grid.values.shape[0]
    radial = grid.values[n // 2, n // 2 :]
    assert radial[0] < 0.0
    signs = np.sign(radial[np.abs(radial) > 1e-12 * np.abs(radial).max()])
    flips = np.count_nonzero(np.diff(signs))
    assert flips == 1  # monotone dip then a single sign change into the ring
    assert radial.max() > 0.0


def test_profile_rejects_bad_widths():
    with pytest.raises(ValueError):
        charge.init_profile(depletion_width=0.0)


def test_uniform_grid_is_stationary():
    grid = charge.ChargeGrid(values=np.full((41, 41), 0.7), pitch=100.0)
    out = charge.evolve(grid, 2500.0, 123.0)
    assert np.max(np.abs(out.values - 0.7)) <= 1e-12


def test_evolve_matches_heat_kernel():
    for diffusivity, t in [(2500.0, 40.0), (1000.0, 100.0), (500.0, 60.0)]:
        sigma0, pitch, n = 800.0, 100.0, 121
        grid = _gaussian_grid(sigma0, pitch, n)
        out = charge.evolve(grid, diffusivity, t)
        var = sigma0**2 + 2.0 * diffusivity * t
        coords = (np.arange(n) - n // 2) * pitch
        xx, yy = np.meshgrid(coords, coords, indexing="ij")
        expected = (sigma0**2 / var) * np.exp(-(xx**2 + yy**2) / (2 * var))
        err = np.linalg.norm(out.values - expected) / np.linalg.norm(expected)
        assert err <= 0.01


def test_evolve_conserves_integral():
    grid = charge.init_profile(depletion_amp=1.0, surplus_amp=0.2)
    total0 = grid.integral()
    scale = np.abs(grid.values).sum() * grid.pitch**2
    out = charge.evolve(grid, 2500.0, 500.0)
    assert abs(out.integral() - total0) <= 1e-3 * scale


def test_evolve_linearity():
    g1 = _gaussian_grid(700.0, 100.0, 81)
    g2 = charge.init_profile(pitch=100.0, extent=8100.0)
    g2 = charge.ChargeGrid(values=g2.values[:81, :81], pitch=100.0)
    a, b = 0.6, -1.7
    combo = charge.ChargeGrid(values=a * g1.values + b * g2.values, pitch=100.0)
    direct = charge.evolve(combo, 2500.0, 30.0).values
    split = a * charge.evolve(g1, 2500.0, 30.0).values + b * charge.evolve(g2, 2500.0, 30.0).values
    assert np.max(np.abs(direct - split)) <= 1e-8 * np.max(np.abs(split))


def test_evolve_validates_inputs():
    grid = _gaussian_grid(500.0, 100.0, 41)
    with pytest.raises(ValueError):
        charge.evolve(grid, 0.0, 1.0)
    with pytest.raises(ValueError):
        charge.evolve(grid, 2500.0, -1.0)


def test_coarse_grid_warns():
    grid = _gaussian_grid(120.0, 100.0, 41)  # barely one pixel per width
    with pytest.warns(UserWarning):
        charge.evolve(grid, 2500.0, 1.0)


def test_center_recovery_monotone_and_normalized():
    grid = charge.init_profile()
    curve = charge.center_recovery(grid, 2500.0, np.linspace(0.0, 400.0, 21))
    assert curve.y[0] == 1.0
    assert np.all(np.diff(curve.y) <= 1e-10)
    assert curve.y[-1] < 0.2


def test_half_recovery_in_expected_window():
    grid = charge.init_profile()
    d = charge.hop_diffusivity(5.0, 10.0 * 1e-3)  # 5 nm hops every 10 ns
    assert d == pytest.approx(2500.0, rel=1e-12)
    curve = charge.center_recovery(grid, d, np.linspace(0.0, 400.0, 41))
    t_half = charge.half_recovery_time(curve)
    assert 30.0 <= t_half <= 300.0


def test_grid_refinement_converged():
    times = np.linspace(0.0, 200.0, 6)
    coarse = charge.center_recovery(charge.init_profile(pitch=100.0), 2500.0, times)
    fine = charge.center_recovery(charge.init_profile(pitch=50.0), 2500.0, times)
    assert np.max(np.abs(coarse.y - fine.y)) <= 5e-3


def _synthetic_recovery(hop_time_us, noise, seed, n=12):
    grid = charge.init_profile()
    d = charge.hop_diffusivity(5.0, hop_time_us)
    times = np.linspace(0.0, 300.0, n)
    curve = charge.center_recovery(grid, d, times)
    rng = np.random.default_rng(seed)
    y = curve.y * (1.0 + noise * rng.normal(size=n))
    y[0] = 1.0
    return CurveSeries(x=times, y=y, sigma=np.full(n, max(noise, 1e-6)), x_unit="us")


def test_fit_hop_time_round_trip():
    data = _synthetic_recovery(10e-3, 0.02, seed=0)
    fit = charge.fit_hop_time(data, hop_distance=5.0)
    assert fit.identifiable
    assert fit.hop_time == pytest.approx(10e-3, rel=0.20)


def test_fit_hop_time_distinguishes_decades():
    data = _synthetic_recovery(100e-3, 0.02, seed=1)
    fit = charge.fit_hop_time(data, hop_distance=5.0)
    assert fit.hop_time == pytest.approx(100e-3, rel=0.30)
    # residual at a 10 ns model is far worse than at the recovered optimum
    candidates = np.asarray(fit.candidates)
    residuals = np.asarray(fit.residuals)
    at_10ns = residuals[np.argmin(np.abs(candidates - 10e-3))]
    assert at_10ns / max(fit.residual, 1e-12) > 5.0


def test_fit_hop_time_flags_flat_data():
    times = np.linspace(0.0, 300.0, 12)
    flat = CurveSeries(x=times, y=np.ones_like(times), x_unit="us")
    fit = charge.fit_hop_time(flat, hop_distance=5.0)
    assert not fit.identifiable


def test_fit_hop_time_validation():
    times = np.linspace(0.0, 300.0, 5)
    data = CurveSeries(x=times, y=np.linspace(1, 0.5, 5))
    with pytest.raises(ValueError):
        charge.fit_hop_time(data, hop_distance=5.0)
