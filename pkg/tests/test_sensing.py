"""Tests for radar sampling, noise injection and LOS-rate estimation."""

import math

import numpy as np
import pytest

from pnident.engagement import (
    AircraftParams,
    MissileParams,
    SimLimits,
    Trajectory,
    simulate,
)
from pnident.errors import ConfigurationError, InsufficientDataError
from pnident.sensing import (
    FEATURE_COUNT,
    FEATURE_NAMES,
    MeasurementSeries,
    build_features,
    estimate_los_rate,
    estimate_range_rate,
    sample_measurements,
    smoothed_difference,
)


def benchmark_trajectory(max_time=None):
    missile = MissileParams(pn_gain=5.0, time_constant=0.30, initial_speed=2.25 * 340.0)
    aircraft = AircraftParams(speed=0.9 * 340.0)
    limits = SimLimits() if max_time is None else SimLimits(min_range=50.0, max_time=max_time)
    return simulate(missile, aircraft, 7000.0, limits=limits)


def synthetic_trajectory(n, dt=0.01, r=None, q=None):
    """Hand-built container for generator statistics tests."""
    missile = MissileParams(pn_gain=4.0, time_constant=0.3, initial_speed=700.0)
    aircraft = AircraftParams(speed=300.0)
    zeros = np.zeros(n)
    return Trajectory(
        missile=missile,
        aircraft=aircraft,
        initial_range=7000.0,
        initial_los_angle=0.0,
        dt=dt,
        limits=SimLimits(),
        t=np.arange(n) * dt,
        r=np.full(n, 7000.0) if r is None else r,
        q=zeros.copy() if q is None else q,
        theta_a=zeros.copy(),
        theta_m=zeros.copy(),
        v_m=np.full(n, 700.0),
        a_a=zeros.copy(),
        a_m=zeros.copy(),
        cmd_a=zeros.copy(),
        cmd_m=zeros.copy(),
        termination="time_limit",
        traj_id="synthetic",
    )


# ---------------------------------------------------------------------------
# measurement sampling


class TestSampleMeasurements:
    def test_zero_noise_equals_truth(self):
        traj = benchmark_trajectory(max_time=2.0)
        s = sample_measurements(traj, sigma_r=0.0, sigma_q=0.0, seed=7)
        idx = np.arange(0, len(traj), 10)
        np.testing.assert_array_equal(s.r, traj.r[idx])
        np.testing.assert_array_equal(s.q, traj.q[idx])

    def test_timestamps_are_period_multiples(self):
        traj = benchmark_trajectory(max_time=2.0)
        s = sample_measurements(traj, seed=7)
        np.testing.assert_array_equal(s.t, np.arange(len(s)) * s.period)

    def test_noise_statistics(self):
        # generator oracle: over 1e5 ticks the sample std lands within 2% of
        # the configured sigma and the mean within 3 sigma / sqrt(n)
        n = 100_000
        traj = synthetic_trajectory(n)
        s = sample_measurements(traj, period=0.01, sigma_r=5.0, sigma_q=1e-3, seed=1234)
        dr = s.r - 7000.0
        dq = s.q - 0.0
        assert abs(dr.std() - 5.0) < 0.1
        assert abs(dq.std() - 1e-3) < 2e-5
        assert abs(dr.mean()) < 3 * 5.0 / math.sqrt(n)
        assert abs(dq.mean()) < 3 * 1e-3 / math.sqrt(n)

    def test_channel_and_tick_independence(self):
        n = 100_000
        traj = synthetic_trajectory(n)
        s = sample_measurements(traj, sigma_r=5.0, sigma_q=1e-3, seed=99)
        dr = (s.r - 7000.0) / 5.0
        dq = (s.q - 0.0) / 1e-3
        cross = np.corrcoef(dr, dq)[0, 1]
        lag_r = np.corrcoef(dr[:-1], dr[1:])[0, 1]
        lag_q = np.corrcoef(dq[:-1], dq[1:])[0, 1]
        assert abs(cross) < 0.02
        assert abs(lag_r) < 0.02
        assert abs(lag_q) < 0.02

    def test_deterministic_given_seed(self):
        traj = benchmark_trajectory(max_time=2.0)
        a = sample_measurements(traj, seed=42)
        b = sample_measurements(traj, seed=42)
        c = sample_measurements(traj, seed=43)
        np.testing.assert_array_equal(a.r, b.r)
        np.testing.assert_array_equal(a.q, b.q)
        assert not np.array_equal(a.r, c.r)

    def test_period_must_align_with_grid(self):
        traj = benchmark_trajectory(max_time=1.0)  # dt = 1e-3
        with pytest.raises(ConfigurationError):
            sample_measurements(traj, period=0.0107)
        with pytest.raises(ConfigurationError):
            sample_measurements(traj, period=5e-4)  # finer than the grid

    def test_series_validation(self):
        with pytest.raises(ConfigurationError):
            MeasurementSeries(
                t=np.array([0.0, 0.013]), r=np.zeros(2), q=np.zeros(2),
                period=0.01, sigma_r=5.0, sigma_q=1e-3,
            )
        with pytest.raises(ConfigurationError):
            MeasurementSeries(
                t=np.zeros(2), r=np.zeros(3), q=np.zeros(2),
                period=0.01, sigma_r=5.0, sigma_q=1e-3,
            )
        with pytest.raises(ConfigurationError):
            MeasurementSeries(
                t=np.zeros(1), r=np.zeros(1), q=np.zeros(1),
                period=0.01, sigma_r=-1.0, sigma_q=1e-3,
            )

    def test_csv_export(self, tmp_path):
        traj = benchmark_trajectory(max_time=1.0)
        s = sample_measurements(traj, seed=5)
        path = tmp_path / "meas.csv"
        s.to_csv(path)
        lines = path.read_text().splitlines()
        meta = [ln for ln in lines if ln.startswith("#")]
        assert any("seed=5" in ln for ln in meta)
        assert any("sigma_R=5.0" in ln for ln in meta)
        header_row = len(meta)
        assert lines[header_row] == "t,R_meas,q_meas"
        data = np.loadtxt(path, delimiter=",", skiprows=header_row + 1)
        assert data.shape == (len(s), 3)
        np.testing.assert_allclose(data[:, 1], s.r, rtol=1e-10)


# ---------------------------------------------------------------------------
# derivative estimation


class TestSmoothedDifference:
    def test_exact_on_affine(self):
        t = np.arange(50) * 0.01
        q = 0.3 - 0.04 * t
        d = smoothed_difference(q, 0.01)
        np.testing.assert_allclose(d, -0.04, rtol=0, atol=1e-12)

    def test_constant_gives_zero(self):
        d = smoothed_difference(np.full(30, 1.7), 0.01)
        np.testing.assert_allclose(d, 0.0, atol=1e-12)

    def test_quadratic_interior(self):
        # central differences are exact on quadratics away from the edges
        t = np.arange(100) * 0.01
        v = 3.0 * t**2
        d = smoothed_difference(v, 0.01, window=1)
        np.testing.assert_allclose(d[1:-1], 6.0 * t[1:-1], rtol=0, atol=1e-10)

    def test_insufficient_data(self):
        with pytest.raises(InsufficientDataError):
            smoothed_difference(np.array([1.0]), 0.01)

    def test_window_validation(self):
        v = np.arange(10.0)
        with pytest.raises(ConfigurationError):
            smoothed_difference(v, 0.01, window=4)  # centered window must be odd
        with pytest.raises(ConfigurationError):
            smoothed_difference(v, 0.01, window=0)
        with pytest.raises(ConfigurationError):
            smoothed_difference(v, -0.01)

    def test_causal_is_exact_on_affine(self):
        t = np.arange(50) * 0.01
        q = 1.0 + 0.25 * t
        d = smoothed_difference(q, 0.01, causal=True)
        np.testing.assert_allclose(d, 0.25, rtol=0, atol=1e-12)

    def test_causal_even_window_allowed(self):
        v = np.arange(10.0) ** 2
        d = smoothed_difference(v, 1.0, window=4, causal=True)
        assert len(d) == 10

    def test_smoothing_attenuates_noise(self):
        rng = np.random.default_rng(3)
        v = 0.5 * np.arange(2000) * 0.01 + 1e-3 * rng.standard_normal(2000)
        raw = smoothed_difference(v, 0.01, window=1)
        smooth = smoothed_difference(v, 0.01, window=5)
        assert smooth.std() < 0.6 * raw.std()


class TestEstimateLosRate:
    def test_against_simulator_truth(self):
        # noise-free measurements: interior estimate matches the true LOS
        # rate; the first/last 2 ticks use one-sided differences and the
        # final ticks catch the endgame spike, so they are excluded
        traj = benchmark_trajectory()
        s = sample_measurements(traj, sigma_r=0.0, sigma_q=0.0, seed=0)
        est = estimate_los_rate(s)
        idx = np.arange(0, len(traj), 10)
        true = traj.relative_rates()[1][idx]
        assert np.abs(est[2:-2] - true[2:-2]).max() < 1e-3

    def test_range_rate_against_truth(self):
        traj = benchmark_trajectory()
        s = sample_measurements(traj, sigma_r=0.0, sigma_q=0.0, seed=0)
        est = estimate_range_rate(s)
        idx = np.arange(0, len(traj), 10)
        true = traj.relative_rates()[0][idx]
        assert np.abs(est[2:-2] - true[2:-2]).max() < 0.5  # m/s on ~1000 m/s

    def test_causal_reads_no_future(self):
        # prefix property: the causal estimate at tick k is unchanged when
        # the series is truncated right after tick k+1
        traj = benchmark_trajectory()
        s = sample_measurements(traj, seed=11)
        full = estimate_los_rate(s, causal=True)
        for k in (0, 1, 3, 7, 40, 200, len(s) - 2):
            end = min(k + 2, len(s))
            trunc = MeasurementSeries(
                t=s.t[:end], r=s.r[:end], q=s.q[:end],
                period=s.period, sigma_r=s.sigma_r, sigma_q=s.sigma_q,
            )
            got = estimate_los_rate(trunc, causal=True)[k]
            assert got == pytest.approx(full[k], rel=1e-12, abs=1e-15)

    def test_noncausal_uses_future(self):
        # sanity check that the offline mode is actually different
        traj = benchmark_trajectory()
        s = sample_measurements(traj, seed=11)
        offline = estimate_los_rate(s, causal=False)
        causal = estimate_los_rate(s, causal=True)
        assert not np.allclose(offline, causal)


# ---------------------------------------------------------------------------
# feature assembly


class TestBuildFeatures:
    def test_shape_and_order(self):
        traj = benchmark_trajectory(max_time=2.0)
        s = sample_measurements(traj, seed=1)
        f = build_features(s, traj)
        assert FEATURE_COUNT == 6
        assert FEATURE_NAMES == ("R", "q", "q_dot", "V_A", "theta_A", "a_A")
        m = f.matrix()
        assert m.shape == (len(s), 6)
        np.testing.assert_array_equal(m[:, 0], f.r)
        np.testing.assert_array_equal(m[:, 1], f.q)
        np.testing.assert_array_equal(m[:, 2], f.q_dot)
        np.testing.assert_array_equal(m[:, 3], f.v_a)
        np.testing.assert_array_equal(m[:, 4], f.theta_a)
        np.testing.assert_array_equal(m[:, 5], f.a_a)

    def test_zero_noise_features_equal_truth(self):
        traj = benchmark_trajectory(max_time=2.0)
        s = sample_measurements(traj, sigma_r=0.0, sigma_q=0.0, seed=1)
        f = build_features(s, traj, rate_mode="exact")
        idx = np.arange(0, len(traj), 10)
        np.testing.assert_array_equal(f.r, traj.r[idx])
        np.testing.assert_array_equal(f.q, traj.q[idx])
        np.testing.assert_array_equal(f.theta_a, traj.theta_a[idx])
        np.testing.assert_array_equal(f.a_a, traj.a_a[idx])
        assert (f.v_a == traj.aircraft.speed).all()
        np.testing.assert_array_equal(f.q_dot, traj.relative_rates()[1][idx])

    def test_noise_is_preserved_in_features(self):
        traj = benchmark_trajectory(max_time=2.0)
        s = sample_measurements(traj, seed=2)
        f = build_features(s, traj)
        np.testing.assert_array_equal(f.r, s.r)
        np.testing.assert_array_equal(f.q, s.q)

    def test_grid_mismatch_rejected(self):
        traj = benchmark_trajectory(max_time=2.0)
        s = sample_measurements(traj, seed=1)
        # series outruns a shorter trajectory
        short = benchmark_trajectory(max_time=1.0)
        with pytest.raises(ConfigurationError):
            build_features(s, short)
        # timestamps that fall between grid points
        other = synthetic_trajectory(300, dt=0.003)
        with pytest.raises(ConfigurationError):
            build_features(s, other)

    def test_unknown_rate_mode(self):
        traj = benchmark_trajectory(max_time=1.0)
        s = sample_measurements(traj, seed=1)
        with pytest.raises(ConfigurationError):
            build_features(s, traj, rate_mode="psychic")

    def test_csv_export(self, tmp_path):
        traj = benchmark_trajectory(max_time=1.0)
        s = sample_measurements(traj, seed=3)
        f = build_features(s, traj)
        path = tmp_path / "features.csv"
        f.to_csv(path)
        lines = path.read_text().splitlines()
        meta = [ln for ln in lines if ln.startswith("#")]
        assert lines[len(meta)] == "t,R,q,q_dot,V_A,theta_A,a_A"
        data = np.loadtxt(path, delimiter=",", skiprows=len(meta) + 1)
        assert data.shape == (len(f), 7)
