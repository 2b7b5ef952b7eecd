"""Radar-rate sampling of trajectories and LOS-rate estimation.

The simulator integrates on a dense grid; the radar sees the engagement at a
coarser fixed period with additive Gaussian noise on range and LOS angle.
The LOS rate is not measured directly and has to be recovered by smoothed
finite differencing before it can enter the feature vector.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .engagement import Trajectory
from .errors import ConfigurationError, InsufficientDataError

DEFAULT_PERIOD = 0.01  # s, 100 Hz radar update rate
DEFAULT_SIGMA_R = 5.0  # m
DEFAULT_SIGMA_Q = 1e-3  # rad
DEFAULT_SMOOTH_WINDOW = 5  # ticks

MEASUREMENT_CSV_HEADER = "t,R_meas,q_meas"
FEATURE_CSV_HEADER = "t,R,q,q_dot,V_A,theta_A,a_A"

#: feature vector layout, fixed: [R, q, q_dot, V_A, theta_A, a_A]
FEATURE_NAMES = ("R", "q", "q_dot", "V_A", "theta_A", "a_A")
FEATURE_COUNT = len(FEATURE_NAMES)


@dataclass(frozen=True)
class MeasurementSeries:
    """Discrete radar measurements of one engagement."""

    t: np.ndarray  # s, exact multiples of period
    r: np.ndarray  # m, measured range
    q: np.ndarray  # rad, measured LOS angle
    period: float  # s
    sigma_r: float
    sigma_q: float
    seed: object = None

    def __post_init__(self):
        if not (len(self.t) == len(self.r) == len(self.q)):
            raise ConfigurationError("t, r, q must have equal length")
        if self.period <= 0:
            raise ConfigurationError("period must be > 0")
        if self.sigma_r < 0 or self.sigma_q < 0:
            raise ConfigurationError("noise levels must be >= 0")
        ticks = self.t / self.period
        if np.abs(ticks - np.round(ticks)).max(initial=0.0) > 1e-6:
            raise ConfigurationError("timestamps must be multiples of period")

    def __len__(self):
        return len(self.t)

    def to_csv(self, path):
        rows = np.column_stack([self.t, self.r, self.q])
        meta = {
            "period": self.period,
            "sigma_R": self.sigma_r,
            "sigma_q": self.sigma_q,
            "seed": self.seed,
        }
        _write_csv(path, MEASUREMENT_CSV_HEADER, rows, meta)


@dataclass(frozen=True)
class FeatureSeries:
    """Per-tick feature vectors [R, q, q_dot, V_A, theta_A, a_A]."""

    t: np.ndarray
    r: np.ndarray
    q: np.ndarray
    q_dot: np.ndarray
    v_a: np.ndarray
    theta_a: np.ndarray
    a_a: np.ndarray
    period: float

    def __post_init__(self):
        n = len(self.t)
        cols = (self.r, self.q, self.q_dot, self.v_a, self.theta_a, self.a_a)
        if any(len(c) != n for c in cols):
            raise ConfigurationError("feature columns must have equal length")

    def __len__(self):
        return len(self.t)

    def matrix(self) -> np.ndarray:
        """(n, 6) array in the fixed feature order."""
        return np.column_stack(
            [self.r, self.q, self.q_dot, self.v_a, self.theta_a, self.a_a]
        )

    def to_csv(self, path):
        rows = np.column_stack([self.t] + list(self.matrix().T))
        _write_csv(path, FEATURE_CSV_HEADER, rows, {"period": self.period})


def _write_csv(path, header: str, rows: np.ndarray, meta: dict):
    with open(Path(path), "w") as fh:
        for key, val in meta.items():
            fh.write(f"# {key}={val}\n")
        fh.write(header + "\n")
        np.savetxt(fh, rows, fmt="%.12g", delimiter=",")


def sample_measurements(
    traj: Trajectory,
    period: float = DEFAULT_PERIOD,
    sigma_r: float = DEFAULT_SIGMA_R,
    sigma_q: float = DEFAULT_SIGMA_Q,
    seed=None,
) -> MeasurementSeries:
    """Sample a trajectory at the radar rate and contaminate it with noise.

    ``period`` must be an integer multiple of the trajectory grid step.
    ``seed`` feeds ``np.random.default_rng`` (ints and SeedSequences both
    work), so the same seed always gives the same series.
    """

    stride_f = period / traj.dt
    stride = int(round(stride_f))
    if stride < 1 or abs(stride_f - stride) > 1e-6:
        raise ConfigurationError(
            f"period {period} is not an integer multiple of dt {traj.dt}"
        )
    idx = np.arange(0, len(traj), stride)
    m = len(idx)
    rng = np.random.default_rng(seed)
    # draw order is fixed (range first) so a seed fully pins the series
    r = traj.r[idx] + sigma_r * rng.standard_normal(m)
    q = traj.q[idx] + sigma_q * rng.standard_normal(m)
    return MeasurementSeries(
        t=np.arange(m) * period,
        r=r,
        q=q,
        period=period,
        sigma_r=sigma_r,
        sigma_q=sigma_q,
        seed=seed,
    )


def smoothed_difference(
    values: np.ndarray, dt: float, window: int = DEFAULT_SMOOTH_WINDOW,
    causal: bool = False,
) -> np.ndarray:
    """Finite-difference derivative followed by a moving-average smoother.

    Offline mode uses central differences (one-sided at both ends) and a
    centered window.  Causal mode uses backward differences and a trailing
    window; only the very first tick looks one sample ahead, everything
    else reads the past.
    """

    v = np.asarray(values, dtype=float)
    n = len(v)
    if n < 2:
        raise InsufficientDataError("need at least 2 samples to differentiate")
    if dt <= 0:
        raise ConfigurationError("dt must be > 0")
    if window < 1 or (not causal and window % 2 == 0):
        raise ConfigurationError("window must be a positive odd width")

    d = np.empty(n)
    if causal:
        d[1:] = np.diff(v) / dt
        d[0] = d[1]
        if window == 1:
            return d
        csum = np.cumsum(d)
        out = np.empty(n)
        head = min(window, n)
        out[:head] = csum[:head] / np.arange(1, head + 1)
        if n > window:
            out[window:] = (csum[window:] - csum[:-window]) / window
        return out

    d[0] = (v[1] - v[0]) / dt
    d[-1] = (v[-1] - v[-2]) / dt
    if n > 2:
        d[1:-1] = (v[2:] - v[:-2]) / (2.0 * dt)
    if window == 1:
        return d
    kernel = np.ones(window)
    sums = np.convolve(d, kernel, mode="same")
    counts = np.convolve(np.ones(n), kernel, mode="same")
    return sums / counts


def estimate_los_rate(
    series: MeasurementSeries, window: int = DEFAULT_SMOOTH_WINDOW,
    causal: bool = False,
) -> np.ndarray:
    """LOS rate per tick from the measured LOS angles."""
    return smoothed_difference(series.q, series.period, window, causal)


def estimate_range_rate(
    series: MeasurementSeries, window: int = DEFAULT_SMOOTH_WINDOW,
    causal: bool = False,
) -> np.ndarray:
    """Range rate per tick from the measured ranges (same estimator)."""
    return smoothed_difference(series.r, series.period, window, causal)


def _tick_indices(series: MeasurementSeries, traj: Trajectory) -> np.ndarray:
    """Map measurement timestamps onto the trajectory grid.

    Raises if the grids are misaligned or the series outruns the trajectory.
    """
    idx_f = series.t / traj.dt
    idx = np.round(idx_f).astype(int)
    if np.abs(idx_f - idx).max(initial=0.0) > 1e-6:
        raise ConfigurationError("measurement grid does not align with trajectory grid")
    if len(idx) and idx[-1] >= len(traj):
        raise ConfigurationError("measurement series extends past the trajectory")
    return idx


def build_features(
    series: MeasurementSeries,
    traj: Trajectory,
    window: int = DEFAULT_SMOOTH_WINDOW,
    rate_mode: str = "smoothed",
) -> FeatureSeries:
    """Assemble per-tick feature vectors [R, q, q_dot, V_A, theta_A, a_A].

    Range and LOS angle come from the (possibly noisy) measurements; the
    aircraft self-states are taken noise-free from the trajectory, as its
    own navigation data.  ``rate_mode`` selects the LOS-rate source:
    "smoothed" (offline differencing), "causal" (backward differencing) or
    "exact" (true rate from the simulator, for clean training data).
    """

    idx = _tick_indices(series, traj)
    if rate_mode == "smoothed":
        q_dot = estimate_los_rate(series, window)
    elif rate_mode == "causal":
        q_dot = estimate_los_rate(series, window, causal=True)
    elif rate_mode == "exact":
        q_dot = traj.relative_rates()[1][idx]
    else:
        raise ConfigurationError(f"unknown rate_mode {rate_mode!r}")

    return FeatureSeries(
        t=series.t.copy(),
        r=series.r.copy(),
        q=series.q.copy(),
        q_dot=q_dot,
        v_a=np.full(len(idx), traj.aircraft.speed),
        theta_a=traj.theta_a[idx].copy(),
        a_a=traj.a_a[idx].copy(),
        period=series.period,
    )
