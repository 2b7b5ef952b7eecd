"""Closed-form identification of the pursuer's guidance parameters.

From aircraft-side data (own kinematics plus radar range/LOS measurements)
the missile velocity vector can be reconstructed by inverting the engagement
kinematics: resolving the relative velocity along and across the line of
sight leaves the missile's contribution once the aircraft's is subtracted.
A linear least-squares fit of the lagged PN model to the reconstructed
lateral acceleration then yields the navigation gain and the time constant.

Exact on noise-free data; notoriously fragile once the radar noise is in,
which is what motivates the learned estimator in this package.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engagement import G
from .errors import InsufficientDataError, UnidentifiableError
from .sensing import DEFAULT_SMOOTH_WINDOW, FeatureSeries, smoothed_difference

RECONSTRUCTION_CSV_HEADER = "t,v_along,v_across,theta_M_hat,V_M_hat,a_M_hat,valid"


@dataclass(frozen=True)
class ReconstructionPoint:
    """Missile state estimate at one tick."""

    t: float
    v_along: float  # missile velocity component along the LOS, m/s
    v_across: float  # component across the LOS, m/s
    theta_m_hat: float  # rad
    v_m_hat: float  # m/s
    a_m_hat: float  # m/s^2
    valid: bool

    @property
    def a_m_hat_g(self) -> float:
        """Lateral acceleration in g units."""
        return self.a_m_hat / G


@dataclass(frozen=True)
class ReconstructionSeries:
    """Columnar missile-state reconstruction over a measurement series."""

    t: np.ndarray
    v_along: np.ndarray
    v_across: np.ndarray
    theta_m: np.ndarray
    v_m: np.ndarray
    a_m: np.ndarray  # m/s^2
    valid: np.ndarray  # bool; False marks degenerate geometry, excluded downstream
    period: float

    def __len__(self):
        return len(self.t)

    @property
    def a_m_g(self) -> np.ndarray:
        return self.a_m / G

    def point(self, i: int) -> ReconstructionPoint:
        return ReconstructionPoint(
            t=float(self.t[i]),
            v_along=float(self.v_along[i]),
            v_across=float(self.v_across[i]),
            theta_m_hat=float(self.theta_m[i]),
            v_m_hat=float(self.v_m[i]),
            a_m_hat=float(self.a_m[i]),
            valid=bool(self.valid[i]),
        )

    def points(self):
        return [self.point(i) for i in range(len(self))]

    def to_csv(self, path):
        rows = np.column_stack(
            [self.t, self.v_along, self.v_across, self.theta_m, self.v_m,
             self.a_m, self.valid.astype(float)]
        )
        with open(Path(path), "w") as fh:
            fh.write(f"# period={self.period}\n")
            fh.write(RECONSTRUCTION_CSV_HEADER + "\n")
            np.savetxt(fh, rows, fmt="%.12g", delimiter=",")


@dataclass(frozen=True)
class GuidanceSolution:
    """Least-squares estimate of the PN gain and lateral time constant."""

    pn_gain: float
    time_constant: float  # s
    residual: float  # RMS of the fitted linear system, m/s^2
    count: int  # instants used

    def __post_init__(self):
        if self.residual < 0:
            raise ValueError("residual must be >= 0")

    def to_csv(self, path):
        with open(Path(path), "w") as fh:
            fh.write("N_hat,tau_hat,residual,count\n")
            fh.write(
                f"{self.pn_gain:.12g},{self.time_constant:.12g},"
                f"{self.residual:.12g},{self.count}\n"
            )


def reconstruct(
    features: FeatureSeries,
    range_rate: np.ndarray,
    window: int = DEFAULT_SMOOTH_WINDOW,
    min_speed: float = 1e-3,
) -> ReconstructionSeries:
    """Recover the missile's path angle, speed and lateral acceleration.

    ``range_rate`` is V_R per tick (negative while closing), either the
    exact value or an estimate differenced from the range measurements.
    Subtracting the aircraft velocity from the relative velocity resolved
    along/across the LOS leaves the missile velocity components; the speed
    rotation rate then gives the lateral acceleration through the turn
    equation.  Points with a collapsed velocity solution are flagged
    invalid and skipped by the parameter solve.
    """

    v_r = np.asarray(range_rate, dtype=float)
    if len(v_r) != len(features):
        raise InsufficientDataError("range_rate length must match features")
    if len(features) < 2:
        raise InsufficientDataError("need at least 2 ticks to reconstruct")

    off = features.theta_a - features.q
    v_along = -v_r - features.v_a * np.cos(off)
    v_across = -features.q_dot * features.r + features.v_a * np.sin(off)
    theta_m = np.arctan2(v_across, v_along) + features.q
    v_m = np.hypot(v_along, v_across)
    valid = np.isfinite(v_m) & (v_m > min_speed)

    # turn rate from the reconstructed path angle; unwrap first so a branch
    # crossing in atan2 cannot fake a spike
    theta_dot = smoothed_difference(np.unwrap(theta_m), features.period, window)
    a_m = v_m * theta_dot + G * np.cos(theta_m)

    return ReconstructionSeries(
        t=features.t.copy(),
        v_along=v_along,
        v_across=v_across,
        theta_m=theta_m,
        v_m=v_m,
        a_m=a_m,
        valid=valid,
        period=features.period,
    )


def solve_guidance_params(
    recon: ReconstructionSeries,
    closing_speed: np.ndarray,
    los_rate: np.ndarray,
    period: float = None,
) -> GuidanceSolution:
    """Fit the lagged PN model to the reconstructed lateral acceleration.

    Each usable instant contributes one equation
    ``a_t = N (V_c qdot)_t - tau (a_t - a_{t-1}) / T_p`` and the stack is
    solved jointly by linear least squares, which stays meaningful when the
    per-instant equalities are only approximate.
    """

    if period is None:
        period = recon.period
    v_c = np.asarray(closing_speed, dtype=float)
    q_dot = np.asarray(los_rate, dtype=float)
    n = len(recon)
    if not (len(v_c) == len(q_dot) == n):
        raise InsufficientDataError("closing_speed/los_rate length mismatch")

    use = recon.valid[1:] & recon.valid[:-1]
    a_t = recon.a_m[1:][use]
    a_prev = recon.a_m[:-1][use]
    u_t = (v_c[1:] * q_dot[1:])[use]
    count = int(use.sum())
    if count < 2:
        raise InsufficientDataError("need at least 2 usable instants")

    a_dot = (a_t - a_prev) / period
    design = np.column_stack([u_t, -a_dot])
    coeffs, _, rank, _ = np.linalg.lstsq(design, a_t, rcond=None)
    if rank < 2:
        raise UnidentifiableError(
            "singular identification system (e.g. LOS rate identically zero)"
        )
    resid = design @ coeffs - a_t
    return GuidanceSolution(
        pn_gain=float(coeffs[0]),
        time_constant=float(coeffs[1]),
        residual=float(np.sqrt(np.mean(resid**2))),
        count=count,
    )
