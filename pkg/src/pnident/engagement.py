"""Planar missile-vs-aircraft engagement simulator.

A pursuing missile flies proportional navigation (PN) against an aircraft
performing a bang-bang evasive maneuver.  Both vehicles have first-order
lateral dynamics; the missile additionally has thrust/drag speed dynamics.
The engagement is described in polar coordinates: range ``R`` and
line-of-sight (LOS) angle ``q``, with flight-path angles ``theta_A`` and
``theta_M`` measured so that both velocity components along the LOS add to
the closing speed when the vehicles approach head-on.

State conventions (all SI, angles in rad):

    Rdot   = V_R = -[V_A cos(theta_A - q) + V_M cos(theta_M - q)]
    qdot   = [V_A sin(theta_A - q) - V_M sin(theta_M - q)] / R
    adot_i = (a_ci - a_i) / tau_i
    thdot_i = (a_i - g cos(theta_i)) / V_i
    Vdot_M = (T - D)/m - g sin(theta_M),   D = (rho V^2 / 2) delta_d C_D(Ma) S

The missile command is PN, ``a_cM = N V_c qdot`` with closing speed
``V_c = -V_R``; the aircraft command is a square wave of amplitude
``eta * g``.  Integration is fixed-step RK4 with the guidance commands
evaluated at every stage, so the closed loop retains fourth-order accuracy
between maneuver switch times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateGeometryError, NumericalBlowupError

G = 9.8  # m/s^2
SPEED_OF_SOUND = 340.0  # m/s
AIR_DENSITY = 1.225  # kg/m^3, constant (planar, altitude-free model)

# Generic supersonic-missile drag curve (Mach, C_D); linearly interpolated,
# clamped outside the table.  Placeholder numbers, configurable per scenario.
DEFAULT_DRAG_TABLE = (
    (0.5, 0.30),
    (0.9, 0.35),
    (1.1, 0.55),
    (1.5, 0.45),
    (2.0, 0.38),
    (3.0, 0.32),
)

TRAJECTORY_CSV_HEADER = "t,R,q,theta_A,theta_M,V_M,a_A,a_M,a_cA,a_cM"


@dataclass(frozen=True)
class MissileParams:
    """Pursuer configuration: PN gain, lateral lag and airframe constants."""

    pn_gain: float
    time_constant: float  # s, first-order lateral lag
    initial_speed: float  # m/s
    initial_path_angle: float = 0.0  # rad
    mass: float = 100.0  # kg
    thrust: float = 0.0  # N
    ref_area: float = 0.101  # m^2
    drag_table: tuple = DEFAULT_DRAG_TABLE
    drag_scale: float = 1.0  # multiplies the interpolated C_D

    def __post_init__(self):
        if self.pn_gain <= 0:
            raise ConfigurationError("pn_gain must be > 0")
        if self.time_constant <= 0:
            raise ConfigurationError("time_constant must be > 0")
        if self.initial_speed <= 0:
            raise ConfigurationError("initial_speed must be > 0")
        if self.mass <= 0:
            raise ConfigurationError("mass must be > 0")
        if self.ref_area <= 0:
            raise ConfigurationError("ref_area must be > 0")
        if self.drag_scale <= 0:
            raise ConfigurationError("drag_scale must be > 0")
        machs = [m for m, _ in self.drag_table]
        if len(machs) < 1 or any(b <= a for a, b in zip(machs, machs[1:])):
            raise ConfigurationError("drag_table Mach values must be strictly increasing")


@dataclass(frozen=True)
class AircraftParams:
    """Evader configuration: constant speed, lateral lag, bang-bang maneuver."""

    speed: float  # m/s, constant
    initial_path_angle: float = 0.0  # rad
    time_constant: float = 0.6  # s
    maneuver_amp_g: float = 8.0  # g units
    maneuver_freq: float = 0.125  # Hz, full square-wave period is 1/freq
    maneuver_phase: float = 0.0  # s

    def __post_init__(self):
        if self.speed <= 0:
            raise ConfigurationError("speed must be > 0")
        if self.time_constant <= 0:
            raise ConfigurationError("time_constant must be > 0")
        if self.maneuver_amp_g < 0:
            raise ConfigurationError("maneuver_amp_g must be >= 0")
        if self.maneuver_freq <= 0:
            raise ConfigurationError("maneuver_freq must be > 0")


@dataclass(frozen=True)
class SimLimits:
    """Termination thresholds for :func:`simulate`."""

    min_range: float = 50.0  # m
    max_time: float = 30.0  # s

    def __post_init__(self):
        if self.min_range <= 0:
            raise ConfigurationError("min_range must be > 0")
        if self.max_time <= 0:
            raise ConfigurationError("max_time must be > 0")


@dataclass(frozen=True)
class EngagementState:
    """Instantaneous engagement state, commands included."""

    t: float
    r: float  # range R, m
    q: float  # LOS angle, rad
    theta_a: float
    theta_m: float
    v_m: float
    a_a: float  # achieved lateral accelerations, m/s^2
    a_m: float
    cmd_a: float  # commands a_cA, a_cM, m/s^2
    cmd_m: float

    def __post_init__(self):
        if self.r <= 0:
            raise ConfigurationError("range must be > 0")
        if self.v_m <= 0:
            raise ConfigurationError("missile speed must be > 0")


def relative_kinematics(r, q, theta_a, theta_m, v_a, v_m):
    """Range rate ``V_R`` and LOS rate ``qdot`` of the engagement geometry.

    Accepts scalars or broadcastable arrays.  ``V_R`` is negative while the
    vehicles close; the closing speed is ``V_c = -V_R``.
    """
    if np.any(np.asarray(r) <= 0):
        raise DegenerateGeometryError("range must be > 0")
    v_r = -(v_a * np.cos(theta_a - q) + v_m * np.cos(theta_m - q))
    q_dot = (v_a * np.sin(theta_a - q) - v_m * np.sin(theta_m - q)) / r
    return v_r, q_dot


def pn_command(gain, v_r, q_dot):
    """PN lateral acceleration command ``a_c = N V_c qdot`` with ``V_c = -V_R``."""
    return -gain * v_r * q_dot


def bang_bang_command(t, aircraft: AircraftParams):
    """Square-wave evasive command: +amp on the first half of each period."""
    amp = aircraft.maneuver_amp_g * G
    period = 1.0 / aircraft.maneuver_freq
    u = (t - aircraft.maneuver_phase) % period
    return np.where(u < 0.5 * period, amp, -amp) if isinstance(u, np.ndarray) else (
        amp if u < 0.5 * period else -amp
    )


def drag_coefficient(mach, drag_table=DEFAULT_DRAG_TABLE, drag_scale=1.0):
    """Piecewise-linear C_D(Mach), clamped at the table ends and scaled."""
    machs = np.array([m for m, _ in drag_table])
    cds = np.array([c for _, c in drag_table])
    return drag_scale * np.interp(mach, machs, cds)


def speed_derivative(v, theta_m, missile: MissileParams, rho=AIR_DENSITY):
    """Missile speed rate including thrust, drag and the gravity component."""
    if np.any(np.asarray(v) <= 0):
        raise ConfigurationError("speed must be > 0")
    cd = drag_coefficient(v / SPEED_OF_SOUND, missile.drag_table, missile.drag_scale)
    drag = 0.5 * rho * v * v * cd * missile.ref_area
    return (missile.thrust - drag) / missile.mass - G * np.sin(theta_m)


def lag_update(a, a_c, tau, dt):
    """One RK4 step of the first-order lag ``adot = (a_c - a)/tau``.

    The command is held constant over the step; the exact solution is
    ``a_c + (a - a_c) exp(-dt/tau)`` and the RK4 step matches it to O(dt^5).
    """
    if tau <= 0 or dt <= 0:
        raise ConfigurationError("tau and dt must be > 0")
    x = dt / tau
    # RK4 applied to a linear ODE reduces to the quartic Taylor polynomial.
    decay = 1.0 - x + x * x / 2.0 - x ** 3 / 6.0 + x ** 4 / 24.0
    return a_c + (a - a_c) * decay


# --- integration core -------------------------------------------------------

# State vector layout used by the integrator.
_R, _Q, _THA, _THM, _VM, _AA, _AM = range(7)


def _commands(t, y, missile, aircraft):
    """Guidance commands (aircraft, missile) for state ``y`` at time ``t``."""
    r, q, th_a, th_m, v_m = y[_R], y[_Q], y[_THA], y[_THM], y[_VM]
    if r <= 0:
        raise DegenerateGeometryError(f"range {r:.3g} m is not positive")
    v_a = aircraft.speed
    v_r = -(v_a * math.cos(th_a - q) + v_m * math.cos(th_m - q))
    q_dot = (v_a * math.sin(th_a - q) - v_m * math.sin(th_m - q)) / r
    amp = aircraft.maneuver_amp_g * G
    period = 1.0 / aircraft.maneuver_freq
    u = (t - aircraft.maneuver_phase) % period
    cmd_a = amp if u < 0.5 * period else -amp
    cmd_m = -missile.pn_gain * v_r * q_dot
    return cmd_a, cmd_m


def _deriv(t, y, missile, aircraft, machs, cds):
    r, q, th_a, th_m, v_m, a_a, a_m = y
    if r <= 0:
        raise DegenerateGeometryError(f"range {r:.3g} m is not positive")
    v_a = aircraft.speed
    cos_a = math.cos(th_a - q)
    cos_m = math.cos(th_m - q)
    sin_a = math.sin(th_a - q)
    sin_m = math.sin(th_m - q)
    v_r = -(v_a * cos_a + v_m * cos_m)
    q_dot = (v_a * sin_a - v_m * sin_m) / r

    amp = aircraft.maneuver_amp_g * G
    period = 1.0 / aircraft.maneuver_freq
    u = (t - aircraft.maneuver_phase) % period
    cmd_a = amp if u < 0.5 * period else -amp
    cmd_m = -missile.pn_gain * v_r * q_dot

    # Piecewise-linear drag table, clamped at the ends.
    mach = v_m / SPEED_OF_SOUND
    if mach <= machs[0]:
        cd = cds[0]
    elif mach >= machs[-1]:
        cd = cds[-1]
    else:
        k = 1
        while machs[k] < mach:
            k += 1
        w = (mach - machs[k - 1]) / (machs[k] - machs[k - 1])
        cd = cds[k - 1] + w * (cds[k] - cds[k - 1])
    drag = 0.5 * AIR_DENSITY * v_m * v_m * missile.drag_scale * cd * missile.ref_area

    return (
        v_r,
        q_dot,
        (a_a - G * math.cos(th_a)) / v_a,
        (a_m - G * math.cos(th_m)) / v_m,
        (missile.thrust - drag) / missile.mass - G * math.sin(th_m),
        (cmd_a - a_a) / aircraft.time_constant,
        (cmd_m - a_m) / missile.time_constant,
    )


def _rk4_step(t, y, missile, aircraft, dt, machs, cds):
    k1 = _deriv(t, y, missile, aircraft, machs, cds)
    y2 = tuple(yi + 0.5 * dt * ki for yi, ki in zip(y, k1))
    k2 = _deriv(t + 0.5 * dt, y2, missile, aircraft, machs, cds)
    y3 = tuple(yi + 0.5 * dt * ki for yi, ki in zip(y, k2))
    k3 = _deriv(t + 0.5 * dt, y3, missile, aircraft, machs, cds)
    y4 = tuple(yi + dt * ki for yi, ki in zip(y, k3))
    k4 = _deriv(t + dt, y4, missile, aircraft, machs, cds)
    return tuple(
        yi + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d)
        for yi, a, b, c, d in zip(y, k1, k2, k3, k4)
    )


def _drag_arrays(missile):
    return (
        tuple(m for m, _ in missile.drag_table),
        tuple(c for _, c in missile.drag_table),
    )


def integrate_step(
    state: EngagementState,
    missile: MissileParams,
    aircraft: AircraftParams,
    dt: float,
) -> EngagementState:
    """Advance the engagement one RK4 step of size ``dt``."""
    y = (state.r, state.q, state.theta_a, state.theta_m, state.v_m, state.a_a,
         state.a_m)
    machs, cds = _drag_arrays(missile)
    y_next = _rk4_step(state.t, y, missile, aircraft, dt, machs, cds)
    t_next = state.t + dt
    cmd_a, cmd_m = _commands(t_next, y_next, missile, aircraft)
    return EngagementState(t_next, *y_next, cmd_a, cmd_m)


@dataclass
class Trajectory:
    """Dense engagement history on a uniform time grid.

    Column arrays all share the same length; ``termination`` is one of
    ``"min_range"``, ``"opening"`` or ``"time_limit"``.
    """

    missile: MissileParams
    aircraft: AircraftParams
    initial_range: float
    initial_los_angle: float
    dt: float
    limits: SimLimits
    t: np.ndarray = field(repr=False, default=None)
    r: np.ndarray = field(repr=False, default=None)
    q: np.ndarray = field(repr=False, default=None)
    theta_a: np.ndarray = field(repr=False, default=None)
    theta_m: np.ndarray = field(repr=False, default=None)
    v_m: np.ndarray = field(repr=False, default=None)
    a_a: np.ndarray = field(repr=False, default=None)
    a_m: np.ndarray = field(repr=False, default=None)
    cmd_a: np.ndarray = field(repr=False, default=None)
    cmd_m: np.ndarray = field(repr=False, default=None)
    termination: str = ""
    traj_id: str = ""

    def __len__(self):
        return len(self.t)

    @property
    def miss_distance(self):
        return float(np.min(self.r))

    @property
    def flight_time(self):
        return float(self.t[-1])

    def relative_rates(self):
        """(V_R, qdot) recomputed from the recorded states."""
        return relative_kinematics(
            self.r, self.q, self.theta_a, self.theta_m, self.aircraft.speed, self.v_m
        )

    def columns(self):
        return np.column_stack(
            [self.t, self.r, self.q, self.theta_a, self.theta_m, self.v_m,
             self.a_a, self.a_m, self.cmd_a, self.cmd_m]
        )

    def to_csv(self, path):
        np.savetxt(
            path,
            self.columns(),
            delimiter=",",
            header=TRAJECTORY_CSV_HEADER,
            comments="",
            fmt="%.12g",
        )

    def state_at(self, i: int) -> EngagementState:
        return EngagementState(
            float(self.t[i]), float(self.r[i]), float(self.q[i]),
            float(self.theta_a[i]), float(self.theta_m[i]), float(self.v_m[i]),
            float(self.a_a[i]), float(self.a_m[i]),
            float(self.cmd_a[i]), float(self.cmd_m[i]),
        )


def simulate(
    missile: MissileParams,
    aircraft: AircraftParams,
    initial_range: float,
    initial_los_angle: float = 0.0,
    dt: float = 1e-3,
    limits: SimLimits = SimLimits(),
    traj_id: str = "",
) -> Trajectory:
    """Propagate the engagement until intercept range, opening geometry or timeout.

    The returned trajectory includes the initial state and the first state
    satisfying a termination condition; the grid step is exactly ``dt``.
    Deterministic: same arguments give a bit-identical result.
    """
    if initial_range <= 0:
        raise ConfigurationError("initial_range must be > 0")
    if dt <= 0:
        raise ConfigurationError("dt must be > 0")

    machs, cds = _drag_arrays(missile)
    y = (
        initial_range,
        initial_los_angle,
        aircraft.initial_path_angle,
        missile.initial_path_angle,
        missile.initial_speed,
        0.0,
        0.0,
    )
    max_steps = int(math.ceil(limits.max_time / dt)) + 2
    rows = np.empty((max_steps + 1, 10))
    termination = ""
    n = 0
    step = 0
    while True:
        t = step * dt
        cmd_a, cmd_m = _commands(t, y, missile, aircraft)
        rows[n] = (t,) + y + (cmd_a, cmd_m)
        n += 1

        v_a = aircraft.speed
        v_r = -(v_a * math.cos(y[_THA] - y[_Q]) + y[_VM] * math.cos(y[_THM] - y[_Q]))
        if y[_R] < limits.min_range:
            termination = "min_range"
            break
        if -v_r <= 0.0:
            termination = "opening"
            break
        if t > limits.max_time:
            termination = "time_limit"
            break

        y = _rk4_step(t, y, missile, aircraft, dt, machs, cds)
        step += 1
        if not all(math.isfinite(v) for v in y):
            raise NumericalBlowupError(step, step * dt)

    data = rows[:n]
    return Trajectory(
        missile=missile,
        aircraft=aircraft,
        initial_range=initial_range,
        initial_los_angle=initial_los_angle,
        dt=dt,
        limits=limits,
        t=np.arange(n) * dt,
        r=data[:, 1].copy(),
        q=data[:, 2].copy(),
        theta_a=data[:, 3].copy(),
        theta_m=data[:, 4].copy(),
        v_m=data[:, 5].copy(),
        a_a=data[:, 6].copy(),
        a_m=data[:, 7].copy(),
        cmd_a=data[:, 8].copy(),
        cmd_m=data[:, 9].copy(),
        termination=termination,
        traj_id=traj_id,
    )
