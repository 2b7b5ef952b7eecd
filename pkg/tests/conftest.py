"""Shared fixtures: the benchmark engagement used across test modules."""

import pytest

from pnident.engagement import AircraftParams, MissileParams, simulate


@pytest.fixture(scope="session")
def benchmark_traj():
    """Head-on run: N=5, tau=0.30, V_M0=2.25 Ma, V_A=0.9 Ma, R0=7 km."""
    missile = MissileParams(pn_gain=5.0, time_constant=0.30, initial_speed=2.25 * 340.0)
    aircraft = AircraftParams(speed=0.9 * 340.0)
    return simulate(missile, aircraft, 7000.0)
