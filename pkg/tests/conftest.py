import os

import pytest
from hypothesis import HealthCheck, settings

from crowdsched.world import ChargePoint, OnlineWindow, Position, TaskPoint, Uav, Vehicle, Worker, WorldSnapshot

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=400, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

WINDOW = OnlineWindow(0.0, 60.0)


def P(x, y):
    return Position(float(x), float(y))


def uav(i, x, y, power=30.0, full=30.0, speed=1.0, radius=8.0, window=WINDOW):
    return Uav(i, P(x, y), speed, full, power, radius, window)


def worker(i, x, y, speed=0.5, radius=8.0, window=WINDOW):
    return Worker(i, P(x, y), speed, radius, window)


def vehicle(i, x, y, charge_power=10.0, speed=0.8, radius=8.0, window=WINDOW):
    return Vehicle(i, P(x, y), speed, radius, charge_power, window)


def task(i, x, y, cost=3.0, reserved=False):
    return TaskPoint(i, P(x, y), cost, reserved=reserved)


def charge(i, x, y):
    return ChargePoint(i, P(x, y))


def snapshot(uavs=(), workers=(), vehicles=(), tasks=(), charges=(), t=0.0, size=30.0, fixed=None):
    return WorldSnapshot(t, tuple(uavs), tuple(workers), tuple(vehicles), tuple(tasks), tuple(charges),
                         size, size, dict(fixed or {}))


# acceptance summary ------------------------------------------------------

def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config._acceptance_lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
