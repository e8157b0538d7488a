"""Expected-benefit estimation for UAVs and the task/charge role split.

Each UAV compares the immediate benefit of its best task against the
potential benefit of recharging and joins exactly one of two smaller
matching games (uav-worker-task or uav-vehicle-charge).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Union

from .world import (
    ChargePoint,
    TaskPoint,
    Uav,
    WorldSnapshot,
    dis,
    feasible_charge,
    feasible_task,
    in_range,
    nearest,
)


@dataclass(frozen=True)
class TaskBenefit:
    target_task: int
    partner_worker: int
    delta_pow_t: float
    delta_time_t: float
    worker_time: float
    task_time: float
    left_t: float
    pow_sum_t: float
    reward: float


@dataclass(frozen=True)
class ChargeBenefit:
    target_charge: int
    partner_vehicle: int
    delta_pow_c: float
    delta_time_c: float
    vehicle_time: float
    charge_time: float
    left_c: float
    pow_sum_c: float
    reward: float


class Role(enum.Enum):
    TASK = "task"
    CHARGE = "charge"
    IDLE = "idle"


@dataclass(frozen=True)
class UavRole:
    role: Role
    benefit: Optional[Union[TaskBenefit, ChargeBenefit]] = None

    @property
    def is_task(self) -> bool:
        return self.role is Role.TASK

    @property
    def is_charge(self) -> bool:
        return self.role is Role.CHARGE


IDLE = UavRole(Role.IDLE)


def _time_factor(left: float, window_length: float) -> float:
    # negative remaining time is admitted upstream; keep the factor in [0, 1]
    return min(max(left / window_length, 0.0), 1.0)


def task_reward(left_t: float, window_length: float, pow_sum_t: float, full_power: float) -> float:
    return 1.0 - _time_factor(left_t, window_length) * (pow_sum_t / full_power)


def charge_reward(left_c: float, window_length: float, pow_sum_c: float, full_power: float) -> float:
    return _time_factor(left_c, window_length) * (pow_sum_c / full_power)


def feasible_tasks_in_range(uav: Uav, snapshot: WorldSnapshot) -> list[TaskPoint]:
    cps = snapshot.charge_points
    return [t for t in snapshot.open_tasks
            if in_range(uav, t.loc) and feasible_task(uav, t, cps)]


def feasible_charges_in_range(uav: Uav, snapshot: WorldSnapshot) -> list[ChargePoint]:
    return [c for c in snapshot.charge_points
            if in_range(uav, c.loc) and feasible_charge(uav, c)]


def estimate_task_benefit(uav: Uav, snapshot: WorldSnapshot) -> Optional[TaskBenefit]:
    task = nearest(uav.loc, feasible_tasks_in_range(uav, snapshot))
    if task is None:
        return None
    worker = nearest(task.loc, (w for w in snapshot.workers if in_range(uav, w.loc)))
    if worker is None:
        return None

    delta_pow = dis(uav.loc, task.loc)
    delta_time = delta_pow / uav.speed
    worker_time = dis(task.loc, worker.loc) / worker.speed
    task_time = max(delta_time, worker_time) + task.cost_power / uav.speed
    left = uav.window.downtime - snapshot.sys_time - task_time
    pow_sum = delta_pow + task.cost_power
    return TaskBenefit(
        target_task=task.id,
        partner_worker=worker.id,
        delta_pow_t=delta_pow,
        delta_time_t=delta_time,
        worker_time=worker_time,
        task_time=task_time,
        left_t=left,
        pow_sum_t=pow_sum,
        reward=task_reward(left, uav.window.length, pow_sum, uav.full_power),
    )


def estimate_charge_benefit(uav: Uav, snapshot: WorldSnapshot) -> Optional[ChargeBenefit]:
    cp = nearest(uav.loc, feasible_charges_in_range(uav, snapshot))
    if cp is None:
        return None
    vehicle = nearest(cp.loc, (v for v in snapshot.vehicles if in_range(uav, v.loc)))
    if vehicle is None:
        return None

    delta_pow = dis(uav.loc, cp.loc)
    delta_time = delta_pow / uav.speed
    vehicle_time = dis(cp.loc, vehicle.loc) / vehicle.speed
    # power on arrival is uPow - delta_pow, as written
    charge_time = (max(delta_time, vehicle_time)
                   + (uav.full_power - (uav.power - delta_pow)) / vehicle.charge_power)
    left = uav.window.downtime - snapshot.sys_time - charge_time
    pow_sum = uav.full_power - uav.power
    return ChargeBenefit(
        target_charge=cp.id,
        partner_vehicle=vehicle.id,
        delta_pow_c=delta_pow,
        delta_time_c=delta_time,
        vehicle_time=vehicle_time,
        charge_time=charge_time,
        left_c=left,
        pow_sum_c=pow_sum,
        reward=charge_reward(left, uav.window.length, pow_sum, uav.full_power),
    )


def choose_role(task: Optional[TaskBenefit], charge: Optional[ChargeBenefit]) -> UavRole:
    if task is not None and (charge is None or task.reward >= charge.reward):
        return UavRole(Role.TASK, task)
    if charge is not None:
        return UavRole(Role.CHARGE, charge)
    return IDLE


def assign_role(uav: Uav, snapshot: WorldSnapshot) -> UavRole:
    return choose_role(estimate_task_benefit(uav, snapshot),
                       estimate_charge_benefit(uav, snapshot))


def assign_roles(snapshot: WorldSnapshot) -> dict[int, UavRole]:
    """Roles for every online, unlocked UAV, keyed by UAV id."""
    return {u.id: assign_role(u, snapshot) for u in snapshot.uavs
            if not snapshot.is_locked(u.key)}
