"""Domain model: agents, task/charge points, and the feasibility rules.

Units throughout: distance in km, time in minutes, speed in km/min, UAV
energy as remaining flight distance in km, charging power in km/min.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

AgentKey = tuple[str, int]

UAV = "uav"
WORKER = "worker"
VEHICLE = "vehicle"
AGENT_KINDS = (UAV, WORKER, VEHICLE)


class InvalidScenario(ValueError):
    """Raised when entity data violates a domain invariant."""


@dataclass(frozen=True)
class Position:
    x: float
    y: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class OnlineWindow:
    uptime: float
    downtime: float

    @property
    def length(self) -> float:
        return self.downtime - self.uptime

    def covers(self, t: float) -> bool:
        # half-open: an agent is gone at its downtime instant
        return self.uptime <= t < self.downtime


@dataclass(frozen=True)
class Uav:
    id: int
    loc: Position
    speed: float
    full_power: float
    power: float
    radius: float
    window: OnlineWindow
    kind: str = field(default=UAV, init=False, repr=False)

    @property
    def key(self) -> AgentKey:
        return (UAV, self.id)


@dataclass(frozen=True)
class Worker:
    id: int
    loc: Position
    speed: float
    radius: float
    window: OnlineWindow
    kind: str = field(default=WORKER, init=False, repr=False)

    @property
    def key(self) -> AgentKey:
        return (WORKER, self.id)


@dataclass(frozen=True)
class Vehicle:
    id: int
    loc: Position
    speed: float
    radius: float
    charge_power: float
    window: OnlineWindow
    kind: str = field(default=VEHICLE, init=False, repr=False)

    @property
    def key(self) -> AgentKey:
        return (VEHICLE, self.id)


Agent = Union[Uav, Worker, Vehicle]


@dataclass(frozen=True)
class TaskPoint:
    id: int
    loc: Position
    cost_power: float
    completed: bool = False
    # reserved: claimed by a locked uav/worker pair, not open for new matching
    reserved: bool = False


@dataclass(frozen=True)
class ChargePoint:
    id: int
    loc: Position


@dataclass(frozen=True)
class WorldSnapshot:
    """Immutable view of the world at one decision epoch.

    ``fixed_actions`` holds the actions of locked agents (mid-task, mid-charge
    or mutually committed); they take part in reward evaluation as neighbours
    but are never resampled.
    """

    sys_time: float
    uavs: tuple[Uav, ...]
    workers: tuple[Worker, ...]
    vehicles: tuple[Vehicle, ...]
    tasks: tuple[TaskPoint, ...]
    charge_points: tuple[ChargePoint, ...]
    width: float
    height: float
    fixed_actions: Mapping[AgentKey, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "_agents", {a.key: a for a in self.agents()})
        object.__setattr__(self, "_tasks", {t.id: t for t in self.tasks})
        object.__setattr__(self, "_charges", {c.id: c for c in self.charge_points})

    def agents(self) -> list[Agent]:
        return [*self.uavs, *self.workers, *self.vehicles]

    def agent(self, key: AgentKey) -> Agent:
        return self._agents[key]

    def task(self, task_id: int) -> TaskPoint:
        return self._tasks[task_id]

    def charge_point(self, charge_id: int) -> ChargePoint:
        return self._charges[charge_id]

    @property
    def open_tasks(self) -> list[TaskPoint]:
        return [t for t in self.tasks if not t.completed and not t.reserved]

    def is_locked(self, key: AgentKey) -> bool:
        return key in self.fixed_actions


def dis(a: Position, b: Position) -> float:
    """Straight-line distance between two points."""
    return math.hypot(a.x - b.x, a.y - b.y)


def in_range(observer: Agent, point: Position) -> bool:
    return dis(observer.loc, point) <= observer.radius


def feasible_charge(uav: Uav, cp: ChargePoint) -> bool:
    """The UAV has enough endurance left to reach the charge point."""
    return dis(cp.loc, uav.loc) <= uav.power


def nearest_charge_distance(point: Position, charge_points: Sequence[ChargePoint]) -> float:
    if not charge_points:
        raise InvalidScenario("no charge points: return-to-charge distance is undefined")
    return min(dis(point, cp.loc) for cp in charge_points)


def feasible_task(uav: Uav, task: TaskPoint, charge_points: Sequence[ChargePoint]) -> bool:
    """Reach the task, pay its cost, and still reach the nearest charge point.

    The nearest charge point is taken over the whole set, not only the ones
    the UAV can currently see.
    """
    need = dis(uav.loc, task.loc) + task.cost_power + nearest_charge_distance(task.loc, charge_points)
    return need <= uav.power


def online_agents(t: float, agents: Iterable[Agent]) -> list[Agent]:
    if t < 0:
        raise ValueError("snapshot time must be non-negative")
    return [a for a in agents if a.window.covers(t)]


def nearest(origin: Position, items: Iterable, loc=lambda e: e.loc):
    """Nearest item to ``origin``; equal distances go to the lowest id."""
    best = None
    best_key = None
    for item in items:
        k = (dis(origin, loc(item)), item.id)
        if best_key is None or k < best_key:
            best, best_key = item, k
    return best


def validate_agent(agent: Agent) -> None:
    """Check the per-entity invariants, naming the offender on failure."""
    name = f"{agent.kind} {agent.id}"
    w = agent.window
    if not (0 <= w.uptime < w.downtime):
        raise InvalidScenario(f"{name}: online window must satisfy 0 <= uptime < downtime, got {w}")
    if not agent.speed > 0:
        raise InvalidScenario(f"{name}: speed must be positive, got {agent.speed}")
    if not agent.radius > 0:
        raise InvalidScenario(f"{name}: radius must be positive, got {agent.radius}")
    if not (math.isfinite(agent.loc.x) and math.isfinite(agent.loc.y)):
        raise InvalidScenario(f"{name}: non-finite position {agent.loc}")
    if isinstance(agent, Uav):
        if not agent.full_power > 0:
            raise InvalidScenario(f"{name}: full_power must be positive, got {agent.full_power}")
        if not (0 <= agent.power <= agent.full_power):
            raise InvalidScenario(
                f"{name}: power {agent.power} outside [0, full_power={agent.full_power}]")
    if isinstance(agent, Vehicle) and not agent.charge_power > 0:
        raise InvalidScenario(f"{name}: charge_power must be positive, got {agent.charge_power}")


def within_bounds(p: Position, width: float, height: float) -> bool:
    return 0 <= p.x <= width and 0 <= p.y <= height
