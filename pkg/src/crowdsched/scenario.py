"""Scenario specs, random generation, and the JSON scenario file format.

A scenario file is a versioned JSON document::

    {
      "format": "crowdsched-scenario",
      "version": 1,
      "spec": {...} | null,          # generating ScenarioSpec, if any
      "width": 30.0, "height": 30.0,  # km
      "uavs":     [{"id", "loc": [x, y], "speed", "full_power", "power", "radius",
                    "window": [uptime, downtime]}],
      "workers":  [{"id", "loc", "speed", "radius", "window"}],
      "vehicles": [{"id", "loc", "speed", "radius", "charge_power", "window"}],
      "tasks":    [{"id", "loc", "cost_power"}],
      "charge_points": [{"id", "loc"}]
    }
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .world import (
    ChargePoint,
    InvalidScenario,
    OnlineWindow,
    Position,
    TaskPoint,
    Uav,
    Vehicle,
    Worker,
    validate_agent,
    within_bounds,
)

FORMAT = "crowdsched-scenario"
VERSION = 1

Range = Union[float, tuple[float, float]]


@dataclass(frozen=True)
class ScenarioSpec:
    name: str = "custom"
    width: float = 30.0
    height: float = 30.0
    tasks_number: int = 80
    charges_number: int = 20
    # (workers, uavs, vehicles)
    agents_number: tuple[int, int, int] = (50, 30, 20)
    online_time: float = 60.0
    limit_time: float = 180.0
    task_cost: Range = 3.0
    charging_power: Range = 10.0
    radius: float = 8.0
    uav_speed: float = 1.0
    worker_speed: float = 0.5
    vehicle_speed: float = 0.8
    uav_full_power: float = 30.0
    seed: int = 0

    def validate(self) -> None:
        if self.width < 1 or self.height < 1:
            raise InvalidScenario(f"area must be at least 1x1, got {self.width}x{self.height}")
        counts = (self.tasks_number, self.charges_number, *self.agents_number)
        if any(c < 0 for c in counts):
            raise InvalidScenario(f"entity counts must be non-negative, got {counts}")
        for name in ("task_cost", "charging_power"):
            lo, hi = _bounds(getattr(self, name))
            if not (0 < lo <= hi):
                raise InvalidScenario(f"{name} must be positive with lo <= hi, got {getattr(self, name)}")
        if not (0 < self.online_time <= self.limit_time):
            raise InvalidScenario(
                f"online_time must be in (0, limit_time], got {self.online_time} vs {self.limit_time}")
        if self.agents_number[1] > 0 and self.charges_number == 0:
            raise InvalidScenario("UAVs need at least one charge point to return to")
        for name in ("radius", "uav_speed", "worker_speed", "vehicle_speed", "uav_full_power"):
            if not getattr(self, name) > 0:
                raise InvalidScenario(f"{name} must be positive")


def _bounds(r: Range) -> tuple[float, float]:
    if isinstance(r, (tuple, list)):
        return float(r[0]), float(r[1])
    return float(r), float(r)


def _table_row(name, area, tasks, charges, online, agents, cost, power) -> ScenarioSpec:
    return ScenarioSpec(name=name, width=area[0], height=area[1], tasks_number=tasks,
                        charges_number=charges, online_time=online, agents_number=agents,
                        task_cost=cost, charging_power=power)


PRESETS: dict[str, ScenarioSpec] = {
    s.name: s for s in [
        _table_row("Random_1", (30, 30), 80, 20, 60, (50, 30, 20), 3, 10),
        _table_row("Random_2", (20, 20), 80, 20, 60, (50, 30, 20), 3, 10),
        _table_row("Random_3", (40, 40), 80, 20, 60, (50, 30, 20), 3, 10),
        _table_row("Random_4", (30, 30), 60, 20, 60, (50, 30, 20), 3, 10),
        _table_row("Random_5", (30, 30), 100, 20, 60, (50, 30, 20), 3, 10),
        _table_row("Random_6", (30, 30), 80, 15, 60, (50, 30, 20), 3, 10),
        _table_row("Random_7", (30, 30), 80, 25, 60, (50, 30, 20), 3, 10),
        _table_row("Random_8", (30, 30), 80, 20, 40, (50, 30, 20), 3, 10),
        _table_row("Random_9", (30, 30), 80, 20, 80, (50, 30, 20), 3, 10),
        _table_row("Random_10", (30, 30), 80, 20, 60, (30, 20, 10), 3, 10),
        _table_row("Random_11", (30, 30), 80, 20, 60, (70, 40, 30), 3, 10),
        _table_row("Random_12", (30, 30), 80, 20, 60, (30, 30, 20), 3, 10),
        _table_row("Random_13", (30, 30), 80, 20, 60, (70, 30, 20), 3, 10),
        _table_row("Random_14", (30, 30), 80, 20, 60, (50, 20, 20), 3, 10),
        _table_row("Random_15", (30, 30), 80, 20, 60, (50, 40, 20), 3, 10),
        _table_row("Random_16", (30, 30), 80, 20, 60, (50, 30, 10), 3, 10),
        _table_row("Random_17", (30, 30), 80, 20, 60, (50, 30, 30), 3, 10),
        _table_row("Random_18", (30, 30), 80, 20, 60, (50, 30, 20), 2, 10),
        _table_row("Random_19", (30, 30), 80, 20, 60, (50, 30, 20), 4, 10),
        _table_row("Random_20", (30, 30), 80, 20, 60, (50, 30, 20), (2, 3), 10),
        _table_row("Random_21", (30, 30), 80, 20, 60, (50, 30, 20), (3, 4), 10),
        _table_row("Random_22", (30, 30), 80, 20, 60, (50, 30, 20), (4, 5), 10),
        _table_row("Random_23", (30, 30), 80, 20, 60, (50, 30, 20), 3, 8),
        _table_row("Random_24", (30, 30), 80, 20, 60, (50, 30, 20), 3, 12),
        _table_row("Random_25", (30, 30), 80, 20, 60, (50, 30, 20), 3, (6, 8)),
        _table_row("Random_26", (30, 30), 80, 20, 60, (50, 30, 20), 3, (8, 10)),
        _table_row("Random_27", (30, 30), 80, 20, 60, (50, 30, 20), 3, (10, 12)),
    ]
}


def preset(name: str, **overrides) -> ScenarioSpec:
    try:
        spec = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(PRESETS)}") from None
    return replace(spec, **overrides)


@dataclass
class ScenarioFile:
    width: float
    height: float
    uavs: list[Uav]
    workers: list[Worker]
    vehicles: list[Vehicle]
    tasks: list[TaskPoint]
    charge_points: list[ChargePoint]
    spec: Optional[ScenarioSpec] = None
    version: int = VERSION

    def validate(self) -> None:
        for a in [*self.uavs, *self.workers, *self.vehicles]:
            validate_agent(a)
            if not within_bounds(a.loc, self.width, self.height):
                raise InvalidScenario(f"{a.kind} {a.id}: position {a.loc} outside the area")
        for t in self.tasks:
            if not t.cost_power > 0:
                raise InvalidScenario(f"task {t.id}: cost_power must be positive, got {t.cost_power}")
            if not within_bounds(t.loc, self.width, self.height):
                raise InvalidScenario(f"task {t.id}: position {t.loc} outside the area")
        for c in self.charge_points:
            if not within_bounds(c.loc, self.width, self.height):
                raise InvalidScenario(f"charge point {c.id}: position {c.loc} outside the area")
        for kind, items in (("uav", self.uavs), ("worker", self.workers), ("vehicle", self.vehicles),
                            ("task", self.tasks), ("charge point", self.charge_points)):
            ids = [e.id for e in items]
            if len(ids) != len(set(ids)):
                raise InvalidScenario(f"duplicate {kind} ids")
        if self.uavs and not self.charge_points:
            raise InvalidScenario("UAVs need at least one charge point to return to")

    def with_radius(self, radius: float) -> "ScenarioFile":
        return replace(
            self,
            uavs=[replace(u, radius=radius) for u in self.uavs],
            workers=[replace(w, radius=radius) for w in self.workers],
            vehicles=[replace(v, radius=radius) for v in self.vehicles],
        )


def generate(spec: ScenarioSpec) -> ScenarioFile:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n_workers, n_uavs, n_vehicles = spec.agents_number

    def positions(n):
        xy = rng.uniform((0.0, 0.0), (spec.width, spec.height), size=(n, 2))
        return [Position(float(x), float(y)) for x, y in xy]

    def windows(n):
        ups = rng.uniform(0.0, spec.limit_time - spec.online_time, size=n)
        return [OnlineWindow(float(u), float(u) + spec.online_time) for u in ups]

    def draw(r: Range, n):
        lo, hi = _bounds(r)
        return [lo] * n if lo == hi else [float(v) for v in rng.uniform(lo, hi, size=n)]

    tasks = [TaskPoint(i, p, c) for i, (p, c) in
             enumerate(zip(positions(spec.tasks_number), draw(spec.task_cost, spec.tasks_number)))]
    charges = [ChargePoint(i, p) for i, p in enumerate(positions(spec.charges_number))]
    workers = [Worker(i, p, spec.worker_speed, spec.radius, w)
               for i, (p, w) in enumerate(zip(positions(n_workers), windows(n_workers)))]
    uavs = [Uav(i, p, spec.uav_speed, spec.uav_full_power, spec.uav_full_power, spec.radius, w)
            for i, (p, w) in enumerate(zip(positions(n_uavs), windows(n_uavs)))]
    powers = draw(spec.charging_power, n_vehicles)
    vehicles = [Vehicle(i, p, spec.vehicle_speed, spec.radius, cp, w)
                for i, (p, w, cp) in enumerate(zip(positions(n_vehicles), windows(n_vehicles), powers))]
    scen = ScenarioFile(spec.width, spec.height, uavs, workers, vehicles, tasks, charges, spec)
    scen.validate()
    return scen


# ---------------------------------------------------------------- file I/O

class ScenarioParseError(ValueError):
    pass


def _loc(p: Position):
    return [p.x, p.y]


def to_dict(scen: ScenarioFile) -> dict:
    spec = None
    if scen.spec is not None:
        spec = asdict(scen.spec)
        spec["agents_number"] = list(scen.spec.agents_number)
    return {
        "format": FORMAT,
        "version": scen.version,
        "spec": spec,
        "width": scen.width,
        "height": scen.height,
        "uavs": [{"id": u.id, "loc": _loc(u.loc), "speed": u.speed, "full_power": u.full_power,
                  "power": u.power, "radius": u.radius,
                  "window": [u.window.uptime, u.window.downtime]} for u in scen.uavs],
        "workers": [{"id": w.id, "loc": _loc(w.loc), "speed": w.speed, "radius": w.radius,
                     "window": [w.window.uptime, w.window.downtime]} for w in scen.workers],
        "vehicles": [{"id": v.id, "loc": _loc(v.loc), "speed": v.speed, "radius": v.radius,
                      "charge_power": v.charge_power,
                      "window": [v.window.uptime, v.window.downtime]} for v in scen.vehicles],
        "tasks": [{"id": t.id, "loc": _loc(t.loc), "cost_power": t.cost_power} for t in scen.tasks],
        "charge_points": [{"id": c.id, "loc": _loc(c.loc)} for c in scen.charge_points],
    }


def _field(rec: dict, name: str, where: str):
    try:
        return rec[name]
    except (KeyError, TypeError):
        raise ScenarioParseError(f"{where}: missing field {name!r}") from None


def _num(rec, name, where) -> float:
    v = _field(rec, name, where)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioParseError(f"{where}: field {name!r} must be a number, got {v!r}")
    return float(v)


def _pos(rec, where) -> Position:
    v = _field(rec, "loc", where)
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(c, (int, float)) for c in v)):
        raise ScenarioParseError(f"{where}: field 'loc' must be [x, y], got {v!r}")
    return Position(float(v[0]), float(v[1]))


def _window(rec, where) -> OnlineWindow:
    v = _field(rec, "window", where)
    if not (isinstance(v, list) and len(v) == 2):
        raise ScenarioParseError(f"{where}: field 'window' must be [uptime, downtime], got {v!r}")
    return OnlineWindow(float(v[0]), float(v[1]))


def _spec_from(d) -> Optional[ScenarioSpec]:
    if d is None:
        return None
    d = dict(d)
    d["agents_number"] = tuple(d["agents_number"])
    for k in ("task_cost", "charging_power"):
        if isinstance(d.get(k), list):
            d[k] = tuple(d[k])
    return ScenarioSpec(**d)


def from_dict(doc: dict) -> ScenarioFile:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ScenarioParseError(f"not a {FORMAT} document")
    version = doc.get("version")
    if version != VERSION:
        raise ScenarioParseError(f"unsupported scenario version {version!r} (expected {VERSION})")

    def items(name):
        v = _field(doc, name, "scenario")
        if not isinstance(v, list):
            raise ScenarioParseError(f"scenario: field {name!r} must be a list")
        return v

    uavs = [Uav(int(_num(r, "id", f"uavs[{i}]")), _pos(r, f"uavs[{i}]"), _num(r, "speed", f"uavs[{i}]"),
                _num(r, "full_power", f"uavs[{i}]"), _num(r, "power", f"uavs[{i}]"),
                _num(r, "radius", f"uavs[{i}]"), _window(r, f"uavs[{i}]"))
            for i, r in enumerate(items("uavs"))]
    workers = [Worker(int(_num(r, "id", f"workers[{i}]")), _pos(r, f"workers[{i}]"),
                      _num(r, "speed", f"workers[{i}]"), _num(r, "radius", f"workers[{i}]"),
                      _window(r, f"workers[{i}]"))
               for i, r in enumerate(items("workers"))]
    vehicles = [Vehicle(int(_num(r, "id", f"vehicles[{i}]")), _pos(r, f"vehicles[{i}]"),
                        _num(r, "speed", f"vehicles[{i}]"), _num(r, "radius", f"vehicles[{i}]"),
                        _num(r, "charge_power", f"vehicles[{i}]"), _window(r, f"vehicles[{i}]"))
                for i, r in enumerate(items("vehicles"))]
    tasks = [TaskPoint(int(_num(r, "id", f"tasks[{i}]")), _pos(r, f"tasks[{i}]"),
                       _num(r, "cost_power", f"tasks[{i}]"))
             for i, r in enumerate(items("tasks"))]
    charges = [ChargePoint(int(_num(r, "id", f"charge_points[{i}]")), _pos(r, f"charge_points[{i}]"))
               for i, r in enumerate(items("charge_points"))]
    scen = ScenarioFile(_num(doc, "width", "scenario"), _num(doc, "height", "scenario"),
                        uavs, workers, vehicles, tasks, charges, _spec_from(doc.get("spec")), version)
    scen.validate()
    return scen


def save(scen: ScenarioFile, path) -> None:
    Path(path).write_text(json.dumps(to_dict(scen), indent=1) + "\n")


def load(path) -> ScenarioFile:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioParseError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    return from_dict(doc)
