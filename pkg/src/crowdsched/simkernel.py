"""Discrete-time world evolution.

At every ``t * interval`` the kernel freezes a snapshot of the online
agents, asks the selected scheduler for a joint action, locks matched pairs,
and then integrates movement, rendezvous, task execution and FCFS charging
in ``tick``-minute steps until the next epoch.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .baselines import KwtaConfig, greedy_decide, kwta_decide
from .benefit import assign_roles
from .coupling import coupling_strength_arrays, equilibrium_gap
from .nash_scheduler import (
    CHARGE,
    HOLD,
    TASK,
    Action,
    SchedulerConfig,
    decide_epoch,
    resolve_charge_matches,
    resolve_task_matches,
)
from .scenario import ScenarioFile
from .world import UAV, VEHICLE, WORKER, AgentKey, Position, WorldSnapshot, dis

ALGORITHMS = ("paln", "raln", "greedy", "kwta")

TRAVEL = "travelling"
ARRIVED = "arrived"
IDLE = "idle"
EXECUTING = "executing"
CHARGING = "charging"
QUEUED = "queued"
OFFLINE = "offline"

_TOL = 1e-9


class SimulationError(RuntimeError):
    pass


@dataclass
class SimConfig:
    interval: float = 5.0
    limit_time: float = 180.0
    tick: float = 0.1
    max_rounds: int = 200
    seed: int = 0
    algorithm: str = "paln"
    k1: int = 3
    k2: int = 3
    # False: skip the role split (ablation); only used by paln/raln
    reduce_dimensions: bool = True
    record_coupling: bool = True
    trace: Optional[Callable[[dict], None]] = field(default=None, repr=False, compare=False)

    def validate(self) -> None:
        if not (0 < self.tick <= self.interval <= self.limit_time):
            raise ValueError(f"need 0 < tick <= interval <= limit_time, got "
                             f"{self.tick}, {self.interval}, {self.limit_time}")
        ratio = self.limit_time / self.interval
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("limit_time must be a multiple of interval")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        KwtaConfig(self.k1, self.k2)


@dataclass
class EpochRecord:
    epoch: int
    time: float
    decision_time_s: float
    online_agents: int
    active_agents: int
    rounds_used: int
    converged: bool
    fallback_agents: int
    task_matches: int
    charge_matches: int
    completed_total: int
    epsilon: Optional[float]
    gap_sum_reward: int
    gap_participants: int
    gap_global: int
    alpha_hat: Optional[float]


@dataclass
class ChargeSession:
    vehicle: int
    uav: int
    charge: int
    arrival: float
    start: float
    end: Optional[float] = None
    aborted: bool = False


@dataclass
class MetricsLog:
    algorithm: str
    total_tasks: int
    epochs: list[EpochRecord] = field(default_factory=list)
    completed: int = 0
    completions: list[tuple[float, int, int, int]] = field(default_factory=list)  # time, task, uav, worker
    charge_sessions: list[ChargeSession] = field(default_factory=list)
    travel_km: dict[AgentKey, float] = field(default_factory=dict)
    min_power_margin: float = math.inf   # min over ticks of power
    max_power_excess: float = -math.inf  # max over ticks of power - full_power
    aborted_tasks: int = 0

    @property
    def degenerate(self) -> bool:
        return self.total_tasks == 0

    @property
    def completion_rate(self) -> float:
        return self.completed / self.total_tasks if self.total_tasks else 0.0

    @property
    def mean_decision_time_s(self) -> float:
        ts = [e.decision_time_s for e in self.epochs]
        return float(np.mean(ts)) if ts else 0.0

    @property
    def mean_travel_km(self) -> float:
        return float(np.mean(list(self.travel_km.values()))) if self.travel_km else 0.0

    @property
    def mean_epsilon(self) -> Optional[float]:
        eps = [e.epsilon for e in self.epochs if e.epsilon is not None]
        return float(np.mean(eps)) if eps else None

    @property
    def convergence_failures(self) -> int:
        return sum(1 for e in self.epochs if not e.converged)

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "total_tasks": self.total_tasks,
            "completed": self.completed,
            "completion_rate": self.completion_rate,
            "degenerate": self.degenerate,
            "mean_decision_time_s": self.mean_decision_time_s,
            "mean_travel_km": self.mean_travel_km,
            "mean_epsilon": self.mean_epsilon,
            "convergence_failures": self.convergence_failures,
            "aborted_tasks": self.aborted_tasks,
            "epochs": [vars(e) for e in self.epochs],
            "completions": [list(c) for c in self.completions],
            "charge_sessions": [vars(s) for s in self.charge_sessions],
            "travel_km": {f"{k[0]}:{k[1]}": v for k, v in self.travel_km.items()},
        }


class _Agent:
    """Mutable runtime state of one agent."""

    __slots__ = ("base", "key", "x", "y", "power", "online", "gone", "action", "locked",
                 "phase", "arrival", "travelled")

    def __init__(self, base):
        self.base = base
        self.key = base.key
        self.x, self.y = base.loc.x, base.loc.y
        self.power = getattr(base, "power", None)
        self.online = False
        self.gone = False
        self.action: Action = Action.hold(self.key)
        self.locked = False
        self.phase = IDLE
        self.arrival: Optional[float] = None
        self.travelled = 0.0

    @property
    def loc(self) -> Position:
        return Position(self.x, self.y)

    def frozen(self):
        if self.key[0] == UAV:
            return replace(self.base, loc=self.loc, power=min(max(self.power, 0.0), self.base.full_power))
        return replace(self.base, loc=self.loc)


@dataclass
class _TaskJob:
    uav: AgentKey
    worker: AgentKey
    task: int
    start: Optional[float] = None
    end: Optional[float] = None


@dataclass
class _Queue:
    charge: int
    pending: list[AgentKey] = field(default_factory=list)   # committed, not yet served
    current: Optional[ChargeSession] = None
    cursor: float = 0.0      # time up to which the current session has accrued power
    free_at: float = 0.0     # end of the previous session


class Simulation:
    """One run of a scenario under one scheduler. Call :meth:`run`."""

    def __init__(self, scenario: ScenarioFile, config: SimConfig):
        config.validate()
        self.scn = scenario
        self.cfg = config
        self.rng = np.random.default_rng(config.seed)
        self.agents: dict[AgentKey, _Agent] = {
            a.key: _Agent(a) for a in [*scenario.uavs, *scenario.workers, *scenario.vehicles]}
        self.order = sorted(self.agents)
        self.tasks = {t.id: t for t in scenario.tasks}
        self.done: set[int] = set()
        self.charges = {c.id: c for c in scenario.charge_points}
        self.jobs: dict[int, _TaskJob] = {}
        self.queues: dict[AgentKey, _Queue] = {}
        self.log = MetricsLog(config.algorithm, len(scenario.tasks))
        self.now = 0.0
        self._sched = SchedulerConfig(max_rounds=config.max_rounds,
                                      sampler="uniform" if config.algorithm == "raln" else "softmax",
                                      reduce_dimensions=config.reduce_dimensions)

    # ------------------------------------------------------------ snapshot

    def snapshot(self) -> WorldSnapshot:
        t = self.now
        on = [a for k, a in ((k, self.agents[k]) for k in self.order) if a.online]
        reserved = set(self.jobs)
        tasks = tuple(replace(self.tasks[i], completed=i in self.done, reserved=i in reserved)
                      for i in sorted(self.tasks) if i not in self.done)
        fixed = {a.key: a.action for a in on if a.locked}
        return WorldSnapshot(
            sys_time=t,
            uavs=tuple(a.frozen() for a in on if a.key[0] == UAV),
            workers=tuple(a.frozen() for a in on if a.key[0] == WORKER),
            vehicles=tuple(a.frozen() for a in on if a.key[0] == VEHICLE),
            tasks=tasks,
            charge_points=tuple(self.charges[i] for i in sorted(self.charges)),
            width=self.scn.width,
            height=self.scn.height,
            fixed_actions=fixed,
        )

    # ------------------------------------------------------------ decisions

    def decide(self, snap: WorldSnapshot, epoch: int):
        alg = self.cfg.algorithm
        t0 = time.perf_counter()
        roles = assign_roles(snap) if (self.cfg.reduce_dimensions or alg in ("greedy", "kwta")) else {}
        if alg in ("paln", "raln"):
            ja = decide_epoch(snap, roles, self.rng, self._sched, epoch)
        elif alg == "greedy":
            ja = greedy_decide(snap, roles, epoch)
        else:
            ja = kwta_decide(snap, roles, KwtaConfig(self.cfg.k1, self.cfg.k2), epoch)
        return ja, roles, time.perf_counter() - t0

    def apply(self, snap: WorldSnapshot, ja) -> tuple[int, int]:
        for key in (a.key for a in snap.agents()):
            ag = self.agents[key]
            if ag.locked:
                continue
            act = ja.action(key)
            ag.action = act
            self._set_travel(ag)

        n_task = 0
        for m in resolve_task_matches(ja.actions, snap):
            u, w = self.agents[(UAV, m.uav)], self.agents[(WORKER, m.worker)]
            if u.locked or w.locked:
                continue
            self.jobs[m.task] = _TaskJob(u.key, w.key, m.task)
            u.locked = w.locked = True
            n_task += 1

        n_charge = 0
        for m in resolve_charge_matches(ja.actions, snap):
            u, v = self.agents[(UAV, m.uav)], self.agents[(VEHICLE, m.vehicle)]
            if u.locked:
                continue
            q = self.queues.get(v.key)
            if q is None:
                q = self.queues[v.key] = _Queue(m.charge)
            elif q.charge != m.charge:
                continue
            q.pending.append(u.key)
            u.locked = v.locked = True
            n_charge += 1
        return n_task, n_charge

    def _target_loc(self, act: Action) -> Optional[Position]:
        if act.kind == TASK:
            return self.tasks[act.target].loc
        if act.kind == CHARGE:
            return self.charges[act.target].loc
        return None

    def _set_travel(self, ag: _Agent):
        loc = self._target_loc(ag.action)
        if loc is None:
            ag.phase, ag.arrival = IDLE, None
        elif ag.x == loc.x and ag.y == loc.y:
            ag.phase, ag.arrival = ARRIVED, self.now
        else:
            ag.phase, ag.arrival = TRAVEL, None

    # ------------------------------------------------------------ ticking

    def _release(self, ag: _Agent):
        ag.locked = False
        ag.action = Action.hold(ag.key)
        ag.phase, ag.arrival = IDLE, None

    def _go_offline(self, ag: _Agent):
        key = ag.key
        for x, job in list(self.jobs.items()):
            if key in (job.uav, job.worker):
                other = self.agents[job.worker if key == job.uav else job.uav]
                self._release(other)
                del self.jobs[x]
                self.log.aborted_tasks += 1
        if key[0] == VEHICLE and key in self.queues:
            q = self.queues.pop(key)
            if q.current is not None:
                q.current.aborted, q.current.end = True, self.now
                self._release(self.agents[(UAV, q.current.uav)])
            for u in q.pending:
                self._release(self.agents[u])
        if key[0] == UAV:
            for vk, q in list(self.queues.items()):
                if key in q.pending:
                    q.pending.remove(key)
                if q.current is not None and q.current.uav == key[1]:
                    q.current.aborted, q.current.end = True, self.now
                    q.current = None
                    q.free_at = self.now
                if not q.pending and q.current is None:
                    del self.queues[vk]
                    self._release(self.agents[vk])
        ag.online, ag.gone, ag.locked, ag.phase = False, True, False, OFFLINE

    def _update_presence(self):
        t = self.now
        for k in self.order:
            ag = self.agents[k]
            w = ag.base.window
            if ag.online and t >= w.downtime:
                self._go_offline(ag)
            elif not ag.online and not ag.gone and w.covers(t):
                ag.online = True
                self.log.travel_km.setdefault(k, 0.0)

    def _move(self, dt: float):
        for k in self.order:
            ag = self.agents[k]
            if not ag.online or ag.phase != TRAVEL:
                continue
            loc = self._target_loc(ag.action)
            d = math.hypot(loc.x - ag.x, loc.y - ag.y)
            step = ag.base.speed * dt
            if step >= d:
                moved = d
                ag.x, ag.y = loc.x, loc.y
                ag.phase, ag.arrival = ARRIVED, self.now + d / ag.base.speed
            else:
                moved = step
                ag.x += (loc.x - ag.x) * step / d
                ag.y += (loc.y - ag.y) * step / d
            ag.travelled += moved
            self.log.travel_km[k] = ag.travelled
            if k[0] == UAV:
                ag.power -= moved

    def _run_jobs(self, t_next: float):
        for x in sorted(self.jobs):
            job = self.jobs[x]
            u, w = self.agents[job.uav], self.agents[job.worker]
            if job.start is None:
                if u.phase == ARRIVED and w.phase == ARRIVED:
                    job.start = max(u.arrival, w.arrival)
                    job.end = job.start + self.tasks[x].cost_power / u.base.speed
                    u.phase = w.phase = EXECUTING
                else:
                    continue
            if job.end <= t_next + _TOL:
                if x in self.done:
                    raise SimulationError(f"task {x} completed twice")
                self.done.add(x)
                u.power -= self.tasks[x].cost_power
                self.log.completed += 1
                self.log.completions.append((job.end, x, job.uav[1], job.worker[1]))
                del self.jobs[x]
                self._release(u)
                self._release(w)
                u.x, u.y = self.tasks[x].loc.x, self.tasks[x].loc.y

    def _run_charging(self, t_next: float):
        for vk in sorted(self.queues):
            q = self.queues[vk]
            v = self.agents[vk]
            while True:
                if q.current is None:
                    if v.phase not in (ARRIVED, CHARGING):
                        break
                    ready = [self.agents[u] for u in q.pending if self.agents[u].phase in (ARRIVED, QUEUED)]
                    for u in ready:
                        u.phase = QUEUED
                    if not ready:
                        if not q.pending:
                            del self.queues[vk]
                            self._release(v)
                        break
                    u = min(ready, key=lambda a: (a.arrival, a.key[1]))
                    q.pending.remove(u.key)
                    start = max(u.arrival, v.arrival, q.free_at)
                    q.current = ChargeSession(vk[1], u.key[1], q.charge, u.arrival, start)
                    q.cursor = start
                    self.log.charge_sessions.append(q.current)
                    u.phase = v.phase = CHARGING
                s = q.current
                u = self.agents[(UAV, s.uav)]
                rate = v.base.charge_power
                finish = q.cursor + (u.base.full_power - u.power) / rate
                if finish <= t_next + _TOL:
                    u.power = u.base.full_power
                    s.end = q.free_at = finish
                    q.current = None
                    self._release(u)
                    v.phase = ARRIVED
                    continue
                if t_next > q.cursor:
                    u.power = min(u.base.full_power, u.power + rate * (t_next - q.cursor))
                    q.cursor = t_next
                break

    def _audit(self):
        for k in self.order:
            ag = self.agents[k]
            if k[0] != UAV or not ag.online:
                continue
            if ag.power < -1e-6:
                raise SimulationError(
                    f"uav {k[1]} power {ag.power:.6f} < 0 at t={self.now:.3f} (action {ag.action})")
            self.log.min_power_margin = min(self.log.min_power_margin, ag.power)
            self.log.max_power_excess = max(self.log.max_power_excess, ag.power - ag.base.full_power)

    def _emit_trace(self):
        for k in self.order:
            ag = self.agents[k]
            if ag.online:
                self.cfg.trace({"agent": f"{k[0]}:{k[1]}", "time": round(self.now, 6), "x": ag.x, "y": ag.y,
                                "power": ag.power, "phase": ag.phase})

    def advance_tick(self, dt: float):
        if dt > self.cfg.tick + _TOL:
            raise ValueError("dt must not exceed the configured tick")
        t_next = self.now + dt
        self._move(dt)
        self._run_jobs(t_next)
        self._run_charging(t_next)
        self.now = t_next
        self._update_presence()
        self._audit()
        if self.cfg.trace is not None:
            self._emit_trace()

    # ------------------------------------------------------------ main loop

    def run(self) -> MetricsLog:
        cfg = self.cfg
        n_epochs = int(round(cfg.limit_time / cfg.interval))
        steps = int(math.ceil(cfg.interval / cfg.tick - 1e-9))
        self.now = 0.0
        self._update_presence()
        for epoch in range(n_epochs):
            self.now = epoch * cfg.interval
            if self.tasks and len(self.done) == len(self.tasks):
                break
            snap = self.snapshot()
            ja, roles, dt_decide = self.decide(snap, epoch)
            n_task, n_charge = self.apply(snap, ja)
            self.log.epochs.append(self._record(epoch, snap, ja, dt_decide, n_task, n_charge))
            end = (epoch + 1) * cfg.interval
            for _ in range(steps):
                dt = min(cfg.tick, end - self.now)
                if dt <= _TOL:
                    break
                self.advance_tick(dt)
            self.now = end
        return self.log

    def _record(self, epoch, snap, ja, dt_decide, n_task, n_charge) -> EpochRecord:
        agents = snap.agents()
        eps = None
        if self.cfg.record_coupling and len(agents) >= 2:
            xy = np.array([a.loc.as_tuple() for a in agents])
            eps = coupling_strength_arrays(xy, np.array([a.radius for a in agents])).epsilon
        gap = equilibrium_gap(ja, snap)
        active = sum(1 for a in agents if not snap.is_locked(a.key))
        return EpochRecord(epoch, snap.sys_time, dt_decide, len(agents), active, ja.rounds_used, ja.converged,
                           len(ja.fallback_agents), n_task, n_charge, self.log.completed, eps,
                           gap.sum_reward, gap.participants, gap.global_completed, gap.alpha_hat)


def run(scenario: ScenarioFile, config: SimConfig) -> MetricsLog:
    return Simulation(scenario, config).run()


def jsonl_trace(fh) -> Callable[[dict], None]:
    """Trace sink writing one JSON record per line to an open text file."""
    def emit(rec: dict):
        fh.write(json.dumps(rec) + "\n")
    return emit
