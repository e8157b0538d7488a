"""Per-epoch decision engine: softmax action sampling plus a local Nash game.

Every unlocked agent samples a tentative target from a distance-weighted
softmax over the points it can reach inside its communication range. Agents
then check whether any unilateral change of target would raise their reward
(matches they can see, or charge they can see being delivered). Unsatisfied
agents resample until every agent is satisfied, which is the local Nash
condition, or until the round budget runs out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .benefit import Role, UavRole, feasible_charges_in_range, feasible_tasks_in_range
from .world import (
    UAV,
    VEHICLE,
    WORKER,
    Agent,
    AgentKey,
    Position,
    WorldSnapshot,
    dis,
    in_range,
)

TASK = "task"
CHARGE = "charge"
HOLD = "hold"
DUAL = "dual"

_KIND_ORDER = {TASK: 0, CHARGE: 1, HOLD: 2}
_EPS = 1e-9


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Action:
    agent: AgentKey
    kind: str
    target: Optional[int] = None

    @classmethod
    def hold(cls, agent: AgentKey) -> "Action":
        return cls(agent, HOLD)

    @classmethod
    def to_task(cls, agent: AgentKey, task_id: int) -> "Action":
        return cls(agent, TASK, task_id)

    @classmethod
    def to_charge(cls, agent: AgentKey, charge_id: int) -> "Action":
        return cls(agent, CHARGE, charge_id)

    @property
    def sort_key(self):
        return (_KIND_ORDER[self.kind], -1 if self.target is None else self.target)


@dataclass(frozen=True)
class CandidateSet:
    agent: AgentKey
    actions: tuple[Action, ...]
    distances: tuple[float, ...]
    scores: tuple[float, ...]
    probabilities: tuple[float, ...]

    def __len__(self):
        return len(self.actions)


@dataclass(frozen=True)
class RewardIndicator:
    agent: AgentKey
    S: int
    best_alternative: Optional[Action] = None
    reward: float = 0.0
    best_reward: float = 0.0


@dataclass
class SchedulerConfig:
    """Knobs for the game loop.

    ``sampler`` is ``"softmax"`` (distance-weighted) or ``"uniform"``.
    ``reduce_dimensions=False`` skips the role split: every UAV plays both
    matching games over the union of its task and charge candidates.
    ``neighbor_resample=True`` also resamples satisfied agents that have an
    unsatisfied neighbour.
    """

    max_rounds: int = 200
    sampler: str = "softmax"
    reduce_dimensions: bool = True
    neighbor_resample: bool = False

    def validate(self) -> None:
        if self.max_rounds < 1:
            raise ConfigError(f"max_rounds must be >= 1, got {self.max_rounds}")
        if self.sampler not in ("softmax", "uniform"):
            raise ConfigError(f"unknown sampler {self.sampler!r}")


@dataclass
class JointAssignment:
    epoch: int
    actions: dict[AgentKey, Action]
    converged: bool
    rounds_used: int
    fallback_agents: list[AgentKey] = field(default_factory=list)

    def action(self, key: AgentKey) -> Action:
        return self.actions.get(key, Action.hold(key))


# ---------------------------------------------------------------- candidates

def softmax(scores: Sequence[float]) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    e = np.exp(s - s.max())
    return e / e.sum()


def agent_side(agent: Agent, roles: Mapping[int, UavRole] | None, reduce_dimensions: bool = True):
    """Which matching game(s) an agent plays in: task, charge, dual or none."""
    if agent.kind == WORKER:
        return TASK
    if agent.kind == VEHICLE:
        return CHARGE
    if not reduce_dimensions:
        return DUAL
    role = (roles or {}).get(agent.id)
    if role is None or role.role is Role.IDLE:
        return None
    return TASK if role.role is Role.TASK else CHARGE


def _targets(agent: Agent, side, snapshot: WorldSnapshot) -> list[tuple[Action, float]]:
    key = agent.key
    out: list[tuple[Action, float]] = []
    if side in (TASK, DUAL):
        if agent.kind == UAV:
            tasks = feasible_tasks_in_range(agent, snapshot)
        else:
            tasks = [t for t in snapshot.open_tasks if in_range(agent, t.loc)]
        out += [(Action.to_task(key, t.id), dis(agent.loc, t.loc)) for t in tasks]
    if side in (CHARGE, DUAL):
        if agent.kind == UAV:
            cps = feasible_charges_in_range(agent, snapshot)
        else:
            cps = [c for c in snapshot.charge_points if in_range(agent, c.loc)]
        out += [(Action.to_charge(key, c.id), dis(agent.loc, c.loc)) for c in cps]
    return out


def candidate_actions(agent: Agent, snapshot: WorldSnapshot, role: UavRole | None = None,
                      sampler: str = "softmax", reduce_dimensions: bool = True) -> CandidateSet:
    if agent.kind == UAV:
        side = agent_side(agent, {agent.id: role} if role else {}, reduce_dimensions)
    else:
        side = agent_side(agent, None)
    pairs = _targets(agent, side, snapshot) if side else []
    if not pairs:
        pairs = [(Action.hold(agent.key), 0.0)]
    pairs.sort(key=lambda p: (p[1], p[0].sort_key))
    actions = tuple(a for a, _ in pairs)
    dists = tuple(d for _, d in pairs)
    scores = tuple(-d for d in dists)
    if sampler == "uniform":
        probs = tuple([1.0 / len(actions)] * len(actions))
    else:
        probs = tuple(float(p) for p in softmax(scores))
    return CandidateSet(agent.key, actions, dists, scores, probs)


def sample_action(candidates: CandidateSet, rng: np.random.Generator) -> Action:
    """Draw one action; consumes exactly one uniform variate from ``rng``."""
    u = rng.random()
    if len(candidates) == 0:
        return Action.hold(candidates.agent)
    cum = np.cumsum(candidates.probabilities)
    idx = int(np.searchsorted(cum, u * cum[-1], side="right"))
    return candidates.actions[min(idx, len(candidates) - 1)]


# ---------------------------------------------------------------- matching

@dataclass(frozen=True)
class TaskMatch:
    uav: int
    worker: int
    task: int


@dataclass(frozen=True)
class ChargeMatch:
    uav: int
    vehicle: int
    charge: int


def _target_loc(snapshot: WorldSnapshot, action: Action) -> Position:
    if action.kind == TASK:
        return snapshot.task(action.target).loc
    return snapshot.charge_point(action.target).loc


def _earliest(keys, snapshot: WorldSnapshot, loc: Position, locked: Mapping):
    # locked agents keep their claim; otherwise earliest arrival, ties by id
    def k(key):
        a = snapshot.agent(key)
        return (0 if key in locked else 1, dis(a.loc, loc) / a.speed, key[1])
    return min(keys, key=k)


def resolve_task_matches(actions: Mapping[AgentKey, Action], snapshot: WorldSnapshot) -> list[TaskMatch]:
    uavs: dict[int, list] = {}
    workers: dict[int, list] = {}
    for key, a in actions.items():
        if a.kind != TASK:
            continue
        if key[0] == UAV:
            uavs.setdefault(a.target, []).append(key)
        elif key[0] == WORKER:
            workers.setdefault(a.target, []).append(key)
    out = []
    for x in sorted(set(uavs) & set(workers)):
        loc = snapshot.task(x).loc
        u = _earliest(uavs[x], snapshot, loc, snapshot.fixed_actions)
        w = _earliest(workers[x], snapshot, loc, snapshot.fixed_actions)
        out.append(TaskMatch(u[1], w[1], x))
    return out


def resolve_charge_matches(actions: Mapping[AgentKey, Action], snapshot: WorldSnapshot) -> list[ChargeMatch]:
    """Every UAV heading to a charge point that some vehicle also targets is
    matched; the vehicle that gets there first serves it."""
    uavs: dict[int, list] = {}
    vehicles: dict[int, list] = {}
    for key, a in actions.items():
        if a.kind != CHARGE:
            continue
        if key[0] == UAV:
            uavs.setdefault(a.target, []).append(key)
        elif key[0] == VEHICLE:
            vehicles.setdefault(a.target, []).append(key)
    out = []
    for y in sorted(set(uavs) & set(vehicles)):
        loc = snapshot.charge_point(y).loc
        v = _earliest(vehicles[y], snapshot, loc, snapshot.fixed_actions)
        out.extend(ChargeMatch(u[1], v[1], y) for u in sorted(uavs[y]))
    return out


# ---------------------------------------------------------------- rewards

def _sees(observer: Agent, snapshot: WorldSnapshot, key: AgentKey) -> bool:
    return in_range(observer, snapshot.agent(key).loc)


def reward_task(agent_key: AgentKey, actions: Mapping[AgentKey, Action], snapshot: WorldSnapshot) -> int:
    """Matches whose uav, worker and task all lie inside the agent's range."""
    me = snapshot.agent(agent_key)
    return sum(1 for m in resolve_task_matches(actions, snapshot)
               if in_range(me, snapshot.task(m.task).loc)
               and _sees(me, snapshot, (UAV, m.uav))
               and _sees(me, snapshot, (WORKER, m.worker)))


def reward_charge(agent_key: AgentKey, actions: Mapping[AgentKey, Action], snapshot: WorldSnapshot) -> float:
    """Power added to visible UAVs at visible charge points with a visible vehicle."""
    me = snapshot.agent(agent_key)
    total = 0.0
    for y in {a.target for a in actions.values() if a.kind == CHARGE}:
        if not in_range(me, snapshot.charge_point(y).loc):
            continue
        here = [k for k, a in actions.items() if a.kind == CHARGE and a.target == y and _sees(me, snapshot, k)]
        if not any(k[0] == VEHICLE for k in here):
            continue
        for k in here:
            if k[0] == UAV:
                u = snapshot.agent(k)
                total += u.full_power - u.power
    return total


def game_reward(agent_key: AgentKey, side, actions, snapshot: WorldSnapshot) -> float:
    if side == TASK:
        return float(reward_task(agent_key, actions, snapshot))
    if side == CHARGE:
        return reward_charge(agent_key, actions, snapshot)
    if side == DUAL:
        me = snapshot.agent(agent_key)
        return reward_task(agent_key, actions, snapshot) + reward_charge(agent_key, actions, snapshot) / me.full_power
    return 0.0


def reward_indicator(agent_key: AgentKey, actions: Mapping[AgentKey, Action], snapshot: WorldSnapshot,
                     roles: Mapping[int, UavRole] | None = None,
                     reduce_dimensions: bool = True) -> RewardIndicator:
    """Reference (full recomputation) reward indicator for one agent."""
    agent = snapshot.agent(agent_key)
    if snapshot.is_locked(agent_key):
        return RewardIndicator(agent_key, 1)
    side = agent_side(agent, roles, reduce_dimensions)
    role = (roles or {}).get(agent.id) if agent.kind == UAV else None
    cands = candidate_actions(agent, snapshot, role, reduce_dimensions=reduce_dimensions)
    current = actions.get(agent_key, Action.hold(agent_key))
    r0 = game_reward(agent_key, side, actions, snapshot)
    best, best_r = None, -math.inf
    trial = dict(actions)
    for alt in sorted(cands.actions, key=lambda a: a.sort_key):
        if alt == current:
            continue
        trial[agent_key] = alt
        r = game_reward(agent_key, side, trial, snapshot)
        if r > best_r + _EPS:
            best, best_r = alt, r
    if best is not None and best_r > r0 + _EPS:
        return RewardIndicator(agent_key, 0, best, r0, best_r)
    return RewardIndicator(agent_key, 1, None, r0, max(best_r, r0))


# ---------------------------------------------------------------- fast game

class _Game:
    """Incremental reward bookkeeping for one epoch's game.

    A unilateral move by agent i only changes matches at its old and new
    target, so reward deltas are computed from per-target occupancy sets
    instead of re-resolving the whole profile.
    """

    def __init__(self, snapshot: WorldSnapshot, sides: Mapping[AgentKey, str],
                 cands: Mapping[AgentKey, CandidateSet], actions: dict[AgentKey, Action]):
        self.snap = snapshot
        self.sides = sides
        self.cands = cands
        self.actions = actions
        self.locked = snapshot.fixed_actions
        agents = snapshot.agents()
        self.pos = {a.key: a.loc for a in agents}
        self.speed = {a.key: a.speed for a in agents}
        self.deficit = {u.key: u.full_power - u.power for u in snapshot.uavs}
        self.full = {u.key: u.full_power for u in snapshot.uavs}
        self.visible: dict[AgentKey, set] = {}
        self.vis_points: dict[AgentKey, tuple[set, set]] = {}
        for a in agents:
            if a.key not in sides:
                continue
            self.visible[a.key] = {b.key for b in agents if in_range(a, b.loc)}
            self.vis_points[a.key] = (
                {t.id for t in snapshot.tasks if in_range(a, t.loc)},
                {c.id for c in snapshot.charge_points if in_range(a, c.loc)},
            )
        self.rebuild()

    def rebuild(self):
        self.occ: dict[tuple[str, int], dict[str, set]] = {}
        for key, a in self.actions.items():
            if a.kind != HOLD:
                self.occ.setdefault((a.kind, a.target), {}).setdefault(key[0], set()).add(key)

    def _arrival_key(self, key, loc):
        return (0 if key in self.locked else 1, dis(self.pos[key], loc) / self.speed[key], key[1])

    def _task_value(self, me, x, uavs, workers) -> int:
        if not uavs or not workers or x not in self.vis_points[me][0]:
            return 0
        loc = self.snap.task(x).loc
        u = min(uavs, key=lambda k: self._arrival_key(k, loc))
        w = min(workers, key=lambda k: self._arrival_key(k, loc))
        vis = self.visible[me]
        return 1 if (u in vis and w in vis) else 0

    def _charge_value(self, me, y, uavs, vehicles) -> float:
        if y not in self.vis_points[me][1]:
            return 0.0
        vis = self.visible[me]
        if not any(v in vis for v in vehicles):
            return 0.0
        return sum(self.deficit[u] for u in uavs if u in vis)

    def _point_value(self, me, kind, target, skip=None, add=None) -> float:
        occ = self.occ.get((kind, target), {})
        if kind == TASK:
            uavs, others = set(occ.get(UAV, ())), set(occ.get(WORKER, ()))
        else:
            uavs, others = set(occ.get(UAV, ())), set(occ.get(VEHICLE, ()))
        for group in (uavs, others):
            group.discard(skip)
        if add is not None:
            (uavs if add[0] == UAV else others).add(add)
        if kind == TASK:
            return float(self._task_value(me, target, uavs, others))
        return self._charge_value(me, target, uavs, others)

    def _weight(self, me, kind) -> float:
        side = self.sides[me]
        if side == DUAL:
            return 1.0 if kind == TASK else 1.0 / self.full[me]
        return 1.0 if side == kind else 0.0

    def delta(self, me: AgentKey, alt: Action) -> float:
        cur = self.actions[me]
        touched = {(a.kind, a.target) for a in (cur, alt) if a.kind != HOLD}
        total = 0.0
        for kind, target in touched:
            w = self._weight(me, kind)
            if w == 0.0:
                continue
            before = self._point_value(me, kind, target)
            after = self._point_value(me, kind, target, skip=me,
                                      add=me if alt.kind == kind and alt.target == target else None)
            total += w * (after - before)
        return total

    def indicator(self, me: AgentKey) -> RewardIndicator:
        cur = self.actions[me]
        best, best_d = None, 0.0
        for alt in sorted(self.cands[me].actions, key=lambda a: a.sort_key):
            if alt == cur:
                continue
            d = self.delta(me, alt)
            if d > best_d + _EPS:
                best, best_d = alt, d
        if best is None:
            return RewardIndicator(me, 1)
        return RewardIndicator(me, 0, best, 0.0, best_d)


def _fixed(snapshot: WorldSnapshot) -> dict[AgentKey, Action]:
    return {k: a for k, a in snapshot.fixed_actions.items()}


def prepare_game(snapshot: WorldSnapshot, roles: Mapping[int, UavRole], config: SchedulerConfig):
    """Active agents, their sides and candidate sets, in global id order."""
    sides: dict[AgentKey, str] = {}
    cands: dict[AgentKey, CandidateSet] = {}
    for agent in sorted(snapshot.agents(), key=lambda a: a.key):
        if snapshot.is_locked(agent.key):
            continue
        side = agent_side(agent, roles, config.reduce_dimensions)
        if side is None:
            continue
        sides[agent.key] = side
        role = roles.get(agent.id) if agent.kind == UAV else None
        cands[agent.key] = candidate_actions(agent, snapshot, role, config.sampler, config.reduce_dimensions)
    return sides, cands


def decide_epoch(snapshot: WorldSnapshot, roles: Mapping[int, UavRole], rng: np.random.Generator,
                 config: SchedulerConfig | None = None, epoch: int = 0) -> JointAssignment:
    config = config or SchedulerConfig()
    config.validate()
    actions = _fixed(snapshot)
    for agent in snapshot.agents():
        actions.setdefault(agent.key, Action.hold(agent.key))

    sides, cands = prepare_game(snapshot, roles, config)
    if not sides:
        return JointAssignment(epoch, actions, True, 0)

    order = list(cands)
    for key in order:
        actions[key] = sample_action(cands[key], rng)

    game = _Game(snapshot, sides, cands, actions)
    rounds = 0
    while True:
        indicators = {k: game.indicator(k) for k in order}
        unsat = [k for k in order if indicators[k].S == 0]
        if not unsat:
            return JointAssignment(epoch, dict(actions), True, rounds)
        if rounds >= config.max_rounds:
            # one sequential best-response pass; simultaneous switching lets
            # two agents that want each other's point swap past each other
            for k in unsat:
                ind = game.indicator(k)
                if ind.S == 0:
                    actions[k] = ind.best_alternative
                    game.rebuild()
            return JointAssignment(epoch, dict(actions), False, rounds, unsat)
        movers = set(unsat)
        if config.neighbor_resample:
            bad = set(unsat)
            movers |= {k for k in order if game.visible[k] & bad}
        for k in order:
            if k in movers:
                actions[k] = sample_action(cands[k], rng)
        game.rebuild()
        rounds += 1
