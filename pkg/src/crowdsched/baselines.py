"""Non-learned comparison schedulers sharing the ``decide_epoch`` interface."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .benefit import UavRole
from .nash_scheduler import (
    CHARGE,
    TASK,
    Action,
    JointAssignment,
    SchedulerConfig,
    candidate_actions,
    decide_epoch,
)
from .world import UAV, VEHICLE, WORKER, AgentKey, WorldSnapshot


@dataclass(frozen=True)
class KwtaConfig:
    k1: int = 3
    k2: int = 3

    def __post_init__(self):
        if self.k1 < 1 or self.k2 < 1:
            raise ValueError(f"k1 and k2 must be >= 1, got {self.k1}, {self.k2}")


def _ranked(snapshot: WorldSnapshot, roles: Mapping[int, UavRole]):
    """Per unlocked agent: its real targets (no Hold), nearest first."""
    out: dict[AgentKey, list[tuple[Action, float]]] = {}
    for a in sorted(snapshot.agents(), key=lambda a: a.key):
        if snapshot.is_locked(a.key):
            continue
        role = roles.get(a.id) if a.kind == UAV else None
        if a.kind == UAV and role is None:
            continue
        c = candidate_actions(a, snapshot, role)
        out[a.key] = [(act, d) for act, d in zip(c.actions, c.distances) if act.kind in (TASK, CHARGE)]
    return out


def _base_actions(snapshot: WorldSnapshot) -> dict[AgentKey, Action]:
    actions = {a.key: Action.hold(a.key) for a in snapshot.agents()}
    actions.update(snapshot.fixed_actions)
    return actions


def greedy_decide(snapshot: WorldSnapshot, roles: Mapping[int, UavRole], epoch: int = 0) -> JointAssignment:
    """Everyone heads for the nearest point of its kind.

    Same-type contention for a task (uav vs uav, worker vs worker) or for a
    charge point (vehicle vs vehicle) keeps the closest agent; the others hold.
    Several UAVs may queue at one charge point.
    """
    actions = _base_actions(snapshot)
    claims: dict[tuple, tuple[float, AgentKey]] = {}
    for key, ranked in _ranked(snapshot, roles).items():
        if not ranked:
            continue
        act, d = ranked[0]
        if act.kind == CHARGE and key[0] == UAV:
            actions[key] = act
            continue
        slot = (act.kind, act.target, key[0])
        cur = claims.get(slot)
        if cur is None or (d, key[1]) < (cur[0], cur[1][1]):
            claims[slot] = (d, key)
    for (kind, target, _), (_, key) in claims.items():
        actions[key] = Action(key, kind, target)
    return JointAssignment(epoch, actions, True, 0)


def kwta_decide(snapshot: WorldSnapshot, roles: Mapping[int, UavRole], cfg: KwtaConfig = KwtaConfig(),
                epoch: int = 0) -> JointAssignment:
    """Top-k retention and set intersection.

    UAVs keep their ``k1`` best points, workers and vehicles their ``k2``
    best. Pairs whose retained sets intersect are matched on the common
    point with the best combined score. Unmatched agents then try their
    retained points in score order, skipping points already taken by an
    agent of their own type.
    """
    actions = _base_actions(snapshot)
    ranked = _ranked(snapshot, roles)
    top = {k: r[: cfg.k1 if k[0] == UAV else cfg.k2] for k, r in ranked.items()}

    assigned: set[AgentKey] = set()
    taken: set[tuple] = set()  # (kind, target, agent type)

    for kind, partner in ((TASK, WORKER), (CHARGE, VEHICLE)):
        triples = []
        uav_top = {k: dict((a.target, d) for a, d in t if a.kind == kind) for k, t in top.items() if k[0] == UAV}
        par_top = {k: dict((a.target, d) for a, d in t if a.kind == kind) for k, t in top.items() if k[0] == partner}
        for u, ut in uav_top.items():
            for p, pt in par_top.items():
                for x in ut.keys() & pt.keys():
                    triples.append((ut[x] + pt[x], u[1], p[1], x, u, p))
        triples.sort()
        vehicle_at: dict[int, AgentKey] = {}
        for _, _, _, x, u, p in triples:
            if u in assigned:
                continue
            if kind == TASK:
                if p in assigned or (TASK, x, UAV) in taken:
                    continue
                assigned.update((u, p))
                taken.update({(TASK, x, UAV), (TASK, x, WORKER)})
                actions[u] = Action.to_task(u, x)
                actions[p] = Action.to_task(p, x)
            else:
                # one vehicle per charge point; a vehicle may serve several UAVs
                holder = vehicle_at.get(x)
                if holder is None:
                    if p in assigned:
                        continue
                    vehicle_at[x] = holder = p
                    assigned.add(p)
                    taken.add((CHARGE, x, VEHICLE))
                    actions[p] = Action.to_charge(p, x)
                if holder != p:
                    continue
                assigned.add(u)
                actions[u] = Action.to_charge(u, x)

    # sequential fallback, closest attempts first
    attempts = []
    for key, t in top.items():
        if key in assigned:
            continue
        for rank, (a, d) in enumerate(t):
            attempts.append((rank, d, key[1], key, a))
    attempts.sort(key=lambda e: (e[0], e[1], e[2], e[3][0]))
    for _, _, _, key, a in attempts:
        if key in assigned:
            continue
        shared = a.kind == CHARGE and key[0] == UAV
        slot = (a.kind, a.target, key[0])
        if not shared and slot in taken:
            continue
        assigned.add(key)
        if not shared:
            taken.add(slot)
        actions[key] = a
    return JointAssignment(epoch, actions, True, 0)


def raln_decide(snapshot: WorldSnapshot, roles: Mapping[int, UavRole], rng: np.random.Generator,
                config: SchedulerConfig | None = None, epoch: int = 0) -> JointAssignment:
    """The local Nash game with uniform instead of softmax proposals."""
    config = replace(config or SchedulerConfig(), sampler="uniform")
    return decide_epoch(snapshot, roles, rng, config, epoch)
