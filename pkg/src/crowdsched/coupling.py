"""Coupling strength between communication disks and local/global gap reports."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .benefit import UavRole
from .nash_scheduler import TASK, JointAssignment, candidate_actions, resolve_task_matches
from .world import UAV, WORKER, Agent, WorldSnapshot, in_range


class CouplingUndefined(ValueError):
    pass


def lens_area(d, r1, r2):
    """Intersection area of two disks with centre distance ``d`` (vectorised)."""
    d, r1, r2 = np.broadcast_arrays(np.asarray(d, float), np.asarray(r1, float), np.asarray(r2, float))
    out = np.zeros(d.shape)
    inside = d <= np.abs(r1 - r2)
    out[inside] = np.pi * np.minimum(r1, r2)[inside] ** 2
    part = (d < r1 + r2) & ~inside
    if part.any():
        dd, a, b = d[part], r1[part], r2[part]
        c1 = np.clip((dd ** 2 + a ** 2 - b ** 2) / (2 * dd * a), -1.0, 1.0)
        c2 = np.clip((dd ** 2 + b ** 2 - a ** 2) / (2 * dd * b), -1.0, 1.0)
        k = (-dd + a + b) * (dd + a - b) * (dd - a + b) * (dd + a + b)
        lens = a ** 2 * np.arccos(c1) + b ** 2 * np.arccos(c2) - 0.5 * np.sqrt(np.maximum(k, 0.0))
        # cancellation near tangency can leave a tiny negative value
        out[part] = np.clip(lens, 0.0, np.pi * np.minimum(a, b) ** 2)
    return out if out.ndim else float(out)


def disk_jaccard(c1, r1, c2, r2) -> float:
    d = math.hypot(c1[0] - c2[0], c1[1] - c2[1])
    inter = lens_area(d, r1, r2)
    union = math.pi * r1 ** 2 + math.pi * r2 ** 2 - inter
    return inter / union


def disk_overlap_jaccard(a: Agent, b: Agent) -> float:
    return disk_jaccard(a.loc.as_tuple(), a.radius, b.loc.as_tuple(), b.radius)


@dataclass(frozen=True)
class CouplingReport:
    epsilon: float
    pairwise: np.ndarray = field(repr=False)  # condensed upper triangle, row-major
    n: int = 0


def coupling_strength_arrays(xy: np.ndarray, radii: np.ndarray) -> CouplingReport:
    xy = np.asarray(xy, float)
    radii = np.asarray(radii, float)
    n = len(radii)
    if n < 2:
        raise CouplingUndefined(f"coupling strength needs at least 2 agents, got {n}")
    i, j = np.triu_indices(n, k=1)
    d = np.hypot(xy[i, 0] - xy[j, 0], xy[i, 1] - xy[j, 1])
    inter = lens_area(d, radii[i], radii[j])
    union = np.pi * radii[i] ** 2 + np.pi * radii[j] ** 2 - inter
    terms = inter / union
    return CouplingReport(float(terms.mean()), terms, n)


def coupling_strength(agents: Sequence[Agent]) -> CouplingReport:
    """Mean pairwise Jaccard overlap of all agents' communication disks."""
    xy = np.array([a.loc.as_tuple() for a in agents], float).reshape(-1, 2)
    return coupling_strength_arrays(xy, np.array([a.radius for a in agents], float))


# ---------------------------------------------------------------- gap report

@dataclass(frozen=True)
class GapReport:
    sum_reward: int
    participants: int
    global_completed: int
    alpha_hat: Optional[float]
    gap: float
    per_agent: dict = field(default_factory=dict, repr=False)


def equilibrium_gap(assignment: JointAssignment, snapshot: WorldSnapshot) -> GapReport:
    """Compare the summed local task rewards with the epoch's true match count.

    Participants are the agents playing the task game (workers and UAVs whose
    action targets a task). The summed reward is normalised by the number of
    participants, so a single clique where everyone sees every match gives
    ``alpha_hat == 1``.
    """
    actions = assignment.actions
    matches = resolve_task_matches(actions, snapshot)
    participants = [a for a in snapshot.agents()
                    if a.kind == WORKER or (a.kind == UAV and actions.get(a.key) is not None
                                            and actions[a.key].kind == TASK)]
    per_agent = {}
    for me in participants:
        per_agent[me.key] = sum(
            1 for m in matches
            if in_range(me, snapshot.task(m.task).loc)
            and in_range(me, snapshot.agent((UAV, m.uav)).loc)
            and in_range(me, snapshot.agent((WORKER, m.worker)).loc))
    total = sum(per_agent.values())
    g = len(matches)
    normalized = total / len(participants) if participants else 0.0
    alpha = normalized / g if g > 0 else None
    return GapReport(total, len(participants), g, alpha, g - normalized, per_agent)


def global_optimum_matches(snapshot: WorldSnapshot, roles: Mapping[int, UavRole],
                           max_profiles: int = 2_000_000) -> Optional[int]:
    """Largest number of simultaneous uav-worker-task matches any joint profile
    can reach, by exhaustive search. ``None`` when the instance is too large."""
    uav_opts = []
    for u in snapshot.uavs:
        if snapshot.is_locked(u.key):
            continue
        role = roles.get(u.id)
        if role is None or not role.is_task:
            continue
        opts = {a.target for a in candidate_actions(u, snapshot, role).actions if a.kind == TASK}
        if opts:
            uav_opts.append(opts)
    worker_tasks = []
    for w in snapshot.workers:
        if snapshot.is_locked(w.key):
            continue
        opts = {a.target for a in candidate_actions(w, snapshot).actions if a.kind == TASK}
        if opts:
            worker_tasks.append(opts)
    size = 1
    for o in uav_opts:
        size *= len(o) + 1
    if size > max_profiles:
        return None

    best = 0
    # each uav picks a task or sits out; a task counts if some worker can reach it
    for pick in itertools.product(*[sorted(o) + [None] for o in uav_opts]):
        chosen = [x for x in pick if x is not None]
        if len(chosen) != len(set(chosen)) or len(chosen) <= best:
            continue
        best = max(best, _max_worker_cover(chosen, worker_tasks))
    return best


def _max_worker_cover(tasks: list[int], worker_tasks: list[set]) -> int:
    """Maximum bipartite matching between chosen tasks and workers (augmenting paths)."""
    owner: dict[int, int] = {}

    def augment(wi, seen):
        for x in tasks:
            if x in worker_tasks[wi] and x not in seen:
                seen.add(x)
                if x not in owner or augment(owner[x], seen):
                    owner[x] = wi
                    return True
        return False

    for wi in range(len(worker_tasks)):
        augment(wi, set())
    return len(owner)
