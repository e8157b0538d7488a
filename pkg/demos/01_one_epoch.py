"""
One decision epoch, step by step.

Freezes a Random_1 world at t = 60 min, splits the UAVs into task seekers
and charge seekers, plays the local game and checks that nobody in the
result wants to deviate.

Run with:  python3 demos/01_one_epoch.py
"""
import numpy as np

from crowdsched.benefit import Role, assign_roles
from crowdsched.nash_scheduler import decide_epoch, resolve_charge_matches, resolve_task_matches, reward_indicator
from crowdsched.scenario import generate, preset
from crowdsched.simkernel import SimConfig, Simulation

#%% a world at t = 60
scn = generate(preset("Random_1", seed=0))
sim = Simulation(scn, SimConfig(seed=0))
sim.now = 60.0
sim._update_presence()
snap = sim.snapshot()
print(f"online: {len(snap.uavs)} uavs, {len(snap.workers)} workers, {len(snap.vehicles)} vehicles; "
      f"{len(snap.tasks)} open tasks")

#%% role split
roles = assign_roles(snap)
for r in Role:
    print(f"  {r.value:>6}: {sum(1 for x in roles.values() if x.role is r)}")
u = snap.uavs[0]
print(f"uav {u.id}: power {u.power:.1f}/{u.full_power:.0f} -> {roles[u.id].role.value}")

#%% the game
ja = decide_epoch(snap, roles, np.random.default_rng(0))
print(f"converged={ja.converged} after {ja.rounds_used} rounds")
tm, cm = resolve_task_matches(ja.actions, snap), resolve_charge_matches(ja.actions, snap)
print(f"{len(tm)} uav-worker-task matches, {len(cm)} uav-vehicle charge matches")
for m in tm[:5]:
    print(f"  task {m.task}: uav {m.uav} + worker {m.worker}")

#%% nobody gains by switching alone
unhappy = [a.key for a in snap.agents() if reward_indicator(a.key, ja.actions, snap, roles).S == 0]
print("agents with a better unilateral move:", unhappy or "none")
