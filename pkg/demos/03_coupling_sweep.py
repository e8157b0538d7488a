"""
Communication radius, coupling strength and decision cost.

Grows every agent's radius on one fixed world. Larger disks overlap more
(higher epsilon), each agent sees more candidates and neighbours, and the
game takes longer to settle.

Run with:  python3 demos/03_coupling_sweep.py
"""
from crowdsched.coupling import disk_jaccard
from crowdsched.scenario import generate, preset
from crowdsched.simkernel import SimConfig, run

#%% the pairwise term: two unit disks one km apart
print(f"J(unit disks, d=1) = {disk_jaccard((0, 0), 1, (1, 0), 1):.4f}")

#%% sweep
base = generate(preset("Random_1", seed=0))
print(f"{'radius':>6} {'epsilon':>8} {'decision s':>11} {'completion %':>13}")
for r in (4, 6, 8, 10, 12):
    log = run(base.with_radius(r), SimConfig(seed=0))
    print(f"{r:6.0f} {log.mean_epsilon:8.3f} {log.mean_decision_time_s:11.4f} {100 * log.completion_rate:13.2f}")
