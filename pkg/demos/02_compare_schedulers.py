"""
The four schedulers on the same worlds.

Runs PALN, RALN, K-WTA and GREEDY over three seeds of Random_1 and prints
completion rate, decision time and travel. Takes about half a minute.

Run with:  python3 demos/02_compare_schedulers.py
"""
import numpy as np

from crowdsched.scenario import generate, preset
from crowdsched.simkernel import ALGORITHMS, SimConfig, run

SEEDS = range(3)

rows = {}
for alg in ALGORITHMS:
    logs = [run(generate(preset("Random_1", seed=s)), SimConfig(algorithm=alg, seed=s)) for s in SEEDS]
    rows[alg] = np.array([[l.completion_rate * 100, l.mean_decision_time_s, l.mean_travel_km] for l in logs])

#%% table
print(f"{'':>7} {'completion %':>13} {'decision s':>11} {'travel km':>10}")
for alg, a in rows.items():
    m = a.mean(0)
    print(f"{alg:>7} {m[0]:13.2f} {m[1]:11.4f} {m[2]:10.2f}")

#%% greedy stalls because nearest points rarely coincide
print(f"PALN - GREEDY: {rows['paln'][:, 0].mean() - rows['greedy'][:, 0].mean():.1f} pp")
