"""Acceptance criteria 1-10.

Each test appends one ``CRITERION n: PASS|FAIL ...`` line to the session
summary before asserting. Full simulations are cached and shared, so
criterion 10 audits every run made for criteria 5-9.
"""
import math
from functools import lru_cache

import numpy as np
import pytest
from scipy import stats

import oracles
from conftest import charge, snapshot, task, uav, worker
from crowdsched.baselines import greedy_decide, raln_decide
from crowdsched.benefit import assign_roles
from crowdsched.coupling import coupling_strength, disk_jaccard, disk_overlap_jaccard, global_optimum_matches
from crowdsched.nash_scheduler import candidate_actions, decide_epoch, resolve_task_matches, sample_action
from crowdsched.scenario import ScenarioSpec, generate, preset
from crowdsched.simkernel import SimConfig, Simulation

pytestmark = pytest.mark.acceptance

SEEDS = range(10)
_RUNS = {}


class _Recording(Simulation):
    """Keeps every epoch's snapshot, roles and joint assignment."""

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.records = []

    def decide(self, snap, epoch):
        ja, roles, dt = super().decide(snap, epoch)
        self.records.append((snap, roles, ja))
        return ja, roles, dt


def sim_run(alg, seed, name="Random_1", radius=None, reduce=True):
    key = (alg, seed, name, radius, reduce)
    if key not in _RUNS:
        scn = generate(preset(name, seed=seed))
        if radius is not None:
            scn = scn.with_radius(radius)
        sim = _Recording(scn, SimConfig(algorithm=alg, seed=seed, reduce_dimensions=reduce))
        _RUNS[key] = (sim.run(), sim.records)
    return _RUNS[key]


def report(log, n, ok, detail):
    log.append(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


# ---------------------------------------------------------------- 1

def test_criterion_1_nash_certificate(acceptance_log):
    checked, violations, skipped = 0, 0, 0
    seed = 0
    while checked < 200:
        _, records = sim_run("paln", seed)
        for snap, roles, ja in records:
            if not ja.converged:
                skipped += 1
                continue
            checked += 1
            violations += len(oracles.unsatisfied(snap, roles, ja.actions))
        seed += 1
    report(acceptance_log, 1, violations == 0,
           f"{violations} indicator violations over {checked} converged epochs "
           f"({skipped} fallback epochs excluded, {seed} runs)")


# ---------------------------------------------------------------- 2

@lru_cache(maxsize=None)
def _micro(seed):
    rng = np.random.default_rng(seed)
    n_u, n_w, n_t = (int(v) for v in rng.integers(1, 4, 3))
    # a 4x4 box with 8 km radii keeps everyone in one clique
    xy = lambda: rng.uniform(0, 4, 2)
    return snapshot([uav(i, *xy(), power=float(rng.uniform(5, 30))) for i in range(n_u)],
                    [worker(i, *xy()) for i in range(n_w)], [],
                    [task(i, *xy(), cost=float(rng.uniform(1, 4))) for i in range(n_t)], [charge(0, *xy())])


def test_criterion_2_oracle_equivalence(acceptance_log):
    bad_nash, bad_greedy, converged = [], [], 0
    for seed in range(100):
        s = _micro(seed)
        roles = assign_roles(s)
        profiles, best = oracles.enumerate_clique(s, roles)
        nash = [p for p, ok in profiles if ok]
        players = set(profiles[0][0]) if profiles else set()
        for decide in (decide_epoch, raln_decide):
            ja = decide(s, roles, np.random.default_rng(seed))
            if not ja.converged:
                continue
            converged += 1
            prof = {k: v for k, v in oracles.profile_of(ja.actions).items() if k in players}
            if prof not in nash or oracles.unsatisfied(s, roles, ja.actions):
                bad_nash.append(seed)
        if len(resolve_task_matches(greedy_decide(s, roles).actions, s)) > best:
            bad_greedy.append(seed)
    report(acceptance_log, 2, not bad_nash and not bad_greedy,
           f"{len(bad_nash)} non-Nash converged profiles of {converged}, "
           f"{len(bad_greedy)} greedy counts above the optimum (100 instances)")


# ---------------------------------------------------------------- 3

def test_criterion_3_softmax_fidelity(acceptance_log):
    cases = {
        "1/2/7.5 km": [(1, 0), (0, 2), (-7.5, 0)],
        "1/1/2 km": [(1, 0), (0, 1), (-2, 0)],
        "3/4/5 km": [(3, 0), (0, 4), (-5, 0)],
    }
    worst, details = 0.0, []
    rng = np.random.default_rng(2024)
    for label, pts in cases.items():
        s = snapshot([], [worker(0, 0, 0)], [], [task(i, x, y) for i, (x, y) in enumerate(pts)], [])
        c = candidate_actions(s.workers[0], s)
        w = [math.exp(-math.hypot(x, y)) for x, y in pts]
        target = [v / sum(w) for v in w]
        draws = [sample_action(c, rng).target for _ in range(100_000)]
        freq = np.bincount(draws, minlength=3) / len(draws)
        err = float(np.abs(freq - target).max())
        worst = max(worst, err)
        details.append(f"{label}: target {np.round(target, 4).tolist()} observed {np.round(freq, 4).tolist()}")
    assert cases and abs(math.exp(-1) / (math.exp(-1) + math.exp(-2)) - 0.7311) < 1e-4
    report(acceptance_log, 3, worst <= 0.01, f"max |freq - p| = {worst:.4f} (tol 0.01); " + "; ".join(details))


# ---------------------------------------------------------------- 4

def test_criterion_4_coupling_geometry(acceptance_log):
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(50):
        r1, r2 = rng.uniform(0.5, 10, 2)
        d = rng.uniform(0, 1.1 * (r1 + r2))
        lo = np.array([min(-r1, d - r2), -max(r1, r2)])
        hi = np.array([max(r1, d + r2), max(r1, r2)])
        pts = rng.uniform(lo, hi, size=(1_000_000, 2))
        in1 = (pts ** 2).sum(1) <= r1 ** 2
        in2 = (pts[:, 0] - d) ** 2 + pts[:, 1] ** 2 <= r2 ** 2
        mc = (in1 & in2).sum() / (in1 | in2).sum()
        worst = max(worst, abs(disk_jaccard((0, 0), r1, (d, 0), r2) - mc))
    a = worker(0, 5, 5)
    endpoints = (disk_overlap_jaccard(a, worker(1, 5, 5)) == 1.0
                 and disk_overlap_jaccard(a, worker(2, 25, 25)) == 0.0
                 and coupling_strength([worker(i, 5, 5) for i in range(4)]).epsilon == 1.0
                 and coupling_strength([worker(0, 0, 0), worker(1, 29, 29)]).epsilon == 0.0)
    report(acceptance_log, 4, worst <= 1e-2 and endpoints,
           f"max |closed form - Monte Carlo| = {worst:.5f} over 50 pairs (tol 1e-2); endpoints exact: {endpoints}")


# ---------------------------------------------------------------- 5

def _summary(alg, seeds=SEEDS, **kw):
    logs = [sim_run(alg, s, **kw)[0] for s in seeds]
    return (float(np.mean([l.completion_rate for l in logs])),
            float(np.mean([l.mean_decision_time_s for l in logs])),
            float(np.mean([l.mean_travel_km for l in logs])))


def test_criterion_5_paln_vs_raln(acceptance_log):
    pc, pt, pk = _summary("paln")
    rc, rt, rk = _summary("raln")
    ok_time, ok_travel, ok_rate = pt < rt, pk <= rk, pc >= rc - 0.02
    report(acceptance_log, 5, ok_time and ok_travel and ok_rate,
           f"decision {pt:.4f}s vs {rt:.4f}s ({'ok' if ok_time else 'PALN slower'}); "
           f"travel {pk:.2f} vs {rk:.2f} km ({'ok' if ok_travel else 'violated'}); "
           f"completion {100 * pc:.2f}% vs {100 * rc:.2f}% ({'ok' if ok_rate else 'violated'}); 10 seeds")


# ---------------------------------------------------------------- 6

def test_criterion_6_dimension_reduction(acceptance_log):
    seeds = range(5)
    # interleave the two arms so load drift on the host hits both alike
    for s in seeds:
        sim_run("paln", s, name="Random_11")
        sim_run("paln", s, name="Random_11", reduce=False)
    _, reduced, _ = _summary("paln", seeds, name="Random_11")
    _, full, _ = _summary("paln", seeds, name="Random_11", reduce=False)
    ratio = full / reduced
    report(acceptance_log, 6, ratio >= 2.0,
           f"Random_11, 5 seeds: without role split {full:.4f}s vs with {reduced:.4f}s, ratio {ratio:.2f}x (need >= 2x)")


# ---------------------------------------------------------------- 7

def test_criterion_7_baseline_ordering(acceptance_log):
    p, k, g = (_summary(a)[0] for a in ("paln", "kwta", "greedy"))
    ok = p > k > g and p - g >= 0.30
    report(acceptance_log, 7, ok,
           f"completion PALN {100 * p:.2f}% > K-WTA {100 * k:.2f}% > GREEDY {100 * g:.2f}%, "
           f"PALN - GREEDY = {100 * (p - g):.1f} pp (need >= 30); 10 seeds")


# ---------------------------------------------------------------- 8

def test_criterion_8_decision_latency(acceptance_log):
    logs = [sim_run("paln", s)[0] for s in SEEDS]
    mean = float(np.mean([l.mean_decision_time_s for l in logs]))
    worst = max(e.decision_time_s for l in logs for e in l.epochs)
    agents = max(e.online_agents for l in logs for e in l.epochs)
    report(acceptance_log, 8, mean < 10.0,
           f"mean per-epoch decision {mean:.4f}s, slowest epoch {worst:.3f}s, "
           f"up to {agents} online agents, max_rounds=200")


# ---------------------------------------------------------------- 9

RADII = (4.0, 6.0, 8.0, 10.0, 12.0)
SMALL_RADII = (3.0, 4.0, 6.0, 8.0, 10.0, 14.0)


def _small_gap(radius, seeds=range(40)):
    eps, gaps = [], []
    for seed in seeds:
        spec = ScenarioSpec(width=20, height=20, tasks_number=8, charges_number=3, agents_number=(4, 4, 0),
                            online_time=180, seed=seed, radius=radius)
        sim = Simulation(generate(spec), SimConfig(seed=seed))
        sim._update_presence()
        snap = sim.snapshot()
        roles = assign_roles(snap)
        ja = decide_epoch(snap, roles, np.random.default_rng(seed))
        gaps.append(global_optimum_matches(snap, roles) - len(resolve_task_matches(ja.actions, snap)))
        eps.append(coupling_strength(snap.agents()).epsilon)
    return float(np.mean(eps)), float(np.mean(gaps))


def test_criterion_9_coupling_monotonicity(acceptance_log):
    sweep = [sim_run("paln", 0, radius=r)[0] for r in RADII]
    eps = [l.mean_epsilon for l in sweep]
    times = [l.mean_decision_time_s for l in sweep]
    rho_t = stats.spearmanr(eps, times).statistic
    span = max(eps) / min(eps)
    small = [_small_gap(r) for r in SMALL_RADII]
    rho_g = stats.spearmanr([e for e, _ in small], [g for _, g in small]).statistic
    ok = rho_t > 0 and span >= 2.0 and rho_g > 0
    report(acceptance_log, 9, ok,
           f"Random_1 radius sweep {RADII}: eps {np.round(eps, 3).tolist()} (span {span:.1f}x), "
           f"decision {np.round(times, 4).tolist()} s, Spearman rho {rho_t:.2f}; "
           f"small-instance gap {[round(g, 3) for _, g in small]} over eps "
           f"{[round(e, 3) for e, _ in small]}, rho {rho_g:.2f}")


# ---------------------------------------------------------------- 10

def fcfs_violations(sessions) -> int:
    """Pairs on one vehicle where a waiting uav was overtaken, plus overlaps
    and sessions starting before their uav arrived."""
    bad = 0
    by_vehicle = {}
    for s in sessions:
        by_vehicle.setdefault(s.vehicle, []).append(s)
    for ss in by_vehicle.values():
        ss.sort(key=lambda s: (s.start, s.arrival))
        for i, a in enumerate(ss):
            if a.start < a.arrival - 1e-9:
                bad += 1
            if i and a.start < ss[i - 1].end - 1e-9:
                bad += 1
            for b in ss[i + 1:]:
                # b started later although it was already waiting before a arrived
                if b.arrival < a.arrival - 1e-9 and b.arrival <= a.start and b.start > a.start + 1e-9 \
                        and b.charge == a.charge:
                    bad += 1
    return bad


def test_criterion_10_conservation(acceptance_log):
    # depends on the runs cached by criteria 5-9; make sure they exist when run alone
    for s in SEEDS:
        for alg in ("paln", "raln", "kwta", "greedy"):
            sim_run(alg, s)
    for r in RADII:
        sim_run("paln", 0, radius=r)
    for s in range(5):
        sim_run("paln", s, name="Random_11")
        sim_run("paln", s, name="Random_11", reduce=False)
    energy = double = fcfs = 0
    for log, _ in _RUNS.values():
        energy += int(log.min_power_margin < 0) + int(log.max_power_excess > 1e-9)
        tasks = [x for _, x, _, _ in log.completions]
        double += len(tasks) - len(set(tasks))
        fcfs += fcfs_violations(log.charge_sessions)
    sessions = sum(len(l.charge_sessions) for l, _ in _RUNS.values())
    report(acceptance_log, 10, energy == double == fcfs == 0,
           f"{len(_RUNS)} runs, {sessions} charge sessions: {energy} energy-bound violations, "
           f"{double} double completions, {fcfs} FCFS violations")
