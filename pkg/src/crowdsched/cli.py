"""Experiment harness and command line entry point.

Subcommands::

    crowdsched generate   --scenario Random_1 --seed 3 --out s.json
    crowdsched run        --scenario s.json --algorithm paln --out metrics.json
    crowdsched experiment --group 1 --seeds 0-4 --out results/
    crowdsched compare    --table results/results.csv --baseline greedy --candidate paln
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .scenario import PRESETS, ScenarioFile, ScenarioParseError, generate, load, preset, save
from .simkernel import ALGORITHMS, SimConfig, jsonl_trace, run
from .world import InvalidScenario

METRICS = ("completion_rate", "mean_decision_time_s", "mean_travel_km", "mean_epsilon", "convergence_failures")


class PlanError(ValueError):
    pass


class UnpairedCells(ValueError):
    pass


# ---------------------------------------------------------------- plans

@dataclass(frozen=True)
class Cell:
    scenario: str                 # preset name or path to a scenario file
    algorithm: str = "paln"
    radius: Optional[float] = None
    interval: float = 5.0
    limit_time: float = 180.0
    seeds: tuple[int, ...] = (0,)
    max_rounds: int = 200
    k1: int = 3
    k2: int = 3


@dataclass
class ExperimentPlan:
    cells: list[Cell]
    name: str = "plan"

    def validate(self, require_scenarios: bool = False) -> None:
        """Structural checks. Missing scenario files are only fatal when
        ``require_scenarios`` is set; otherwise they surface as error rows."""
        if not self.cells:
            raise PlanError("experiment plan has no cells")
        for c in self.cells:
            if c.algorithm not in ALGORITHMS:
                raise PlanError(f"unknown algorithm {c.algorithm!r} in cell for {c.scenario}")
            if not c.seeds:
                raise PlanError(f"cell for {c.scenario} has no seeds")
            if c.radius is not None and not c.radius > 0:
                raise PlanError(f"radius override must be positive, got {c.radius}")
            if require_scenarios and c.scenario not in PRESETS and not Path(c.scenario).is_file():
                raise PlanError(f"scenario {c.scenario!r} is neither a preset nor a readable file")

    def __len__(self):
        return sum(len(c.seeds) for c in self.cells)


def _cells(scenarios, algorithms, seeds, **kw) -> list[Cell]:
    return [Cell(s, a, seeds=tuple(seeds), **kw) for s in scenarios for a in algorithms]


def group_plan(group: int, algorithms: Sequence[str] = ALGORITHMS, seeds: Sequence[int] = (0,)) -> ExperimentPlan:
    """The six comparison groups, restricted to the synthetic datasets."""
    cells: list[Cell] = []
    if group == 1:
        for iv in (5.0, 10.0, 15.0):
            cells += _cells(["Random_1"], algorithms, seeds, interval=iv)
    elif group == 2:
        for lt in (120.0, 180.0, 240.0):
            cells += _cells(["Random_1"], algorithms, seeds, limit_time=lt)
    elif group == 3:
        cells = _cells([f"Random_{i}" for i in (1, 2, 3, 4, 5, 6, 7, 8, 9)], algorithms, seeds)
    elif group == 4:
        cells = _cells(["Random_1"] + [f"Random_{i}" for i in range(10, 18)], algorithms, seeds)
    elif group == 5:
        cells = _cells(["Random_1"] + [f"Random_{i}" for i in range(18, 28)], algorithms, seeds)
    elif group == 6:
        for r in (6.0, 8.0, 10.0):
            cells += _cells(["Random_1"], algorithms, seeds, radius=r)
    else:
        raise PlanError(f"group must be 1..6, got {group}")
    return ExperimentPlan(cells, name=f"group{group}")


def resolve_scenario(ref: str, seed: int, radius: Optional[float] = None) -> ScenarioFile:
    if ref in PRESETS:
        scn = generate(preset(ref, seed=seed))
    else:
        scn = load(ref)
    return scn.with_radius(radius) if radius is not None else scn


# ---------------------------------------------------------------- results

@dataclass
class ResultRow:
    scenario: str
    algorithm: str
    seed: int
    interval: float
    limit_time: float
    radius: Optional[float]
    completion_rate: Optional[float] = None
    mean_decision_time_s: Optional[float] = None
    mean_travel_km: Optional[float] = None
    mean_epsilon: Optional[float] = None
    convergence_failures: Optional[int] = None
    error: str = ""

    @property
    def cell(self) -> tuple:
        return (self.scenario, self.interval, self.limit_time, self.radius)

    @property
    def ok(self) -> bool:
        return not self.error


_FIELDS = [f for f in ResultRow.__dataclass_fields__]


def _parse_field(name: str, text: str):
    if name in ("scenario", "algorithm", "error"):
        return text
    if text == "":
        return None
    if name in ("seed", "convergence_failures"):
        return int(text)
    return float(text)


@dataclass
class ResultTable:
    rows: list[ResultRow] = field(default_factory=list)

    def ok_rows(self) -> list[ResultRow]:
        return [r for r in self.rows if r.ok]

    def aggregates(self) -> list[dict]:
        """Mean and sample stddev of every metric over seeds, per configuration."""
        groups: dict[tuple, list[ResultRow]] = {}
        for r in self.ok_rows():
            groups.setdefault((r.scenario, r.algorithm, r.interval, r.limit_time, r.radius), []).append(r)
        out = []
        for (s, a, iv, lt, rad), rows in groups.items():
            agg = {"scenario": s, "algorithm": a, "interval": iv, "limit_time": lt, "radius": rad,
                   "n_seeds": len(rows)}
            for m in METRICS:
                vals = np.array([getattr(r, m) for r in rows if getattr(r, m) is not None], float)
                agg[f"{m}_mean"] = float(vals.mean()) if len(vals) else None
                agg[f"{m}_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0 if len(vals) else None
            out.append(agg)
        return out

    def to_csv(self, path: str | os.PathLike, header: Optional[dict] = None) -> None:
        with open(path, "w", newline="") as fh:
            for k, v in (header or hardware_info()).items():
                fh.write(f"# {k}: {v}\n")
            w = csv.DictWriter(fh, fieldnames=_FIELDS)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: ("" if v is None else v) for k, v in asdict(r).items()})

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> "ResultTable":
        with open(path, newline="") as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        rows = [ResultRow(**{k: _parse_field(k, v) for k, v in rec.items()}) for rec in csv.DictReader(lines)]
        return cls(rows)


def hardware_info() -> dict:
    return {
        "crowdsched": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "machine": platform.machine(),
        "processor": platform.processor() or "unknown",
        "cpus": os.cpu_count(),
        "platform": platform.platform(),
    }


def run_cell(cell: Cell, seed: int, trace=None):
    scn = resolve_scenario(cell.scenario, seed, cell.radius)
    cfg = SimConfig(interval=cell.interval, limit_time=cell.limit_time, seed=seed, algorithm=cell.algorithm,
                    max_rounds=cell.max_rounds, k1=cell.k1, k2=cell.k2, trace=trace)
    return run(scn, cfg)


def run_experiment(plan: ExperimentPlan, out_dir: str | os.PathLike | None = None, progress=None) -> ResultTable:
    """Run every (cell, seed) serially. A failing run becomes an error row."""
    plan.validate()
    table = ResultTable()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        (out / "runs").mkdir(parents=True, exist_ok=True)
    for cell in plan.cells:
        for seed in cell.seeds:
            row = ResultRow(cell.scenario, cell.algorithm, seed, cell.interval, cell.limit_time, cell.radius)
            try:
                log = run_cell(cell, seed)
            except (OSError, InvalidScenario, ScenarioParseError, ValueError, RuntimeError) as exc:
                row.error = f"{type(exc).__name__}: {exc}"
            else:
                row.completion_rate = log.completion_rate
                row.mean_decision_time_s = log.mean_decision_time_s
                row.mean_travel_km = log.mean_travel_km
                row.mean_epsilon = log.mean_epsilon
                row.convergence_failures = log.convergence_failures
                if out is not None:
                    tag = f"{Path(cell.scenario).stem}_{cell.algorithm}_iv{cell.interval:g}_lt{cell.limit_time:g}" \
                          f"_r{cell.radius if cell.radius is not None else 'def'}_s{seed}"
                    (out / "runs" / f"{tag}.json").write_text(json.dumps(log.to_dict()))
            table.rows.append(row)
            if progress:
                progress(row)
    if out is not None:
        table.to_csv(out / "results.csv")
        manifest = {"plan": plan.name, "cells": [asdict(c) for c in plan.cells], "environment": hardware_info(),
                    "aggregates": table.aggregates()}
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return table


# ---------------------------------------------------------------- comparison

@dataclass(frozen=True)
class PairedDelta:
    scenario: str
    interval: float
    limit_time: float
    radius: Optional[float]
    seed: int
    completion_pp: float            # candidate minus baseline, percentage points
    decision_time_ratio: Optional[float]  # candidate / baseline


@dataclass(frozen=True)
class Comparison:
    baseline: str
    candidate: str
    pairs: tuple[PairedDelta, ...]

    @property
    def mean_completion_pp(self) -> float:
        return float(np.mean([p.completion_pp for p in self.pairs]))

    @property
    def mean_time_ratio(self) -> Optional[float]:
        rs = [p.decision_time_ratio for p in self.pairs if p.decision_time_ratio is not None]
        return float(np.mean(rs)) if rs else None


def compare(table: ResultTable, baseline_alg: str, candidate_alg: str) -> Comparison:
    """Pair rows on (configuration, seed) and report candidate minus baseline."""
    def index(alg):
        return {(r.cell, r.seed): r for r in table.ok_rows() if r.algorithm == alg}

    base, cand = index(baseline_alg), index(candidate_alg)
    if not base or not cand:
        raise UnpairedCells(f"need rows for both {baseline_alg!r} and {candidate_alg!r}")
    if base.keys() != cand.keys():
        missing = sorted(base.keys() ^ cand.keys(), key=str)
        raise UnpairedCells(f"{len(missing)} unpaired cells, e.g. {missing[0]}")
    pairs = []
    for key in sorted(base, key=str):
        b, c = base[key], cand[key]
        ratio = c.mean_decision_time_s / b.mean_decision_time_s if b.mean_decision_time_s else None
        (scn, iv, lt, rad), seed = key
        pairs.append(PairedDelta(scn, iv, lt, rad, seed, 100.0 * (c.completion_rate - b.completion_rate), ratio))
    return Comparison(baseline_alg, candidate_alg, tuple(pairs))


# ---------------------------------------------------------------- argparse

def parse_seeds(text: str) -> list[int]:
    """``"0-4"`` or ``"1,3,7"`` or a mix of both."""
    seeds: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise argparse.ArgumentTypeError(f"no seeds in {text!r}")
    return seeds


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="crowdsched", description="Heterogeneous agent self-scheduling simulator")
    sub = p.add_subparsers(dest="command", required=True)

    def sim_flags(sp, seeds: bool):
        sp.add_argument("--scenario", default="Random_1", help="preset name or scenario file")
        sp.add_argument("--interval", type=_positive, default=5.0)
        sp.add_argument("--limit-time", type=_positive, default=180.0)
        sp.add_argument("--radius", type=_positive, default=None)
        sp.add_argument("--max-rounds", type=int, default=200)
        sp.add_argument("--k1", type=int, default=3)
        sp.add_argument("--k2", type=int, default=3)
        if seeds:
            sp.add_argument("--seeds", type=parse_seeds, default=[0])
        else:
            sp.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("generate", help="write a scenario file from a preset")
    g.add_argument("--scenario", default="Random_1", choices=sorted(PRESETS, key=lambda n: int(n.split("_")[1])))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--radius", type=_positive, default=None)
    g.add_argument("--out", required=True)

    r = sub.add_parser("run", help="simulate one scenario with one algorithm")
    sim_flags(r, seeds=False)
    r.add_argument("--algorithm", choices=ALGORITHMS, default="paln")
    r.add_argument("--out", help="write the full metrics log as JSON")
    r.add_argument("--trace", help="write per-tick agent states as JSON lines")

    e = sub.add_parser("experiment", help="run a comparison group or a custom grid")
    sim_flags(e, seeds=True)
    e.add_argument("--group", type=int, choices=range(1, 7))
    e.add_argument("--algorithm", action="append", choices=ALGORITHMS,
                   help="repeatable; defaults to all four")
    e.add_argument("--out", required=True, help="output directory")

    c = sub.add_parser("compare", help="paired deltas between two algorithms")
    c.add_argument("--table", required=True, help="results.csv written by experiment")
    c.add_argument("--baseline", choices=ALGORITHMS, default="greedy")
    c.add_argument("--candidate", choices=ALGORITHMS, default="paln")
    return p


def _cmd_generate(a) -> int:
    scn = generate(preset(a.scenario, seed=a.seed))
    if a.radius is not None:
        scn = scn.with_radius(a.radius)
    save(scn, a.out)
    print(f"wrote {a.out}: {len(scn.tasks)} tasks, {len(scn.charge_points)} charge points, "
          f"{len(scn.workers)}/{len(scn.uavs)}/{len(scn.vehicles)} workers/uavs/vehicles")
    return 0


def _cmd_run(a) -> int:
    cell = Cell(a.scenario, a.algorithm, a.radius, a.interval, a.limit_time, (a.seed,), a.max_rounds, a.k1, a.k2)
    fh = open(a.trace, "w") if a.trace else None
    try:
        log = run_cell(cell, a.seed, trace=jsonl_trace(fh) if fh else None)
    finally:
        if fh:
            fh.close()
    eps = log.mean_epsilon
    print(f"{a.algorithm} on {a.scenario} seed {a.seed}: completion {100 * log.completion_rate:.2f}% "
          f"({log.completed}/{log.total_tasks}), decision {log.mean_decision_time_s:.4f}s, "
          f"travel {log.mean_travel_km:.2f} km, eps {'n/a' if eps is None else f'{eps:.4f}'}, "
          f"non-converged epochs {log.convergence_failures}")
    if a.out:
        Path(a.out).write_text(json.dumps(log.to_dict(), indent=1))
    return 0


def _cmd_experiment(a) -> int:
    algs = a.algorithm or list(ALGORITHMS)
    if a.group is not None:
        plan = group_plan(a.group, algs, a.seeds)
        plan.cells = [replace(c, max_rounds=a.max_rounds, k1=a.k1, k2=a.k2) for c in plan.cells]
    else:
        plan = ExperimentPlan([Cell(a.scenario, alg, a.radius, a.interval, a.limit_time, tuple(a.seeds),
                                    a.max_rounds, a.k1, a.k2) for alg in algs], name="custom")

    def progress(row: ResultRow):
        if row.ok:
            print(f"{row.scenario:>10} {row.algorithm:>6} seed {row.seed:<3} iv {row.interval:g} "
                  f"lt {row.limit_time:g} r {row.radius if row.radius is not None else '-'}: "
                  f"{100 * row.completion_rate:6.2f}%  {row.mean_decision_time_s:.4f}s")
        else:
            print(f"{row.scenario:>10} {row.algorithm:>6} seed {row.seed:<3} ERROR {row.error}")

    table = run_experiment(plan, a.out, progress)
    failed = sum(1 for r in table.rows if not r.ok)
    print(f"{len(table.rows)} runs, {failed} failed; results in {a.out}")
    return 0


def _cmd_compare(a) -> int:
    cmp = compare(ResultTable.from_csv(a.table), a.baseline, a.candidate)
    for p in cmp.pairs:
        ratio = "n/a" if p.decision_time_ratio is None else f"{p.decision_time_ratio:.3f}"
        print(f"{p.scenario:>10} iv {p.interval:g} lt {p.limit_time:g} seed {p.seed}: "
              f"{p.completion_pp:+.2f} pp, time x{ratio}")
    ratio = cmp.mean_time_ratio
    print(f"{a.candidate} vs {a.baseline}: mean {cmp.mean_completion_pp:+.2f} pp over {len(cmp.pairs)} pairs, "
          f"mean time ratio {'n/a' if ratio is None else f'{ratio:.3f}'}")
    return 0


def main(argv: Optional[Iterable[str]] = None) -> int:
    args = build_parser().parse_args(None if argv is None else list(argv))
    handler = {"generate": _cmd_generate, "run": _cmd_run,
               "experiment": _cmd_experiment, "compare": _cmd_compare}[args.command]
    try:
        return handler(args)
    except (OSError, InvalidScenario, ScenarioParseError, PlanError, UnpairedCells, ValueError) as exc:
        print(f"crowdsched {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
