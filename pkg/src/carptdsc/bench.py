"""Benchmark harness: seeded repeated runs, aggregation, and comparison.

Each configured algorithm is run ``runs`` times per instance with seeds
``base_seed + i``; per-run wall time is recorded.  Reports serialize to a
key-value text form mirroring the usual result-table columns (Ave(std),
Best, Time) plus a CSV flattening of the raw runs.  Two reports can be
compared with a two-sided Wilcoxon rank-sum test and per-instance
performance degradation ratios.
"""

from __future__ import annotations

import concurrent.futures
import itertools
import math
import statistics
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import instance_io
from .departure import GssParams, NcsParams, optimize_departures
from .instance import Instance, shortest_paths
from .maens import MaensParams, evolve, init_individual
from .solution import RouteEvaluator, Solution, split_routes

ALGORITHMS = ("maens-gn", "maens-only", "init-only")
REPORT_TAG = "carptdsc-report v1"


@dataclass(frozen=True)
class RunConfig:
    instances: tuple[str, ...]
    algorithm: str = "maens-gn"
    annotation: Optional[str] = None  # sidecar path
    family: Optional[str] = None      # or generate one: 2lp | 3lp
    slope_set: tuple[float, ...] = (0.3, 0.5, 1.0, 2.0, 3.0)
    gen_seed: int = 0
    runs: int = 20
    base_seed: int = 0
    jobs: int = 1
    psize: int = 10
    generations: int = 50
    pls: float = 0.1
    gss_eps: Optional[float] = None
    ncs_budget: int = 2000
    ncs_procs: int = 10
    max_customers: Optional[int] = None  # Solomon truncation
    out: Optional[str] = None

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError(f"need at least one run, got {self.runs}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")


@dataclass(frozen=True)
class RunRecord:
    seed: int
    cost: Optional[float]
    seconds: float
    error: str = ""


@dataclass(frozen=True)
class InstanceResult:
    name: str
    runs: tuple[RunRecord, ...]

    @property
    def costs(self) -> list[float]:
        return [r.cost for r in self.runs if r.cost is not None]

    @property
    def ave(self) -> float:
        return statistics.fmean(self.costs)

    @property
    def std(self) -> float:
        costs = self.costs
        return statistics.pstdev(costs) if len(costs) > 1 else 0.0

    @property
    def best(self) -> float:
        return min(self.costs)

    @property
    def ave_time(self) -> float:
        return statistics.fmean(r.seconds for r in self.runs)

    @property
    def failures(self) -> int:
        return sum(1 for r in self.runs if r.cost is None)


@dataclass(frozen=True)
class ExperimentReport:
    algorithm: str
    runs: int
    base_seed: int
    results: tuple[InstanceResult, ...]


def load_instance_text(text: str, name: str = "", max_customers: Optional[int] = None) -> Instance:
    """Sniff and parse either supported instance format."""
    stripped = text.lstrip()
    if stripped.upper().startswith("NAME"):
        _, inst = instance_io.parse_carp(text)
        return inst
    return instance_io.parse_solomon(text, max_customers=max_customers)


def _prepare_instance(config: RunConfig, path: str) -> Instance:
    text = Path(path).read_text()
    inst = load_instance_text(text, max_customers=config.max_customers)
    if config.annotation is not None:
        ann = instance_io.read_annotation(Path(config.annotation).read_text())
        inst = instance_io.apply_annotation(inst, ann)
    elif config.family is not None:
        inst, _ = instance_io.generate_td(
            inst, config.family, config.slope_set, config.gen_seed
        )
    return inst


def solve_once_detailed(
    instance: Instance, config: RunConfig, seed: int
) -> tuple[Solution, float, Optional[list[tuple[int, float, float]]]]:
    """One seeded run; returns (solution, cost, stage-1 trace or None)."""
    sp = shortest_paths(instance)
    horizon = instance.horizon
    gss_params = (
        GssParams(epsilon=config.gss_eps)
        if config.gss_eps is not None
        else (GssParams(epsilon=1e-3 * horizon) if math.isfinite(horizon) else None)
    )
    ncs_params = NcsParams(
        process_count=config.ncs_procs, budget=config.ncs_budget, seed=seed
    )

    trace = None
    if config.algorithm == "init-only":
        rng = np.random.Generator(np.random.PCG64(seed))
        plan = init_individual(instance, sp, rng)
    else:
        params = MaensParams(
            psize=config.psize,
            generations=config.generations,
            pls=config.pls,
            seed=seed,
        )
        result = evolve(instance, sp, params)
        plan = result.plan
        trace = result.trace

    if config.algorithm == "maens-gn":
        departures = optimize_departures(
            plan, instance, sp, gss_params=gss_params, ncs_params=ncs_params
        )
    else:
        departures = tuple(0.0 for _ in split_routes(plan))

    solution = Solution(plan=plan, departures=departures)
    cost = RouteEvaluator(instance, sp).solution_cost(solution)
    return replace(solution, cached_cost=cost), cost, trace


def solve_once(instance: Instance, config: RunConfig, seed: int) -> tuple[Solution, float]:
    """One seeded run of the configured algorithm; returns (solution, cost)."""
    solution, cost, _ = solve_once_detailed(instance, config, seed)
    return solution, cost


def _run_record(instance: Instance, config: RunConfig, seed: int) -> RunRecord:
    start = time.perf_counter()
    try:
        _, cost = solve_once(instance, config, seed)
        return RunRecord(seed=seed, cost=cost, seconds=time.perf_counter() - start)
    except Exception as exc:  # failed run: recorded, not fatal
        return RunRecord(
            seed=seed, cost=None, seconds=time.perf_counter() - start, error=str(exc)
        )


def run_experiment(config: RunConfig) -> ExperimentReport:
    """Full protocol: every instance, ``runs`` seeded runs each.

    Runs may execute in parallel (``jobs``); per-run seeding keeps the
    outcome independent of scheduling.  Failed runs are recorded and
    skipped in the aggregates.
    """
    results = []
    for path in config.instances:
        instance = _prepare_instance(config, path)
        name = instance.name or Path(path).stem
        seeds = [config.base_seed + i for i in range(config.runs)]
        if config.jobs > 1:
            with concurrent.futures.ProcessPoolExecutor(max_workers=config.jobs) as pool:
                records = list(
                    pool.map(_run_record, itertools.repeat(instance),
                             itertools.repeat(config), seeds)
                )
        else:
            records = [_run_record(instance, config, s) for s in seeds]
        results.append(InstanceResult(name=name, runs=tuple(records)))

    report = ExperimentReport(
        algorithm=config.algorithm,
        runs=config.runs,
        base_seed=config.base_seed,
        results=tuple(results),
    )
    if config.out is not None:
        write_report(report, config.out)
    return report


def serialize_report(report: ExperimentReport) -> str:
    lines = [
        REPORT_TAG,
        f"algorithm : {report.algorithm}",
        f"runs : {report.runs}",
        f"base_seed : {report.base_seed}",
    ]
    for res in report.results:
        lines.append(
            f"instance {res.name} : ave {res.ave!r} std {res.std!r} "
            f"best {res.best!r} ave_time {res.ave_time!r}"
        )
        for rec in res.runs:
            cost = "failed" if rec.cost is None else repr(rec.cost)
            lines.append(f"run {res.name} {rec.seed} {cost} {rec.seconds!r}")
    return "\n".join(lines) + "\n"


def report_csv(report: ExperimentReport) -> str:
    lines = ["instance,seed,cost,seconds"]
    for res in report.results:
        for rec in res.runs:
            cost = "" if rec.cost is None else repr(rec.cost)
            lines.append(f"{res.name},{rec.seed},{cost},{rec.seconds!r}")
    return "\n".join(lines) + "\n"


def write_report(report: ExperimentReport, path: str) -> None:
    Path(path).write_text(serialize_report(report))
    Path(path).with_suffix(Path(path).suffix + ".csv").write_text(report_csv(report))


def read_report(text: str) -> ExperimentReport:
    lines = [l.strip() for l in text.splitlines() if l.strip()]
    if not lines or lines[0] != REPORT_TAG:
        raise ValueError(f"missing report tag (want {REPORT_TAG!r})")
    header: dict[str, str] = {}
    runs_by_instance: dict[str, list[RunRecord]] = {}
    order: list[str] = []
    for line in lines[1:]:
        if line.startswith("instance "):
            name = line[len("instance "):].split(" : ")[0]
            if name not in runs_by_instance:
                runs_by_instance[name] = []
                order.append(name)
        elif line.startswith("run "):
            parts = line.split()
            name, seed, cost, seconds = parts[1], int(parts[2]), parts[3], float(parts[4])
            runs_by_instance.setdefault(name, [])
            if name not in order:
                order.append(name)
            runs_by_instance[name].append(
                RunRecord(
                    seed=seed,
                    cost=None if cost == "failed" else float(cost),
                    seconds=seconds,
                    error="recorded-failure" if cost == "failed" else "",
                )
            )
        else:
            key, _, value = line.partition(":")
            header[key.strip()] = value.strip()
    return ExperimentReport(
        algorithm=header.get("algorithm", "?"),
        runs=int(header.get("runs", "0")),
        base_seed=int(header.get("base_seed", "0")),
        results=tuple(
            InstanceResult(name=n, runs=tuple(runs_by_instance[n])) for n in order
        ),
    )


def pdr(tc1: float, tc2: float) -> float:
    """Performance degradation ratio (tc1 - tc2) / tc2 * 100."""
    if tc2 <= 0:
        raise ValueError(f"reference cost must be positive, got {tc2}")
    return (tc1 - tc2) / tc2 * 100.0


@dataclass(frozen=True)
class RankSumResult:
    statistic: float  # rank sum of the first sample
    p_value: float
    verdict: str  # better | equivalent | worse (first sample vs second)


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _ranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mid = (i + j) / 2.0 + 1.0  # midrank of the tie group
        for idx in order[i:j + 1]:
            ranks[idx] = mid
        i = j + 1
    return ranks


def rank_sum_p_value(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sided rank-sum test; returns (rank sum of a, p value).

    Uses exact enumeration over assignments when either sample has fewer
    than 10 observations, and the tie-corrected normal approximation
    otherwise.
    """
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise ValueError("both samples must be nonempty")
    combined = list(a) + list(b)
    ranks = _ranks(combined)
    w = sum(ranks[:n])

    if min(n, m) < 10:
        total = 0
        le = 0
        ge = 0
        for combo in itertools.combinations(range(n + m), n):
            s = sum(ranks[i] for i in combo)
            total += 1
            if s <= w + 1e-12:
                le += 1
            if s >= w - 1e-12:
                ge += 1
        p = min(1.0, 2.0 * min(le / total, ge / total))
        return w, p

    big_n = n + m
    mu = n * (big_n + 1) / 2.0
    tie_term = 0.0
    seen: dict[float, int] = {}
    for v in combined:
        seen[v] = seen.get(v, 0) + 1
    for count in seen.values():
        tie_term += count ** 3 - count
    var = n * m / 12.0 * ((big_n + 1) - tie_term / (big_n * (big_n - 1)))
    if var <= 0:  # all values identical
        return w, 1.0
    z = (w - mu) / math.sqrt(var)
    return w, min(1.0, 2.0 * _normal_sf(abs(z)))


def wilcoxon_rank_sum(
    a: Sequence[float], b: Sequence[float], alpha: float = 0.05
) -> RankSumResult:
    """Two-sided rank-sum verdict for minimization: is ``a`` better than ``b``?"""
    w, p = rank_sum_p_value(a, b)
    if p < alpha:
        med_a, med_b = statistics.median(a), statistics.median(b)
        if med_a < med_b:
            verdict = "better"
        elif med_a > med_b:
            verdict = "worse"
        else:
            verdict = "equivalent"
    else:
        verdict = "equivalent"
    return RankSumResult(statistic=w, p_value=p, verdict=verdict)


@dataclass(frozen=True)
class InstanceComparison:
    name: str
    ave_a: float
    ave_b: float
    pdr_a_vs_b: float
    verdict: str  # a vs b


@dataclass(frozen=True)
class ReportComparison:
    rows: tuple[InstanceComparison, ...]
    wins: int
    draws: int
    losses: int
    no_best_a: int
    no_best_b: int

    @property
    def wdl(self) -> tuple[int, int, int]:
        return self.wins, self.draws, self.losses


def compare_reports(
    a: ExperimentReport,
    b: ExperimentReport,
    alpha: float = 0.05,
    no_best_on_ave: bool = False,
) -> ReportComparison:
    """Instance-by-instance comparison of two reports (a vs b).

    win/draw/loss counts partition the common instance set.  No.best
    counts instances where each report attains the better Best value
    (or better Ave with ``no_best_on_ave``); both score on ties.
    """
    by_name_b = {res.name: res for res in b.results}
    rows = []
    wins = draws = losses = 0
    no_best_a = no_best_b = 0
    for res_a in a.results:
        res_b = by_name_b.get(res_a.name)
        if res_b is None:
            continue
        verdict = wilcoxon_rank_sum(res_a.costs, res_b.costs, alpha=alpha).verdict
        if verdict == "better":
            wins += 1
        elif verdict == "worse":
            losses += 1
        else:
            draws += 1
        key_a = res_a.ave if no_best_on_ave else res_a.best
        key_b = res_b.ave if no_best_on_ave else res_b.best
        if key_a <= key_b:
            no_best_a += 1
        if key_b <= key_a:
            no_best_b += 1
        rows.append(
            InstanceComparison(
                name=res_a.name,
                ave_a=res_a.ave,
                ave_b=res_b.ave,
                pdr_a_vs_b=pdr(res_a.ave, res_b.ave),
                verdict=verdict,
            )
        )
    return ReportComparison(
        rows=tuple(rows),
        wins=wins,
        draws=draws,
        losses=losses,
        no_best_a=no_best_a,
        no_best_b=no_best_b,
    )


def average_pdr(report: ExperimentReport, references: dict[str, float]) -> float:
    """Mean PDR of per-instance averages against reference values (e.g. LBs)."""
    values = [
        pdr(res.ave, references[res.name])
        for res in report.results
        if res.name in references
    ]
    if not values:
        raise ValueError("no instance of the report matches a reference value")
    return statistics.fmean(values)
