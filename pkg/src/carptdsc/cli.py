"""Command-line interface.

Subcommands:

* ``solve``    one seeded run, prints the solution text form
* ``bench``    full benchmark protocol, writes a report (+ CSV)
* ``generate`` create a time-dependent annotation sidecar
* ``oracle``   grid-oracle departure verification for a given plan
* ``stats``    compare two report files (w-d-l, PDR, No.best)

Exit code 0 on success, nonzero on any hard error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import bench, instance_io
from .departure import grid_oracle, route_objective
from .instance import shortest_paths
from .solution import RouteEvaluator, Solution, format_solution, split_routes


def _add_instance_args(p: argparse.ArgumentParser):
    p.add_argument("--instance", required=True, help="instance file (CARP DAT or Solomon)")
    p.add_argument("--annotation", help="time-dependent annotation sidecar")
    p.add_argument("--family", choices=["2lp", "3lp"], help="generate an annotation instead")
    p.add_argument("--slope-set", default="0.3,0.5,1,2,3",
                   help="comma-separated slope magnitudes for 3LP generation")
    p.add_argument("--gen-seed", type=int, default=0, help="generator seed")
    p.add_argument("--max-customers", type=int, help="truncate a Solomon file")


def _add_solver_args(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--psize", type=int, default=10)
    p.add_argument("--generations", type=int, default=50)
    p.add_argument("--pls", type=float, default=0.1)
    p.add_argument("--gss-eps", type=float, help="gss interval threshold (default 1e-3 * horizon)")
    p.add_argument("--ncs-budget", type=int, default=2000)
    p.add_argument("--ncs-procs", type=int, default=10)


def _slopes(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.replace(",", " ").split())


def _config_from(args, algorithm: str, runs: int, jobs: int = 1, out=None) -> bench.RunConfig:
    return bench.RunConfig(
        instances=(args.instance,),
        algorithm=algorithm,
        annotation=args.annotation,
        family=args.family,
        slope_set=_slopes(args.slope_set),
        gen_seed=args.gen_seed,
        runs=runs,
        base_seed=args.seed,
        jobs=jobs,
        psize=args.psize,
        generations=args.generations,
        pls=args.pls,
        gss_eps=args.gss_eps,
        ncs_budget=args.ncs_budget,
        ncs_procs=args.ncs_procs,
        max_customers=args.max_customers,
        out=out,
    )


def _load_instance(args):
    config = bench.RunConfig(instances=(args.instance,), runs=1)
    text = Path(args.instance).read_text()
    inst = bench.load_instance_text(text, max_customers=getattr(args, "max_customers", None))
    if args.annotation:
        ann = instance_io.read_annotation(Path(args.annotation).read_text())
        inst = instance_io.apply_annotation(inst, ann)
    elif getattr(args, "family", None):
        inst, _ = instance_io.generate_td(inst, args.family, _slopes(args.slope_set), args.gen_seed)
    return inst


def cmd_solve(args) -> int:
    inst = _load_instance(args)
    sp = shortest_paths(inst)
    config = _config_from(args, algorithm=args.algorithm, runs=1)
    solution, _, trace = bench.solve_once_detailed(inst, config, args.seed)
    if args.trace:
        if trace is None:
            raise ValueError("--trace needs a population-based algorithm")
        lines = ["generation,best_penalized,best_feasible"]
        lines += [f"{g},{bp!r},{bf!r}" for g, bp, bf in trace]
        Path(args.trace).write_text("\n".join(lines) + "\n")
    sys.stdout.write(format_solution(solution, inst, sp))
    if args.out:
        Path(args.out).write_text(format_solution(solution, inst, sp))
    return 0


def cmd_bench(args) -> int:
    config = _config_from(args, algorithm=args.algorithm, runs=args.runs,
                          jobs=args.jobs, out=args.out)
    report = bench.run_experiment(config)
    sys.stdout.write(bench.serialize_report(report))
    failures = sum(res.failures for res in report.results)
    if failures:
        print(f"warning: {failures} run(s) failed; aggregates cover the rest",
              file=sys.stderr)
    return 0


def cmd_generate(args) -> int:
    inst = bench.load_instance_text(Path(args.instance).read_text(),
                                    max_customers=args.max_customers)
    _, ann = instance_io.generate_td(inst, args.family, _slopes(args.slope_set), args.gen_seed)
    text = instance_io.serialize_annotation(ann)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_oracle(args) -> int:
    inst = _load_instance(args)
    if not math.isfinite(inst.horizon):
        raise ValueError(
            "instance has no finite planning horizon; supply --annotation or --family"
        )
    sp = shortest_paths(inst)
    plan = tuple(int(x) for x in args.plan.replace(",", " ").split())
    routes = split_routes(plan)
    evaluator = RouteEvaluator(inst, sp)
    total = 0.0
    departures = []
    for i, route in enumerate(routes, start=1):
        obj = route_objective(route, inst, sp)
        t_star, cost = grid_oracle(obj, 0.0, inst.horizon, args.oracle_step)
        departures.append(t_star)
        total += cost
        print(f"route {i}: oracle depart {t_star:.6f} cost {cost:.6f} "
              f"(cost at 0: {evaluator.total(route, 0.0):.6f})")
    print(f"total {total:.6f}")
    if args.out:
        sol = Solution(plan=plan, departures=tuple(departures))
        Path(args.out).write_text(format_solution(sol, inst, sp))
    return 0


def cmd_stats(args) -> int:
    rep_a = bench.read_report(Path(args.report_a).read_text())
    rep_b = bench.read_report(Path(args.report_b).read_text())
    cmp = bench.compare_reports(rep_a, rep_b, alpha=args.alpha,
                                no_best_on_ave=args.nobest_on_ave)
    for row in cmp.rows:
        print(f"{row.name}: ave {row.ave_a:.3f} vs {row.ave_b:.3f} "
              f"pdr {row.pdr_a_vs_b:+.3f}% verdict {row.verdict}")
    print(f"w-d-l {cmp.wins}-{cmp.draws}-{cmp.losses}")
    print(f"No.best {cmp.no_best_a} vs {cmp.no_best_b}")
    if args.lb:
        refs = {}
        for line in Path(args.lb).read_text().splitlines():
            parts = line.split()
            if len(parts) == 2:
                refs[parts[0]] = float(parts[1])
        print(f"Ave.PDR vs LB: {bench.average_pdr(rep_a, refs):.3f}% "
              f"vs {bench.average_pdr(rep_b, refs):.3f}%")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="carptdsc")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="one seeded run")
    _add_instance_args(p)
    _add_solver_args(p)
    p.add_argument("--algorithm", choices=bench.ALGORITHMS, default="maens-gn")
    p.add_argument("--trace", help="write the per-generation best-cost trace CSV here")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("bench", help="repeated-run benchmark protocol")
    _add_instance_args(p)
    _add_solver_args(p)
    p.add_argument("--algorithm", choices=bench.ALGORITHMS, default="maens-gn")
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("generate", help="create an annotation sidecar")
    p.add_argument("--instance", required=True)
    p.add_argument("--family", choices=["2lp", "3lp"], required=True)
    p.add_argument("--slope-set", default="0.3,0.5,1,2,3")
    p.add_argument("--gen-seed", type=int, default=0)
    p.add_argument("--max-customers", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("oracle", help="grid-oracle departure verification")
    _add_instance_args(p)
    p.add_argument("--plan", required=True, help="0-delimited task sequence, e.g. '0 1 3 0 2 0'")
    p.add_argument("--oracle-step", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("stats", help="compare two report files")
    p.add_argument("report_a")
    p.add_argument("report_b")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--nobest-on-ave", action="store_true")
    p.add_argument("--lb", help="file of '<instance> <lower bound>' lines")
    p.set_defaults(fn=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
