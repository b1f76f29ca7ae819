"""Benchmark file parsers and the time-dependent annotation generator.

Three text formats are handled:

* CARP DAT files (undirected gdb/egl-style benchmarks)::

      NAME : gdb1
      VERTICES : 12
      REQUIRED_EDGES : 22
      NON_REQUIRED_EDGES : 0
      VEHICLES : 5
      CAPACITY : 5
      REQUIRED_EDGE_LIST :
      ( 1, 2) cost 13 demand 1
      NON_REQUIRED_EDGE_LIST :
      ( 3, 4) cost 7
      DEPOT : 1

  Each undirected required edge becomes two mutually-inverse directed
  tasks; edge cost doubles as travel time, travel cost, and the baseline
  (constant) service cost.

* Solomon-style VRPTW files: vehicle count/capacity header plus rows of
  ``id x y demand ready due service``.  Each customer becomes a degenerate
  required arc (tail = head), its time window the flat segment of a
  three-segment cost function with slope 1, its service duration the
  minimum service cost.  Travel times are full-precision Euclidean
  distances.

* Time-dependent annotation sidecars (versioned key-value text) mapping
  every task to a cost function, so one static instance can carry many
  seeded 2LP/3LP layers.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .costfn import ServiceCostFunction
from .instance import Arc, Instance, Task, build_instance, shortest_paths

ANNOTATION_TAG = "carptdsc-annotation v1"


class ParseError(ValueError):
    """Malformed input file."""


@dataclass(frozen=True)
class StaticInstanceFile:
    """Raw contents of a CARP DAT file, before graph construction."""

    name: str
    vertices: int
    required_edges: tuple[tuple[int, int, float, float], ...]  # (i, j, cost, demand)
    non_required_edges: tuple[tuple[int, int, float], ...]  # (i, j, cost)
    vehicles: int
    capacity: float
    depot: int


@dataclass(frozen=True)
class SolomonFile:
    vehicles: int
    capacity: float
    # rows: (id, x, y, demand, ready, due, service); row 0 is the depot
    rows: tuple[tuple[int, float, float, float, float, float, float], ...]


@dataclass(frozen=True)
class TdAnnotation:
    """Per-task cost-function layer for one static instance."""

    family: str  # "2lp" | "3lp"
    k: float
    horizon: float
    seed: int
    # (task_id, c_min, bt, et), one record per directed task
    records: tuple[tuple[int, float, float, float], ...]


def _num(text: str, what: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"non-numeric {what}: {text!r}") from None


_EDGE_RE = re.compile(
    r"\(\s*(\d+)\s*,\s*(\d+)\s*\)\s+cost\s+(\S+)(?:\s+demand\s+(\S+))?\s*$"
)


def read_carp(text: str) -> StaticInstanceFile:
    """Parse the DAT layout into its raw record lists."""
    header: dict[str, str] = {}
    required: list[tuple[int, int, float, float]] = []
    non_required: list[tuple[int, int, float]] = []
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if ":" in line and not line.startswith("("):
            key, _, value = line.partition(":")
            key = key.strip().upper()
            value = value.strip()
            if key == "REQUIRED_EDGE_LIST":
                section = "required"
            elif key == "NON_REQUIRED_EDGE_LIST":
                section = "non_required"
            else:
                header[key] = value
                section = None
            continue
        m = _EDGE_RE.match(line)
        if m is None or section is None:
            raise ParseError(f"line {lineno}: unrecognized line {line!r}")
        i, j = int(m.group(1)), int(m.group(2))
        cost = _num(m.group(3), "edge cost")
        if section == "required":
            if m.group(4) is None:
                raise ParseError(f"line {lineno}: required edge missing demand")
            required.append((i, j, cost, _num(m.group(4), "edge demand")))
        else:
            if m.group(4) is not None:
                raise ParseError(f"line {lineno}: non-required edge carries demand")
            non_required.append((i, j, cost))

    for key in ("NAME", "VERTICES", "REQUIRED_EDGES", "NON_REQUIRED_EDGES",
                "VEHICLES", "CAPACITY", "DEPOT"):
        if key not in header:
            raise ParseError(f"missing header field {key}")
    n_req = int(_num(header["REQUIRED_EDGES"], "required-edge count"))
    n_non = int(_num(header["NON_REQUIRED_EDGES"], "non-required-edge count"))
    if n_req != len(required):
        raise ParseError(
            f"header claims {n_req} required edges, found {len(required)}"
        )
    if n_non != len(non_required):
        raise ParseError(
            f"header claims {n_non} non-required edges, found {len(non_required)}"
        )
    return StaticInstanceFile(
        name=header["NAME"],
        vertices=int(_num(header["VERTICES"], "vertex count")),
        required_edges=tuple(required),
        non_required_edges=tuple(non_required),
        vehicles=int(_num(header["VEHICLES"], "vehicle count")),
        capacity=_num(header["CAPACITY"], "capacity"),
        depot=int(_num(header["DEPOT"], "depot")),
    )


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def serialize_carp(f: StaticInstanceFile) -> str:
    lines = [
        f"NAME : {f.name}",
        f"VERTICES : {f.vertices}",
        f"REQUIRED_EDGES : {len(f.required_edges)}",
        f"NON_REQUIRED_EDGES : {len(f.non_required_edges)}",
        f"VEHICLES : {f.vehicles}",
        f"CAPACITY : {_fmt(f.capacity)}",
        "REQUIRED_EDGE_LIST :",
    ]
    for i, j, cost, demand in f.required_edges:
        lines.append(f"( {i}, {j}) cost {_fmt(cost)} demand {_fmt(demand)}")
    lines.append("NON_REQUIRED_EDGE_LIST :")
    for i, j, cost in f.non_required_edges:
        lines.append(f"( {i}, {j}) cost {_fmt(cost)}")
    lines.append(f"DEPOT : {f.depot}")
    return "\n".join(lines) + "\n"


def carp_to_instance(f: StaticInstanceFile) -> Instance:
    """Build the directed instance; service costs start as constants.

    Vertex labels are mapped to dense 0-based IDs.  Required edge number r
    (1-based) yields the inverse task pair (2r-1, 2r).  The planning
    horizon is unbounded until a time-dependent annotation supplies one.
    """
    labels = sorted(
        {i for i, j, *_ in f.required_edges}
        | {j for i, j, *_ in f.required_edges}
        | {i for i, j, _ in f.non_required_edges}
        | {j for i, j, _ in f.non_required_edges}
        | {f.depot}
    )
    if len(labels) > f.vertices:
        raise ParseError(
            f"{len(labels)} distinct vertices referenced, header says {f.vertices}"
        )
    index = {label: idx for idx, label in enumerate(labels)}
    # Unreferenced vertices (if any) keep the header count honest.
    for extra in range(len(labels), f.vertices):
        index[f"unused-{extra}"] = extra

    arcs: list[Arc] = []
    tasks: list[Task] = []
    arc_id = 0

    def add_pair(i: int, j: int, cost: float) -> tuple[Arc, Arc]:
        nonlocal arc_id
        a = Arc(arc_id + 1, index[i], index[j], cost, cost, cost)
        b = Arc(arc_id + 2, index[j], index[i], cost, cost, cost)
        arc_id += 2
        arcs.extend((a, b))
        return a, b

    for r, (i, j, cost, demand) in enumerate(f.required_edges):
        fwd, rev = add_pair(i, j, cost)
        fn = ServiceCostFunction(c_min=cost, bt=0.0, et=0.0, k=0.0)
        tasks.append(Task(2 * r + 1, fwd, demand, fn, inverse_id=2 * r + 2))
        tasks.append(Task(2 * r + 2, rev, demand, fn, inverse_id=2 * r + 1))
    for i, j, cost in f.non_required_edges:
        add_pair(i, j, cost)

    if f.depot not in index:
        raise ParseError(f"depot vertex {f.depot} never appears in the edge lists")
    return build_instance(
        vertices=f.vertices,
        arcs=arcs,
        tasks=tasks,
        depot=index[f.depot],
        capacity=f.capacity,
        fleet_size=f.vehicles,
        horizon=math.inf,
        name=f.name,
        vertex_labels=[str(l) for l in labels]
        + [f"unused-{x}" for x in range(len(labels), f.vertices)],
    )


def parse_carp(text: str) -> tuple[StaticInstanceFile, Instance]:
    f = read_carp(text)
    return f, carp_to_instance(f)


def read_solomon(text: str) -> SolomonFile:
    """Parse the classic Solomon layout (or a bare numeric table)."""
    numeric_rows: list[list[float]] = []
    for raw in text.splitlines():
        parts = raw.split()
        if not parts:
            continue
        try:
            numeric_rows.append([float(p) for p in parts])
        except ValueError:
            continue  # title and column-header lines
    if not numeric_rows:
        raise ParseError("no numeric rows found")
    two_field = [r for r in numeric_rows if len(r) == 2]
    if not two_field:
        raise ParseError("missing vehicle NUMBER/CAPACITY header row")
    vehicles, capacity = int(two_field[0][0]), two_field[0][1]
    rows = []
    for r in numeric_rows:
        if len(r) == 7:
            rows.append(
                (int(r[0]), r[1], r[2], r[3], r[4], r[5], r[6])
            )
        elif len(r) != 2:
            raise ParseError(f"malformed customer row: {r}")
    if not rows or rows[0][0] != 0:
        raise ParseError("first customer row must be the depot (id 0)")
    for row in rows:
        if not all(math.isfinite(x) for x in row[1:3]):
            raise ParseError(f"non-finite coordinates in row {row}")
    return SolomonFile(vehicles=vehicles, capacity=capacity, rows=tuple(rows))


def solomon_to_instance(
    f: SolomonFile, max_customers: Optional[int] = None, name: str = "solomon"
) -> Instance:
    rows = f.rows
    if max_customers is not None:
        rows = rows[: max_customers + 1]
    n = len(rows)  # depot + customers

    coords = [(r[1], r[2]) for r in rows]
    arcs: list[Arc] = []
    arc_id = 0
    for u in range(n):
        for v in range(n):
            if u == v:
                continue
            arc_id += 1
            d = math.dist(coords[u], coords[v])
            arcs.append(Arc(arc_id, u, v, d, d, d))

    tasks: list[Task] = []
    for vid in range(1, n):
        cid, _, _, demand, ready, due, service = rows[vid]
        arc_id += 1
        arc = Arc(arc_id, vid, vid, 0.0, 0.0, 0.0)
        fn = ServiceCostFunction(c_min=service, bt=ready, et=due, k=1.0)
        tasks.append(Task(vid, arc, demand, fn, inverse_id=None))

    depot_due = rows[0][5]
    return build_instance(
        vertices=n,
        arcs=arcs,
        tasks=tasks,
        depot=0,
        capacity=f.capacity,
        fleet_size=f.vehicles,
        horizon=depot_due,
        name=name,
        vertex_labels=[str(r[0]) for r in rows],
    )


def parse_solomon(text: str, max_customers: Optional[int] = None) -> Instance:
    return solomon_to_instance(read_solomon(text), max_customers=max_customers)


def apply_annotation(instance: Instance, ann: TdAnnotation) -> Instance:
    """Rebuild ``instance`` with the annotation's cost functions and horizon."""
    by_id = {tid: (c, bt, et) for tid, c, bt, et in ann.records}
    if set(by_id) != set(instance.real_task_ids):
        raise ParseError("annotation does not cover the task set exactly")
    tasks = []
    for tid in instance.real_task_ids:
        old = instance.tasks[tid]
        c_min, bt, et = by_id[tid]
        tasks.append(
            Task(
                id=old.id,
                arc=old.arc,
                demand=old.demand,
                cost_fn=ServiceCostFunction(c_min=c_min, bt=bt, et=et, k=ann.k),
                inverse_id=old.inverse_id,
            )
        )
    return build_instance(
        vertices=instance.num_vertices,
        arcs=instance.arcs,
        tasks=tasks,
        depot=instance.depot,
        capacity=instance.capacity,
        fleet_size=instance.fleet_size,
        horizon=ann.horizon,
        name=instance.name,
        vertex_labels=instance.vertex_labels,
    )


def generate_td(
    static_instance: Instance,
    family: str,
    slope_set: Sequence[float],
    seed: int,
) -> tuple[Instance, TdAnnotation]:
    """Overlay a seeded time-dependent layer on a static instance.

    2LP: every task keeps its static cost as c_min with bt = et = 0 and
    slope 1.  3LP: one slope magnitude is drawn from ``slope_set`` for the
    whole instance; each task's flat segment has its midpoint uniform in
    [0.1*T, 0.9*T] and width uniform in [st, 3*st] where st is the static
    service cost (inverse twins share their window).  The horizon T is
    twice the cost of one path-scanning construction at time 0 on the
    static instance.  Pure function of (instance, family, slope_set, seed).
    """
    from .maens import init_individual  # deferred: maens builds on this module's output

    family = family.lower()
    if family not in ("2lp", "3lp"):
        raise ValueError(f"family must be '2lp' or '3lp', got {family!r}")
    if family == "3lp" and not slope_set:
        raise ValueError("3LP generation needs a non-empty slope set")

    rng = np.random.Generator(np.random.PCG64(seed))

    sp = shortest_paths(static_instance)
    from .solution import RouteEvaluator, split_routes

    plan = init_individual(static_instance, sp, rng)
    evaluator = RouteEvaluator(static_instance, sp)
    construction_cost = sum(
        evaluator.total(route, 0.0) for route in split_routes(plan)
    )
    horizon = 2.0 * construction_cost

    records: list[tuple[int, float, float, float]] = []
    if family == "2lp":
        k = 1.0
        for tid in static_instance.real_task_ids:
            st = static_instance.tasks[tid].cost_fn.c_min
            records.append((tid, st, 0.0, 0.0))
    else:
        k = float(rng.choice(sorted(slope_set)))
        window: dict[int, tuple[float, float]] = {}
        roots = sorted(
            {static_instance.pair_root(tid) for tid in static_instance.real_task_ids}
        )
        for root in roots:
            st = static_instance.tasks[root].cost_fn.c_min
            mid = rng.uniform(0.1 * horizon, 0.9 * horizon)
            width = rng.uniform(st, 3.0 * st)
            bt = max(0.0, mid - width / 2.0)
            window[root] = (bt, bt + width)
        for tid in static_instance.real_task_ids:
            st = static_instance.tasks[tid].cost_fn.c_min
            bt, et = window[static_instance.pair_root(tid)]
            records.append((tid, st, bt, et))

    ann = TdAnnotation(
        family=family, k=k, horizon=horizon, seed=seed, records=tuple(records)
    )
    return apply_annotation(static_instance, ann), ann


def serialize_annotation(ann: TdAnnotation) -> str:
    lines = [
        ANNOTATION_TAG,
        f"family : {ann.family}",
        f"k : {repr(ann.k)}",
        f"horizon : {repr(ann.horizon)}",
        f"seed : {ann.seed}",
        f"tasks : {len(ann.records)}",
    ]
    for tid, c_min, bt, et in ann.records:
        lines.append(f"task {tid} c_min {repr(c_min)} bt {repr(bt)} et {repr(et)}")
    return "\n".join(lines) + "\n"


def read_annotation(text: str) -> TdAnnotation:
    lines = [l.strip() for l in text.splitlines() if l.strip()]
    if not lines or lines[0] != ANNOTATION_TAG:
        raise ParseError(f"missing or unsupported format tag (want {ANNOTATION_TAG!r})")
    header: dict[str, str] = {}
    records: list[tuple[int, float, float, float]] = []
    for line in lines[1:]:
        if line.startswith("task "):
            parts = line.split()
            if len(parts) != 8 or parts[2] != "c_min" or parts[4] != "bt" or parts[6] != "et":
                raise ParseError(f"malformed task record: {line!r}")
            records.append(
                (int(parts[1]), float(parts[3]), float(parts[5]), float(parts[7]))
            )
        else:
            key, _, value = line.partition(":")
            header[key.strip()] = value.strip()
    for key in ("family", "k", "horizon", "seed", "tasks"):
        if key not in header:
            raise ParseError(f"annotation missing field {key!r}")
    if int(header["tasks"]) != len(records):
        raise ParseError(
            f"annotation claims {header['tasks']} tasks, found {len(records)}"
        )
    return TdAnnotation(
        family=header["family"],
        k=float(header["k"]),
        horizon=float(header["horizon"]),
        seed=int(header["seed"]),
        records=tuple(records),
    )
