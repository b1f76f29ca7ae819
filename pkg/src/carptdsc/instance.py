"""Directed-graph instance model and all-pairs shortest paths.

An instance holds the full arc set (required and deadhead), the task list
(required arcs, each with a demand and a time-dependent cost function),
the depot, vehicle capacity and fleet size, and the planning horizon.
Undirected source edges are imported as two mutually-inverse arcs; serving
either direction satisfies the task.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .costfn import ServiceCostFunction


class InstanceError(ValueError):
    """Rejected instance construction, with a diagnostic message."""


@dataclass(frozen=True)
class Arc:
    id: int
    tail: int
    head: int
    length: float
    travel_time: float
    travel_cost: float


@dataclass(frozen=True)
class Task:
    """A required arc.  ``inverse_id`` links the opposite-direction twin."""

    id: int
    arc: Arc
    demand: float
    cost_fn: ServiceCostFunction
    inverse_id: Optional[int] = None


@dataclass(frozen=True)
class Instance:
    name: str
    num_vertices: int
    arcs: tuple[Arc, ...]
    tasks: Mapping[int, Task]  # includes the depot dummy task 0
    depot: int
    capacity: float
    fleet_size: int
    horizon: float
    vertex_labels: Optional[tuple[str, ...]] = None
    real_task_ids: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self,
            "real_task_ids",
            tuple(sorted(tid for tid in self.tasks if tid != 0)),
        )

    @property
    def num_tasks(self) -> int:
        """Number of directed required-arc records (inverse twins counted twice)."""
        return len(self.real_task_ids)

    @property
    def num_required(self) -> int:
        """Number of tasks up to inversion (an inverse pair counts once)."""
        return len({self.pair_root(tid) for tid in self.real_task_ids})

    def pair_root(self, task_id: int) -> int:
        """Canonical representative of a task and its inverse twin."""
        inv = self.tasks[task_id].inverse_id
        return task_id if inv is None else min(task_id, inv)


def build_instance(
    vertices: int,
    arcs: Sequence[Arc],
    tasks: Sequence[Task],
    depot: int,
    capacity: float,
    fleet_size: int,
    horizon: float,
    name: str = "",
    vertex_labels: Optional[Sequence[str]] = None,
) -> Instance:
    """Validate and assemble an instance, installing the depot dummy task 0."""
    if vertices <= 0:
        raise InstanceError(f"vertex count must be positive, got {vertices}")
    if not 0 <= depot < vertices:
        raise InstanceError(f"depot vertex {depot} outside range [0, {vertices})")
    if horizon <= 0:
        raise InstanceError(f"planning horizon must be positive, got {horizon}")
    if capacity <= 0:
        raise InstanceError(f"vehicle capacity must be positive, got {capacity}")

    for arc in arcs:
        if not (0 <= arc.tail < vertices and 0 <= arc.head < vertices):
            raise InstanceError(
                f"arc {arc.id} references vertex outside range: "
                f"({arc.tail}, {arc.head}) with {vertices} vertices"
            )
        if arc.travel_time < 0 or arc.travel_cost < 0:
            raise InstanceError(f"arc {arc.id} has negative travel time or cost")

    task_map: dict[int, Task] = {}
    for task in tasks:
        if task.id <= 0:
            raise InstanceError(f"task ID must be positive, got {task.id}")
        if task.id in task_map:
            raise InstanceError(f"duplicate task ID {task.id}")
        if not (0 <= task.arc.tail < vertices and 0 <= task.arc.head < vertices):
            raise InstanceError(f"task {task.id} arc endpoints out of range")
        if task.demand < 0:
            raise InstanceError(f"task {task.id} has negative demand")
        if task.demand > capacity:
            raise InstanceError(
                f"task {task.id} demand {task.demand} exceeds capacity {capacity}; "
                "it can never be served"
            )
        if task.cost_fn.c_min <= 0:
            raise InstanceError(
                f"task {task.id} must have a positive minimum service cost"
            )
        task_map[task.id] = task

    for task in task_map.values():
        if task.inverse_id is not None:
            twin = task_map.get(task.inverse_id)
            if twin is None:
                raise InstanceError(
                    f"task {task.id} names unknown inverse {task.inverse_id}"
                )
            if twin.inverse_id != task.id:
                raise InstanceError(
                    f"inverse link of tasks {task.id}/{twin.id} is not symmetric"
                )

    depot_arc = Arc(id=0, tail=depot, head=depot, length=0.0, travel_time=0.0, travel_cost=0.0)
    task_map[0] = Task(
        id=0,
        arc=depot_arc,
        demand=0.0,
        cost_fn=ServiceCostFunction(c_min=0.0),
        inverse_id=None,
    )

    return Instance(
        name=name,
        num_vertices=vertices,
        arcs=tuple(arcs),
        tasks=task_map,
        depot=depot,
        capacity=float(capacity),
        fleet_size=int(fleet_size),
        horizon=float(horizon),
        vertex_labels=tuple(vertex_labels) if vertex_labels is not None else None,
    )


@dataclass(frozen=True, eq=False)
class ShortestPaths:
    """Dense all-pairs travel time/cost matrices with predecessor data.

    ``time[u, v]`` is the minimum travel time from u to v; ``cost[u, v]``
    the travel cost along that time-minimizing path.  Unreachable pairs
    hold ``inf``.  ``pred[u, v]`` is the predecessor of v on the path from
    u (-1 for v == u or unreachable).
    """

    time: np.ndarray
    cost: np.ndarray
    pred: np.ndarray

    def travel(self, u: int, v: int) -> tuple[float, float]:
        return float(self.time[u, v]), float(self.cost[u, v])

    def reachable(self, u: int, v: int) -> bool:
        return math.isfinite(self.time[u, v])

    def path(self, u: int, v: int) -> list[int]:
        """Vertex sequence of the stored shortest path from u to v."""
        if u == v:
            return [u]
        if not self.reachable(u, v):
            raise ValueError(f"no path from {u} to {v}")
        out = [v]
        while v != u:
            v = int(self.pred[u, v])
            out.append(v)
        out.reverse()
        return out


def shortest_paths(instance: Instance) -> ShortestPaths:
    """All-pairs shortest paths by Dijkstra from every source vertex.

    Paths minimize travel time; ties are broken by lower travel cost, then
    by lower predecessor vertex ID, so the result is a pure function of
    the instance.
    """
    n = instance.num_vertices
    adj: list[list[tuple[int, float, float]]] = [[] for _ in range(n)]
    for arc in instance.arcs:
        adj[arc.tail].append((arc.head, arc.travel_time, arc.travel_cost))
    for nbrs in adj:
        nbrs.sort()

    time = np.full((n, n), math.inf)
    cost = np.full((n, n), math.inf)
    pred = np.full((n, n), -1, dtype=np.int64)

    for src in range(n):
        dist_t = time[src]
        dist_c = cost[src]
        dist_t[src] = 0.0
        dist_c[src] = 0.0
        heap: list[tuple[float, float, int]] = [(0.0, 0.0, src)]
        done = [False] * n
        while heap:
            dt, dc, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for v, at, ac in adj[u]:
                nt, nc = dt + at, dc + ac
                if (nt, nc) < (dist_t[v], dist_c[v]):
                    dist_t[v] = nt
                    dist_c[v] = nc
                    pred[src, v] = u
                    heapq.heappush(heap, (nt, nc, v))
                elif nt == dist_t[v] and nc == dist_c[v] and not done[v]:
                    if 0 <= pred[src, v] and u < pred[src, v]:
                        pred[src, v] = u

    return ShortestPaths(time=time, cost=cost, pred=pred)


def inverse_of(instance: Instance, task_id: int) -> Optional[int]:
    """ID of the opposite-direction twin of ``task_id``, or None."""
    task = instance.tasks.get(task_id)
    if task is None:
        raise InstanceError(f"unknown task ID {task_id}")
    return task.inverse_id
