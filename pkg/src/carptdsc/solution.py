"""Solution encoding, route-cost evaluation, and constraint checking.

A routing plan is a flat task-ID sequence using 0 as separator, starting
and ending at the depot, e.g. (0, 1, 3, 0, 2, 4, 0) encodes two routes.
A solution pairs the plan with one departure time per route.

Route cost follows the arrival-time recurrence: service and travel costs
equal service and travel times, no waiting is allowed, so each task's
time of beginning of service is the departure time plus all preceding
service costs and shortest-path travel times.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .instance import Instance, ShortestPaths

RoutingPlan = tuple[int, ...]
DepartureTimes = tuple[float, ...]


class PlanError(ValueError):
    """Malformed routing plan."""


@dataclass(frozen=True)
class Solution:
    plan: RoutingPlan
    departures: DepartureTimes
    cached_cost: Optional[float] = None  # convenience only; evaluation recomputes


@dataclass(frozen=True)
class RouteEval:
    """Evaluation of one route at a fixed departure time.

    ``arrival_times`` covers the depot departure, every task's time of
    beginning of service, and the arrival back at the depot; so its
    length is the route length plus two and arrival_times[0] is the
    departure time.
    """

    arrival_times: tuple[float, ...]
    service_costs: tuple[float, ...]
    deadhead_cost: float
    total: float
    horizon_violation: float


@dataclass(frozen=True)
class FeasibilityReport:
    depot_endpoints: bool         # routes begin and end at the depot
    no_duplicate_service: bool    # no task served twice
    no_inverse_service: bool      # no task served together with its inverse
    all_tasks_served: bool        # served set covers every task up to inversion
    capacity_respected: bool      # per-route demand within capacity
    horizon_tasks: bool           # every service start within [0, horizon]
    horizon_return: bool          # every return-to-depot within [0, horizon]
    capacity_excess: tuple[float, ...]
    duplicates: tuple[int, ...]
    missing: tuple[int, ...]

    @property
    def feasible(self) -> bool:
        return (
            self.depot_endpoints
            and self.no_duplicate_service
            and self.no_inverse_service
            and self.all_tasks_served
            and self.capacity_respected
            and self.horizon_tasks
            and self.horizon_return
        )


def split_routes(plan: Sequence[int]) -> list[tuple[int, ...]]:
    """Split a 0-delimited plan into routes; empty runs are dropped."""
    plan = tuple(plan)
    if len(plan) < 2 or plan[0] != 0 or plan[-1] != 0:
        raise PlanError(f"plan must begin and end with the separator 0: {plan}")
    routes: list[tuple[int, ...]] = []
    current: list[int] = []
    for tid in plan[1:]:
        if tid < 0:
            raise PlanError(f"negative task ID {tid} in plan")
        if tid == 0:
            if current:
                routes.append(tuple(current))
                current = []
        else:
            current.append(tid)
    if current:
        # plan[-1] == 0 was checked, so the last run is always flushed
        raise PlanError("plan does not end with the separator 0")
    return routes


def join_routes(routes: Sequence[Sequence[int]]) -> RoutingPlan:
    """Inverse of :func:`split_routes`; no routes yields the empty plan (0, 0)."""
    plan: list[int] = [0]
    for route in routes:
        if route:
            plan.extend(route)
            plan.append(0)
    if len(plan) == 1:
        plan.append(0)
    return tuple(plan)


class RouteEvaluator:
    """Route evaluation bound to one instance and its shortest paths.

    Precomputes flat per-task attribute arrays and plain nested lists for
    the travel matrices, keeping the forward pass cheap inside search
    loops.  Evaluation is a pure function of (route, departure time).
    """

    def __init__(self, instance: Instance, sp: ShortestPaths):
        self.instance = instance
        self.sp = sp
        self.depot = instance.depot
        n_ids = max(instance.tasks) + 1
        self.tail = [0] * n_ids
        self.head = [0] * n_ids
        self.c_min = [0.0] * n_ids
        self.bt = [0.0] * n_ids
        self.et = [0.0] * n_ids
        self.k = [0.0] * n_ids
        self.demand = [0.0] * n_ids
        for tid, task in instance.tasks.items():
            self.tail[tid] = task.arc.tail
            self.head[tid] = task.arc.head
            fn = task.cost_fn
            self.c_min[tid] = fn.c_min
            self.bt[tid] = fn.bt
            self.et[tid] = fn.et
            self.k[tid] = fn.k
            self.demand[tid] = task.demand
        self.sp_time = sp.time.tolist()
        self.sp_cost = sp.cost.tolist()

    def _check_route(self, route: Sequence[int]):
        for tid in route:
            if tid == 0 or tid not in self.instance.tasks:
                raise PlanError(f"unknown or depot task ID {tid} in route")

    def evaluate(self, route: Sequence[int], t: float) -> RouteEval:
        """Full evaluation with arrival times and per-task service costs."""
        if t < 0:
            raise ValueError(f"departure time must be >= 0, got {t}")
        self._check_route(route)
        sp_time, sp_cost = self.sp_time, self.sp_cost
        arrivals = [t]
        services: list[float] = []
        cur = t
        v = self.depot
        deadhead = 0.0
        for tid in route:
            tail = self.tail[tid]
            leg_t = sp_time[v][tail]
            if leg_t == float("inf"):
                raise PlanError(f"no deadhead path from vertex {v} to task {tid}")
            deadhead += sp_cost[v][tail]
            cur += leg_t
            arrivals.append(cur)
            bt, et = self.bt[tid], self.et[tid]
            if cur < bt:
                sc = self.c_min[tid] + self.k[tid] * (bt - cur)
            elif cur > et:
                sc = self.c_min[tid] + self.k[tid] * (cur - et)
            else:
                sc = self.c_min[tid]
            services.append(sc)
            cur += sc
            v = self.head[tid]
        leg_t = sp_time[v][self.depot]
        if leg_t == float("inf"):
            raise PlanError(f"no deadhead path from vertex {v} back to the depot")
        deadhead += sp_cost[v][self.depot]
        cur += leg_t
        arrivals.append(cur)
        return RouteEval(
            arrival_times=tuple(arrivals),
            service_costs=tuple(services),
            deadhead_cost=deadhead,
            total=sum(services) + deadhead,
            horizon_violation=max(0.0, cur - self.instance.horizon),
        )

    def total(self, route: Sequence[int], t: float) -> float:
        """Route cost only; same forward pass without bookkeeping."""
        sp_time, sp_cost = self.sp_time, self.sp_cost
        c_min, bts, ets, ks = self.c_min, self.bt, self.et, self.k
        tails, heads = self.tail, self.head
        cur = t
        v = self.depot
        total = 0.0
        for tid in route:
            tail = tails[tid]
            cur += sp_time[v][tail]
            total += sp_cost[v][tail]
            bt, et = bts[tid], ets[tid]
            if cur < bt:
                sc = c_min[tid] + ks[tid] * (bt - cur)
            elif cur > et:
                sc = c_min[tid] + ks[tid] * (cur - et)
            else:
                sc = c_min[tid]
            total += sc
            cur += sc
            v = heads[tid]
        return total + sp_cost[v][self.depot]

    def profile(self, route: Sequence[int], ts: np.ndarray) -> np.ndarray:
        """Route cost swept over an array of departure times (vectorized)."""
        self._check_route(route)
        ts = np.asarray(ts, dtype=float)
        cur = ts.astype(float, copy=True)
        total = np.zeros_like(cur)
        v = self.depot
        for tid in route:
            tail = self.tail[tid]
            leg_t = self.sp_time[v][tail]
            if leg_t == float("inf"):
                raise PlanError(f"no deadhead path from vertex {v} to task {tid}")
            total += self.sp_cost[v][tail]
            cur += leg_t
            sc = self.c_min[tid] + self.k[tid] * (
                np.maximum(self.bt[tid] - cur, 0.0) + np.maximum(cur - self.et[tid], 0.0)
            )
            total += sc
            cur += sc
            v = self.head[tid]
        total += self.sp_cost[v][self.depot]
        return total

    def route_load(self, route: Sequence[int]) -> float:
        return sum(self.demand[tid] for tid in route)

    def solution_cost(self, solution: Solution) -> float:
        routes = split_routes(solution.plan)
        if len(routes) != len(solution.departures):
            raise ValueError(
                f"{len(solution.departures)} departure times for {len(routes)} routes"
            )
        return sum(
            self.total(route, t) for route, t in zip(routes, solution.departures)
        )


def evaluate_route(
    route: Sequence[int], t: float, instance: Instance, sp: ShortestPaths
) -> RouteEval:
    """Evaluate one route at departure time ``t``."""
    return RouteEvaluator(instance, sp).evaluate(route, t)


def evaluate_solution(solution: Solution, instance: Instance, sp: ShortestPaths) -> float:
    """Total cost, the sum of independent per-route costs."""
    return RouteEvaluator(instance, sp).solution_cost(solution)


def check_feasibility(
    solution: Solution, instance: Instance, sp: ShortestPaths
) -> FeasibilityReport:
    """Evaluate every constraint; violations are report content, not errors."""
    routes = split_routes(solution.plan)
    if len(routes) != len(solution.departures):
        raise ValueError(
            f"{len(solution.departures)} departure times for {len(routes)} routes"
        )
    evaluator = RouteEvaluator(instance, sp)

    seen_pairs: dict[int, int] = {}
    duplicates: list[int] = []
    inverse_clash = False
    for route in routes:
        for tid in route:
            if tid not in instance.tasks or tid == 0:
                raise PlanError(f"unknown task ID {tid} in plan")
            root = instance.pair_root(tid)
            if root in seen_pairs:
                duplicates.append(tid)
                if seen_pairs[root] != tid:
                    inverse_clash = True
            else:
                seen_pairs[root] = tid

    required = {instance.pair_root(tid) for tid in instance.real_task_ids}
    missing = sorted(required - set(seen_pairs))

    excess: list[float] = []
    horizon_tasks_ok = True
    horizon_return_ok = True
    for route, t in zip(routes, solution.departures):
        excess.append(max(0.0, evaluator.route_load(route) - instance.capacity))
        if t < 0:  # violates the lower end of the time window
            horizon_tasks_ok = False
        ev = evaluator.evaluate(route, max(t, 0.0))
        # arrival_times[0] is the departure, [1:-1] the service starts,
        # [-1] the return leg; the window applies to all of them
        if any(a > instance.horizon for a in ev.arrival_times[:-1]):
            horizon_tasks_ok = False
        if ev.arrival_times[-1] > instance.horizon:
            horizon_return_ok = False

    return FeasibilityReport(
        depot_endpoints=True,  # guaranteed by the 0-delimited encoding
        no_duplicate_service=not duplicates,
        no_inverse_service=not inverse_clash,
        all_tasks_served=not missing,
        capacity_respected=all(e == 0.0 for e in excess),
        horizon_tasks=horizon_tasks_ok,
        horizon_return=horizon_return_ok,
        capacity_excess=tuple(excess),
        duplicates=tuple(duplicates),
        missing=tuple(missing),
    )


def format_solution(
    solution: Solution, instance: Instance, sp: ShortestPaths
) -> str:
    """Line-oriented text form: one route line per route plus a total line."""
    evaluator = RouteEvaluator(instance, sp)
    routes = split_routes(solution.plan)
    lines = []
    total = 0.0
    for i, (route, t) in enumerate(zip(routes, solution.departures), start=1):
        cost = evaluator.total(route, t)
        total += cost
        tasks = " ".join(str(tid) for tid in route)
        lines.append(f"route {i}: {tasks}; depart {t:.6f}; cost {cost:.6f}")
    lines.append(f"total {total:.6f}")
    return "\n".join(lines) + "\n"
