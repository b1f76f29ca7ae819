"""Memetic routing search with time-dependent evaluation (stage 1).

The search evolves routing plans only; every candidate is evaluated with
all routes departing at time 0, the reference point of stage 1 (departure
times are optimized afterwards, per route, by the departure module).

Components: a path-scanning constructor whose nearest-task ties are broken
by roulette-wheel selection over reciprocal time-dependent service costs,
a sequence-based crossover, three first-improvement move neighborhoods
(single insertion, double insertion, swap), and a merge-split large
neighborhood that dissolves routes and rebuilds them via the constructor
plus a minimum-cost splitting pass.  Capacity and horizon violations are
penalized with an adaptive coefficient; the final answer is the best
feasible plan found.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .instance import Instance, ShortestPaths
from .solution import RouteEvaluator, RoutingPlan, join_routes, split_routes

SCORE_FLOOR = 1e-9  # guards the reciprocal score on degenerate zero costs
IMPROVE_EPS = 1e-9


class SolverError(RuntimeError):
    """No feasible plan found within the search budget."""


@dataclass(frozen=True)
class Individual:
    plan: RoutingPlan
    total_cost: float
    violation: float  # capacity excess plus horizon excess, summed over routes
    penalized_cost: float

    @property
    def feasible(self) -> bool:
        return self.violation == 0.0


@dataclass(frozen=True)
class MaensParams:
    psize: int = 10
    generations: int = 50
    pls: float = 0.1
    offspring_per_gen: Optional[int] = None  # defaults to psize
    ms_route_count: int = 2
    penalty_period: int = 5  # generations between penalty doubling/halving
    ls_max_sweeps: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.psize < 2:
            raise ValueError(f"population size must be >= 2, got {self.psize}")
        if not 0.0 <= self.pls <= 1.0:
            raise ValueError(f"local-search probability must be in [0, 1], got {self.pls}")
        if self.generations < 1:
            raise ValueError("need at least one generation")


@dataclass
class EvolveResult:
    plan: RoutingPlan
    total_cost: float
    # rows (generation, best penalized in population, best feasible cost so far)
    trace: list[tuple[int, float, float]] = field(default_factory=list)


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _stream(seed: int, *indices: int) -> np.random.Generator:
    """Independent deterministic RNG stream for a (generation, offspring) slot."""
    mixed = seed & 0xFFFFFFFF
    for idx in indices:
        mixed = (mixed * 1_000_003 + idx + 1) & 0xFFFFFFFFFFFF
    return _rng(mixed)


class _Assessor:
    """Cached route statistics and penalized-cost bookkeeping."""

    def __init__(self, instance: Instance, sp: ShortestPaths,
                 evaluator: Optional[RouteEvaluator] = None):
        self.instance = instance
        self.evaluator = evaluator if evaluator is not None else RouteEvaluator(instance, sp)
        self.capacity = instance.capacity
        self._cache: dict[tuple[int, ...], tuple[float, float]] = {}

    def route_stats(self, route: Sequence[int]) -> tuple[float, float]:
        """(total cost, violation) of one route departing at time 0."""
        key = tuple(route)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        ev = self.evaluator.evaluate(key, 0.0)
        load_excess = max(0.0, self.evaluator.route_load(key) - self.capacity)
        stats = (ev.total, ev.horizon_violation + load_excess)
        self._cache[key] = stats
        return stats

    def contrib(self, route: Sequence[int], lam: float) -> float:
        total, violation = self.route_stats(route)
        return total + lam * violation

    def assess(self, plan: RoutingPlan, lam: float) -> Individual:
        total = 0.0
        violation = 0.0
        for route in split_routes(plan):
            rt, rv = self.route_stats(route)
            total += rt
            violation += rv
        return Individual(
            plan=plan,
            total_cost=total,
            violation=violation,
            penalized_cost=total + lam * violation,
        )


def _default_lambda(instance: Instance, reference_cost: float) -> float:
    return max(1.0, reference_cost / max(1.0, instance.capacity))


def select_next_task(
    instance: Instance,
    candidates: Sequence[int],
    current_time: float,
    rng: np.random.Generator,
) -> int:
    """Roulette-wheel pick among equally-near tasks.

    Each candidate's score is the reciprocal of its time-dependent service
    cost at ``current_time`` (its shared arrival time), so cheaper-to-serve
    tasks are proportionally more likely.
    """
    if not candidates:
        raise ValueError("no candidates to select from")
    scores = [
        1.0 / max(instance.tasks[tid].cost_fn.value(current_time), SCORE_FLOOR)
        for tid in candidates
    ]
    pick = rng.random() * sum(scores)
    acc = 0.0
    for tid, score in zip(candidates, scores):
        acc += score
        if pick < acc:
            return tid
    return candidates[-1]


def selection_probabilities(
    instance: Instance, candidates: Sequence[int], current_time: float
) -> list[float]:
    """Closed-form roulette probabilities used by :func:`select_next_task`."""
    scores = [
        1.0 / max(instance.tasks[tid].cost_fn.value(current_time), SCORE_FLOOR)
        for tid in candidates
    ]
    total = sum(scores)
    return [s / total for s in scores]


def init_individual(
    instance: Instance,
    sp: ShortestPaths,
    rng: np.random.Generator,
    evaluator: Optional[RouteEvaluator] = None,
) -> RoutingPlan:
    """Path-scanning construction of one routing plan.

    Routes are built one at a time from the depot at departure time 0,
    repeatedly adding the capacity-feasible unserved task nearest (by
    shortest-path travel time) to the current route end.  A task and its
    inverse are both candidates; ties are broken by
    :func:`select_next_task`.  A route closes when no unserved task fits
    the remaining capacity.
    """
    ev = evaluator if evaluator is not None else RouteEvaluator(instance, sp)
    sp_time = ev.sp_time
    tail, head = ev.tail, ev.head
    demand = ev.demand
    depot = instance.depot

    unserved: set[int] = set(instance.pair_root(t) for t in instance.real_task_ids)
    candidates_of: dict[int, tuple[int, ...]] = {}
    for root in unserved:
        inv = instance.tasks[root].inverse_id
        candidates_of[root] = (root,) if inv is None else (root, inv)

    routes: list[list[int]] = []
    while unserved:
        route: list[int] = []
        load = 0.0
        cur_v = depot
        cur_t = 0.0
        while True:
            feasible = [
                tid
                for root in unserved
                for tid in candidates_of[root]
                if demand[tid] + load <= instance.capacity
            ]
            if not feasible:
                break
            dmin = min(sp_time[cur_v][tail[t]] for t in feasible)
            if dmin == float("inf"):
                break  # remaining tasks unreachable from here
            nearest = sorted(
                t for t in feasible if sp_time[cur_v][tail[t]] <= dmin + 1e-9
            )
            chosen = select_next_task(instance, nearest, cur_t + dmin, rng)
            cur_t += sp_time[cur_v][tail[chosen]]
            fn = instance.tasks[chosen].cost_fn
            cur_t += fn.value(cur_t)
            cur_v = head[chosen]
            load += demand[chosen]
            route.append(chosen)
            unserved.discard(instance.pair_root(chosen))
        if not route:
            raise SolverError("constructor could not place any remaining task")
        routes.append(route)
    return join_routes(routes)


def _coverage_ok(plan: RoutingPlan, instance: Instance) -> bool:
    seen: set[int] = set()
    for route in split_routes(plan):
        for tid in route:
            root = instance.pair_root(tid)
            if root in seen:
                return False
            seen.add(root)
    return seen == {instance.pair_root(t) for t in instance.real_task_ids}


def _cheapest_insertion(
    routes: list[list[int]],
    tid: int,
    assessor: _Assessor,
    instance: Instance,
    lam: float,
) -> None:
    """Insert ``tid`` (or its inverse) where it increases cost least."""
    inv = instance.tasks[tid].inverse_id
    orientations = (tid,) if inv is None else (tid, inv)
    best = None  # (delta, route index or None, position, oriented id)
    for ri, route in enumerate(routes):
        base = assessor.contrib(route, lam)
        for pos in range(len(route) + 1):
            for oid in orientations:
                cand = route[:pos] + [oid] + route[pos:]
                delta = assessor.contrib(cand, lam) - base
                if best is None or delta < best[0]:
                    best = (delta, ri, pos, oid)
    for oid in orientations:  # opening a fresh route is always an option
        delta = assessor.contrib([oid], lam)
        if best is None or delta < best[0]:
            best = (delta, None, 0, oid)
    _, ri, pos, oid = best
    if ri is None:
        routes.append([oid])
    else:
        routes[ri].insert(pos, oid)


def crossover(
    parent1: RoutingPlan,
    parent2: RoutingPlan,
    instance: Instance,
    sp: ShortestPaths,
    rng: np.random.Generator,
    assessor: Optional[_Assessor] = None,
    lam: Optional[float] = None,
) -> RoutingPlan:
    """Sequence-based crossover.

    Each parent's route list is cut at a random route plus intra-route
    point; the head of parent 1 is joined to the tail of parent 2.  Tasks
    served twice (directly or via their inverse) are dropped after their
    first occurrence, and tasks lost in the exchange are reinserted at
    their cheapest positions.  The child may violate capacity; that is
    left to the penalty mechanism.
    """
    if assessor is None:
        assessor = _Assessor(instance, sp)
    routes1 = [list(r) for r in split_routes(parent1)]
    routes2 = [list(r) for r in split_routes(parent2)]
    r1 = int(rng.integers(len(routes1)))
    c1 = int(rng.integers(len(routes1[r1]) + 1))
    r2 = int(rng.integers(len(routes2)))
    c2 = int(rng.integers(len(routes2[r2]) + 1))

    routes = (
        [list(r) for r in routes1[:r1]]
        + [routes1[r1][:c1] + routes2[r2][c2:]]
        + [list(r) for r in routes2[r2 + 1:]]
    )

    seen: set[int] = set()
    deduped: list[list[int]] = []
    for route in routes:
        kept = []
        for tid in route:
            root = instance.pair_root(tid)
            if root not in seen:
                seen.add(root)
                kept.append(tid)
        if kept:
            deduped.append(kept)
    routes = deduped

    required = {instance.pair_root(t) for t in instance.real_task_ids}
    missing = sorted(required - seen)
    if missing:
        order = list(rng.permutation(len(missing)))
        if lam is None:
            lam = _default_lambda(instance, sum(
                assessor.route_stats(r)[0] for r in routes) or 1.0)
        for idx in order:
            _cheapest_insertion(routes, missing[idx], assessor, instance, lam)
    if not routes:
        raise ValueError("crossover produced an empty plan")
    return join_routes(routes)


def _scan_single_insertion(routes, assessor, instance, lam, rng) -> bool:
    """Move one task to another position/orientation; first improvement."""
    positions = [(ri, pi) for ri, r in enumerate(routes) for pi in range(len(r))]
    for src in rng.permutation(len(positions)):
        ri, pi = positions[src]
        route = routes[ri]
        tid = route[pi]
        inv = instance.tasks[tid].inverse_id
        orientations = (tid,) if inv is None else (tid, inv)
        removed = route[:pi] + route[pi + 1:]
        base_src = assessor.contrib(route, lam)
        removed_contrib = assessor.contrib(removed, lam) if removed else 0.0
        targets = [(rj, qj) for rj, r in enumerate(routes)
                   for qj in range(len(r) + 1) if rj != ri]
        targets += [(ri, qj) for qj in range(len(removed) + 1)]
        targets.append((-1, 0))  # fresh route
        for tgt in rng.permutation(len(targets)):
            rj, qj = targets[tgt]
            for oid in orientations:
                if rj == ri:
                    cand = removed[:qj] + [oid] + removed[qj:]
                    delta = assessor.contrib(cand, lam) - base_src
                elif rj == -1:
                    delta = (
                        removed_contrib - base_src + assessor.contrib([oid], lam)
                    )
                else:
                    base_tgt = assessor.contrib(routes[rj], lam)
                    cand_tgt = routes[rj][:qj] + [oid] + routes[rj][qj:]
                    delta = (
                        removed_contrib - base_src
                        + assessor.contrib(cand_tgt, lam) - base_tgt
                    )
                if delta < -IMPROVE_EPS:
                    if rj == ri:
                        routes[ri] = removed[:qj] + [oid] + removed[qj:]
                    elif rj == -1:
                        routes[ri] = removed
                        routes.append([oid])
                    else:
                        routes[rj].insert(qj, oid)
                        routes[ri] = removed
                    if not routes[ri]:
                        routes.pop(ri)
                    routes[:] = [r for r in routes if r]
                    return True
    return False


def _scan_double_insertion(routes, assessor, instance, lam, rng) -> bool:
    """Move two consecutive tasks together; the pair may be reversed."""
    positions = [
        (ri, pi)
        for ri, r in enumerate(routes)
        for pi in range(len(r) - 1)
    ]
    if not positions:
        return False
    for src in rng.permutation(len(positions)):
        ri, pi = positions[src]
        route = routes[ri]
        a, b = route[pi], route[pi + 1]
        inv_a = instance.tasks[a].inverse_id
        inv_b = instance.tasks[b].inverse_id
        segments = [[a, b]]
        if inv_a is not None and inv_b is not None:
            segments.append([inv_b, inv_a])
        removed = route[:pi] + route[pi + 2:]
        base_src = assessor.contrib(route, lam)
        removed_contrib = assessor.contrib(removed, lam) if removed else 0.0
        targets = [(rj, qj) for rj, r in enumerate(routes)
                   for qj in range(len(r) + 1) if rj != ri]
        targets += [(ri, qj) for qj in range(len(removed) + 1)]
        targets.append((-1, 0))
        for tgt in rng.permutation(len(targets)):
            rj, qj = targets[tgt]
            for seg in segments:
                if rj == ri:
                    cand = removed[:qj] + seg + removed[qj:]
                    delta = assessor.contrib(cand, lam) - base_src
                elif rj == -1:
                    delta = removed_contrib - base_src + assessor.contrib(seg, lam)
                else:
                    base_tgt = assessor.contrib(routes[rj], lam)
                    cand_tgt = routes[rj][:qj] + seg + routes[rj][qj:]
                    delta = (
                        removed_contrib - base_src
                        + assessor.contrib(cand_tgt, lam) - base_tgt
                    )
                if delta < -IMPROVE_EPS:
                    if rj == ri:
                        routes[ri] = removed[:qj] + seg + removed[qj:]
                    elif rj == -1:
                        routes[ri] = removed
                        routes.append(list(seg))
                    else:
                        routes[rj][qj:qj] = seg
                        routes[ri] = removed
                    routes[:] = [r for r in routes if r]
                    return True
    return False


def _scan_swap(routes, assessor, instance, lam, rng) -> bool:
    """Exchange two tasks (any routes, any orientations); first improvement."""
    positions = [(ri, pi) for ri, r in enumerate(routes) for pi in range(len(r))]
    if len(positions) < 2:
        return False
    pair_idx = [
        (i, j) for i in range(len(positions)) for j in range(i + 1, len(positions))
    ]
    for pick in rng.permutation(len(pair_idx)):
        (i, j) = pair_idx[pick]
        ri, pi = positions[i]
        rj, pj = positions[j]
        a, b = routes[ri][pi], routes[rj][pj]
        inv_a = instance.tasks[a].inverse_id
        inv_b = instance.tasks[b].inverse_id
        a_opts = (a,) if inv_a is None else (a, inv_a)
        b_opts = (b,) if inv_b is None else (b, inv_b)
        if ri == rj:
            base = assessor.contrib(routes[ri], lam)
            for bo in b_opts:
                for ao in a_opts:
                    cand = list(routes[ri])
                    cand[pi], cand[pj] = bo, ao
                    if assessor.contrib(cand, lam) - base < -IMPROVE_EPS:
                        routes[ri] = cand
                        return True
        else:
            base = assessor.contrib(routes[ri], lam) + assessor.contrib(routes[rj], lam)
            for bo in b_opts:
                for ao in a_opts:
                    cand_i = list(routes[ri])
                    cand_j = list(routes[rj])
                    cand_i[pi] = bo
                    cand_j[pj] = ao
                    new = assessor.contrib(cand_i, lam) + assessor.contrib(cand_j, lam)
                    if new - base < -IMPROVE_EPS:
                        routes[ri] = cand_i
                        routes[rj] = cand_j
                        return True
    return False


def _giant_ordering(
    task_roots: Sequence[int],
    instance: Instance,
    assessor: _Assessor,
    rng: np.random.Generator,
) -> list[int]:
    """Path-scanning ordering of a task subset, ignoring capacity."""
    ev = assessor.evaluator
    sp_time = ev.sp_time
    unserved = set(task_roots)
    seq: list[int] = []
    cur_v = instance.depot
    cur_t = 0.0
    while unserved:
        feasible = []
        for root in unserved:
            inv = instance.tasks[root].inverse_id
            feasible.append(root)
            if inv is not None:
                feasible.append(inv)
        dmin = min(sp_time[cur_v][ev.tail[t]] for t in feasible)
        nearest = sorted(
            t for t in feasible if sp_time[cur_v][ev.tail[t]] <= dmin + 1e-9
        )
        chosen = select_next_task(instance, nearest, cur_t + dmin, rng)
        cur_t += sp_time[cur_v][ev.tail[chosen]]
        cur_t += instance.tasks[chosen].cost_fn.value(cur_t)
        cur_v = ev.head[chosen]
        seq.append(chosen)
        unserved.discard(instance.pair_root(chosen))
    return seq


def _split_sequence(
    seq: list[int], assessor: _Assessor, instance: Instance, lam: float
) -> list[list[int]]:
    """Minimum-cost split of a task sequence into capacity-feasible routes."""
    ev = assessor.evaluator
    n = len(seq)
    dp = [math.inf] * (n + 1)
    cut = [0] * (n + 1)
    dp[0] = 0.0
    for i in range(1, n + 1):
        load = 0.0
        j = i - 1
        while j >= 0:
            load += ev.demand[seq[j]]
            if load > instance.capacity:
                break
            cost = dp[j] + assessor.contrib(seq[j:i], lam)
            if cost < dp[i]:
                dp[i] = cost
                cut[i] = j
            j -= 1
    if not math.isfinite(dp[n]):
        raise SolverError("split found no capacity-feasible segmentation")
    routes: list[list[int]] = []
    i = n
    while i > 0:
        j = cut[i]
        routes.append(list(seq[j:i]))
        i = j
    routes.reverse()
    return routes


def _merge_split(routes, assessor, instance, lam, rng, count) -> bool:
    """Dissolve ``count`` routes and rebuild them; keep if improving."""
    if len(routes) < 2:
        return False
    count = min(count, len(routes))
    picked = sorted(int(i) for i in rng.choice(len(routes), size=count, replace=False))
    roots = [
        instance.pair_root(tid) for ri in picked for tid in routes[ri]
    ]
    old_contrib = sum(assessor.contrib(routes[ri], lam) for ri in picked)
    seq = _giant_ordering(roots, instance, assessor, rng)
    rebuilt = _split_sequence(seq, assessor, instance, lam)
    new_contrib = sum(assessor.contrib(r, lam) for r in rebuilt)
    if new_contrib - old_contrib < -IMPROVE_EPS:
        for ri in reversed(picked):
            routes.pop(ri)
        routes.extend(rebuilt)
        return True
    return False


def local_search(
    individual: Individual,
    instance: Instance,
    sp: ShortestPaths,
    rng: np.random.Generator,
    lam: Optional[float] = None,
    assessor: Optional[_Assessor] = None,
    ms_route_count: int = 2,
    max_sweeps: int = 30,
) -> Individual:
    """Accept-only-improving refinement of one individual.

    Runs first-improvement sweeps of the three move neighborhoods (in
    random order) to convergence, applies merge-split once, and, if that
    helped, converges the basic moves again.  The result never has a
    worse penalized cost than the input, and coverage is preserved.
    """
    if assessor is None:
        assessor = _Assessor(instance, sp)
    if lam is None:
        lam = _default_lambda(instance, individual.total_cost)
    routes = [list(r) for r in split_routes(individual.plan)]

    def converge_basic(budget: int) -> int:
        used = 0
        while used < budget:
            used += 1
            scans = [_scan_single_insertion, _scan_double_insertion, _scan_swap]
            moved = False
            for si in rng.permutation(len(scans)):
                while scans[si](routes, assessor, instance, lam, rng):
                    moved = True
            if not moved:
                break
        return used

    used = converge_basic(max_sweeps)
    if _merge_split(routes, assessor, instance, lam, rng, ms_route_count):
        converge_basic(max(1, max_sweeps - used))

    result = assessor.assess(join_routes(routes), lam)
    if result.penalized_cost <= individual.penalized_cost:
        return result
    return individual  # accept-only moves make this unreachable; safety net


def evolve(
    instance: Instance,
    sp: ShortestPaths,
    params: MaensParams,
    evaluator: Optional[RouteEvaluator] = None,
) -> EvolveResult:
    """Run the memetic search and return the best feasible plan found.

    Deterministic for a fixed seed; every offspring slot owns an RNG
    stream derived from (seed, generation, slot), so results do not
    depend on evaluation order.
    """
    assessor = _Assessor(instance, sp, evaluator=evaluator)
    opg = params.offspring_per_gen if params.offspring_per_gen is not None else params.psize

    population: list[Individual] = []
    seen: set[RoutingPlan] = set()
    attempts = 0
    lam = 1.0  # refined below once a first cost scale is known
    while len(population) < params.psize and attempts < 50 * params.psize:
        plan = init_individual(
            instance, sp, _stream(params.seed, 0, attempts), evaluator=assessor.evaluator
        )
        attempts += 1
        if plan in seen:
            continue
        seen.add(plan)
        population.append(assessor.assess(plan, lam))
    if not population:
        raise SolverError("could not construct any initial plan")
    while len(population) < params.psize:  # tiny instances: allow duplicates
        population.append(population[len(population) % len(seen)])

    lam = _default_lambda(instance, min(ind.total_cost for ind in population))
    lam_floor, lam_ceil = lam / 1024.0, lam * 2.0 ** 20
    population = [assessor.assess(ind.plan, lam) for ind in population]
    population.sort(key=lambda ind: (ind.penalized_cost, ind.plan))

    best_feasible: Optional[Individual] = None
    for ind in population:
        if ind.feasible and (best_feasible is None or ind.total_cost < best_feasible.total_cost):
            best_feasible = ind

    trace: list[tuple[int, float, float]] = []
    for gen in range(1, params.generations + 1):
        offspring: list[Individual] = []
        for slot in range(opg):
            rng = _stream(params.seed, gen, slot)
            if len(population) >= 2:
                i, j = rng.choice(len(population), size=2, replace=False)
                p1, p2 = population[int(i)].plan, population[int(j)].plan
            else:
                p1 = p2 = population[0].plan
            child_plan = crossover(p1, p2, instance, sp, rng, assessor=assessor, lam=lam)
            child = assessor.assess(child_plan, lam)
            if rng.random() < params.pls:
                child = local_search(
                    child, instance, sp, rng, lam=lam, assessor=assessor,
                    ms_route_count=params.ms_route_count,
                    max_sweeps=params.ls_max_sweeps,
                )
            offspring.append(child)

        pool = population + offspring
        pool.sort(key=lambda ind: (ind.penalized_cost, ind.plan))
        next_pop: list[Individual] = []
        seen_plans: set[RoutingPlan] = set()
        for ind in pool:
            if ind.plan in seen_plans:
                continue
            seen_plans.add(ind.plan)
            next_pop.append(ind)
            if len(next_pop) == params.psize:
                break
        for ind in pool:  # fewer distinct plans than psize: pad with best
            if len(next_pop) == params.psize:
                break
            next_pop.append(ind)
        population = next_pop

        for ind in offspring:
            if ind.feasible and (
                best_feasible is None or ind.total_cost < best_feasible.total_cost
            ):
                best_feasible = ind

        trace.append((
            gen,
            population[0].penalized_cost,
            best_feasible.total_cost if best_feasible is not None else math.nan,
        ))

        if gen % params.penalty_period == 0:
            lam = min(lam * 2.0, lam_ceil) if not population[0].feasible else max(
                lam / 2.0, lam_floor
            )
            population = [assessor.assess(ind.plan, lam) for ind in population]
            population.sort(key=lambda ind: (ind.penalized_cost, ind.plan))

    if best_feasible is None:
        raise SolverError(
            "no feasible plan found within the generation budget "
            "(capacity or horizon may be unsatisfiable)"
        )
    return EvolveResult(
        plan=best_feasible.plan,
        total_cost=best_feasible.total_cost,
        trace=trace,
    )
