"""Per-route vehicle departure-time optimization.

The total cost is separable across routes, so each route's departure time
is optimized independently on [0, horizon].  Dispatch follows the problem
family and slope magnitude: two-segment costs are non-decreasing in the
departure time, so 0 is optimal; three-segment costs with slope <= 1 are
(similar-)unimodal or non-decreasing and handled by golden-section search;
slopes > 1 can produce non-unimodal route costs and are handled by a
negatively-correlated stochastic search.  A brute-force grid oracle is
provided for verification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .costfn import Family, classify
from .instance import Instance, ShortestPaths
from .solution import DepartureTimes, RouteEvaluator, RoutingPlan, split_routes

INVPHI = (math.sqrt(5.0) - 1.0) / 2.0  # interval shrink factor per iteration


class ScalarObjective:
    """Deterministic scalar objective on [lo, hi] with an evaluation counter.

    ``vector_fn``, when given, must agree with ``fn`` pointwise and is used
    to batch grid sweeps; batched points count toward ``evaluations``.
    """

    def __init__(
        self,
        fn: Callable[[float], float],
        vector_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ):
        self.fn = fn
        self.vector_fn = vector_fn
        self.evaluations = 0

    def __call__(self, t: float) -> float:
        self.evaluations += 1
        return self.fn(t)

    def sample(self, ts: np.ndarray) -> np.ndarray:
        self.evaluations += len(ts)
        if self.vector_fn is not None:
            return self.vector_fn(ts)
        return np.array([self.fn(float(t)) for t in ts])


def route_objective(
    route: Sequence[int], instance: Instance, sp: ShortestPaths
) -> ScalarObjective:
    """Route cost (deadhead included) as a function of the departure time."""
    evaluator = RouteEvaluator(instance, sp)
    route = tuple(route)
    return ScalarObjective(
        fn=lambda t: evaluator.total(route, t),
        vector_fn=lambda ts: evaluator.profile(route, ts),
    )


@dataclass(frozen=True)
class GssParams:
    epsilon: float

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


@dataclass(frozen=True)
class NcsParams:
    process_count: int = 10
    budget: int = 2000
    sigma_init: Optional[float] = None  # defaults to (hi - lo) / 6
    epoch_adapt: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.process_count < 2:
            raise ValueError(f"need at least 2 search processes, got {self.process_count}")
        if self.budget <= 0:
            raise ValueError(f"evaluation budget must be positive, got {self.budget}")


def gss(obj: ScalarObjective, lo: float, hi: float, epsilon: float) -> tuple[float, float]:
    """Golden-section search for a minimum of ``obj`` on [lo, hi].

    Intended for (similar-)unimodal or non-decreasing objectives.  The
    bracket shrinks by the golden ratio each iteration until its length
    drops below ``epsilon``; the midpoint of the final bracket and its
    cost are returned.
    """
    if lo >= hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    c = hi - (hi - lo) * INVPHI
    d = lo + (hi - lo) * INVPHI
    fc = obj(c)
    fd = obj(d)
    while hi - lo > epsilon:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - (hi - lo) * INVPHI
            fc = obj(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + (hi - lo) * INVPHI
            fd = obj(d)
    mid = 0.5 * (lo + hi)
    return mid, obj(mid)


def gss_eval_bound(lo: float, hi: float, epsilon: float) -> int:
    """Closed-form bound on gss evaluations beyond the initial pair."""
    if epsilon >= hi - lo:
        return 2
    return math.ceil(math.log(epsilon / (hi - lo)) / math.log(INVPHI)) + 2


def _bhattacharyya(m1: float, s1: float, m2: float, s2: float) -> float:
    """Bhattacharyya distance between two 1-D Gaussians."""
    v1, v2 = s1 * s1, s2 * s2
    return 0.25 * (m1 - m2) ** 2 / (v1 + v2) + 0.5 * math.log(
        (v1 + v2) / (2.0 * s1 * s2)
    )


def ncs(
    obj: ScalarObjective, lo: float, hi: float, params: NcsParams
) -> tuple[float, float]:
    """Negatively-correlated search for a minimum of ``obj`` on [lo, hi].

    Maintains ``process_count`` Gaussian search processes in parallel.
    Each epoch every process proposes one offspring; an offspring replaces
    its parent when its normalized fitness over its normalized distance to
    the other processes' distributions falls below a threshold drawn
    around 1, so processes are simultaneously pulled toward good regions
    and pushed apart.  Step sizes adapt by the 1/5-success rule.  Never
    exceeds ``params.budget`` objective evaluations; returns the best
    point evaluated, clamped to [lo, hi] by construction.
    """
    if lo >= hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    rng = np.random.Generator(np.random.PCG64(params.seed))
    span = hi - lo
    nproc = params.process_count
    sigma0 = params.sigma_init if params.sigma_init is not None else span / 6.0

    means: list[float] = []
    fits: list[float] = []
    best_t = math.nan
    best_f = math.inf
    used = 0

    def evaluate(t: float) -> float:
        nonlocal used, best_t, best_f
        f = obj(t)
        used += 1
        if f < best_f:
            best_f, best_t = f, t
        return f

    init_points = lo + span * rng.random(nproc)
    for t in init_points:
        if used >= params.budget:
            return best_t, best_f
        means.append(float(t))
        fits.append(evaluate(float(t)))
    sigmas = [sigma0] * len(means)

    epoch = 0
    successes = 0
    while used < params.budget:
        epoch += 1
        proposals: list[float] = []
        proposal_fits: list[float] = []
        for i in range(len(means)):
            if used >= params.budget:
                break
            t = min(hi, max(lo, means[i] + sigmas[i] * rng.standard_normal()))
            proposals.append(t)
            proposal_fits.append(evaluate(t))
        if not proposals:
            break

        pool = fits[: len(proposals)] + proposal_fits
        f_lo, f_hi = min(pool), max(pool)
        f_span = max(f_hi - f_lo, 1e-300)
        dists = []
        for i, t in enumerate(proposals):
            d = min(
                _bhattacharyya(t, sigmas[i], means[j], sigmas[j])
                for j in range(len(means))
                if j != i
            )
            dists.append(d)
        d_hi = max(max(dists), 1e-300)

        progress = used / params.budget
        for i, t in enumerate(proposals):
            f_norm = (proposal_fits[i] - f_lo) / f_span
            d_norm = dists[i] / d_hi
            lam = 1.0 + max(0.1 * (1.0 - progress), 0.01) * rng.standard_normal()
            if f_norm / max(d_norm, 1e-12) < lam:
                means[i] = t
                fits[i] = proposal_fits[i]
                successes += 1

        if epoch % params.epoch_adapt == 0:
            rate = successes / (params.epoch_adapt * len(means))
            if rate > 0.2:
                factor = 1.0 / 0.85
            elif rate < 0.2:
                factor = 0.85
            else:
                factor = 1.0
            sigmas = [
                min(span, max(1e-12 * span, s * factor)) for s in sigmas
            ]
            successes = 0

    return best_t, best_f


def grid_oracle(
    obj: ScalarObjective, lo: float, hi: float, step: float
) -> tuple[float, float]:
    """Exhaustive minimum over {lo, lo+step, ...} up to and including hi.

    Ties break toward the smaller departure time.  Verification tool; not
    meant to be fast.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    if lo > hi:
        raise ValueError(f"need lo <= hi, got [{lo}, {hi}]")
    count = int(math.floor((hi - lo) / step + 1e-9))
    ts = lo + step * np.arange(count + 1)
    if ts[-1] < hi:
        ts = np.append(ts, hi)
    costs = obj.sample(ts)
    idx = int(np.argmin(costs))
    return float(ts[idx]), float(costs[idx])


def optimize_departures(
    plan: RoutingPlan,
    instance: Instance,
    sp: ShortestPaths,
    gss_params: Optional[GssParams] = None,
    ncs_params: Optional[NcsParams] = None,
) -> DepartureTimes:
    """Optimal (or near-optimal) departure time for every route of ``plan``.

    Two-segment instances get all-zero departures.  Three-segment
    instances are routed to gss when the slope magnitude is <= 1 and to
    ncs otherwise, each route independently on [0, horizon].  Per-route
    ncs seeds derive from the route index, so the result is independent
    of optimization order.
    """
    routes = split_routes(plan)
    kind = classify(instance)
    if kind.family is Family.TWO_SEGMENT:
        return tuple(0.0 for _ in routes)

    horizon = instance.horizon
    if not math.isfinite(horizon):
        raise ValueError("departure optimization needs a finite planning horizon")
    if gss_params is None:
        gss_params = GssParams(epsilon=1e-3 * horizon)
    if ncs_params is None:
        ncs_params = NcsParams()

    evaluator = RouteEvaluator(instance, sp)
    departures: list[float] = []
    for route in routes:
        obj = ScalarObjective(
            fn=lambda t, r=route: evaluator.total(r, t),
            vector_fn=lambda ts, r=route: evaluator.profile(r, ts),
        )
        if kind.k <= 1.0:
            t_star, _ = gss(obj, 0.0, horizon, gss_params.epsilon)
        else:
            # the ncs stream is keyed to the route content, so a route's
            # departure does not depend on its position in the plan
            route_params = NcsParams(
                process_count=ncs_params.process_count,
                budget=ncs_params.budget,
                sigma_init=ncs_params.sigma_init,
                epoch_adapt=ncs_params.epoch_adapt,
                seed=_route_stream_seed(ncs_params.seed, route),
            )
            t_star, _ = ncs(obj, 0.0, horizon, route_params)
        departures.append(t_star)
    return tuple(departures)


def _route_stream_seed(base: int, route: Sequence[int]) -> int:
    mixed = base & 0xFFFFFFFF
    for tid in route:
        mixed = (mixed * 1_000_003 + tid + 1) & 0xFFFFFFFFFFFF
    return mixed
