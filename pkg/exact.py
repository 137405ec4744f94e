"""
Exact solution of the two-stage DRLP at desk scale.

The worst case over the Wasserstein ball becomes

    min c1'x1 + eps*lam + (1/N) sum_i eta_i
    s.t. f(x1, xi) - lam*||xi - xi_i||_1 <= eta_i   for all xi in the support

and for each sample the maximizing xi has every coordinate at the sample
value, the upper bound or the lower bound. Enumerating those candidates,
with one recourse block per candidate, gives a finite MILP of N*3^m blocks.
It is a gap and concavity oracle, not a production path.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

import config
from backend import (EQ, INF, INFEASIBLE, LE, MAXIMIZE, MINIMIZE, NODE_LIMIT, UNBOUNDED, ProgramBuilder,
                     SolverOptions, solve_lp, solve_milp)
from errors import (AffineInfeasibleError, ExactInfeasibleError, ModelError, NodeLimitError,
                    NumericalInstabilityError, ScenarioCapError, UnboundedError)
from models import FirstStageDecision, Instance, PolicyStructure
from reformulation import solve_affine

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExactOptions:
    solver: SolverOptions = field(default_factory=SolverOptions)
    scenario_cap: int = config.EXACT_SCENARIO_CAP
    lipschitz_factor: float = 10.0
    max_doublings: int = 20
    policy_bound: float = config.POLICY_BOUND


@dataclass(frozen=True, eq=False)
class ExactSolution:
    x1: FirstStageDecision
    lam: float
    eta: np.ndarray
    objective: float
    scenario_count: int
    lam_bound: float = INF


def candidate_values(sample, support) -> list[list[float]]:
    """Per coordinate: sample value, upper bound, lower bound, without repeats."""
    options = []
    for value, lo, hi in zip(sample, support.lower, support.upper):
        seen = []
        for v in (float(value), float(hi), float(lo)):
            if v not in seen:
                seen.append(v)
        options.append(seen)
    return options


def scenario_bound(instance: Instance) -> int:
    """N * 3^k with k the non-degenerate support coordinates (before deduplication)."""
    return instance.N * 3 ** int(instance.support.free_coordinates.size)


def scenarios(instance: Instance):
    """(sample index, candidate point, 1-norm distance to the sample) triples."""
    for i, sample in enumerate(instance.samples.points):
        for point in itertools.product(*candidate_values(sample, instance.support)):
            point = np.array(point)
            yield i, point, float(np.abs(point - sample).sum())


def lipschitz_estimate(instance: Instance, options: SolverOptions | None = None) -> float:
    """Upper bound on the 1-norm Lipschitz constant of the recourse cost in xi.

    Any dual multiplier pi >= 0 with A2'pi = -c2 bounds the slope by
    sum_l pi_l * max_j |A3_lj|; the LP takes the largest such bound.
    Returns inf when the dual polyhedron is unbounded in that direction.
    """
    rc = instance.recourse
    builder = ProgramBuilder(MAXIMIZE)
    pi = builder.add_variables(rc.L, cost=np.abs(rc.A3).max(axis=1, initial=0.0), name="pi")
    for r in range(instance.n2):
        builder.add_row(pi, rc.A2[:, r], EQ, -instance.c2[r], name=f"dual_{r}")
    result = solve_lp(builder.build(), options)
    if result.status == INFEASIBLE:
        raise UnboundedError("recourse cost is unbounded below wherever it is feasible")
    if result.status == UNBOUNDED:
        return INF
    if not result.optimal:
        raise NumericalInstabilityError(f"Lipschitz LP ended with status {result.status}")
    return max(0.0, result.objective)


def _build(instance: Instance, lam_bound: float, policy_bound: float):
    fs, rc = instance.first_stage, instance.recourse
    builder = ProgramBuilder(MINIMIZE)
    binary = builder.add_variables(fs.n_binary, upper=1.0, cost=instance.c1[:fs.n_binary], binary=True, name="u")
    continuous = builder.add_variables(fs.n_continuous, lower=-policy_bound, upper=policy_bound,
                                       cost=instance.c1[fs.n_binary:], name="x")
    x1 = np.concatenate([binary, continuous])
    lam = builder.add_variables(1, upper=lam_bound, cost=instance.epsilon, name="lam")[0]
    eta = builder.add_variables(instance.N, lower=-INF, upper=INF, cost=1.0 / instance.N, name="eta")
    if fs.G.shape[0]:
        builder.add_rows(x1, fs.G, LE, fs.g, name="first")
    count = 0
    for i, point, distance in scenarios(instance):
        x2 = builder.add_variables(instance.n2, lower=-INF, upper=INF, name=f"x2s{count}")
        builder.add_rows(np.concatenate([x1, x2]), np.hstack([rc.A1, rc.A2]), LE, rc.b - rc.A3 @ point,
                         name=f"rec{count}")
        builder.add_row(np.concatenate([x2, [lam, eta[i]]]), np.concatenate([instance.c2, [-distance, -1.0]]),
                        LE, 0.0, name=f"epi{count}")
        count += 1
    return builder.build(), x1, lam, eta, count


def _solve_once(instance: Instance, lam_bound: float, options: ExactOptions):
    spec, x1, lam, eta, count = _build(instance, lam_bound, options.policy_bound)
    result = solve_milp(spec, options.solver.gap_tol, options.solver)
    if result.status == INFEASIBLE:
        raise ExactInfeasibleError("two-stage problem is infeasible: no first stage keeps every recourse feasible")
    if result.status == UNBOUNDED:
        raise UnboundedError("exact reformulation is unbounded")
    if result.status == NODE_LIMIT:
        raise NodeLimitError("exact MILP hit the branch-and-bound node limit")
    if not result.optimal:
        raise NumericalInstabilityError(f"exact MILP ended with status {result.status}")
    return result, x1, lam, eta, count


def solve_exact(instance: Instance, options: ExactOptions | None = None) -> ExactSolution:
    options = options or ExactOptions()
    bound = scenario_bound(instance)
    if bound > options.scenario_cap:
        raise ScenarioCapError(
            f"{bound} scenarios (N={instance.N}, 3^{instance.support.free_coordinates.size}) exceed the cap "
            f"{options.scenario_cap}", scenarios=bound)

    lipschitz = lipschitz_estimate(instance, options.solver)
    lam_bound = options.lipschitz_factor * max(1.0, lipschitz)
    if lam_bound == INF:
        log.info("[exact] Lipschitz estimate unbounded; lambda left without an upper bound")
    else:
        log.info("[exact] lambda bound %.6g (Lipschitz estimate %.6g)", lam_bound, lipschitz)

    result, x1, lam, eta, count = _solve_once(instance, lam_bound, options)
    for _ in range(options.max_doublings):
        if lam_bound == INF or result.primal[lam] < lam_bound * (1.0 - 1e-9):
            break
        doubled = 2.0 * lam_bound
        log.info("[exact] lambda at its bound %.6g, re-solving with %.6g", lam_bound, doubled)
        retry = _solve_once(instance, doubled, options)
        improved = retry[0].objective < result.objective - options.solver.gap_tol * max(1.0, abs(result.objective))
        result, x1, lam, eta, count = retry
        lam_bound = doubled
        if not improved:
            break

    n_binary = instance.first_stage.n_binary
    return ExactSolution(
        x1=FirstStageDecision.from_vector(result.primal[x1], n_binary),
        lam=float(result.primal[lam]),
        eta=np.array(result.primal[eta]),
        objective=float(result.objective),
        scenario_count=count,
        lam_bound=lam_bound,
    )


def exact_value_curve(instance: Instance, eps_grid, options: ExactOptions | None = None) -> list[float]:
    grid = [float(e) for e in eps_grid]
    if any(e < 0 for e in grid):
        raise ModelError("eps_grid: every radius must be >= 0")
    if grid != sorted(grid):
        raise ModelError("eps_grid: must be sorted ascending")
    values = []
    for eps in grid:
        values.append(solve_exact(instance.with_epsilon(eps), options).objective)
        log.info("[exact] eps=%g value=%.10g", eps, values[-1])
    return values


def affine_gap(instance: Instance, structure: PolicyStructure | None = None, affine_options=None,
               exact_options: ExactOptions | None = None) -> float:
    """Affine objective minus exact objective; inf when no affine policy is feasible."""
    exact = solve_exact(instance, exact_options)
    try:
        affine = solve_affine(instance, structure, affine_options)
    except AffineInfeasibleError:
        log.info("[gap] affine-policy problem infeasible; gap reported as inf")
        return INF
    return affine.objective - exact.objective
