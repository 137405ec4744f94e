"""
Out-of-sample evaluation, holdout selection of the ball radius, operating
modes and the sample-size scaling harness.

Out-of-sample costs always re-solve the recourse LP at each scenario; the
affine policy is only a planning device.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

import config
from backend import SolverOptions
from errors import AffineInfeasibleError, CertificationError, InfeasibleError, ModelError, RecourseInfeasibleError
from exact import ExactOptions, solve_exact
from models import AffinePolicy, BoxSet, FirstStageDecision, Instance, PolicyStructure, SampleSet
from reformulation import AffineOptions, second_stage, solve_affine, solve_affine_refined
from synthetic import rng_from

log = logging.getLogger(__name__)

MODES = ("plain", "refined", "saa", "robust", "exact")


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    mean_cost: float
    per_scenario_costs: np.ndarray
    infeasible_count: int
    fixed_cost: float
    scenario_count: int

    @property
    def infeasible_indices(self) -> np.ndarray:
        return np.flatnonzero(np.isnan(self.per_scenario_costs))

    def records(self) -> list[dict]:
        return [
            {"scenario": k, "recourse_cost": cost, "total_cost": self.fixed_cost + cost, "feasible": not np.isnan(cost)}
            for k, cost in enumerate(self.per_scenario_costs.tolist())
        ]


def _x1_vector(x1) -> np.ndarray:
    return x1.vector if isinstance(x1, FirstStageDecision) else np.asarray(x1, dtype=float)


def out_of_sample(x1, instance: Instance, scenarios: SampleSet, threads: int = 1, certified: bool = False,
                  options: SolverOptions | None = None) -> EvaluationReport:
    """Sample-average cost of x1 with the recourse LP re-solved per scenario.

    Infeasible scenarios are counted and left out of the mean; with
    ``certified`` any such scenario raises CertificationError.
    """
    x1 = _x1_vector(x1)
    points = SampleSet(scenarios.points, instance.support).points
    fixed = float(instance.c1 @ x1)

    def cost(xi):
        try:
            return second_stage(x1, xi, instance, options)[1]
        except RecourseInfeasibleError:
            return np.nan

    if threads > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            costs = np.array(list(pool.map(cost, points)), dtype=float)
    else:
        costs = np.array([cost(xi) for xi in points], dtype=float)

    infeasible = int(np.isnan(costs).sum())
    if infeasible and certified:
        first = int(np.flatnonzero(np.isnan(costs))[0])
        raise CertificationError(
            f"{infeasible} of {len(costs)} scenarios have no feasible recourse for a certified first stage "
            f"(first: scenario {first})", xi=points[first].tolist())
    feasible = costs[~np.isnan(costs)]
    mean = fixed + float(feasible.mean()) if feasible.size else np.inf
    return EvaluationReport(mean, costs, infeasible, fixed, len(costs))


def robust_epsilon(support: BoxSet) -> float:
    """1-norm diameter of the support: a ball this wide holds every distribution on it."""
    return float(support.span.sum())


def robust_mode_value(policy: AffinePolicy, x1, instance: Instance, ball_box: BoxSet) -> float:
    """c1'x1 + max over ball_box of c2'(A xi + a), by the sign rule per coordinate."""
    g = policy.direction(instance.c2)
    worst = np.where(g > 0.0, ball_box.upper, ball_box.lower)
    return float(instance.c1 @ _x1_vector(x1) + instance.c2 @ policy.a + g @ worst)


def solve_mode(instance: Instance, structure: PolicyStructure | None, mode: str, beta: float = config.BETA,
               options: AffineOptions | None = None, exact_options: ExactOptions | None = None):
    """Solve ``instance`` in one of the operating modes.

    plain/refined use the instance radius; saa forces eps = 0; robust widens
    eps to the support diameter; exact runs the vertex-displacement MILP.
    """
    if mode not in MODES:
        raise ModelError(f"mode: expected one of {MODES}, got '{mode}'")
    if mode == "plain":
        return solve_affine(instance, structure, options)
    if mode == "refined":
        return solve_affine_refined(instance, structure, beta, options)
    if mode == "saa":
        return replace(solve_affine(instance.with_epsilon(0.0), structure, options), mode="saa")
    if mode == "robust":
        wide = instance.with_epsilon(robust_epsilon(instance.support))
        return replace(solve_affine(wide, structure, options), mode="robust")
    return solve_exact(instance, exact_options)


def _split(N: int, split: float, seed) -> tuple[np.ndarray, np.ndarray]:
    order = rng_from(seed).permutation(N)
    n_train = max(1, min(N - 1, int(round(split * N))))
    return np.sort(order[:n_train]), np.sort(order[n_train:])


def holdout_select(instance: Instance, structure: PolicyStructure | None, eps_grid, split: float = config.HOLDOUT_SPLIT,
                   seed=0, mode: str = "refined", beta: float = config.BETA, options: AffineOptions | None = None):
    """Pick the radius with the lowest validation cost.

    Returns (epsilon, records) with one record per distinct candidate in
    ascending order; ties go to the smaller radius.
    """
    if instance.N < 2:
        raise ModelError("samples: holdout needs at least two samples")
    if not 0.0 < split < 1.0:
        raise ModelError(f"split: must lie in (0, 1), got {split}")
    grid = sorted({float(e) for e in eps_grid})
    if not grid:
        raise ModelError("eps_grid: at least one candidate radius is required")
    if grid[0] < 0:
        raise ModelError("eps_grid: radii must be >= 0")

    train_idx, valid_idx = _split(instance.N, split, seed)
    train = instance.with_samples(instance.samples.subset(train_idx))
    validation = instance.samples.subset(valid_idx)
    solver = options.solver if options else None
    log.info("[holdout] %d train / %d validation samples, %d candidates", len(train_idx), len(valid_idx), len(grid))

    records, best = [], None
    for eps in grid:
        record = {"epsilon": eps, "status": "ok", "objective": np.nan, "validation_cost": np.nan,
                  "infeasible_count": 0, "note": ""}
        try:
            solution = solve_mode(train.with_epsilon(eps), structure, mode, beta, options)
        except InfeasibleError as e:
            record.update(status="infeasible", note=str(e))
            records.append(record)
            log.info("[holdout] eps=%g excluded: %s", eps, e)
            continue
        report = out_of_sample(solution.x1, instance, validation, options=solver)
        record.update(objective=solution.objective, validation_cost=report.mean_cost,
                      infeasible_count=report.infeasible_count)
        if report.infeasible_count:
            record.update(status="infeasible", note=f"{report.infeasible_count} validation scenarios infeasible")
        elif best is None or report.mean_cost < best[1]:
            best = (eps, report.mean_cost)
        records.append(record)
        log.info("[holdout] eps=%g validation cost %.10g", eps, report.mean_cost)

    if best is None:
        raise AffineInfeasibleError("holdout: every candidate radius is infeasible")
    return best[0], records


def scaling_experiment(family, N_list, seed=0, repeats: int = config.TIMING_REPEATS, beta: float = config.BETA,
                       options: AffineOptions | None = None) -> list[dict]:
    """Refined solves over growing sample sizes: master size, median time, objective.

    ``family(N, rng)`` returns (instance, structure) with N samples.
    """
    if repeats < 1:
        raise ModelError("repeats: must be >= 1")
    rows = []
    for N in N_list:
        instance, structure = family(int(N), rng_from([int(seed), int(N)]))
        times, solution = [], None
        for _ in range(repeats):
            start = time.perf_counter()
            solution = solve_affine_refined(instance, structure, beta, options)
            times.append(time.perf_counter() - start)
        rows.append({
            "N": int(N),
            "master_vars": solution.master_dims[0],
            "master_rows": solution.master_dims[1],
            "wall_time": float(np.median(times)),
            "objective": solution.objective,
            "iterations": solution.iterations,
        })
        log.info("[scaling] N=%d vars=%d rows=%d time=%.3fs", N, *solution.master_dims, rows[-1]["wall_time"])
    return rows
