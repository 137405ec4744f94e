"""
Affine-policy reformulation of the two-stage DRLP and its two solution loops.

With x2 = A xi + a the worst-case expectation collapses to
c2'(A xi_mean + a) + min{c3'mu : mu in M(A)}, so the problem becomes a MILP
whose size does not depend on N. Its semi-infinite part (each recourse row
must hold at every vertex of the ball box) is handled by cutting planes:

    solve_affine          master + closed-form row subproblems
    solve_affine_refined  same over Omega, plus a feasibility subproblem on
                          the vertices of the support that adds recourse
                          column blocks (column-and-constraint generation)

Recourse rows are scaled to unit max-abs coefficient first, so rho is
measured in the same units for every row.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

import config
from backend import (EQ, GE, INF, INFEASIBLE, ITERATION_LIMIT, LE, MAXIMIZE, MINIMIZE, NODE_LIMIT,
                     UNBOUNDED, LinearProgramSpec, ProgramBuilder, SolverOptions, solve_lp, solve_milp)
from errors import (AffineInfeasibleError, IterationLimitError, ModelError, NodeLimitError,
                    NumericalInstabilityError, PolicyBoundError, RecourseInfeasibleError, SchemaError,
                    ToleranceError, UnboundedError)
from fileio import atomic_write_text, read_json, write_json
from lpformat import export_lp_text
from models import (AffinePolicy, BoxSet, FirstStageDecision, Instance, PolicyStructure, RecourseData,
                    box_vertices, vertex_key)
from refinement import RefinedSet, build_omega
from worst_case import DualCertificate, c3_vector

log = logging.getLogger(__name__)

SOLUTION_FORMAT = "drlp-solution"
FEASIBILITY_METHODS = ("auto", "enumerate", "milp")
_AUDIT_LIMIT = 2 ** 12


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    lower_bound: float
    max_violation: float
    feasibility_violation: float
    master_vars: int
    master_rows: int
    row_cuts: int = 0
    feasibility_cuts: int = 0


@dataclass
class MasterState:
    """Vertices accumulated by the cutting-plane loops.

    row_vertex_sets[l] holds the ball-box vertices already imposed on recourse
    row l; feasibility_vertices holds the support vertices that carry their
    own recourse block (refined mode only).
    """

    row_vertex_sets: list
    feasibility_vertices: list = field(default_factory=list)
    iteration: int = 0
    history: list = field(default_factory=list)
    _row_keys: list = field(default_factory=list, repr=False)
    _feasibility_keys: set = field(default_factory=set, repr=False)

    @classmethod
    def initial(cls, L: int, ball_box: BoxSet, support: BoxSet | None = None) -> "MasterState":
        start = ball_box.all_lower()
        state = cls([[start.copy()] for _ in range(L)])
        state._row_keys = [{vertex_key(start)} for _ in range(L)]
        if support is not None:
            state.add_feasibility_vertex(support.all_lower())
        return state

    def add_row_vertex(self, row: int, vertex) -> bool:
        key = vertex_key(vertex)
        if key in self._row_keys[row]:
            return False
        self._row_keys[row].add(key)
        self.row_vertex_sets[row].append(np.array(vertex, dtype=float))
        return True

    def add_feasibility_vertex(self, vertex) -> bool:
        key = vertex_key(vertex)
        if key in self._feasibility_keys:
            return False
        self._feasibility_keys.add(key)
        self.feasibility_vertices.append(np.array(vertex, dtype=float))
        return True

    @property
    def cut_count(self) -> int:
        return sum(len(s) for s in self.row_vertex_sets)

    @property
    def lower_bounds(self) -> list[float]:
        return [r.lower_bound for r in self.history]


@dataclass(frozen=True)
class AffineOptions:
    rho: float = config.RHO
    max_iterations: int = config.MAX_ITERATIONS
    solver: SolverOptions = field(default_factory=SolverOptions)
    feasibility_method: str = "auto"
    max_vertices: int = config.MAX_VERTICES
    enumeration_limit: int = config.ENUMERATION_LIMIT
    policy_bound: float = config.POLICY_BOUND
    threads: int = config.THREADS
    export_lp_dir: str | None = config.EXPORT_LP_DIR
    audit: bool = config.AUDIT_VERTICES

    def __post_init__(self):
        if self.rho < 0:
            raise ModelError(f"rho: must be >= 0, got {self.rho}")
        if self.feasibility_method not in FEASIBILITY_METHODS:
            raise ModelError(f"feasibility_method: expected one of {FEASIBILITY_METHODS}")
        if self.max_iterations < 1:
            raise ModelError("max_iterations: must be >= 1")
        if not self.policy_bound > 0:
            raise ModelError("policy_bound: must be > 0")
        if self.threads < 1:
            raise ModelError("threads: must be >= 1")


@dataclass(frozen=True, eq=False)
class AffineSolution:
    x1: FirstStageDecision
    policy: AffinePolicy
    objective: float
    certificate: DualCertificate
    theta: np.ndarray
    history: tuple
    mode: str = "plain"
    refined: RefinedSet | None = None
    state: MasterState | None = None
    master_dims: tuple = (0, 0)
    omega: BoxSet | None = None

    @property
    def iterations(self) -> int:
        return len(self.history)

    @property
    def lower_bounds(self) -> list[float]:
        return [r.lower_bound for r in self.history]


@dataclass(frozen=True)
class _MasterLayout:
    x1: np.ndarray
    theta: np.ndarray
    mu: np.ndarray
    recourse_blocks: tuple


# --- Small helpers ---

def _x1_vector(x1) -> np.ndarray:
    if isinstance(x1, FirstStageDecision):
        return x1.vector
    return np.asarray(x1, dtype=float)


def policy_kernel(structure: PolicyStructure, xi) -> np.ndarray:
    """K with x2(xi) = K @ theta, shape (n2, parameter_count)."""
    xi_hat = np.append(np.asarray(xi, dtype=float), 1.0)
    blocks = structure.entry_matrix.reshape(structure.n2, structure.m + 1, structure.parameter_count)
    return np.einsum("rjp,j->rp", blocks, xi_hat)


def _dual_coupling(structure: PolicyStructure, c2: np.ndarray) -> np.ndarray:
    """D with A'c2 = D @ theta, shape (m, parameter_count)."""
    blocks = structure.entry_matrix.reshape(structure.n2, structure.m + 1, structure.parameter_count)
    return np.einsum("r,rjp->jp", c2, blocks[:, :structure.m, :])


# --- Master problem ---

def _master(instance: Instance, structure: PolicyStructure, state: MasterState, ball_box: BoxSet,
            refined: bool, policy_bound: float) -> tuple[LinearProgramSpec, _MasterLayout]:
    structure.check(instance)
    if ball_box.dim != instance.m:
        raise ModelError(f"ball_box: expected dimension {instance.m}, got {ball_box.dim}")
    if len(state.row_vertex_sets) != instance.L:
        raise ModelError(f"state: expected {instance.L} row vertex sets, got {len(state.row_vertex_sets)}")
    fs, rc = instance.first_stage, instance.recourse
    m, n2 = instance.m, instance.n2

    builder = ProgramBuilder(MINIMIZE)
    binary = builder.add_variables(fs.n_binary, upper=1.0, cost=instance.c1[:fs.n_binary], binary=True, name="u")
    continuous = builder.add_variables(fs.n_continuous, lower=-policy_bound, upper=policy_bound,
                                       cost=instance.c1[fs.n_binary:], name="x")
    x1 = np.concatenate([binary, continuous])
    theta = builder.add_variables(structure.parameter_count, lower=-policy_bound, upper=policy_bound,
                                  cost=instance.c2 @ policy_kernel(structure, instance.xi_mean), name="theta")
    mu = builder.add_variables(2 * m + 1, cost=c3_vector(instance.epsilon, ball_box, instance.xi_mean), name="mu")

    if fs.G.shape[0]:
        builder.add_rows(x1, fs.G, LE, fs.g, name="first")

    coupling = _dual_coupling(structure, instance.c2)
    for j in range(m):
        builder.add_row(np.concatenate([[mu[0], mu[1 + j]], theta]),
                        np.concatenate([[1.0, 1.0], -coupling[j]]), GE, 0.0, name=f"dual_plus_{j}")
        builder.add_row(np.concatenate([[mu[0], mu[1 + m + j]], theta]),
                        np.concatenate([[1.0, 1.0], coupling[j]]), GE, 0.0, name=f"dual_minus_{j}")

    columns = np.concatenate([x1, theta])
    for l, vertices in enumerate(state.row_vertex_sets):
        for k, vertex in enumerate(vertices):
            coefs = np.concatenate([rc.A1[l], rc.A2[l] @ policy_kernel(structure, vertex)])
            builder.add_row(columns, coefs, LE, rc.b[l] - rc.A3[l] @ vertex, name=f"row_{l}_v{k}")

    blocks = []
    if refined:
        for q, vertex in enumerate(state.feasibility_vertices):
            xf = builder.add_variables(n2, lower=-INF, upper=INF, name=f"xf{q}")
            builder.add_rows(np.concatenate([x1, xf]), np.hstack([rc.A1, rc.A2]), LE,
                             rc.b - rc.A3 @ vertex, name=f"feas{q}")
            blocks.append(xf)
    return builder.build(), _MasterLayout(x1, theta, mu, tuple(blocks))


def build_master(instance: Instance, structure: PolicyStructure, state: MasterState, ball_box: BoxSet,
                 refined: bool = False, policy_bound: float = config.POLICY_BOUND) -> LinearProgramSpec:
    spec, _ = _master(instance, structure, state, ball_box, refined, policy_bound)
    return spec


def _solve_master(spec: LinearProgramSpec, options: AffineOptions, iteration: int):
    if options.export_lp_dir:
        path = os.path.join(options.export_lp_dir, f"master_{iteration:04d}.lp")
        atomic_write_text(path, export_lp_text(spec, title=f"master problem, iteration {iteration}"))
    result = solve_milp(spec, options.solver.gap_tol, options.solver)
    if result.status == INFEASIBLE:
        raise AffineInfeasibleError(
            f"affine-policy problem is infeasible (master infeasible at iteration {iteration})",
            iteration=iteration)
    if result.status == UNBOUNDED:
        raise UnboundedError(f"master problem unbounded at iteration {iteration}", iteration=iteration)
    if result.status == NODE_LIMIT:
        raise NodeLimitError(f"master branch and bound hit the node limit at iteration {iteration}")
    if result.status == ITERATION_LIMIT:
        raise IterationLimitError(f"master LP hit the simplex iteration limit at iteration {iteration}")
    if not result.optimal:
        raise NumericalInstabilityError(f"master ended with status {result.status}")
    return result


# --- Subproblems ---

def row_violations(x1, policy: AffinePolicy, ball_box: BoxSet, recourse: RecourseData):
    """Worst vertex of ball_box for every recourse row at once.

    Returns (vertices, values): row l is maximized by xi_j = upper_j when
    g_lj > 0 and lower_j otherwise, with g = A2 A + A3.
    """
    x1 = _x1_vector(x1)
    g = recourse.A2 @ policy.A + recourse.A3
    vertices = np.where(g > 0.0, ball_box.upper, ball_box.lower)
    constant = recourse.A1 @ x1 + recourse.A2 @ policy.a - recourse.b
    return vertices, constant + np.einsum("lj,lj->l", g, vertices)


def row_violation(row: int, x1, policy: AffinePolicy, ball_box: BoxSet, recourse: RecourseData):
    if not 0 <= row < recourse.L:
        raise ModelError(f"row: expected 0..{recourse.L - 1}, got {row}")
    x1 = _x1_vector(x1)
    g = recourse.A2[row] @ policy.A + recourse.A3[row]
    vertex = np.where(g > 0.0, ball_box.upper, ball_box.lower)
    value = recourse.A1[row] @ x1 + recourse.A2[row] @ policy.a + g @ vertex - recourse.b[row]
    return vertex, float(value)


def audit_rows(x1, policy: AffinePolicy, ball_box: BoxSet, recourse: RecourseData,
               cap: int | None = None) -> float:
    """Largest row violation found by enumerating every vertex of ball_box."""
    x1 = _x1_vector(x1)
    vertices = np.array(list(box_vertices(ball_box, cap)))
    g = recourse.A2 @ policy.A + recourse.A3
    constant = recourse.A1 @ x1 + recourse.A2 @ policy.a - recourse.b
    if recourse.L == 0:
        return 0.0
    return float((constant[:, None] + g @ vertices.T).max())


def second_stage(x1, xi, instance: Instance, options: SolverOptions | None = None) -> tuple[np.ndarray, float]:
    """Optimal recourse at a realized xi: min c2'x2 s.t. A2 x2 <= b - A1 x1 - A3 xi."""
    x1 = _x1_vector(x1)
    xi = np.asarray(xi, dtype=float)
    if not instance.support.contains(xi):
        raise ModelError("xi: outside the support")
    rc = instance.recourse
    builder = ProgramBuilder(MINIMIZE)
    x2 = builder.add_variables(instance.n2, lower=-INF, upper=INF, cost=instance.c2, name="x2")
    builder.add_rows(x2, rc.A2, LE, rc.b - rc.A1 @ x1 - rc.A3 @ xi, name="recourse")
    result = solve_lp(builder.build(), options)
    if result.status == INFEASIBLE:
        raise RecourseInfeasibleError("second-stage problem infeasible: x1 is not robustly feasible at xi", xi=xi)
    if result.status == UNBOUNDED:
        raise UnboundedError("second-stage problem unbounded at xi", xi=xi.tolist())
    if not result.optimal:
        raise NumericalInstabilityError(f"second-stage LP ended with status {result.status}")
    return result.primal, result.objective


def feasibility_value(x1, xi, instance: Instance, options: SolverOptions | None = None) -> float:
    """Smallest uniform relaxation y >= 0 of the recourse rows that makes them feasible at xi."""
    x1 = _x1_vector(x1)
    xi = np.asarray(xi, dtype=float)
    rc = instance.recourse
    if rc.L == 0:
        return 0.0
    builder = ProgramBuilder(MINIMIZE)
    x2 = builder.add_variables(instance.n2, lower=-INF, upper=INF, name="x2")
    y = builder.add_variables(1, cost=1.0, name="y")
    builder.add_rows(np.concatenate([x2, y]), np.hstack([rc.A2, -np.ones((rc.L, 1))]), LE,
                     rc.b - rc.A1 @ x1 - rc.A3 @ xi, name="relaxed")
    result = solve_lp(builder.build(), options)
    if not result.optimal:
        raise NumericalInstabilityError(f"feasibility LP ended with status {result.status}")
    return max(0.0, result.objective)


def _feasibility_by_enumeration(x1, support: BoxSet, instance: Instance, options: SolverOptions | None,
                                cap: int | None, threads: int):
    vertices = list(box_vertices(support, cap))
    if threads > 1 and len(vertices) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(lambda v: feasibility_value(x1, v, instance, options), vertices))
    else:
        values = [feasibility_value(x1, v, instance, options) for v in vertices]
    best = int(np.argmax(values))
    return vertices[best], float(values[best])


def _feasibility_by_milp(x1, support: BoxSet, instance: Instance, options: SolverOptions | None):
    x1 = _x1_vector(x1)
    rc = instance.recourse
    free = support.free_coordinates
    span = support.span
    base = rc.A1 @ x1 - rc.b + rc.A3 @ support.lower

    builder = ProgramBuilder(MAXIMIZE)
    lam = builder.add_variables(rc.L, upper=1.0, cost=base, name="lam")
    zeta = builder.add_variables(free.size, upper=1.0, binary=True, name="zeta")
    for r in range(instance.n2):
        builder.add_row(lam, rc.A2[:, r], EQ, 0.0, name=f"stationary_{r}")
    builder.add_row(lam, 1.0, LE, 1.0, name="simplex")

    # w_lj = lam_l * zeta_j; only the envelope the objective pushes against is needed
    for l in range(rc.L):
        for k, j in enumerate(free):
            coef = rc.A3[l, j] * span[j]
            if coef == 0.0:
                continue
            w = builder.add_variables(1, upper=1.0, cost=coef, name=f"w{l}_{j}")[0]
            if coef > 0.0:
                builder.add_row([w, lam[l]], [1.0, -1.0], LE, 0.0)
                builder.add_row([w, zeta[k]], [1.0, -1.0], LE, 0.0)
            else:
                builder.add_row([lam[l], zeta[k], w], [1.0, 1.0, -1.0], LE, 1.0)

    result = solve_milp(builder.build(), options=options)
    if result.status == NODE_LIMIT:
        raise NodeLimitError("feasibility MILP hit the node limit")
    if not result.optimal:
        raise NumericalInstabilityError(f"feasibility MILP ended with status {result.status}")
    vertex = support.lower.copy()
    chosen = free[np.round(result.primal[zeta]) > 0.5]
    vertex[chosen] = support.upper[chosen]
    return vertex, max(0.0, float(result.objective))


def feasibility_subproblem(x1, support: BoxSet, instance: Instance, method: str = "auto",
                           options: SolverOptions | None = None, cap: int | None = None,
                           threads: int = 1, enumeration_limit: int | None = None):
    """Vertex of the support with the largest recourse infeasibility, and that value.

    ``enumerate`` solves one LP per vertex (first maximizer wins);
    ``milp`` maximizes the dual of the feasibility LP over binary vertex
    indicators with exact McCormick envelopes; ``auto`` enumerates up to
    ``enumeration_limit`` vertices.
    """
    if method not in FEASIBILITY_METHODS:
        raise ModelError(f"method: expected one of {FEASIBILITY_METHODS}, got '{method}'")
    if method == "auto":
        limit = config.ENUMERATION_LIMIT if enumeration_limit is None else enumeration_limit
        method = "enumerate" if support.vertex_count <= limit else "milp"
    if method == "enumerate":
        return _feasibility_by_enumeration(x1, support, instance, options, cap, threads)
    return _feasibility_by_milp(x1, support, instance, options)


# --- Driver loops ---

def _tolerance_slack(options: AffineOptions, box: BoxSet) -> float:
    """Violation at an already-cut vertex that is still attributed to solver tolerances."""
    magnitude = 1.0 + float(np.abs(np.concatenate([box.lower, box.upper])).max(initial=0.0))
    return max(options.rho, 10.0 * (options.solver.feasibility_tol + options.solver.integrality_tol) * magnitude)


def _check_policy_bound(work: Instance, structure: PolicyStructure, state: MasterState, ball_box: BoxSet,
                        refined: bool, options: AffineOptions, x1: np.ndarray, theta: np.ndarray,
                        objective: float) -> None:
    """Raise PolicyBoundError when the bound on theta or x1 is binding.

    Entries at the bound are common when the objective ignores a direction
    (degenerate ball box, unused coordinates). The final master is re-solved
    with twice the bound; only a strictly better objective means the bound
    cuts off the optimum.
    """
    bound = options.policy_bound
    limit = bound * (1.0 - 1e-9)
    n_binary = work.first_stage.n_binary
    if not (np.any(np.abs(theta) >= limit) or np.any(np.abs(x1[n_binary:]) >= limit)):
        return
    spec, _ = _master(work, structure, state, ball_box, refined, 2.0 * bound)
    result = solve_milp(spec, options.solver.gap_tol, options.solver)
    tol = max(options.solver.gap_tol, options.solver.optimality_tol) * max(1.0, abs(objective))
    if result.status == UNBOUNDED or (result.optimal and result.objective < objective - 10.0 * tol):
        raise PolicyBoundError(
            f"solution reaches the policy bound {bound:g} and a wider bound lowers the objective; the "
            f"affine-policy problem may be unbounded or need a larger DRLP_POLICY_BOUND")
    log.debug("[master] entries at the policy bound %g do not affect the objective", bound)


def _run(instance: Instance, structure: PolicyStructure | None, options: AffineOptions | None,
         refined_set: RefinedSet | None, mode: str) -> AffineSolution:
    options = options or AffineOptions()
    structure = structure or PolicyStructure.identity(instance.n2, instance.m)
    structure.check(instance)
    work = instance.normalized()
    support = instance.support
    ball_box = refined_set.omega if refined_set is not None else support
    refined = refined_set is not None
    state = MasterState.initial(work.L, ball_box, support if refined else None)
    slack = _tolerance_slack(options, ball_box)
    n_binary = instance.first_stage.n_binary
    row_max = INF

    log.info("[master] %s solve: n1=%d n2=%d m=%d L=%d N=%d eps=%g", mode, instance.n1, instance.n2,
             instance.m, instance.L, instance.N, instance.epsilon)
    for iteration in range(1, options.max_iterations + 1):
        state.iteration = iteration
        spec, layout = _master(work, structure, state, ball_box, refined, options.policy_bound)
        result = _solve_master(spec, options, iteration)
        x1 = result.primal[layout.x1].copy()
        x1[:n_binary] = np.round(x1[:n_binary])
        theta = result.primal[layout.theta]
        policy = structure.assemble(theta)

        feas_value = math.nan
        if refined:
            vertex, feas_value = feasibility_subproblem(
                x1, support, work, options.feasibility_method, options.solver, options.max_vertices,
                options.threads, options.enumeration_limit)
            if feas_value > options.rho:
                if state.add_feasibility_vertex(vertex):
                    state.history.append(IterationRecord(iteration, result.objective, row_max, feas_value,
                                                         spec.n_vars, spec.n_rows, 0, 1))
                    log.info("[feas] P=%d L_P=%.10g V=%.3g: added support vertex %d", iteration,
                             result.objective, feas_value, len(state.feasibility_vertices))
                    continue
                if feas_value > slack:
                    raise ToleranceError(
                        f"feasibility violation {feas_value:.3g} at a support vertex that is already cut",
                        iteration=iteration)
                log.warning("[feas] P=%d residual violation %.3g at a cut vertex, within solver tolerance",
                            iteration, feas_value)

        vertices, values = row_violations(x1, policy, ball_box, work.recourse)
        row_max = float(values.max()) if values.size else 0.0
        added = 0
        if row_max > options.rho:
            for l in np.flatnonzero(values > options.rho):
                added += state.add_row_vertex(int(l), vertices[l])
        state.history.append(IterationRecord(iteration, result.objective, row_max, feas_value,
                                             spec.n_vars, spec.n_rows, added, 0))
        log.info("[master] P=%d L_P=%.10g F=%.3g vars=%d rows=%d cuts+%d", iteration, result.objective,
                 row_max, spec.n_vars, spec.n_rows, added)
        if row_max <= options.rho:
            break
        if added == 0:
            if row_max > slack:
                raise ToleranceError(
                    f"row violation {row_max:.3g} > rho at vertices already in the master",
                    iteration=iteration)
            log.warning("[master] P=%d residual violation %.3g at cut vertices, within solver tolerance",
                        iteration, row_max)
            break
    else:
        raise IterationLimitError(f"no convergence within {options.max_iterations} iterations",
                                  iteration=options.max_iterations)

    _check_policy_bound(work, structure, state, ball_box, refined, options, x1, theta, result.objective)
    if options.audit and ball_box.vertex_count <= min(options.max_vertices, _AUDIT_LIMIT):
        worst = audit_rows(x1, policy, ball_box, work.recourse, options.max_vertices)
        log.debug("[audit] enumeration over %d vertices: max row violation %.3g", ball_box.vertex_count, worst)
        if worst > slack:
            raise ToleranceError(f"vertex audit found row violation {worst:.3g}")

    first = state.history[0]
    return AffineSolution(
        x1=FirstStageDecision.from_vector(x1, n_binary),
        policy=policy,
        objective=float(result.objective),
        certificate=DualCertificate.from_vector(result.primal[layout.mu]),
        theta=np.array(theta),
        history=tuple(state.history),
        mode=mode,
        refined=refined_set,
        state=state,
        master_dims=(first.master_vars, first.master_rows),
        omega=ball_box if refined else None,
    )


def solve_affine(instance: Instance, structure: PolicyStructure | None = None,
                 options: AffineOptions | None = None) -> AffineSolution:
    """Cutting-plane solve of the affine-policy problem over the support."""
    return _run(instance, structure, options, None, "plain")


def solve_affine_refined(instance: Instance, structure: PolicyStructure | None = None,
                         beta: float = config.BETA, options: AffineOptions | None = None) -> AffineSolution:
    """Solve over the data-driven set Omega, keeping recourse feasible on every support vertex."""
    refined_set = build_omega(instance.support, instance.samples, instance.epsilon, beta)
    log.info("[omega] Delta=%g guarantee=%g", refined_set.delta, refined_set.guarantee)
    return _run(instance, structure, options, refined_set, "refined")


# --- Solution documents ---

def _box_doc(box: BoxSet | None):
    return None if box is None else {"lower": box.lower, "upper": box.upper}


def solution_to_dict(solution: AffineSolution) -> dict:
    cert = solution.certificate
    doc = {
        "format": SOLUTION_FORMAT,
        "version": 1,
        "mode": solution.mode,
        "objective": solution.objective,
        "x1": {"binary": solution.x1.binary, "continuous": solution.x1.continuous},
        "policy": {"A": solution.policy.A, "a": solution.policy.a},
        "theta": solution.theta,
        "mu": {"mu0": cert.mu0, "mu_plus": cert.mu_plus, "mu_minus": cert.mu_minus},
        "master": {"vars": solution.master_dims[0], "rows": solution.master_dims[1]},
        "omega": _box_doc(solution.omega),
        "trace": [vars(record) for record in solution.history],
    }
    if solution.refined is not None:
        doc["omega"].update(delta=solution.refined.delta, guarantee=solution.refined.guarantee)
    if solution.state is not None:
        doc["feasibility_vertices"] = solution.state.feasibility_vertices
    return doc


def export_solution(path: str, solution: AffineSolution) -> None:
    write_json(path, solution_to_dict(solution))


def _number(value) -> float:
    return math.nan if value is None else float(value)


def load_solution(path: str) -> AffineSolution:
    doc = read_json(path)
    if doc.get("format") != SOLUTION_FORMAT:
        raise SchemaError(f"{path}: format '{doc.get('format')}' is not '{SOLUTION_FORMAT}'")
    try:
        x1 = FirstStageDecision(doc["x1"]["binary"], doc["x1"]["continuous"])
        policy = AffinePolicy(np.array(doc["policy"]["A"], dtype=float).reshape(len(doc["policy"]["a"]), -1),
                              doc["policy"]["a"])
        mu = doc["mu"]
        certificate = DualCertificate(float(mu["mu0"]), np.array(mu["mu_plus"], dtype=float),
                                      np.array(mu["mu_minus"], dtype=float))
        history = tuple(
            IterationRecord(int(r["iteration"]), _number(r["lower_bound"]), _number(r["max_violation"]),
                            _number(r["feasibility_violation"]), int(r["master_vars"]), int(r["master_rows"]),
                            int(r.get("row_cuts", 0)), int(r.get("feasibility_cuts", 0)))
            for r in doc.get("trace", [])
        )
        omega = doc.get("omega")
        return AffineSolution(
            x1=x1,
            policy=policy,
            objective=float(doc["objective"]),
            certificate=certificate,
            theta=np.array(doc.get("theta", []), dtype=float),
            history=history,
            mode=doc.get("mode", "plain"),
            master_dims=(int(doc["master"]["vars"]), int(doc["master"]["rows"])),
            omega=None if omega is None else BoxSet(omega["lower"], omega["upper"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"{path}: malformed solution document ({e})") from e
