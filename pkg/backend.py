"""
Backend-neutral LP / MILP layer.

Models are described once as a LinearProgramSpec and solved either by the
reference engine (bounded-variable revised simplex + best-bound branch and
bound, pure numpy) or by SciPy's HiGHS bindings. Both return a SolveResult.

Usage:
    builder = ProgramBuilder(MAXIMIZE)
    x = builder.add_variables(2, upper=1.0, cost=[3.0, 2.0], binary=True)
    builder.add_row(x, [1.0, 1.0], LE, 1.0)
    result = solve_milp(builder.build())
"""

from __future__ import annotations

import heapq
import itertools
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

import config
from errors import ModelError, NumericalInstabilityError

log = logging.getLogger(__name__)

INF = math.inf

MINIMIZE = "minimize"
MAXIMIZE = "maximize"
LE, EQ, GE = "<=", "=", ">="

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"
NODE_LIMIT = "node_limit"

# nonbasic states of the simplex
_BASIC, _AT_LOWER, _AT_UPPER, _FREE = 0, 1, 2, 3

_REFACTOR_EVERY = 50
_DEGENERATE_LIMIT = 50


@dataclass(frozen=True)
class SolverOptions:
    feasibility_tol: float = config.FEASIBILITY_TOL
    optimality_tol: float = config.OPTIMALITY_TOL
    integrality_tol: float = config.INTEGRALITY_TOL
    gap_tol: float = config.MILP_GAP
    pivot_tol: float = config.PIVOT_TOL
    max_iterations: int = config.LP_MAX_ITERATIONS
    max_nodes: int = config.BB_MAX_NODES
    engine: str = config.SOLVER

    def __post_init__(self):
        if self.engine not in ("reference", "highs"):
            raise ModelError(f"engine: unknown solver engine '{self.engine}'")


@dataclass(frozen=True)
class LinearProgramSpec:
    """An LP or MILP:  optimize c x  s.t.  rows (<=, =, >=) rhs,  lower <= x <= upper.

    Infinite bounds are math.inf / -math.inf. Arrays are made read-only so a
    spec can be shared between threads.
    """

    objective: np.ndarray
    matrix: sparse.csr_matrix
    senses: tuple
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    binary: np.ndarray
    sense: str = MINIMIZE
    names: tuple | None = None
    row_names: tuple | None = None

    def __post_init__(self):
        objective = _frozen(np.array(self.objective, dtype=float).ravel())
        n = objective.size
        matrix = sparse.csr_matrix(self.matrix, dtype=float)
        if matrix.shape[0] == 0:
            matrix = sparse.csr_matrix((0, n))
        if matrix.shape[1] != n:
            raise ModelError(
                f"matrix: constraint rows reference {matrix.shape[1]} columns but the objective has {n}"
            )
        k = matrix.shape[0]
        senses = tuple(self.senses)
        if len(senses) != k:
            raise ModelError(f"senses: expected {k} entries, got {len(senses)}")
        bad = [s for s in senses if s not in (LE, EQ, GE)]
        if bad:
            raise ModelError(f"senses: unknown constraint sense '{bad[0]}'")
        rhs = _frozen(np.array(self.rhs, dtype=float).ravel())
        if rhs.size != k or not np.all(np.isfinite(rhs)):
            raise ModelError(f"rhs: expected {k} finite values")
        lower = _frozen(np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy())
        upper = _frozen(np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy())
        if np.any(np.isnan(lower)) or np.any(np.isnan(upper)):
            raise ModelError("bounds: NaN bound")
        if np.any(lower > upper) or np.any(lower == INF) or np.any(upper == -INF):
            raise ModelError("bounds: lower bound exceeds upper bound")
        binary = _frozen(np.broadcast_to(np.asarray(self.binary, dtype=bool), (n,)).copy())
        if np.any(binary & ((lower < 0.0) | (upper > 1.0))):
            raise ModelError("bounds: binary variables must have bounds within [0, 1]")
        if self.sense not in (MINIMIZE, MAXIMIZE):
            raise ModelError(f"sense: expected '{MINIMIZE}' or '{MAXIMIZE}'")
        if self.names is not None and len(self.names) != n:
            raise ModelError(f"names: expected {n} names, got {len(self.names)}")
        if self.row_names is not None and len(self.row_names) != k:
            raise ModelError(f"row_names: expected {k} names, got {len(self.row_names)}")

        object.__setattr__(self, "objective", objective)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "senses", senses)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "binary", binary)

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def has_binaries(self) -> bool:
        return bool(self.binary.any())

    def variable_names(self) -> list[str]:
        return list(self.names) if self.names is not None else [f"x{j}" for j in range(self.n_vars)]

    def constraint_names(self) -> list[str]:
        return list(self.row_names) if self.row_names is not None else [f"c{i}" for i in range(self.n_rows)]

    def with_bounds(self, lower, upper) -> "LinearProgramSpec":
        return replace(self, lower=lower, upper=upper)

    def relaxed(self) -> "LinearProgramSpec":
        return replace(self, binary=np.zeros(self.n_vars, dtype=bool))


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class ProgramBuilder:
    """Incremental construction of a LinearProgramSpec from column blocks."""

    def __init__(self, sense: str = MINIMIZE):
        self.sense = sense
        self._cost: list[float] = []
        self._lower: list[float] = []
        self._upper: list[float] = []
        self._binary: list[bool] = []
        self._names: list[str] = []
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self._row_names: list[str] = []

    @property
    def n_vars(self) -> int:
        return len(self._cost)

    @property
    def n_rows(self) -> int:
        return len(self._rhs)

    def add_variables(self, count: int, lower=0.0, upper=INF, cost=0.0, binary: bool = False,
                      name: str = "x") -> np.ndarray:
        start = self.n_vars
        self._cost.extend(np.broadcast_to(np.asarray(cost, dtype=float), (count,)).tolist())
        self._lower.extend(np.broadcast_to(np.asarray(lower, dtype=float), (count,)).tolist())
        self._upper.extend(np.broadcast_to(np.asarray(upper, dtype=float), (count,)).tolist())
        self._binary.extend([binary] * count)
        self._names.extend(f"{name}_{start + k}" for k in range(count))
        return np.arange(start, start + count)

    def add_cost(self, columns, values) -> None:
        for j, v in zip(np.atleast_1d(columns), np.broadcast_to(values, np.shape(np.atleast_1d(columns)))):
            self._cost[int(j)] += float(v)

    def add_row(self, columns, coefficients, sense: str, rhs: float, name: str | None = None) -> int:
        columns = np.atleast_1d(np.asarray(columns, dtype=int))
        coefficients = np.broadcast_to(np.asarray(coefficients, dtype=float), columns.shape)
        row = self.n_rows
        keep = coefficients != 0.0
        self._rows.extend([row] * int(keep.sum()))
        self._cols.extend(columns[keep].tolist())
        self._vals.extend(coefficients[keep].tolist())
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._row_names.append(name or f"c{row}")
        return row

    def add_rows(self, columns, block, sense: str, rhs, name: str = "c") -> np.ndarray:
        """Add one row per line of ``block`` (dense, rows x len(columns))."""
        columns = np.asarray(columns, dtype=int)
        block = np.atleast_2d(np.asarray(block, dtype=float))
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (block.shape[0],))
        first = self.n_rows
        r, c = np.nonzero(block)
        self._rows.extend((r + first).tolist())
        self._cols.extend(columns[c].tolist())
        self._vals.extend(block[r, c].tolist())
        self._senses.extend([sense] * block.shape[0])
        self._rhs.extend(rhs.tolist())
        self._row_names.extend(f"{name}_{first + i}" for i in range(block.shape[0]))
        return np.arange(first, first + block.shape[0])

    def build(self) -> LinearProgramSpec:
        n, k = self.n_vars, self.n_rows
        matrix = sparse.coo_matrix((self._vals, (self._rows, self._cols)), shape=(k, n)).tocsr()
        return LinearProgramSpec(
            objective=np.array(self._cost),
            matrix=matrix,
            senses=tuple(self._senses),
            rhs=np.array(self._rhs),
            lower=np.array(self._lower),
            upper=np.array(self._upper),
            binary=np.array(self._binary, dtype=bool),
            sense=self.sense,
            names=tuple(self._names),
            row_names=tuple(self._row_names),
        )


@dataclass
class SolveResult:
    status: str
    primal: np.ndarray
    objective: float
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    is_vertex: bool = False
    iterations: int = 0
    nodes: int = 0
    incumbent_trace: list = field(default_factory=list)
    message: str = ""

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def constraint_violation(spec: LinearProgramSpec, x: np.ndarray) -> float:
    """Largest row violation (rows scaled to unit max-abs coefficient) or bound violation."""
    x = np.asarray(x, dtype=float)
    activity = spec.matrix @ x
    scale = _row_scale(spec.matrix)
    senses = np.array(spec.senses)
    gap = (activity - spec.rhs) * scale
    row_viol = np.where(senses == LE, gap, np.where(senses == GE, -gap, np.abs(gap)))
    bound_viol = np.maximum(spec.lower - x, x - spec.upper)
    parts = [row_viol.max(initial=0.0), bound_viol.max(initial=0.0)]
    return float(max(0.0, *parts))


def _row_scale(matrix: sparse.csr_matrix) -> np.ndarray:
    if matrix.shape[0] == 0:
        return np.ones(0)
    biggest = abs(matrix).max(axis=1).toarray().ravel()
    return np.where(biggest > 0.0, 1.0 / np.where(biggest > 0.0, biggest, 1.0), 1.0)


# --- Reference engine: bounded-variable revised simplex ---

class _RevisedSimplex:
    """Revised simplex on  M z = b,  lo <= z <= hi,  minimize cost z.

    Nonbasic variables sit at a finite bound (or at zero when free). Dantzig
    pricing switches to Bland's rule after a run of degenerate pivots.
    """

    def __init__(self, M, b, lo, hi, x, state, basis, options: SolverOptions):
        self.M = M
        self.b = b
        self.lo = lo
        self.hi = hi
        self.x = x
        self.state = state
        self.basis = basis
        self.opts = options
        self.k = M.shape[0]
        self.iterations = 0
        self.bland = False
        self._since_refactor = 0
        self.binv = np.eye(self.k)
        self._refactor()

    def _refactor(self) -> None:
        if self.k == 0:
            return
        try:
            binv = np.linalg.inv(self.M[:, self.basis])
        except np.linalg.LinAlgError as e:
            raise NumericalInstabilityError(f"singular basis after {self.iterations} pivots") from e
        if not np.all(np.isfinite(binv)):
            raise NumericalInstabilityError(f"ill-conditioned basis after {self.iterations} pivots")
        self.binv = binv
        nonbasic = self.x.copy()
        nonbasic[self.basis] = 0.0
        self.x[self.basis] = binv @ (self.b - self.M @ nonbasic)
        self._since_refactor = 0

    def _price(self, d: np.ndarray, tol: float) -> tuple[int, int]:
        movable = self.hi > self.lo
        up = ((self.state == _AT_LOWER) | (self.state == _FREE)) & (d < -tol) & movable
        down = ((self.state == _AT_UPPER) | (self.state == _FREE)) & (d > tol) & movable
        candidates = up | down
        if not candidates.any():
            return -1, 0
        if self.bland:
            j = int(np.flatnonzero(candidates)[0])
        else:
            j = int(np.argmax(np.where(candidates, np.abs(d), -1.0)))
        return j, (1 if up[j] else -1)

    def _leaving(self, limits: np.ndarray, t: float, delta: np.ndarray) -> int:
        ties = np.flatnonzero(limits <= t + 1e-12)
        if ties.size == 1:
            return int(ties[0])
        if self.bland:
            return int(ties[np.argmin(self.basis[ties])])
        return int(ties[np.argmax(np.abs(delta[ties]))])

    def run(self, cost: np.ndarray) -> str:
        opts = self.opts
        tol = opts.optimality_tol * max(1.0, float(np.abs(cost).max(initial=0.0)))
        degenerate_run = 0
        while True:
            if self.iterations >= opts.max_iterations:
                return ITERATION_LIMIT
            if self._since_refactor >= _REFACTOR_EVERY:
                self._refactor()
            y = cost[self.basis] @ self.binv
            d = cost - y @ self.M
            j, direction = self._price(d, tol)
            if j < 0:
                return OPTIMAL

            w = self.binv @ self.M[:, j]
            delta = -direction * w
            xb = self.x[self.basis]
            lo_b = self.lo[self.basis]
            hi_b = self.hi[self.basis]
            limits = np.full(self.k, INF)
            dec = delta < -opts.pivot_tol
            inc = delta > opts.pivot_tol
            limits[dec] = (xb[dec] - lo_b[dec]) / -delta[dec]
            limits[inc] = (hi_b[inc] - xb[inc]) / delta[inc]
            limits = np.maximum(limits, 0.0)
            t = float(limits.min()) if self.k else INF
            flip = self.hi[j] - self.lo[j]

            if flip <= t:
                if math.isinf(flip):
                    return UNBOUNDED
                step = flip
                self.x[self.basis] = xb + flip * delta
                if direction > 0:
                    self.x[j], self.state[j] = self.hi[j], _AT_UPPER
                else:
                    self.x[j], self.state[j] = self.lo[j], _AT_LOWER
            else:
                step = t
                r = self._leaving(limits, t, delta)
                self.x[self.basis] = xb + t * delta
                self.x[j] += direction * t
                leaving = self.basis[r]
                if delta[r] < 0.0 or self.lo[leaving] == self.hi[leaving]:
                    self.x[leaving], self.state[leaving] = self.lo[leaving], _AT_LOWER
                else:
                    self.x[leaving], self.state[leaving] = self.hi[leaving], _AT_UPPER
                pivot = w[r]
                row = self.binv[r] / pivot
                self.binv -= np.outer(w, row)
                self.binv[r] = row
                self.basis[r] = j
                self.state[j] = _BASIC
                self._since_refactor += 1

            self.iterations += 1
            degenerate_run = degenerate_run + 1 if step <= 1e-12 else 0
            if degenerate_run > _DEGENERATE_LIMIT and not self.bland:
                log.debug("[simplex] %d degenerate pivots, switching to Bland's rule", degenerate_run)
                self.bland = True


def _solve_reference_lp(spec: LinearProgramSpec, options: SolverOptions) -> SolveResult:
    n, k = spec.n_vars, spec.n_rows
    scale = _row_scale(spec.matrix)
    A = (sparse.diags(scale) @ spec.matrix).toarray() if k else np.zeros((0, n))
    b = spec.rhs * scale
    senses = np.array(spec.senses)
    cost = spec.objective if spec.sense == MINIMIZE else -spec.objective

    # columns: structurals | slacks (A x + s = b) | artificials
    slack_lo = np.where(senses == GE, -INF, 0.0)
    slack_hi = np.where(senses == LE, INF, 0.0)

    x_struct = np.where(np.isfinite(spec.lower), spec.lower,
                        np.where(np.isfinite(spec.upper), spec.upper, 0.0))
    residual = b - A @ x_struct
    slack_basic = (residual >= slack_lo - options.feasibility_tol) & (residual <= slack_hi + options.feasibility_tol)
    signs = np.where(residual >= 0.0, 1.0, -1.0)

    M = np.hstack([A, np.eye(k), np.diag(signs)])
    lo = np.concatenate([spec.lower, slack_lo, np.zeros(k)])
    hi = np.concatenate([spec.upper, slack_hi, np.where(slack_basic, 0.0, INF)])

    x = np.concatenate([x_struct, np.zeros(k), np.zeros(k)])
    state = np.empty(n + 2 * k, dtype=np.int8)
    state[:n] = np.where(np.isfinite(spec.lower), _AT_LOWER,
                         np.where(np.isfinite(spec.upper), _AT_UPPER, _FREE))
    state[n:n + k] = np.where(slack_lo == 0.0, _AT_LOWER, _AT_UPPER)
    state[n + k:] = _AT_LOWER
    basis = np.where(slack_basic, n + np.arange(k), n + k + np.arange(k))
    x[n + np.flatnonzero(slack_basic)] = residual[slack_basic]
    x[n + k + np.flatnonzero(~slack_basic)] = np.abs(residual[~slack_basic])
    state[basis] = _BASIC

    simplex = _RevisedSimplex(M, b, lo, hi, x, state, basis, options)

    if not slack_basic.all():
        phase_one = np.concatenate([np.zeros(n + k), np.ones(k)])
        status = simplex.run(phase_one)
        if status == ITERATION_LIMIT:
            return SolveResult(ITERATION_LIMIT, np.full(n, np.nan), math.nan, iterations=simplex.iterations)
        infeasibility = float(simplex.x[n + k:].sum())
        if infeasibility > options.feasibility_tol * max(1.0, float(np.abs(b).max(initial=0.0))):
            return SolveResult(INFEASIBLE, np.full(n, np.nan), math.nan, iterations=simplex.iterations,
                               message=f"phase one ended with infeasibility {infeasibility:.3g}")
        simplex.hi[n + k:] = 0.0
        nonbasic_art = (simplex.state[n + k:] != _BASIC)
        simplex.x[n + k:][nonbasic_art] = 0.0
        simplex.state[n + k:][nonbasic_art] = _AT_LOWER

    full_cost = np.concatenate([cost, np.zeros(2 * k)])
    status = simplex.run(full_cost)
    if status != OPTIMAL:
        return SolveResult(status, np.full(n, np.nan), math.nan, iterations=simplex.iterations)

    simplex._refactor()
    z = simplex.x
    residual_norm = float(np.abs(M @ z - b).max(initial=0.0))
    bound_gap = float(np.maximum(lo - z, z - hi).max(initial=0.0))
    if max(residual_norm, bound_gap) > 1e3 * options.feasibility_tol * max(1.0, float(np.abs(b).max(initial=0.0))):
        raise NumericalInstabilityError(
            f"simplex drifted: residual {residual_norm:.3g}, bound violation {bound_gap:.3g}"
        )
    primal = np.clip(z[:n], spec.lower, spec.upper)
    y = full_cost[simplex.basis] @ simplex.binv
    reduced = cost - y @ A
    duals = y * scale
    if spec.sense == MAXIMIZE:
        duals, reduced = -duals, -reduced
    return SolveResult(
        status=OPTIMAL,
        primal=primal,
        objective=float(spec.objective @ primal),
        duals=duals,
        reduced_costs=reduced,
        is_vertex=True,
        iterations=simplex.iterations,
    )


# --- HiGHS engine (SciPy) ---

def _solve_highs_lp(spec: LinearProgramSpec, options: SolverOptions) -> SolveResult:
    from scipy.optimize import linprog

    n = spec.n_vars
    senses = np.array(spec.senses)
    cost = spec.objective if spec.sense == MINIMIZE else -spec.objective
    le, ge, eq = senses == LE, senses == GE, senses == EQ
    A = spec.matrix
    A_ub = sparse.vstack([A[le], -A[ge]]).tocsr() if (le.any() or ge.any()) else None
    b_ub = np.concatenate([spec.rhs[le], -spec.rhs[ge]]) if A_ub is not None else None
    A_eq = A[eq] if eq.any() else None
    b_eq = spec.rhs[eq] if eq.any() else None
    bounds = [(None if math.isinf(lo) else lo, None if math.isinf(hi) else hi)
              for lo, hi in zip(spec.lower, spec.upper)]
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs-ds",
                  options={"primal_feasibility_tolerance": options.feasibility_tol,
                           "dual_feasibility_tolerance": options.optimality_tol,
                           "maxiter": options.max_iterations})
    status = {0: OPTIMAL, 1: ITERATION_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status)
    if status is None:
        raise NumericalInstabilityError(f"HiGHS: {res.message}")
    if status != OPTIMAL:
        return SolveResult(status, np.full(n, np.nan), math.nan, message=res.message)
    duals = np.zeros(spec.n_rows)
    if A_ub is not None:
        marginals = np.asarray(res.ineqlin.marginals)
        n_le = int(le.sum())
        duals[le] = marginals[:n_le]
        duals[ge] = -marginals[n_le:]
    if A_eq is not None:
        duals[eq] = np.asarray(res.eqlin.marginals)
    reduced = cost - spec.matrix.T @ duals
    if spec.sense == MAXIMIZE:
        duals, reduced = -duals, -reduced
    primal = np.asarray(res.x, dtype=float)
    return SolveResult(OPTIMAL, primal, float(spec.objective @ primal), duals=duals,
                       reduced_costs=np.asarray(reduced).ravel(), is_vertex=True,
                       iterations=int(getattr(res, "nit", 0)))


def _solve_highs_milp(spec: LinearProgramSpec, options: SolverOptions) -> SolveResult:
    from scipy.optimize import Bounds, LinearConstraint, milp

    n = spec.n_vars
    senses = np.array(spec.senses)
    cost = spec.objective if spec.sense == MINIMIZE else -spec.objective
    constraints = []
    if spec.n_rows:
        lb = np.where(senses == LE, -INF, spec.rhs)
        ub = np.where(senses == GE, INF, spec.rhs)
        constraints.append(LinearConstraint(spec.matrix, lb, ub))
    res = milp(cost, integrality=spec.binary.astype(int), bounds=Bounds(spec.lower, spec.upper),
               constraints=constraints or None,
               options={"mip_rel_gap": options.gap_tol, "node_limit": options.max_nodes})
    status = {0: OPTIMAL, 1: NODE_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}.get(res.status)
    if status is None:
        raise NumericalInstabilityError(f"HiGHS: {res.message}")
    if res.x is None:
        return SolveResult(status, np.full(n, np.nan), math.nan, message=res.message)
    primal = np.asarray(res.x, dtype=float)
    primal[spec.binary] = np.round(primal[spec.binary])
    return SolveResult(status, primal, float(spec.objective @ primal), message=res.message)


def _solve_lp_engine(spec: LinearProgramSpec, options: SolverOptions) -> SolveResult:
    if options.engine == "highs":
        return _solve_highs_lp(spec, options)
    return _solve_reference_lp(spec, options)


# --- Branch and bound ---

def _most_fractional(values: np.ndarray, binaries: np.ndarray, tol: float) -> int | None:
    if binaries.size == 0:
        return None
    distance = np.abs(values[binaries] - np.round(values[binaries]))
    if distance.max() <= tol:
        return None
    return int(binaries[int(np.argmax(distance))])


def _branch_and_bound(spec: LinearProgramSpec, options: SolverOptions) -> SolveResult:
    sign = 1.0 if spec.sense == MINIMIZE else -1.0
    relaxed = spec.relaxed()
    binaries = np.flatnonzero(spec.binary)
    counter = itertools.count()

    root = _solve_lp_engine(relaxed, options)
    nodes = 1
    if root.status != OPTIMAL:
        return SolveResult(root.status, root.primal, root.objective, nodes=nodes, message=root.message)

    incumbent: np.ndarray | None = None
    best = INF
    trace: list[float] = []
    heap: list = []
    status = OPTIMAL

    def consider(result: SolveResult, lower: np.ndarray, upper: np.ndarray) -> None:
        nonlocal incumbent, best
        value = sign * result.objective
        j = _most_fractional(result.primal, binaries, options.integrality_tol)
        if j is None:
            if value < best:
                incumbent = result.primal.copy()
                incumbent[binaries] = np.round(incumbent[binaries])
                best = value
                trace.append(float(spec.objective @ incumbent))
                log.debug("[bb] node %d: new incumbent %.10g", nodes, trace[-1])
        else:
            heapq.heappush(heap, (value, next(counter), j, lower, upper))

    consider(root, spec.lower.copy(), spec.upper.copy())
    while heap:
        bound, _, j, lower, upper = heapq.heappop(heap)
        if incumbent is not None and bound >= best - options.gap_tol * max(1.0, abs(best)):
            break
        if nodes >= options.max_nodes:
            status = NODE_LIMIT
            break
        for value in (0.0, 1.0):
            child_lower, child_upper = lower.copy(), upper.copy()
            child_lower[j] = child_upper[j] = value
            child = _solve_lp_engine(relaxed.with_bounds(child_lower, child_upper), options)
            nodes += 1
            if child.status == INFEASIBLE:
                continue
            if child.status == UNBOUNDED:
                return SolveResult(UNBOUNDED, child.primal, child.objective, nodes=nodes)
            if child.status != OPTIMAL:
                return SolveResult(child.status, child.primal, child.objective, nodes=nodes,
                                   incumbent_trace=trace, message="node LP did not finish")
            consider(child, child_lower, child_upper)

    if incumbent is None:
        final = NODE_LIMIT if status == NODE_LIMIT else INFEASIBLE
        return SolveResult(final, np.full(spec.n_vars, np.nan), math.nan, nodes=nodes)
    log.debug("[bb] finished: %d nodes, objective %.10g", nodes, trace[-1])
    return SolveResult(status, incumbent, float(spec.objective @ incumbent), is_vertex=True,
                       nodes=nodes, incumbent_trace=trace)


# --- Public entry points ---

def solve_lp(spec: LinearProgramSpec, options: SolverOptions | None = None) -> SolveResult:
    """Solve an LP. Optimal results are vertex solutions and carry duals.

    Duals are d(objective)/d(rhs) per constraint row.
    """
    options = options or SolverOptions()
    if spec.has_binaries:
        raise ModelError("solve_lp: spec has binary variables, use solve_milp")
    return _solve_lp_engine(spec, options)


def solve_milp(spec: LinearProgramSpec, gap_tol: float | None = None,
               options: SolverOptions | None = None) -> SolveResult:
    options = options or SolverOptions()
    if gap_tol is not None:
        if gap_tol < 0:
            raise ModelError("gap_tol: must be >= 0")
        options = replace(options, gap_tol=gap_tol)
    if not spec.has_binaries:
        return _solve_lp_engine(spec, options)
    if options.engine == "highs":
        return _solve_highs_milp(spec, options)
    return _branch_and_bound(spec, options)
