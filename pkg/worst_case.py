"""
Worst-case expected cost of an affine policy over a 1-Wasserstein ball.

For x2 = A xi + a the worst case over all distributions within distance eps
of the empirical one (restricted to a box) is an LP in 2m variables that sees
the samples only through their mean:

    max  c2'(A(xi_mean + q+ - q-) + a)
    s.t. 1'(q+ + q-) <= eps,  0 <= q+ <= upper - xi_mean,  0 <= q- <= xi_mean - lower

q+ and q- are the averages of the per-sample displacements. Its LP dual is
min c3'mu over M(A), which is how the worst case enters the master problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from backend import GE, LE, MAXIMIZE, MINIMIZE, ProgramBuilder, SolverOptions, solve_lp
from errors import ModelError, NumericalInstabilityError
from models import AffinePolicy, BoxSet, SampleSet


@dataclass(frozen=True, eq=False)
class WorstCaseSolution:
    value: float
    q_plus: np.ndarray
    q_minus: np.ndarray
    base: float

    @property
    def increment(self) -> float:
        return self.value - self.base


@dataclass(frozen=True, eq=False)
class DualCertificate:
    mu0: float
    mu_plus: np.ndarray
    mu_minus: np.ndarray

    @classmethod
    def from_vector(cls, mu) -> "DualCertificate":
        mu = np.asarray(mu, dtype=float)
        m = (mu.size - 1) // 2
        return cls(float(mu[0]), mu[1:1 + m].copy(), mu[1 + m:].copy())

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([[self.mu0], self.mu_plus, self.mu_minus])

    def in_dual_set(self, direction, tol: float = 1e-7) -> bool:
        """Membership in M(A) for direction = A'c2."""
        g = np.asarray(direction, dtype=float)
        scale = tol * max(1.0, float(np.abs(g).max(initial=0.0)))
        return bool(
            self.mu0 >= -scale
            and np.all(self.mu_plus >= -scale)
            and np.all(self.mu_minus >= -scale)
            and np.all(self.mu0 + self.mu_plus >= g - scale)
            and np.all(self.mu0 + self.mu_minus >= -g - scale)
        )


def _check_center(ball_box: BoxSet, xi_mean: np.ndarray, epsilon: float) -> None:
    if xi_mean.size != ball_box.dim:
        raise ModelError(f"xi_mean: expected length {ball_box.dim}, got {xi_mean.size}")
    if not ball_box.contains(xi_mean):
        raise ModelError("xi_mean: outside the ball box, the ball has no empirical center")
    if epsilon < 0:
        raise ModelError(f"epsilon: must be >= 0, got {epsilon}")


def c3_vector(epsilon: float, ball_box: BoxSet, xi_mean) -> np.ndarray:
    """(eps, upper - xi_mean, xi_mean - lower)."""
    xi_mean = np.asarray(xi_mean, dtype=float)
    _check_center(ball_box, xi_mean, epsilon)
    return np.concatenate([
        [float(epsilon)],
        np.maximum(ball_box.upper - xi_mean, 0.0),
        np.maximum(xi_mean - ball_box.lower, 0.0),
    ])


def worst_case_lp(policy: AffinePolicy, c2, ball_box: BoxSet, xi_mean, epsilon: float,
                  options: SolverOptions | None = None) -> WorstCaseSolution:
    xi_mean = np.asarray(xi_mean, dtype=float)
    _check_center(ball_box, xi_mean, epsilon)
    c2 = np.asarray(c2, dtype=float)
    g = policy.direction(c2)
    base = float(c2 @ policy.evaluate(xi_mean))
    m = g.size

    builder = ProgramBuilder(MAXIMIZE)
    qp = builder.add_variables(m, upper=np.maximum(ball_box.upper - xi_mean, 0.0), cost=g, name="qp")
    qm = builder.add_variables(m, upper=np.maximum(xi_mean - ball_box.lower, 0.0), cost=-g, name="qm")
    builder.add_row(np.concatenate([qp, qm]), 1.0, LE, epsilon, name="budget")
    result = solve_lp(builder.build(), options)
    if not result.optimal:
        raise NumericalInstabilityError(f"worst-case LP ended with status {result.status}")
    return WorstCaseSolution(base + result.objective, result.primal[qp], result.primal[qm], base)


def worst_case_greedy(direction, slack_up, slack_down, epsilon: float) -> float:
    """Optimal increment of the worst-case LP by fractional knapsack.

    Coordinate j gains |direction_j| per unit of budget up to its slack in
    the improving direction. Ties go to the lowest index.
    """
    g = np.asarray(direction, dtype=float)
    up = np.asarray(slack_up, dtype=float)
    down = np.asarray(slack_down, dtype=float)
    budget = float(epsilon)
    gain = 0.0
    for j in sorted(range(g.size), key=lambda k: -abs(g[k])):
        if budget <= 0.0 or g[j] == 0.0:
            break
        cap = up[j] if g[j] > 0 else down[j]
        used = min(budget, max(cap, 0.0))
        gain += abs(g[j]) * used
        budget -= used
    return gain


def samplewise_worst_case(policy: AffinePolicy, c2, ball_box: BoxSet, samples: SampleSet, epsilon: float,
                          options: SolverOptions | None = None) -> float:
    """Worst case with one displacement pair per sample (N*2m variables)."""
    points = samples.points
    if points.shape[1] != ball_box.dim:
        raise ModelError(f"samples: expected {ball_box.dim} columns, got {points.shape[1]}")
    if not all(ball_box.contains(p) for p in points):
        raise ModelError("samples: every sample must lie inside the ball box")
    c2 = np.asarray(c2, dtype=float)
    g = policy.direction(c2)
    N, m = points.shape
    base = float(np.mean([c2 @ policy.evaluate(p) for p in points]))

    builder = ProgramBuilder(MAXIMIZE)
    columns = []
    for p in points:
        qp = builder.add_variables(m, upper=np.maximum(ball_box.upper - p, 0.0), cost=g / N, name="qp")
        qm = builder.add_variables(m, upper=np.maximum(p - ball_box.lower, 0.0), cost=-g / N, name="qm")
        columns.extend([qp, qm])
    builder.add_row(np.concatenate(columns), 1.0, LE, N * epsilon, name="budget")
    result = solve_lp(builder.build(), options)
    if not result.optimal:
        raise NumericalInstabilityError(f"sample-wise worst-case LP ended with status {result.status}")
    return base + result.objective


def dual_value(policy: AffinePolicy, c2, ball_box: BoxSet, xi_mean, epsilon: float,
               options: SolverOptions | None = None) -> tuple[float, DualCertificate]:
    """min c3'mu + c2'(A xi_mean + a) over mu in M(A)."""
    xi_mean = np.asarray(xi_mean, dtype=float)
    c3 = c3_vector(epsilon, ball_box, xi_mean)
    c2 = np.asarray(c2, dtype=float)
    g = policy.direction(c2)
    m = g.size
    base = float(c2 @ policy.evaluate(xi_mean))

    builder = ProgramBuilder(MINIMIZE)
    mu = builder.add_variables(2 * m + 1, cost=c3, name="mu")
    for j in range(m):
        builder.add_row([mu[0], mu[1 + j]], [1.0, 1.0], GE, g[j], name=f"plus_{j}")
        builder.add_row([mu[0], mu[1 + m + j]], [1.0, 1.0], GE, -g[j], name=f"minus_{j}")
    result = solve_lp(builder.build(), options)
    if not result.optimal:
        raise NumericalInstabilityError(f"dual worst-case LP ended with status {result.status}")
    return base + result.objective, DualCertificate.from_vector(result.primal)
