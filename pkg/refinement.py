"""
Data-driven uncertainty set  Omega = support ∩ [x_lo - eps*Delta, x_hi + eps*Delta].

x_lo / x_hi are the entrywise sample extremes and Delta = max(N, beta). Any
distribution in the eps-ball puts at most 1/Delta probability outside Omega;
escape_witness builds a ball member that reaches that bound, and
wasserstein_distance checks it with a transportation LP.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from backend import EQ, MINIMIZE, ProgramBuilder, SolverOptions, solve_lp
from errors import ModelError, NumericalInstabilityError
from models import BoxSet, SampleSet, intersect_boxes

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RefinedSet:
    omega: BoxSet
    xi_a: BoxSet
    delta: float
    guarantee: float
    sample_box: BoxSet


@dataclass(frozen=True, eq=False)
class EscapeWitness:
    points: np.ndarray
    weights: np.ndarray
    tight: bool
    escape_mass: float
    transport_cost: float
    sample_index: int | None = None
    coordinate: int | None = None
    direction: int = 0
    reason: str = ""


def guarantee_level(N: int, beta: float) -> float:
    if N < 1:
        raise ModelError(f"N: need at least one sample, got {N}")
    if not beta > 0:
        raise ModelError(f"beta: must be > 0, got {beta}")
    return 1.0 / max(N, beta)


def build_omega(support: BoxSet, samples: SampleSet, epsilon: float, beta: float) -> RefinedSet:
    if not beta > 0:
        raise ModelError(f"beta: must be > 0, got {beta}")
    if epsilon < 0:
        raise ModelError(f"epsilon: must be >= 0, got {epsilon}")
    if samples.dim != support.dim:
        raise ModelError(f"samples: expected {support.dim} columns, got {samples.dim}")
    if not all(support.contains(p) for p in samples.points):
        raise ModelError("samples: every sample must lie inside the support")
    delta = float(max(samples.N, beta))
    hull = samples.hull()
    shift = epsilon * delta
    xi_a = BoxSet(hull.lower - shift, hull.upper + shift)
    omega = intersect_boxes(support, xi_a)
    log.debug("[omega] Delta=%g shift=%g, %d of %d coordinates shrunk", delta, shift,
              int(np.sum((omega.lower > support.lower) | (omega.upper < support.upper))), support.dim)
    return RefinedSet(omega=omega, xi_a=xi_a, delta=delta, guarantee=1.0 / delta, sample_box=hull)


def _empirical(samples: SampleSet) -> tuple[np.ndarray, np.ndarray]:
    return samples.points.copy(), np.full(samples.N, 1.0 / samples.N)


def _moved(samples: SampleSet, index: int, coordinate: int, direction: int, distance: float, mass: float):
    points, weights = _empirical(samples)
    target = points[index].copy()
    target[coordinate] += direction * distance
    weights[index] -= mass
    keep = weights > 1e-15
    return np.vstack([points[keep], target]), np.append(weights[keep], mass)


def escape_witness(support: BoxSet, samples: SampleSet, epsilon: float, beta: float) -> EscapeWitness:
    """A ball member putting mass 1/Delta on the boundary of the inflated sample box.

    Directions are scanned by coordinate, upward before downward; the moved
    sample is the extreme one in that direction (lowest index on ties).
    """
    refined = build_omega(support, samples, epsilon, beta)
    mass = refined.guarantee
    shift = epsilon * refined.delta
    hull = refined.sample_box

    if epsilon == 0.0:
        points, weights = _empirical(samples)
        return EscapeWitness(points, weights, tight=False, escape_mass=0.0, transport_cost=0.0,
                             reason="zero radius: the witness is the empirical distribution")

    fallback = None
    for k in range(support.dim):
        for direction in (1, -1):
            if direction > 0:
                room = support.upper[k] - hull.upper[k]
                index = int(np.argmax(samples.points[:, k]))
            else:
                room = hull.lower[k] - support.lower[k]
                index = int(np.argmin(samples.points[:, k]))
            if room > shift:
                points, weights = _moved(samples, index, k, direction, shift, mass)
                return EscapeWitness(points, weights, tight=True, escape_mass=mass, transport_cost=mass * shift,
                                     sample_index=index, coordinate=k, direction=direction)
            if room > 0.0 and fallback is None:
                fallback = (index, k, direction, room)

    reason = "bound not tight here: the support does not extend beyond the inflated sample box"
    if fallback is None:
        points, weights = _empirical(samples)
        return EscapeWitness(points, weights, tight=False, escape_mass=0.0, transport_cost=0.0, reason=reason)
    index, k, direction, room = fallback
    points, weights = _moved(samples, index, k, direction, room, mass)
    return EscapeWitness(points, weights, tight=False, escape_mass=0.0, transport_cost=mass * room,
                         sample_index=index, coordinate=k, direction=direction, reason=reason)


def wasserstein_distance(points_a, weights_a, points_b, weights_b,
                         options: SolverOptions | None = None) -> float:
    """Exact 1-Wasserstein distance (1-norm ground cost) between two discrete distributions."""
    pa = np.atleast_2d(np.asarray(points_a, dtype=float))
    pb = np.atleast_2d(np.asarray(points_b, dtype=float))
    wa = np.asarray(weights_a, dtype=float)
    wb = np.asarray(weights_b, dtype=float)
    if pa.shape[1] != pb.shape[1]:
        raise ModelError("points: distributions live in different dimensions")
    if wa.size != pa.shape[0] or wb.size != pb.shape[0]:
        raise ModelError("weights: one weight per atom is required")
    if np.any(wa < 0) or np.any(wb < 0) or abs(wa.sum() - wb.sum()) > 1e-9:
        raise ModelError("weights: must be nonnegative with equal totals")

    cost = np.abs(pa[:, None, :] - pb[None, :, :]).sum(axis=2)
    na, nb = cost.shape
    builder = ProgramBuilder(MINIMIZE)
    plan = builder.add_variables(na * nb, cost=cost.ravel(), name="pi").reshape(na, nb)
    for i in range(na):
        builder.add_row(plan[i], 1.0, EQ, wa[i], name=f"out_{i}")
    for j in range(nb):
        builder.add_row(plan[:, j], 1.0, EQ, wb[j], name=f"in_{j}")
    result = solve_lp(builder.build(), options)
    if not result.optimal:
        raise NumericalInstabilityError(f"transport LP ended with status {result.status}")
    return result.objective
