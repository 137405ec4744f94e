"""
Seeded generators for experiments and tests.

draw_scenarios stands in for fitted forecast-error data: each free coordinate
follows a two-normal mixture truncated to the support box. random_instance
builds small two-stage problems that admit an affine policy by construction.
"""

from __future__ import annotations

import numpy as np

from errors import ModelError
from models import BoxSet, FirstStageSpace, Instance, RecourseData, SampleSet

_REDRAWS = 50


def rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def draw_scenarios(support: BoxSet, n: int, seed=None, skew: float = 0.0, spread: float = 0.25) -> SampleSet:
    """n points from a truncated two-normal mixture on ``support``.

    Per coordinate the components sit at center -/+ half_span/2 with standard
    deviation spread*half_span; skew in [-1, 1] moves weight to the upper
    component. Values outside the box are redrawn, then clipped.
    """
    if n < 1:
        raise ModelError("n: need at least one scenario")
    if not -1.0 <= skew <= 1.0:
        raise ModelError(f"skew: must lie in [-1, 1], got {skew}")
    if spread <= 0:
        raise ModelError(f"spread: must be > 0, got {spread}")
    rng = rng_from(seed)
    center = 0.5 * (support.lower + support.upper)
    half = 0.5 * support.span
    upper_weight = float(np.clip(0.5 * (1.0 + skew), 0.05, 0.95))

    def draw(shape):
        pick = rng.random(shape) < upper_weight
        means = np.where(pick, center + 0.5 * half, center - 0.5 * half)
        return rng.normal(means, spread * np.maximum(half, 1e-300))

    points = draw((n, support.dim))
    for _ in range(_REDRAWS):
        outside = (points < support.lower) | (points > support.upper)
        if not outside.any():
            break
        points = np.where(outside, draw((n, support.dim)), points)
    points = support.clip(points)
    points[:, half == 0.0] = center[half == 0.0]
    return SampleSet(points, support)


def _worst_row_value(A1, A2, A3, x1, A, a, box: BoxSet) -> np.ndarray:
    g = A2 @ A + A3
    return A1 @ x1 + A2 @ a + np.maximum(g * box.upper, g * box.lower).sum(axis=1)


def random_instance(seed=None, m: int = 2, n2: int = 2, L: int = 3, n_binary: int = 1, n_continuous: int = 0,
                    N: int = 5, epsilon: float = 0.1, margin: tuple = (0.05, 0.5)) -> Instance:
    """A random instance whose affine-policy problem is feasible.

    A reference first stage and affine policy are drawn first and b is set so
    that every recourse row holds with a random margin at every support
    vertex. Two extra rows per second-stage variable box the recourse, so the
    recourse cost is always finite.
    """
    rng = rng_from(seed)
    lower = np.round(rng.uniform(-1.0, 0.0, m), 3)
    upper = np.round(lower + rng.uniform(0.5, 2.0, m), 3)
    support = BoxSet(lower, upper)
    n1 = n_binary + n_continuous

    if n_continuous:
        G = np.zeros((2 * n_continuous, n1))
        for k in range(n_continuous):
            G[2 * k, n_binary + k] = 1.0
            G[2 * k + 1, n_binary + k] = -1.0
        g = np.full(2 * n_continuous, 5.0)
    else:
        G, g = np.zeros((0, n1)), np.zeros(0)
    first_stage = FirstStageSpace(n_binary, n_continuous, G, g)

    x1_ref = np.concatenate([rng.integers(0, 2, n_binary), rng.uniform(-1.0, 1.0, n_continuous)]).astype(float)
    A_ref = rng.uniform(-1.0, 1.0, (n2, m))
    a_ref = rng.uniform(-1.0, 1.0, n2)

    A1 = np.round(rng.uniform(-1.0, 1.0, (L, n1)), 3)
    A2 = np.round(rng.uniform(-1.0, 1.0, (L, n2)), 3)
    A3 = np.round(rng.uniform(-1.0, 1.0, (L, m)), 3)
    b = _worst_row_value(A1, A2, A3, x1_ref, A_ref, a_ref, support) + rng.uniform(*margin, L)

    # |x2_r| <= cap_r
    eye = np.eye(n2)
    cap = np.abs(A_ref).dot(np.maximum(np.abs(lower), np.abs(upper))) + np.abs(a_ref) + 1.0
    A1 = np.vstack([A1, np.zeros((2 * n2, n1))])
    A2 = np.vstack([A2, eye, -eye])
    A3 = np.vstack([A3, np.zeros((2 * n2, m))])
    b = np.concatenate([b, cap, cap])

    c1 = np.round(rng.uniform(0.5, 2.0, n1), 3)
    c2 = np.round(rng.uniform(-1.0, 1.0, n2), 3)
    samples = draw_scenarios(support, N, rng)
    return Instance(c1, c2, first_stage, RecourseData(A1, A2, A3, b), support, samples, epsilon)


def random_family(m: int = 3, n2: int = 3, L: int = 4, epsilon: float = 0.05, seed: int = 0):
    """Instance family for scaling runs: fixed problem data, N fresh samples per call."""
    base = random_instance(seed, m=m, n2=n2, L=L, N=1, epsilon=epsilon)

    def family(N: int, rng: np.random.Generator):
        return base.with_samples(draw_scenarios(base.support, N, rng)), None

    return family
