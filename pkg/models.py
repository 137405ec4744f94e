"""
Data model for two-stage distributionally robust LPs.

All types are immutable after construction: arrays are copied, validated in
__post_init__ (errors name the offending field) and made read-only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

import config
from errors import EmptyIntersectionError, ModelError, SampleOutsideSupportError, VertexCapError

SUPPORT_TOL = 1e-9


def _vector(value, name: str, length: int | None = None) -> np.ndarray:
    array = np.array(value, dtype=float)
    if array.ndim == 0:
        array = array.reshape(1)
    if array.ndim != 1:
        raise ModelError(f"{name}: expected a vector, got shape {array.shape}")
    if length is not None and array.size != length:
        raise ModelError(f"{name}: expected length {length}, got {array.size}")
    if not np.all(np.isfinite(array)):
        raise ModelError(f"{name}: non-finite entry")
    array.setflags(write=False)
    return array


def _matrix(value, name: str, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    array = np.array(value, dtype=float)
    if array.size == 0 and array.ndim != 2:
        array = array.reshape(rows or 0, cols or 0)
    if array.ndim != 2:
        raise ModelError(f"{name}: expected a matrix, got shape {array.shape}")
    if rows is not None and array.shape[0] != rows:
        raise ModelError(f"{name}: expected {rows} rows, got {array.shape[0]}")
    if cols is not None and array.shape[1] != cols:
        raise ModelError(f"{name}: expected {cols} columns, got {array.shape[1]}")
    if not np.all(np.isfinite(array)):
        raise ModelError(f"{name}: non-finite entry")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class BoxSet:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = _vector(self.lower, "lower")
        upper = _vector(self.upper, "upper", lower.size)
        bad = np.flatnonzero(lower > upper)
        if bad.size:
            j = int(bad[0])
            raise ModelError(f"upper: coordinate {j} has lower {lower[j]} > upper {upper[j]}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BoxSet):
            return NotImplemented
        return np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper)

    __hash__ = None

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def free_coordinates(self) -> np.ndarray:
        return np.flatnonzero(self.lower < self.upper)

    @property
    def vertex_count(self) -> int:
        return 2 ** int(self.free_coordinates.size)

    def contains(self, point, tol: float = SUPPORT_TOL) -> bool:
        point = np.asarray(point, dtype=float)
        return bool(np.all(point >= self.lower - tol) and np.all(point <= self.upper + tol))

    def contains_box(self, other: "BoxSet", tol: float = SUPPORT_TOL) -> bool:
        return bool(np.all(other.lower >= self.lower - tol) and np.all(other.upper <= self.upper + tol))

    def clip(self, points) -> np.ndarray:
        return np.clip(np.asarray(points, dtype=float), self.lower, self.upper)

    def all_lower(self) -> np.ndarray:
        return self.lower.copy()


def box_vertices(box: BoxSet, cap: int | None = None):
    """Iterate the 2^k vertices of ``box`` (k = non-degenerate coordinates).

    The first vertex is the all-lower one; the first free coordinate is the
    most significant bit. Raises VertexCapError up front when 2^k > cap.
    """
    cap = config.MAX_VERTICES if cap is None else cap
    free = box.free_coordinates
    if 2 ** free.size > cap:
        raise VertexCapError(
            f"{2 ** free.size} vertices exceed the enumeration cap {cap}; use an implicit method"
        )

    def generate():
        for bits in itertools.product((False, True), repeat=free.size):
            vertex = box.lower.copy()
            chosen = free[np.array(bits, dtype=bool)]
            vertex[chosen] = box.upper[chosen]
            yield vertex

    return generate()


def vertex_key(vertex) -> tuple:
    return tuple(float(v) for v in vertex)


def intersect_boxes(b1: BoxSet, b2: BoxSet) -> BoxSet:
    if b1.dim != b2.dim:
        raise ModelError(f"box: dimension {b1.dim} does not match {b2.dim}")
    lower = np.maximum(b1.lower, b2.lower)
    upper = np.minimum(b1.upper, b2.upper)
    bad = np.flatnonzero(lower > upper)
    if bad.size:
        j = int(bad[0])
        raise EmptyIntersectionError(f"box intersection is empty at coordinate {j}: [{lower[j]}, {upper[j]}]")
    return BoxSet(lower, upper)


@dataclass(frozen=True, eq=False)
class SampleSet:
    """N historical samples of the uncertainty, one row each.

    When ``support`` is given every point must lie in it (use ``ingest`` with
    clamp=True to project dirty data instead).
    """

    points: np.ndarray
    support: BoxSet | None = None

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(1, -1)
        if points.ndim != 2 or points.shape[0] < 1:
            raise ModelError("samples: need at least one sample row")
        if not np.all(np.isfinite(points)):
            raise ModelError("samples: non-finite entry")
        if self.support is not None:
            _check_inside(points, self.support)
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    @classmethod
    def ingest(cls, points, support: BoxSet, clamp: bool = False) -> "SampleSet":
        points = np.atleast_2d(np.array(points, dtype=float))
        if clamp and points.shape[1] == support.dim:
            points = support.clip(points)
        return cls(points, support)

    @property
    def N(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def hull(self) -> BoxSet:
        return BoxSet(self.points.min(axis=0), self.points.max(axis=0))

    def subset(self, indices) -> "SampleSet":
        return SampleSet(self.points[np.asarray(indices, dtype=int)], self.support)

    def concat(self, other: "SampleSet") -> "SampleSet":
        return SampleSet(np.vstack([self.points, other.points]), self.support)


def _check_inside(points: np.ndarray, support: BoxSet) -> None:
    if points.shape[1] != support.dim:
        raise ModelError(f"samples: expected {support.dim} columns, got {points.shape[1]}")
    outside = (points < support.lower - SUPPORT_TOL) | (points > support.upper + SUPPORT_TOL)
    if outside.any():
        i, j = (int(v) for v in np.argwhere(outside)[0])
        raise SampleOutsideSupportError(
            f"sample {i}, coordinate {j}: value {points[i, j]} outside "
            f"[{support.lower[j]}, {support.upper[j]}]",
            sample=i, coordinate=j,
        )


def sample_mean(samples: SampleSet) -> np.ndarray:
    """Entrywise mean, kept inside the sample hull against rounding."""
    points = samples.points
    return np.clip(points.mean(axis=0), points.min(axis=0), points.max(axis=0))


@dataclass(frozen=True, eq=False)
class FirstStageSpace:
    """x1 = (binary part, continuous part) with rows G x1 <= g."""

    n_binary: int
    n_continuous: int
    G: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        if self.n_binary < 1:
            raise ModelError("n_binary: at least one binary first-stage variable is required")
        if self.n_continuous < 0:
            raise ModelError("n_continuous: must be >= 0")
        width = self.n_binary + self.n_continuous
        G = _matrix(self.G, "G", cols=width)
        g = _vector(self.g, "g", G.shape[0]) if G.shape[0] else _vector(np.zeros(0), "g")
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "g", g)

    @property
    def n1(self) -> int:
        return self.n_binary + self.n_continuous

    def contains(self, x, tol: float = 1e-6) -> bool:
        x = np.asarray(x, dtype=float)
        binary = x[:self.n_binary]
        if np.any(np.abs(binary - np.round(binary)) > tol) or np.any(binary < -tol) or np.any(binary > 1 + tol):
            return False
        return bool(np.all(self.G @ x <= self.g + tol * np.maximum(1.0, np.abs(self.g))))


@dataclass(frozen=True, eq=False)
class RecourseData:
    """Second-stage rows  A1 x1 + A2 x2 + A3 xi <= b."""

    A1: np.ndarray
    A2: np.ndarray
    A3: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        b = _vector(self.b, "b")
        L = b.size
        object.__setattr__(self, "A1", _matrix(self.A1, "A1", rows=L))
        object.__setattr__(self, "A2", _matrix(self.A2, "A2", rows=L))
        object.__setattr__(self, "A3", _matrix(self.A3, "A3", rows=L))
        object.__setattr__(self, "b", b)

    @property
    def L(self) -> int:
        return self.b.size

    @property
    def n2(self) -> int:
        return self.A2.shape[1]

    @property
    def m(self) -> int:
        return self.A3.shape[1]

    def row_scale(self) -> np.ndarray:
        biggest = np.hstack([np.abs(self.A1), np.abs(self.A2), np.abs(self.A3)]).max(axis=1, initial=0.0)
        return np.where(biggest > 0.0, 1.0 / np.where(biggest > 0.0, biggest, 1.0), 1.0)

    def normalized(self) -> "RecourseData":
        """Rows scaled to unit max-abs coefficient (same feasible set)."""
        s = self.row_scale()[:, None]
        return RecourseData(self.A1 * s, self.A2 * s, self.A3 * s, self.b * s[:, 0])


@dataclass(frozen=True, eq=False)
class Instance:
    c1: np.ndarray
    c2: np.ndarray
    first_stage: FirstStageSpace
    recourse: RecourseData
    support: BoxSet
    samples: SampleSet
    epsilon: float

    def __post_init__(self):
        n1 = self.first_stage.n1
        object.__setattr__(self, "c1", _vector(self.c1, "c1", n1))
        if self.recourse.A1.shape[1] != n1:
            raise ModelError(f"A1: expected {n1} columns (first-stage width), got {self.recourse.A1.shape[1]}")
        object.__setattr__(self, "c2", _vector(self.c2, "c2", self.recourse.n2))
        if self.recourse.m != self.support.dim:
            raise ModelError(f"A3: expected {self.support.dim} columns (support dimension), got {self.recourse.m}")
        if self.samples.dim != self.support.dim:
            raise ModelError(f"samples: expected {self.support.dim} columns, got {self.samples.dim}")
        _check_inside(self.samples.points, self.support)
        epsilon = float(self.epsilon)
        if not np.isfinite(epsilon) or epsilon < 0.0:
            raise ModelError(f"epsilon: must be a finite value >= 0, got {self.epsilon}")
        object.__setattr__(self, "epsilon", epsilon)

    @property
    def n1(self) -> int:
        return self.first_stage.n1

    @property
    def n2(self) -> int:
        return self.recourse.n2

    @property
    def m(self) -> int:
        return self.support.dim

    @property
    def L(self) -> int:
        return self.recourse.L

    @property
    def N(self) -> int:
        return self.samples.N

    @cached_property
    def xi_mean(self) -> np.ndarray:
        return sample_mean(self.samples)

    def with_samples(self, samples: SampleSet) -> "Instance":
        return replace(self, samples=samples)

    def with_epsilon(self, epsilon: float) -> "Instance":
        return replace(self, epsilon=epsilon)

    def normalized(self) -> "Instance":
        return replace(self, recourse=self.recourse.normalized())


@dataclass(frozen=True, eq=False)
class FirstStageDecision:
    binary: np.ndarray
    continuous: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "binary", np.round(_vector(self.binary, "binary")))
        object.__setattr__(self, "continuous", _vector(self.continuous, "continuous"))

    @classmethod
    def from_vector(cls, x, n_binary: int) -> "FirstStageDecision":
        x = np.asarray(x, dtype=float)
        return cls(x[:n_binary], x[n_binary:])

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.binary, self.continuous])


@dataclass(frozen=True, eq=False)
class AffinePolicy:
    """x2(xi) = A xi + a."""

    A: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        a = _vector(self.a, "a")
        object.__setattr__(self, "A", _matrix(self.A, "A", rows=a.size))
        object.__setattr__(self, "a", a)

    @property
    def n2(self) -> int:
        return self.a.size

    @property
    def m(self) -> int:
        return self.A.shape[1]

    def evaluate(self, xi) -> np.ndarray:
        return self.A @ np.asarray(xi, dtype=float) + self.a

    def direction(self, c2) -> np.ndarray:
        """A^T c2: the sensitivity of the affine cost to xi."""
        return self.A.T @ np.asarray(c2, dtype=float)


@dataclass(frozen=True, eq=False)
class PolicyStructure:
    """Linear map from parameters theta to the n2*(m+1) entries of (A, a).

    Entry index of A[r, j] is r*(m+1) + j; the intercept a[r] is r*(m+1) + m.
    Entries without terms are fixed at zero.
    """

    n2: int
    m: int
    parameter_count: int
    terms: tuple

    def __post_init__(self):
        size = self.n2 * (self.m + 1)
        terms = tuple((int(e), int(p), float(c)) for e, p, c in self.terms)
        for entry, param, coef in terms:
            if not 0 <= entry < size:
                raise ModelError(f"terms: entry {entry} outside the {size} policy entries")
            if not 0 <= param < self.parameter_count:
                raise ModelError(f"terms: parameter {param} outside 0..{self.parameter_count - 1}")
            if not np.isfinite(coef):
                raise ModelError(f"terms: non-finite coefficient for entry {entry}")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def identity(cls, n2: int, m: int) -> "PolicyStructure":
        size = n2 * (m + 1)
        return cls(n2, m, size, tuple((k, k, 1.0) for k in range(size)))

    @classmethod
    def static(cls, n2: int, m: int) -> "PolicyStructure":
        """Only intercepts are free: A = 0."""
        return cls(n2, m, n2, tuple((r * (m + 1) + m, r, 1.0) for r in range(n2)))

    def entry(self, row: int, col: int) -> int:
        return row * (self.m + 1) + col

    @cached_property
    def entry_matrix(self) -> np.ndarray:
        matrix = np.zeros((self.n2 * (self.m + 1), self.parameter_count))
        for entry, param, coef in self.terms:
            matrix[entry, param] += coef
        matrix.setflags(write=False)
        return matrix

    @cached_property
    def fixed_zero(self) -> np.ndarray:
        return ~np.any(self.entry_matrix != 0.0, axis=1)

    def assemble(self, theta) -> AffinePolicy:
        theta = np.asarray(theta, dtype=float)
        if theta.size != self.parameter_count:
            raise ModelError(f"theta: expected {self.parameter_count} parameters, got {theta.size}")
        full = (self.entry_matrix @ theta).reshape(self.n2, self.m + 1)
        return AffinePolicy(full[:, :self.m], full[:, self.m])

    def check(self, instance: Instance) -> None:
        if self.n2 != instance.n2 or self.m != instance.m:
            raise ModelError(
                f"policy_structure: built for n2={self.n2}, m={self.m} but the instance has "
                f"n2={instance.n2}, m={instance.m}"
            )
