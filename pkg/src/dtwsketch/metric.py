"""Finite metric spaces over dense integer point ids.

Every space exposes the same small surface: ``distance`` for a single pair,
``pairwise`` for vectorised lookups between two id arrays, and the summary
quantities ``min_dist``, ``diameter`` and ``aspect_ratio``.  Point ids are
always ``0 .. size-1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

REL_TOL = 1e-9


class MetricError(ValueError):
    """Raised for unknown points or degenerate spaces."""


class MetricSpace:
    """Base class.  Subclasses implement :meth:`pairwise`."""

    kind = "abstract"
    #: True when every distance is an integer, so DP sums stay exact in int64.
    integral = True

    def __init__(self, size: int):
        if size < 1:
            raise MetricError("empty point set")
        self.size = int(size)

    # -- lookups ---------------------------------------------------------
    def _check(self, ids):
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.size):
            bad = ids[(ids < 0) | (ids >= self.size)][0]
            raise MetricError(f"unknown point id {int(bad)} for {self.kind} of size {self.size}")
        return ids

    def pairwise(self, a, b) -> np.ndarray:
        raise NotImplementedError

    def distance(self, a: int, b: int):
        d = self.pairwise([a], [b])[0, 0]
        return int(d) if self.integral else float(d)

    def matrix(self) -> np.ndarray:
        ids = np.arange(self.size)
        return self.pairwise(ids, ids)

    # -- summaries -------------------------------------------------------
    @property
    def min_dist(self):
        if self.size < 2:
            return 0
        m = self.matrix()
        return m[m > 0].min() if (m > 0).any() else 0

    @property
    def diameter(self):
        return self.matrix().max() if self.size > 1 else 0

    @property
    def aspect_ratio(self) -> float:
        md = self.min_dist
        if md == 0:
            return math.inf if self.diameter > 0 else 1.0
        return float(self.diameter) / float(md)

    def normalize(self) -> "MetricSpace":
        """Return the space rescaled so that its smallest distance is 1."""
        if self.size < 2 or self.diameter == 0:
            raise MetricError("cannot normalize a single-point or zero-diameter space")
        md = self.min_dist
        if md == 1:
            return self
        return self._scaled(1.0 / float(md))

    def _scaled(self, factor: float) -> "MetricSpace":
        m = self.matrix() * factor
        return FiniteMatrix(m, metric=True)

    @property
    def is_normalized(self) -> bool:
        return self.size < 2 or math.isclose(float(self.min_dist), 1.0, rel_tol=REL_TOL)

    def header(self) -> str:
        return f"{self.kind} {self.size}"

    def __repr__(self):
        return f"<{type(self).__name__} {self.header()}>"


class IntegerLine(MetricSpace):
    """Points ``0..size-1`` on the integer line, ``d(a, b) = |a - b|``."""

    kind = "line"

    def pairwise(self, a, b):
        a, b = self._check(a), self._check(b)
        return np.abs(a[:, None] - b[None, :])

    @property
    def min_dist(self):
        return 1 if self.size > 1 else 0

    @property
    def diameter(self):
        return self.size - 1


class GeneralizedHamming(MetricSpace):
    """Uniform metric: distance 1 between any two distinct points."""

    kind = "hamming"

    def pairwise(self, a, b):
        a, b = self._check(a), self._check(b)
        return (a[:, None] != b[None, :]).astype(np.int64)

    @property
    def min_dist(self):
        return 1 if self.size > 1 else 0

    @property
    def diameter(self):
        return 1 if self.size > 1 else 0


class LpGrid(MetricSpace):
    """The integer cube ``{0..side-1}^dim`` under the l_p norm.

    Ids are mixed-radix encodings of coordinates, first coordinate most
    significant.
    """

    kind = "grid"

    def __init__(self, side: int, dim: int, p: float = 1.0):
        if p < 1:
            raise MetricError("l_p grids need p >= 1")
        if side < 1 or dim < 1:
            raise MetricError("empty point set")
        super().__init__(side ** dim)
        self.side, self.dim, self.p = int(side), int(dim), float(p)
        self.integral = self.p == 1.0 or dim == 1 or math.isinf(self.p)

    def coords(self, ids) -> np.ndarray:
        ids = self._check(ids)
        out = np.empty(ids.shape + (self.dim,), dtype=np.int64)
        rest = ids.copy()
        for k in range(self.dim - 1, -1, -1):
            out[..., k] = rest % self.side
            rest //= self.side
        return out

    def point(self, coords) -> int:
        pid = 0
        for c in coords:
            if not 0 <= c < self.side:
                raise MetricError(f"coordinate {c} outside grid side {self.side}")
            pid = pid * self.side + int(c)
        return pid

    def pairwise(self, a, b):
        ca, cb = self.coords(a), self.coords(b)
        diff = np.abs(ca[:, None, :] - cb[None, :, :])
        if self.p == 1.0 or self.dim == 1:
            return diff.sum(axis=-1)
        if math.isinf(self.p):
            return diff.max(axis=-1)
        return (diff.astype(np.float64) ** self.p).sum(axis=-1) ** (1.0 / self.p)

    @property
    def min_dist(self):
        return 1 if self.size > 1 else 0

    @property
    def diameter(self):
        if self.size < 2:
            return 0
        full = np.full(self.dim, self.side - 1, dtype=np.float64)
        if self.p == 1.0 or self.dim == 1:
            return int(full.sum())
        if math.isinf(self.p):
            return self.side - 1
        return float((full ** self.p).sum() ** (1.0 / self.p))

    def header(self):
        return f"{self.kind} {self.side} {self.dim} {self.p:g}"


class FiniteMatrix(MetricSpace):
    """Explicit symmetric distance matrix.

    ``metric=False`` marks a two-point distance function that need not obey
    the triangle inequality; such spaces are only used by lower-bound
    gadgets.
    """

    kind = "matrix"

    def __init__(self, matrix, metric: bool = True):
        m = np.asarray(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise MetricError("distance matrix must be square")
        super().__init__(m.shape[0])
        self.integral = bool(np.all(m == np.round(m)))
        self._m = m.astype(np.int64) if self.integral else m
        self.metric = metric

    @classmethod
    def from_lower_triangle(cls, rows, metric=True):
        n = len(rows)
        m = np.zeros((n, n))
        for i, row in enumerate(rows):
            if len(row) != i + 1:
                raise MetricError(f"row {i} of lower triangle has {len(row)} entries, expected {i + 1}")
            for j, v in enumerate(row):
                m[i, j] = m[j, i] = v
        return cls(m, metric=metric)

    def pairwise(self, a, b):
        a, b = self._check(a), self._check(b)
        return self._m[np.ix_(a, b)]

    def matrix(self):
        return self._m

    def _scaled(self, factor):
        return FiniteMatrix(self._m * factor, metric=self.metric)

    def header(self):
        return f"{self.kind} {self.size}" + ("" if self.metric else " nonmetric")


@dataclass
class ValidationReport:
    ok: bool
    aspect_ratio: float
    size: int
    violations: list = field(default_factory=list)
    poly_bounded: bool | None = None

    def __str__(self):
        lines = [f"ok={self.ok} size={self.size} aspect_ratio={self.aspect_ratio:g}"]
        if self.poly_bounded is not None:
            lines.append(f"poly_bounded={self.poly_bounded}")
        lines.extend(self.violations)
        return "\n".join(lines)


def validate(space: MetricSpace, n: int | None = None, poly_degree: float = 3.0,
             max_triangle_points: int = 256) -> ValidationReport:
    """Check the metric axioms and report the aspect ratio.

    Violations are collected, never raised.  When ``n`` is given, the report
    also says whether both size and aspect ratio are at most ``n**poly_degree``.
    """
    violations = []
    m = np.asarray(space.matrix(), dtype=np.float64)
    tol = REL_TOL * max(1.0, float(np.abs(m).max(initial=0.0)))
    if np.any(np.abs(np.diag(m)) > tol):
        i = int(np.argmax(np.abs(np.diag(m)) > tol))
        violations.append(f"nonzero diagonal at {i}: {m[i, i]:g}")
    asym = np.argwhere(np.abs(m - m.T) > tol)
    for i, j in asym[asym[:, 0] < asym[:, 1]][:10]:
        violations.append(f"symmetry violated: d({i},{j})={m[i, j]:g} != d({j},{i})={m[j, i]:g}")
    neg = np.argwhere(m < -tol)
    for i, j in neg[:10]:
        violations.append(f"negative distance d({i},{j})={m[i, j]:g}")
    off = m + np.eye(space.size)
    zero = np.argwhere(off <= tol)
    for i, j in zero[zero[:, 0] < zero[:, 1]][:10]:
        violations.append(f"distinct points at distance zero: d({i},{j})")
    if getattr(space, "metric", True) and space.size <= max_triangle_points:
        # d(i,k) <= d(i,j) + d(j,k) for every j, vectorised over i, k
        for j in range(space.size):
            slack = m[:, j][:, None] + m[j, :][None, :] - m
            bad = np.argwhere(slack < -tol * 3)
            if len(bad):
                i, k = bad[0]
                violations.append(
                    f"triangle violated: d({i},{k})={m[i, k]:g} > d({i},{j})+d({j},{k})"
                    f"={m[i, j] + m[j, k]:g}")
                if len(violations) > 20:
                    break
    ar = space.aspect_ratio if not violations else _aspect(m)
    poly = None
    if n is not None:
        bound = float(n) ** poly_degree
        poly = space.size <= bound and ar <= bound
    return ValidationReport(ok=not violations, aspect_ratio=ar, size=space.size,
                            violations=violations, poly_bounded=poly)


def _aspect(m):
    pos = m[m > 0]
    return float(m.max() / pos.min()) if pos.size else 1.0
