"""Sequences, runs, and exact DTW / DTW_0 / edit-distance oracles.

The quadratic dynamic programs run under numba.  Letters are point ids of a
:class:`~dtwsketch.metric.MetricSpace`; before a DP the distinct letters of
each side are gathered so the kernel only sees a small ``|ux| x |uy|``
distance table.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numba as nb
import numpy as np

from .metric import MetricSpace

TRACEBACK_MAX_CELLS = 4_000_000
BRUTE_MAX_TOTAL = 14


class SequenceError(ValueError):
    pass


class CorruptionError(ValueError):
    """A heavy-hitter list does not fit the run structure it is applied to."""


class Sequence:
    """An immutable string of point ids over a metric space."""

    __slots__ = ("letters", "space")

    def __init__(self, letters, space: MetricSpace, check: bool = True):
        arr = np.array(letters, dtype=np.int64).reshape(-1)
        if check and arr.size and (arr.min() < 0 or arr.max() >= space.size):
            raise SequenceError(f"letter outside the {space.kind} space of size {space.size}")
        arr.flags.writeable = False
        self.letters = arr
        self.space = space

    def __len__(self):
        return self.letters.size

    def __iter__(self):
        return iter(self.letters.tolist())

    def __getitem__(self, item):
        if isinstance(item, slice):
            return Sequence(self.letters[item], self.space, check=False)
        return int(self.letters[item])

    def __eq__(self, other):
        if not isinstance(other, Sequence):
            return NotImplemented
        return np.array_equal(self.letters, other.letters)

    def __hash__(self):
        return hash(self.letters.tobytes())

    def __repr__(self):
        body = " ".join(map(str, self.letters[:20].tolist()))
        more = " ..." if len(self) > 20 else ""
        return f"Sequence([{body}{more}], n={len(self)})"

    def with_letters(self, letters) -> "Sequence":
        return Sequence(letters, self.space, check=False)


class Run(NamedTuple):
    letter: int
    start: int
    length: int


@dataclass(frozen=True)
class Correspondence:
    xbar: np.ndarray
    ybar: np.ndarray
    cost: float

    def __len__(self):
        return len(self.xbar)

    def validate(self, x: Sequence, y: Sequence) -> list[str]:
        problems = []
        if len(self.xbar) != len(self.ybar):
            problems.append("expansions differ in length")
        if not is_expansion(self.xbar, x.letters):
            problems.append("xbar is not an expansion of x")
        if not is_expansion(self.ybar, y.letters):
            problems.append("ybar is not an expansion of y")
        if not problems:
            d = np.diagonal(x.space.pairwise(self.xbar, self.ybar)) if len(self.xbar) else []
            if not np.isclose(float(np.sum(d)), float(self.cost), rtol=1e-9, atol=0):
                problems.append(f"recorded cost {self.cost} != summed cost {float(np.sum(d))}")
        return problems


# ---------------------------------------------------------------------------
# runs and run-collapsing transforms


def run_arrays(letters) -> tuple[np.ndarray, np.ndarray]:
    """Return (run letters, run lengths) of an id array."""
    a = np.asarray(letters, dtype=np.int64)
    if a.size == 0:
        return a.copy(), np.zeros(0, dtype=np.int64)
    starts = np.flatnonzero(np.r_[True, a[1:] != a[:-1]])
    lengths = np.diff(np.r_[starts, a.size])
    return a[starts], lengths


def runs(x: Sequence) -> list[Run]:
    vals, lens = run_arrays(x.letters)
    starts = np.r_[0, np.cumsum(lens)[:-1]] if lens.size else lens
    return [Run(int(v), int(s), int(k)) for v, s, k in zip(vals, starts, lens)]


def is_run_free(letters) -> bool:
    a = np.asarray(letters)
    return bool(np.all(a[1:] != a[:-1]))


def is_expansion(xbar, x) -> bool:
    vb, lb = run_arrays(xbar)
    vx, lx = run_arrays(x)
    return vb.shape == vx.shape and np.array_equal(vb, vx) and bool(np.all(lb >= lx))


def collapse(x: Sequence) -> Sequence:
    """Shrink every run to a single letter."""
    return x.with_letters(run_arrays(x.letters)[0])


def collapse_light(x: Sequence, alpha: int) -> Sequence:
    """Shrink runs shorter than ``alpha`` to one letter; keep heavy runs intact."""
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    vals, lens = run_arrays(x.letters)
    keep = np.where(lens >= alpha, lens, 1)
    return x.with_letters(np.repeat(vals, keep))


def heavy_hitter_list(x: Sequence, alpha: int) -> list[tuple[int, int]]:
    """``(run index, run length)`` for every run of length at least ``alpha``."""
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    _, lens = run_arrays(x.letters)
    idx = np.flatnonzero(lens >= alpha)
    return [(int(i), int(lens[i])) for i in idx]


def reconstruct_light(x2: Sequence, heavy: list[tuple[int, int]]) -> Sequence:
    """Invert the collapse given the heavy-hitter list."""
    counts = np.ones(len(x2), dtype=np.int64)
    last = -1
    for i, length in heavy:
        if not 0 <= i < len(x2) or i <= last or length < 1:
            raise CorruptionError(f"heavy-hitter entry ({i}, {length}) invalid for {len(x2)} runs")
        counts[i] = length
        last = i
    return x2.with_letters(np.repeat(x2.letters, counts))


# ---------------------------------------------------------------------------
# numba kernels


@nb.njit(cache=True)
def _dtw_value(xi, yi, table):
    n, m = xi.size, yi.size
    prev = np.empty(m, dtype=table.dtype)
    cur = np.empty(m, dtype=table.dtype)
    row = table[xi[0]]
    prev[0] = row[yi[0]]
    for j in range(1, m):
        prev[j] = prev[j - 1] + row[yi[j]]
    for i in range(1, n):
        row = table[xi[i]]
        cur[0] = prev[0] + row[yi[0]]
        for j in range(1, m):
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = best + row[yi[j]]
        prev, cur = cur, prev
    return prev[m - 1]


@nb.njit(cache=True)
def _dtw_full(xi, yi, table):
    n, m = xi.size, yi.size
    acc = np.empty((n, m), dtype=table.dtype)
    acc[0, 0] = table[xi[0], yi[0]]
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + table[xi[0], yi[j]]
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + table[xi[i], yi[0]]
        for j in range(1, m):
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = best + table[xi[i], yi[j]]
    return acc


@nb.njit(cache=True)
def _traceback(acc):
    n, m = acc.shape
    pi = np.empty(n + m, dtype=np.int64)
    pj = np.empty(n + m, dtype=np.int64)
    i, j, k = n - 1, m - 1, 0
    pi[0], pj[0] = i, j
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            d, u, l = acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
            # ties: diagonal, then vertical, then horizontal
            if d <= u and d <= l:
                i -= 1
                j -= 1
            elif u <= l:
                i -= 1
            else:
                j -= 1
        k += 1
        pi[k], pj[k] = i, j
    return pi[: k + 1][::-1].copy(), pj[: k + 1][::-1].copy()


@nb.njit(cache=True)
def _edit_distance(a, b):
    n, m = a.size, b.size
    prev = np.arange(m + 1)
    cur = np.empty(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            sub = prev[j - 1] + (0 if ai == b[j - 1] else 1)
            ins = cur[j - 1] + 1
            dele = prev[j] + 1
            best = sub
            if ins < best:
                best = ins
            if dele < best:
                best = dele
            cur[j] = best
        prev, cur = cur, prev
    return prev[m]


@nb.njit(cache=True)
def _brute(xi, yi, table, max_len, bound):
    # Depth-first enumeration of equal-length expansion pairs.  A state is the
    # last aligned pair (i, j) plus the length so far; the next aligned pair
    # extends x only, y only, or both.  Duplicating both letters at once only
    # adds a non-negative term, so that move is dominated and skipped.
    n, m = xi.size, yi.size
    best = bound
    cap = n * m * 3 + 8
    si = np.empty(cap, dtype=np.int64)
    sj = np.empty(cap, dtype=np.int64)
    sl = np.empty(cap, dtype=np.int64)
    sc = np.empty(cap, dtype=table.dtype)
    top = 0
    si[0], sj[0], sl[0], sc[0] = 0, 0, 1, table[xi[0], yi[0]]
    top = 1
    while top > 0:
        top -= 1
        i, j, length, cost = si[top], sj[top], sl[top], sc[top]
        if cost >= best:
            continue
        if i == n - 1 and j == m - 1:
            best = cost
            continue
        if length >= max_len:
            continue
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            a, b = i + di, j + dj
            if a < n and b < m:
                si[top], sj[top], sl[top] = a, b, length + 1
                sc[top] = cost + table[xi[a], yi[b]]
                top += 1
    return best


# ---------------------------------------------------------------------------
# public oracles


def _tables(x: Sequence, y: Sequence, zero_one: bool = False):
    ux, xi = np.unique(x.letters, return_inverse=True)
    uy, yi = np.unique(y.letters, return_inverse=True)
    if zero_one:
        table = (ux[:, None] != uy[None, :]).astype(np.int64)
    else:
        table = np.asarray(x.space.pairwise(ux, uy))
        table = table.astype(np.int64) if x.space.integral else table.astype(np.float64)
    return xi.astype(np.int64), yi.astype(np.int64), np.ascontiguousarray(table)


def _check_pair(x: Sequence, y: Sequence):
    if len(x) == 0 or len(y) == 0:
        raise SequenceError("DTW needs non-empty sequences")
    if x.space is not y.space and x.space.size != y.space.size:
        raise SequenceError("sequences live in different spaces")


def _scalar(v, integral):
    return int(v) if integral else float(v)


def dtw(x: Sequence, y: Sequence):
    """Exact dynamic time warping distance."""
    _check_pair(x, y)
    xi, yi, table = _tables(x, y)
    if xi.size < yi.size:
        xi, yi, table = yi, xi, np.ascontiguousarray(table.T)
    return _scalar(_dtw_value(xi, yi, table), x.space.integral)


def dtw0(x: Sequence, y: Sequence) -> int:
    """DTW under the 0/1 distance, whatever the sequences' native space."""
    _check_pair(x, y)
    xi, yi, table = _tables(x, y, zero_one=True)
    if xi.size < yi.size:
        xi, yi, table = yi, xi, np.ascontiguousarray(table.T)
    return int(_dtw_value(xi, yi, table))


def edit_distance(x, y) -> int:
    """Unit-cost Levenshtein distance; letters compared by id.  Empty input allowed."""
    a = np.asarray(getattr(x, "letters", x), dtype=np.int64)
    b = np.asarray(getattr(y, "letters", y), dtype=np.int64)
    return int(_edit_distance(a, b))


def dtw_brute(x: Sequence, y: Sequence, max_len: int | None = None):
    """Minimum cost over all pairs of equal-length expansions, by enumeration.

    Independent of the DP: it walks every correspondence of length at most
    ``max_len`` (default ``|x| + |y|``) and prunes only on partial cost.
    """
    _check_pair(x, y)
    if len(x) + len(y) > BRUTE_MAX_TOTAL:
        raise ValueError(f"dtw_brute refuses |x|+|y| = {len(x) + len(y)} > {BRUTE_MAX_TOTAL}")
    if max_len is None:
        max_len = len(x) + len(y)
    xi, yi, table = _tables(x, y)
    bound = np.inf if table.dtype == np.float64 else np.iinfo(np.int64).max
    best = _brute(xi, yi, table, int(max_len), table.dtype.type(bound))
    if best == bound:
        raise ValueError(f"no correspondence of length <= {max_len}")
    return _scalar(best, x.space.integral)


def optimal_correspondence(x: Sequence, y: Sequence,
                           max_cells: int = TRACEBACK_MAX_CELLS) -> Correspondence:
    """An optimal correspondence recovered by traceback.

    Ties prefer the diagonal, so the result never extends two overlapping
    runs at once and has length at most ``|x| + |y| - 1``.
    """
    _check_pair(x, y)
    if len(x) * len(y) > max_cells:
        raise MemoryError(f"traceback over {len(x)}x{len(y)} cells exceeds {max_cells}")
    xi, yi, table = _tables(x, y)
    acc = _dtw_full(xi, yi, table)
    pi, pj = _traceback(acc)
    return Correspondence(x.letters[pi], y.letters[pj], _scalar(acc[-1, -1], x.space.integral))


def alignment_pairs(x: Sequence, y: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs (i_k, j_k) of an optimal correspondence."""
    _check_pair(x, y)
    xi, yi, table = _tables(x, y)
    return _traceback(_dtw_full(xi, yi, table))
