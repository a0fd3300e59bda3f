"""Lower-bound instance families with exactly known DTW behaviour.

Each generator returns a :class:`GadgetInstance` holding both sides, the
space they live in, and the predicate the exact oracle must satisfy.
"""
from __future__ import annotations

import operator
from dataclasses import dataclass, field

import numpy as np

from .dtw import Sequence, dtw, dtw0
from .metric import GeneralizedHamming, IntegerLine, MetricSpace

_OPS = {"<=": operator.le, ">=": operator.ge, "==": operator.eq}


class GadgetError(ValueError):
    pass


@dataclass(frozen=True)
class GadgetInstance:
    family: str
    x: Sequence
    y: Sequence
    measure: str  # "dtw" or "dtw0"
    op: str
    value: int
    params: dict = field(default_factory=dict)

    @property
    def space(self) -> MetricSpace:
        return self.x.space

    def evaluate(self):
        return dtw0(self.x, self.y) if self.measure == "dtw0" else dtw(self.x, self.y)

    def holds(self, value=None) -> bool:
        v = self.evaluate() if value is None else value
        return bool(_OPS[self.op](v, self.value))

    @property
    def predicate(self) -> str:
        return f"{self.measure} {self.op} {self.value}"


def _bits(bits) -> list[int]:
    raw = list(bits.strip()) if isinstance(bits, str) else list(bits)
    out = [int(b) if str(b) in ("0", "1") else -1 for b in raw]
    if any(b not in (0, 1) for b in out):
        raise GadgetError("bit strings may contain only 0 and 1")
    return out


def index_block(bit: int, alpha: int) -> list[int]:
    return [0] * alpha + ([1] * alpha if bit else [1]) + [2] * alpha


def gen_index_gadget(bits, i: int, alpha: int) -> GadgetInstance:
    """Alice encodes a bit string; Bob's string probes position ``i`` (1-based)."""
    b = _bits(bits)
    t = len(b)
    if not 1 <= i <= t:
        raise GadgetError(f"index {i} outside 1..{t}")
    if alpha < 1:
        raise GadgetError("alpha must be >= 1")
    space = IntegerLine(3)
    x = [c for bit in b for c in index_block(bit, alpha)]
    y = [0, 1, 2] * (i - 1) + [0, 2] + [0, 1, 2] * (t - i)
    op, value = (">=", alpha) if b[i - 1] else ("<=", 1)
    return GadgetInstance("index", Sequence(x, space), Sequence(y, space), "dtw", op, value,
                          dict(bits="".join(map(str, b)), i=i, alpha=alpha))


def int_block(v: int, alpha: int, m: int) -> list[int]:
    return [0] * alpha + list(range(1, v)) + [v] * alpha + list(range(v + 1, m)) + [m] * alpha


def gen_int_gadget(xvec, i: int, y_i: int, alpha: int, m: int) -> GadgetInstance:
    """Integer-alphabet variant: Bob's block omits ``y_i``."""
    xs = [int(v) for v in xvec]
    k = len(xs)
    if not 2 <= m <= alpha:
        raise GadgetError("need 2 <= m <= alpha")
    if not 1 <= i <= k:
        raise GadgetError(f"index {i} outside 1..{k}")
    if any(not 1 <= v <= m - 1 for v in xs + [y_i]):
        raise GadgetError(f"letters must lie in 1..{m - 1}")
    space = IntegerLine(m + 1)
    x = [c for v in xs for c in int_block(v, alpha, m)]
    full = list(range(m + 1))
    y = full * (i - 1) + [c for c in full if c != y_i] + full * (k - i)
    op, value = (">=", alpha) if xs[i - 1] == y_i else ("<=", 1)
    return GadgetInstance("int", Sequence(x, space), Sequence(y, space), "dtw", op, value,
                          dict(x=xs, i=i, y_i=y_i, alpha=alpha, m=m))


def gen_set_gadget(S, a: int, alpha: int, n: int, size: int | None = None) -> GadgetInstance:
    """Alice lists a set of n/alpha points; Bob repeats ``a`` n times."""
    members = sorted(int(s) for s in set(S))
    if alpha < 1 or n % alpha:
        raise GadgetError("alpha must divide n")
    if len(members) != n // alpha:
        raise GadgetError(f"|S| = {len(members)} but n/alpha = {n // alpha}")
    if size is None:
        size = max(members + [a]) + 1
    space = GeneralizedHamming(size)
    op, value = ("==", n // alpha - 1) if a in members else ("==", n)
    return GadgetInstance("set", Sequence(members, space), Sequence([a] * n, space), "dtw0",
                          op, value, dict(S=members, a=a, alpha=alpha, n=n))


def gen_linear_gadget(bits, i: int) -> GadgetInstance:
    """Alice's string and a copy shifted by one unit at a single position."""
    b = _bits(bits)
    n = len(b)
    if not 1 <= i <= n:
        raise GadgetError(f"index {i} outside 1..{n}")
    space = IntegerLine(3)
    xbar = np.array([c for v in b for c in (1, v, v, 1)], dtype=np.int64)
    e = linear_addend(n, i)
    return GadgetInstance("linear", Sequence(xbar, space), Sequence(xbar + e, space), "dtw", "==",
                          b[i - 1], dict(bits="".join(map(str, b)), i=i))


def linear_addend(n: int, i: int) -> np.ndarray:
    """The vector added to Alice's string: a single 1 at 0-based offset 4(i-1)+2."""
    e = np.zeros(4 * n, dtype=np.int64)
    e[4 * (i - 1) + 2] = 1
    return e


FAMILIES = {
    "index": gen_index_gadget,
    "int": gen_int_gadget,
    "set": gen_set_gadget,
    "linear": gen_linear_gadget,
}
