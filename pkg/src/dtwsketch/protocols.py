"""One-way protocols: Alice builds a :class:`Message` from ``x``, Bob answers from it and ``y``.

Every protocol is split into an Alice half that never sees ``y`` and a Bob
half that never sees ``x``.  The two halves share only the public inputs
(metric space, configuration) and a master seed, from which each
sub-protocol derives its own stream by a fixed label.

Outcomes are :class:`Estimate`, :class:`GapBit` or the ``FAIL`` singleton.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .decompositions import (C_FRT, TreeMetric, declared_sigma, frt_embed, sample_partition,
                             simplify_map, snap)
from .docexchange import CHUNKED, DEFAULT_CANDIDATE_CAP, FAIL, DEMessage, de_recover, de_sketch
from .dtw import CorruptionError, Sequence, collapse, dtw, heavy_hitter_list, reconstruct_light
from .metric import MetricSpace
from .randomness import SharedRandomness
from .wire import BitReader, BitWriter, WireError, width_for

SCHEMES = {
    "bounded": 1,
    "gap_tree": 2,
    "gap_partition": 3,
    "adtw_tree": 4,
    "adtw_general": 5,
    "adtw_separable": 6,
}
SCHEME_NAMES = {v: k for k, v in SCHEMES.items()}
HEADER_BITS = 16 + 32 + 16 + 64
MAX_ALPHA = 2**16 - 1


class LadderError(RuntimeError):
    """No rung of the gap ladder answered 0, which the construction rules out."""


@dataclass(frozen=True)
class Estimate:
    t: float

    def __repr__(self):
        return f"Estimate({self.t})"


@dataclass(frozen=True)
class GapBit:
    b: int

    def __repr__(self):
        return f"GapBit({self.b})"


@dataclass(frozen=True)
class ProtocolConfig:
    """Public constants both parties must agree on.

    The defaults are the theory-backed values.  ``forced()`` lowers the
    shrink factors so the tree and partition routes engage at small alpha.
    """

    de_scheme: int = CHUNKED
    c1: float = 0.1
    partition_shrink: float = 82.0
    partition_min_ratio: float = 820.0
    c_emb: float = 10.0 * C_FRT
    rep_factor: float = 18.0
    tau_tree: float = 0.25
    tau_part: float = 0.5
    search: str | None = None
    ladder_c: float = 2.0
    sigma: float | None = None
    cap: int = DEFAULT_CANDIDATE_CAP

    @classmethod
    def forced(cls, **overrides) -> "ProtocolConfig":
        base = dict(partition_shrink=1.0, partition_min_ratio=8.0, c_emb=2.0, rep_factor=2.0)
        base.update(overrides)
        return cls(**base)

    def with_(self, **kw) -> "ProtocolConfig":
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# message bodies


@dataclass(frozen=True)
class BoundedSketch:
    alpha: int
    heavy: tuple
    de: DEMessage

    def write(self, w: BitWriter, n: int):
        wd = width_for(n)
        w.uint(self.alpha, 16).uint(len(self.heavy), wd)
        for i, length in self.heavy:
            w.uint(i, wd).uint(length, wd)
        self.de.write(w)

    @classmethod
    def read(cls, r: BitReader, n: int) -> "BoundedSketch":
        wd = width_for(n)
        alpha, count = r.uint(16), r.uint(wd)
        heavy = tuple((r.uint(wd), r.uint(wd)) for _ in range(count))
        return cls(alpha, heavy, DEMessage.read(r))


@dataclass(frozen=True)
class GapSketch:
    r: float
    cell: float
    tau: float
    parts: tuple

    def write(self, w: BitWriter, n: int):
        w.float64(self.r).float64(self.cell).float32(self.tau).uint(len(self.parts), 16)
        for p in self.parts:
            p.write(w, n)

    @classmethod
    def read(cls, r: BitReader, n: int) -> "GapSketch":
        rr, cell, tau, count = r.float64(), r.float64(), r.float32(), r.uint(16)
        return cls(rr, cell, tau, tuple(BoundedSketch.read(r, n) for _ in range(count)))


@dataclass(frozen=True)
class LadderSketch:
    alpha: int
    search: str
    bounded: BoundedSketch
    rungs: tuple

    def write(self, w: BitWriter, n: int):
        w.uint(self.alpha, 16).uint(int(self.search == "binary"), 1).uint(len(self.rungs), 8)
        self.bounded.write(w, n)
        for g in self.rungs:
            g.write(w, n)

    @classmethod
    def read(cls, r: BitReader, n: int) -> "LadderSketch":
        alpha, binary, count = r.uint(16), r.uint(1), r.uint(8)
        bounded = BoundedSketch.read(r, n)
        rungs = tuple(GapSketch.read(r, n) for _ in range(count))
        return cls(alpha, "binary" if binary else "linear", bounded, rungs)


@dataclass(frozen=True)
class VerbatimSketch:
    letter_bits: int
    letters: tuple

    def write(self, w: BitWriter, n: int):
        w.uint(self.letter_bits, 8)
        for c in self.letters:
            w.uint(c, self.letter_bits)

    @classmethod
    def read(cls, r: BitReader, n: int) -> "VerbatimSketch":
        lb = r.uint(8)
        return cls(lb, tuple(r.uint(lb) for _ in range(n)))


_LADDER_SCHEMES = {SCHEMES["adtw_tree"], SCHEMES["adtw_general"], SCHEMES["adtw_separable"]}


@dataclass(frozen=True)
class Message:
    """Header (scheme, n, alpha, seed) plus one typed body."""

    scheme: int
    n: int
    alpha: int
    seed: int
    body: object = None

    def write(self) -> BitWriter:
        w = BitWriter()
        w.uint(self.scheme, 16).uint(self.n, 32).uint(self.alpha, 16).uint(self.seed, 64)
        if self.body is None:
            return w
        if self.scheme in _LADDER_SCHEMES:
            w.uint(int(isinstance(self.body, VerbatimSketch)), 1)
        self.body.write(w, self.n)
        return w

    @property
    def total_bits(self) -> int:
        return len(self.write())

    def to_bytes(self) -> bytes:
        return self.write().frame()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Message":
        r = BitReader.from_frame(blob)
        scheme, n, alpha, seed = r.uint(16), r.uint(32), r.uint(16), r.uint(64)
        if scheme not in SCHEME_NAMES:
            raise WireError(f"unknown protocol scheme {scheme}")
        if r.done():
            return cls(scheme, n, alpha, seed)
        if scheme == SCHEMES["bounded"]:
            body = BoundedSketch.read(r, n)
        elif scheme in (SCHEMES["gap_tree"], SCHEMES["gap_partition"]):
            body = GapSketch.read(r, n)
        elif r.uint(1):
            body = VerbatimSketch.read(r, n)
        else:
            body = LadderSketch.read(r, n)
        if not r.done():
            raise WireError("trailing bits after message body")
        return cls(scheme, n, alpha, seed, body)

    @property
    def protocol(self) -> str:
        return SCHEME_NAMES[self.scheme]


def message_bits(msg: Message) -> int:
    return msg.total_bits


# ---------------------------------------------------------------------------
# bounded alpha-DTW


def _de_seed(rand: SharedRandomness) -> int:
    return rand.child("de").seed


def bounded_sketch(x: Sequence, alpha: int, delta: float, rand: SharedRandomness,
                   cfg: ProtocolConfig) -> BoundedSketch:
    n = len(x)
    alpha = max(1, min(int(alpha), MAX_ALPHA))
    # length-1 runs need no entry: reconstruction leaves every run at length 1 by default
    heavy = tuple(h for h in heavy_hitter_list(x, alpha) if h[1] > 1)
    K = 3 * math.ceil(n / alpha)
    de = de_sketch(collapse(x), K, delta, _de_seed(rand), scheme=cfg.de_scheme,
                   sigma=x.space.size)
    return BoundedSketch(alpha, heavy, de)


def bounded_answer(sk: BoundedSketch, y: Sequence, rand: SharedRandomness,
                   cfg: ProtocolConfig, alphabet=None):
    """``Estimate(alpha * dtw(x', y))`` or ``FAIL``."""
    x2 = de_recover(sk.de, collapse(y), sk.de.K, _de_seed(rand), alphabet=alphabet, cap=cfg.cap)
    if x2 is FAIL:
        return FAIL
    try:
        x1 = reconstruct_light(x2, list(sk.heavy))
    except CorruptionError:
        # a recovered string whose runs disagree with the list is a wrong recovery
        return FAIL
    return Estimate(sk.alpha * dtw(x1, y))


# ---------------------------------------------------------------------------
# normalization helpers


def _working_space(space: MetricSpace):
    """(normalized space, scale) with original distance = scale * normalized distance."""
    if space.size < 2 or space.is_normalized:
        return space, 1
    md = space.min_dist
    return space.normalize(), (int(md) if space.integral else float(md))


def _on(space: MetricSpace, s: Sequence) -> Sequence:
    return s if s.space is space else Sequence(s.letters, space, check=False)


def _scaled(out, scale):
    if isinstance(out, Estimate) and scale != 1:
        return Estimate(out.t * scale)
    return out


# ---------------------------------------------------------------------------
# gap protocols


def gap_tree_sketch(tree: TreeMetric, x: Sequence, r: float, alpha: float, delta: float,
                    rand: SharedRandomness, cfg: ProtocolConfig) -> GapSketch:
    sx = x.with_letters(simplify_map(tree, r)[x.letters])
    ab = max(1, math.floor(alpha / 4))
    return GapSketch(float(r), 0.0, cfg.tau_tree,
                     (bounded_sketch(sx, ab, delta, rand.child("bounded"), cfg),))


def gap_tree_answer(sk: GapSketch, tree: TreeMetric, y: Sequence, n: int,
                    rand: SharedRandomness, cfg: ProtocolConfig) -> GapBit:
    up = simplify_map(tree, sk.r)
    sy = y.with_letters(up[y.letters])
    out = bounded_answer(sk.parts[0], sy, rand.child("bounded"), cfg, alphabet=np.unique(up))
    if out is FAIL:
        return GapBit(1)
    return GapBit(int(out.t > sk.tau * n * sk.r))


def partition_alpha(alpha: float, sigma: float, cfg: ProtocolConfig) -> int:
    return max(1, math.floor(alpha * cfg.c1 / (cfg.partition_shrink * sigma)))


def repetitions(delta: float, cfg: ProtocolConfig) -> int:
    return max(1, math.ceil(cfg.rep_factor * math.log(1.0 / delta)))


def gap_partition_sketch(space: MetricSpace, x: Sequence, r: float, alpha: float, sigma: float,
                         delta: float, rand: SharedRandomness, cfg: ProtocolConfig,
                         rung: int = 0) -> GapSketch:
    cell = cfg.c1 * r
    ap = partition_alpha(alpha, sigma, cfg)
    parts = []
    for j in range(repetitions(delta, cfg)):
        p = sample_partition(space, cell, rand.child(f"partition:{rung}:{j}").seed)
        parts.append(bounded_sketch(snap(p, x), ap, delta, rand.child(f"rep:{j}"), cfg))
    return GapSketch(float(r), float(cell), cfg.tau_part, tuple(parts))


def gap_partition_answer(sk: GapSketch, space: MetricSpace, y: Sequence, n: int,
                         rand: SharedRandomness, cfg: ProtocolConfig, rung: int = 0) -> GapBit:
    ones = 0
    for j, part in enumerate(sk.parts):
        p = sample_partition(space, sk.cell, rand.child(f"partition:{rung}:{j}").seed)
        out = bounded_answer(part, snap(p, y), rand.child(f"rep:{j}"), cfg,
                             alphabet=np.unique(p.rep))
        ones += out is FAIL or out.t > sk.tau * n * sk.r
    return GapBit(int(2 * ones > len(sk.parts)))


# ---------------------------------------------------------------------------
# the ladder


def ladder_top(n: int, diameter: float, alpha: float) -> int:
    """Index of the last rung: r = 2**top reaches 2 * n * diameter * alpha."""
    return max(0, math.ceil(math.log2(2.0 * n * max(float(diameter), 1.0) * alpha)))


def rung_delta(delta: float, rungs: int, search: str, cfg: ProtocolConfig) -> float:
    if search == "linear":
        return delta / (2.0 * rungs)
    return delta / (2.0 * cfg.ladder_c * max(1, math.ceil(math.log2(rungs + 1))))


def _ladder_sketch(space, x, alpha, delta, rand, cfg, gap, search, sigma=None) -> LadderSketch:
    n = len(x)
    top = ladder_top(n, space.diameter, alpha)
    dr = rung_delta(delta, top + 1, search, cfg)
    bounded = bounded_sketch(x, alpha, delta / 2.0, rand.child("bounded"), cfg)
    rungs = []
    for i in range(top + 1):
        g = rand.child(f"gap:{i}")
        if gap == "tree":
            rungs.append(gap_tree_sketch(space, x, 2.0**i, alpha / 2.0, dr, g, cfg))
        else:
            rungs.append(gap_partition_sketch(space, x, 2.0**i, alpha / 2.0, sigma, dr, g, cfg,
                                              rung=i))
    return LadderSketch(int(alpha), search, bounded, tuple(rungs))


def _ladder_answer(lad: LadderSketch, space, y, n, rand, cfg, gap, search=None, trace=None):
    """Bounded stage first, then the smallest rung whose gap bit is 0.

    The returned value is ``2**i * n``: rung ``i`` answering 0 certifies
    ``dtw <= 2**i * n`` and rung ``i-1`` answering 1 certifies
    ``dtw > 2**i * n / alpha``, so the estimate overshoots by less than alpha.
    """
    trace = {} if trace is None else trace
    out = bounded_answer(lad.bounded, y, rand.child("bounded"), cfg)
    if isinstance(out, Estimate):
        trace.update(stage="bounded", rung=None, bits={})
        return out
    bits: dict[int, int] = {}

    def bit(i):
        if i not in bits:
            g = rand.child(f"gap:{i}")
            if gap == "tree":
                bits[i] = gap_tree_answer(lad.rungs[i], space, y, n, g, cfg).b
            else:
                bits[i] = gap_partition_answer(lad.rungs[i], space, y, n, g, cfg, rung=i).b
        return bits[i]

    top = len(lad.rungs) - 1
    mode = search or lad.search
    if mode == "linear":
        i = next((k for k in range(top + 1) if bit(k) == 0), None)
        if i is None:
            raise LadderError("every rung answered 1")
    elif bit(0) == 0:
        i = 0
    else:
        lo, hi = 0, top  # bit(lo) == 1; the top rung is 0 by construction
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if bit(mid):
                lo = mid
            else:
                hi = mid
        i = hi
        if bit(i):
            raise LadderError("the top rung answered 1")
    trace.update(stage="ladder", rung=i, bits=dict(bits))
    return Estimate(2**i * n)


# ---------------------------------------------------------------------------
# top-level protocols


def _verbatim(x: Sequence) -> VerbatimSketch:
    lb = width_for(max(x.space.size - 1, 1))
    return VerbatimSketch(lb, tuple(x.letters.tolist()))


def general_alpha_min(space: MetricSpace, cfg: ProtocolConfig) -> float:
    return 2.0 * cfg.c_emb * math.log2(max(space.size, 2))


def tree_alpha(alpha: int, space: MetricSpace, cfg: ProtocolConfig) -> int:
    return max(1, math.floor(alpha / (cfg.c_emb * math.log2(max(space.size, 2)))))


def separable_sigma(space: MetricSpace, cfg: ProtocolConfig) -> float:
    return cfg.sigma if cfg.sigma is not None else declared_sigma(space)


def _check_inputs(x: Sequence, alpha: int, delta: float):
    if len(x) == 0:
        raise ValueError("x must be non-empty")
    if not 1 <= alpha <= MAX_ALPHA:
        raise ValueError(f"alpha must lie in [1, {MAX_ALPHA}]")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")


def alice(protocol: str, space: MetricSpace, x: Sequence, alpha: int, delta: float, seed: int,
          cfg: ProtocolConfig | None = None, r: float | None = None) -> Message:
    """Alice's half of ``protocol``.  ``r`` is required by the gap protocols only."""
    cfg = cfg or ProtocolConfig()
    alpha = int(alpha)
    _check_inputs(x, alpha, delta)
    if protocol not in SCHEMES:
        raise ValueError(f"unknown protocol {protocol!r}")
    rand = SharedRandomness(seed)
    n = len(x)
    head = dict(scheme=SCHEMES[protocol], n=n, alpha=alpha, seed=rand.seed)
    ws, _ = _working_space(space)
    xw = _on(ws, x)

    if protocol == "bounded":
        if alpha > n:
            raise ValueError("bounded protocol needs alpha <= n")
        return Message(body=bounded_sketch(xw, alpha, delta, rand.child("bounded"), cfg), **head)
    if protocol in ("gap_tree", "gap_partition"):
        if r is None or r < 1:
            raise ValueError("gap protocols need r >= 1")
        g = rand.child("gap:0")
        if protocol == "gap_tree":
            _need_tree(ws)
            body = gap_tree_sketch(ws, xw, r, alpha, delta, g, cfg)
        else:
            body = gap_partition_sketch(ws, xw, r, alpha, separable_sigma(ws, cfg), delta, g, cfg)
        return Message(body=body, **head)
    if protocol == "adtw_tree":
        _need_tree(ws)
        body = _ladder_sketch(ws, xw, alpha, delta, rand, cfg, "tree", cfg.search or "linear")
        return Message(body=body, **head)
    if protocol == "adtw_general":
        if ws.size < 2 or alpha < general_alpha_min(ws, cfg):
            return Message(body=_verbatim(x), **head)
        emb = frt_embed(ws, rand.child("frt").seed)
        body = _ladder_sketch(emb.tree, emb.map(xw), tree_alpha(alpha, ws, cfg), delta, rand, cfg,
                              "tree", cfg.search or "linear")
        return Message(body=body, **head)
    # adtw_separable
    sigma = separable_sigma(ws, cfg)
    if ws.size < 2 or alpha < cfg.partition_min_ratio * sigma:
        return Message(body=_verbatim(x), **head)
    body = _ladder_sketch(ws, xw, alpha, delta, rand, cfg, "partition", cfg.search or "binary",
                          sigma=sigma)
    return Message(body=body, **head)


def bob(msg: Message, space: MetricSpace, y: Sequence, cfg: ProtocolConfig | None = None,
        search: str | None = None, trace: dict | None = None):
    """Bob's half.  ``search`` overrides the ladder's search mode (for cross-checks)."""
    cfg = cfg or ProtocolConfig()
    if len(y) == 0:
        raise ValueError("y must be non-empty")
    if msg.body is None:
        raise ValueError("message carries no body")
    rand = SharedRandomness(msg.seed)
    protocol = msg.protocol
    ws, scale = _working_space(space)
    yw = _on(ws, y)
    body = msg.body

    if isinstance(body, VerbatimSketch):
        if trace is not None:
            trace.update(stage="verbatim", rung=None, bits={})
        return Estimate(dtw(y.with_letters(body.letters), y))
    if protocol == "bounded":
        return _scaled(bounded_answer(body, yw, rand.child("bounded"), cfg), scale)
    if protocol == "gap_tree":
        # the gap bit compares normalized distances; callers pass r in those units
        return gap_tree_answer(body, ws, yw, msg.n, rand.child("gap:0"), cfg)
    if protocol == "gap_partition":
        return gap_partition_answer(body, ws, yw, msg.n, rand.child("gap:0"), cfg)
    if protocol == "adtw_tree":
        out = _ladder_answer(body, ws, yw, msg.n, rand, cfg, "tree", search, trace)
        return _scaled(out, scale)
    if protocol == "adtw_general":
        emb = frt_embed(ws, rand.child("frt").seed)
        out = _ladder_answer(body, emb.tree, emb.map(yw), msg.n, rand, cfg, "tree", search, trace)
        return _scaled(out, scale)
    out = _ladder_answer(body, ws, yw, msg.n, rand, cfg, "partition", search, trace)
    return _scaled(out, scale)


def _need_tree(space):
    if not isinstance(space, TreeMetric):
        raise ValueError(f"protocol needs a tree metric, got {space.kind}")


def run(protocol: str, space: MetricSpace, x: Sequence, y: Sequence, alpha: int, delta: float,
        seed: int, cfg: ProtocolConfig | None = None, r: float | None = None, **bob_kw):
    """Both halves in sequence; returns ``(outcome, message)``."""
    msg = alice(protocol, space, x, alpha, delta, seed, cfg, r=r)
    return bob(msg, space, y, cfg, **bob_kw), msg


# names matching the bounded protocol's two halves
def bounded_adtw_alice(x: Sequence, alpha: int, delta: float, seed: int,
                       cfg: ProtocolConfig | None = None) -> Message:
    return alice("bounded", x.space, x, alpha, delta, seed, cfg)


def bounded_adtw_bob(msg: Message, y: Sequence, cfg: ProtocolConfig | None = None):
    return bob(msg, y.space, y, cfg)


def bounded_bit_bound(n: int, alpha: int, delta: float, c_de: float) -> float:
    """Declared size bound for a bounded-protocol message."""
    return c_de * (3 * n / alpha * math.log2(n) + math.log2(1 / delta)) \
        + 2 * (n / alpha) * math.log2(n)
