"""K-document exchange: Bob recovers Alice's string from a short fingerprint.

Two backends share one interface.

``HASH``
    The information-theoretic scheme: Alice sends polynomial fingerprints of
    her whole string over a field large enough to union-bound every string in
    the radius-K edit ball around Bob's input; Bob enumerates that ball in a
    fixed breadth-first order.  Exact but exponential in K.

``CHUNKED``
    Alice cuts her string at content-defined boundaries into blocks of
    expected length about ``n/K`` and sends each block's length and a short
    residue hash, plus a handful of global polynomial evaluations.  Bob walks
    the blocks left to right, looking for each block within two edits of the
    matching window of his own string; the residue hash lets him solve for
    one unknown letter instead of enumerating it.  Blocks he cannot place
    are left as erasures and recovered afterwards from the global
    evaluations by linear algebra.  Decoding is polynomial.  It answers
    ``FAIL`` when too many blocks are erased, which can happen for dense
    edits even when ``ed <= K``.  When Alice's string is cheaper to send
    verbatim than as a sketch, the message simply carries the letters.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .dtw import Sequence, edit_distance
from .wire import BitReader, BitWriter, WireError, width_for

HASH = 1
CHUNKED = 2
SCHEMES = {"hash": HASH, "chunked": CHUNKED}

MERSENNE61 = (1 << 61) - 1
MERSENNE31 = (1 << 31) - 1
DEFAULT_CANDIDATE_CAP = 10**7
#: documented size constants: fingerprint bits <= C_DE * (K log2 n + log2 1/delta)
C_DE = {HASH: 3.0, CHUNKED: 6.0}

CHUNK_MIN = 2
CHUNK_WINDOW = 3
#: safety bits added to the log-size of the radius-2 search space
CHUNK_HASH_MARGIN = 4
#: forced cut once a chunk reaches this multiple of the target length
CHUNK_MAX_FACTOR = 2
CHUNK_E_MAX = 2
#: the radius-2 local search is skipped when (window length + 1)^2 * alphabet size exceeds this
CHUNK_E2_WORK = 1 << 24
#: one erasable letter per this many units of K
ERASURE_DIV = 6
#: extra evaluations beyond the erasure capacity, used only as a checksum
CHECK_EVALUATIONS = 3


class _Fail:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "FAIL"

    def __bool__(self):
        return False


FAIL = _Fail()


class ResourceExceeded(RuntimeError):
    """The decoder's candidate budget ran out before the search finished."""


# ---------------------------------------------------------------------------
# polynomial fingerprints


def poly_hash(s, r: int, p: int) -> int:
    """``sum (s_i + 1) r^i mod p``; the +1 keeps lengths distinguishable."""
    h = 0
    for c in reversed(s):
        h = (h * r + c + 1) % p
    return h


def _points(seed: int, label: str, primes) -> list[int]:
    rnd = random.Random(f"{seed}/{label}")
    return [rnd.randrange(2, p - 1) for p in primes]


def hash_field(K: int, n: int, delta: float, sigma: int) -> tuple[bool, int, int]:
    """Field layout ``(mersenne, value_bits, components)`` for the HASH backend."""
    n_eff = max(n, 2)
    target = max(
        2.0 * (K * math.log2(n_eff) + math.log2(1.0 / delta)),
        K * math.log2(3 * n_eff * max(sigma, 2)) + math.log2(1.0 / delta),
        16.0,
    )
    bits = math.ceil(target)
    if bits <= 128:
        return False, bits + 1, 1
    return True, 61, math.ceil(bits / 61)


def hash_message_bits(K: int, n: int, delta: float, sigma: int) -> int:
    """Exact serialized size of a HASH message."""
    _, vb, comps = hash_field(K, n, delta, sigma)
    return HEADER_BITS + 1 + 8 + 16 + comps * vb


def chunked_message_bits(n: int, K: int, sigma: int, chunks: int) -> int:
    """Exact serialized size of a CHUNKED sketch with ``chunks`` blocks (verbatim aside)."""
    L = chunk_target(n, K)
    per = width_for(CHUNK_MAX_FACTOR * L) + chunk_hash_bits(n, L, sigma)
    return HEADER_BITS + 1 + 8 + 8 + 32 + chunks * per + 16 + 31 * (erasure_capacity(K) + CHECK_EVALUATIONS)


_PRIME_CACHE: dict[int, int] = {}


def _field_primes(mersenne: bool, value_bits: int, components: int) -> list[int]:
    if mersenne:
        return [MERSENNE61] * components
    if value_bits not in _PRIME_CACHE:
        from sympy import nextprime  # slow to import; only needed on a cache miss

        _PRIME_CACHE[value_bits] = int(nextprime(1 << (value_bits - 1)))
    return [_PRIME_CACHE[value_bits]]


# ---------------------------------------------------------------------------
# messages

HEADER_BITS = 8 + 32 + 32 + 32 + 64


@dataclass(frozen=True)
class DEMessage:
    scheme: int
    K: int
    n: int
    delta: float
    seed: int
    # HASH
    mersenne: bool = False
    value_bits: int = 0
    fingerprint: tuple = ()
    # CHUNKED, verbatim mode
    verbatim: tuple | None = None
    letter_bits: int = 0
    # CHUNKED, sketch mode
    len_bits: int = 0
    hash_bits: int = 0
    chunks: tuple = ()
    evaluations: tuple = ()

    def write(self, w: BitWriter) -> BitWriter:
        w.uint(self.scheme, 8).uint(self.K, 32).uint(self.n, 32).float32(self.delta)
        w.uint(self.seed, 64)
        if self.scheme == HASH:
            w.uint(int(self.mersenne), 1).uint(self.value_bits, 8).uint(len(self.fingerprint), 16)
            for v in self.fingerprint:
                w.uint(v, self.value_bits)
        elif self.scheme == CHUNKED:
            w.uint(int(self.verbatim is not None), 1)
            if self.verbatim is not None:
                w.uint(self.letter_bits, 8)
                for c in self.verbatim:
                    w.uint(c, self.letter_bits)
            else:
                w.uint(self.len_bits, 8).uint(self.hash_bits, 8).uint(len(self.chunks), 32)
                for length, h in self.chunks:
                    w.uint(length, self.len_bits).uint(h, self.hash_bits)
                w.uint(len(self.evaluations), 16)
                for v in self.evaluations:
                    w.uint(v, 31)
        else:
            raise WireError(f"unknown document-exchange scheme {self.scheme}")
        return w

    @classmethod
    def read(cls, r: BitReader) -> "DEMessage":
        scheme, K, n = r.uint(8), r.uint(32), r.uint(32)
        delta, seed = r.float32(), r.uint(64)
        if scheme == HASH:
            mersenne, vb, comps = bool(r.uint(1)), r.uint(8), r.uint(16)
            fp = tuple(r.uint(vb) for _ in range(comps))
            return cls(HASH, K, n, delta, seed, mersenne=mersenne, value_bits=vb, fingerprint=fp)
        if scheme == CHUNKED:
            if r.uint(1):
                lb = r.uint(8)
                letters = tuple(r.uint(lb) for _ in range(n))
                return cls(CHUNKED, K, n, delta, seed, verbatim=letters, letter_bits=lb)
            lb, hb, count = r.uint(8), r.uint(8), r.uint(32)
            chunks = tuple((r.uint(lb), r.uint(hb)) for _ in range(count))
            evals = tuple(r.uint(31) for _ in range(r.uint(16)))
            return cls(CHUNKED, K, n, delta, seed, len_bits=lb, hash_bits=hb, chunks=chunks,
                       evaluations=evals)
        raise WireError(f"unknown document-exchange scheme {scheme}")

    @property
    def bits(self) -> int:
        return len(self.write(BitWriter()))

    @property
    def fingerprint_bits(self) -> int:
        """Bits after the fixed header."""
        return self.bits - HEADER_BITS


# ---------------------------------------------------------------------------
# edit-ball enumeration


def single_edits(s: tuple, alphabet):
    """All strings one edit away: deletions, substitutions, insertions, leftmost first."""
    n = len(s)
    for i in range(n):
        yield s[:i] + s[i + 1:]
    for i in range(n):
        head, tail = s[:i], s[i + 1:]
        for c in alphabet:
            if c != s[i]:
                yield head + (c,) + tail
    for i in range(n + 1):
        head, tail = s[:i], s[i:]
        for c in alphabet:
            yield head + (c,) + tail


class EditBall:
    """Breadth-first enumeration of the edit ball around ``center``.

    Only strings that can still reach ``target_len`` within the radius are
    kept.  ``level(k)`` returns the new strings at exact distance ``k`` that
    have the target length.  Levels must be requested in increasing order;
    only the newest one is kept, and visited strings are remembered by hash
    so that memory stays proportional to the widest level.
    """

    def __init__(self, center: tuple, alphabet, radius: int, target_len: int | None = None,
                 budget: list | None = None):
        self.alphabet = tuple(alphabet)
        self.radius = radius
        self.target = target_len
        self.seen = {hash(center)}
        self.frontier = [center]
        self.depth = 0
        self.hits = [center] if self._fits(center) else []
        self.budget = budget

    def _fits(self, s):
        return self.target is None or len(s) == self.target

    def level(self, k: int) -> list:
        if k < self.depth:
            raise ValueError("edit-ball levels must be requested in increasing order")
        while self.depth < k:
            slack = self.radius - self.depth - 1
            nxt, hits = [], []
            for t in self.frontier:
                for c in single_edits(t, self.alphabet):
                    h = hash(c)
                    if h in self.seen:
                        continue
                    if self.target is not None and abs(len(c) - self.target) > slack:
                        continue
                    if self.budget is not None:
                        self.budget[0] -= 1
                        if self.budget[0] < 0:
                            raise ResourceExceeded("edit-ball enumeration exceeded the candidate cap")
                    self.seen.add(h)
                    nxt.append(c)
                    if self._fits(c):
                        hits.append(c)
            self.frontier, self.hits = nxt, hits
            self.depth += 1
        return self.hits


# ---------------------------------------------------------------------------
# content-defined chunking


def chunk_target(n: int, K: int) -> int:
    return max(CHUNK_MIN, math.ceil(n / max(K, 1)))


def _mix(v: np.ndarray) -> np.ndarray:
    v = v ^ (v >> np.uint64(33))
    v = v * np.uint64(0xFF51AFD7ED558CCD)
    v = v ^ (v >> np.uint64(33))
    v = v * np.uint64(0xC4CEB9FE1A85EC53)
    return v ^ (v >> np.uint64(33))


def chunk_bounds(letters, L: int, seed: int) -> list[int]:
    """End offsets of content-defined chunks.

    A chunk ends after position ``i`` when a seeded hash of the window
    ``letters[i-2 : i+1]`` is divisible by ``L``; chunks reaching
    ``CHUNK_MAX_FACTOR * L`` letters are cut by force.
    """
    a = np.asarray(letters, dtype=np.uint64)
    n = a.size
    if n == 0:
        return []
    salt = np.uint64(random.Random(f"{seed}/cut").getrandbits(64))
    if n >= CHUNK_WINDOW:
        with np.errstate(over="ignore"):
            h = _mix(a[:-2] * np.uint64(0x9E3779B97F4A7C15) + salt)
            h = _mix(h ^ (a[1:-1] * np.uint64(0xBF58476D1CE4E5B9)))
            h = _mix(h ^ (a[2:] * np.uint64(0x94D049BB133111EB)))
        cut = (np.flatnonzero(h % np.uint64(L) == 0) + CHUNK_WINDOW).tolist()
    else:
        cut = []
    ends, last, lmax = [], 0, CHUNK_MAX_FACTOR * L
    for c in cut + [n]:
        while c - last > lmax:
            last += lmax
            ends.append(last)
        if c > last:
            ends.append(c)
            last = c
    return ends


def chunk_hash_bits(n: int, L: int, sigma: int) -> int:
    """Bits per chunk hash: enough to union-bound the radius-2 search space."""
    ball = 2 * CHUNK_MAX_FACTOR * L * max(sigma, 2)
    hb = math.ceil(2 * math.log2(ball) + math.log2(max(n, 2)) + CHUNK_HASH_MARGIN)
    # a secondary residue narrower than 8 bits would have too few evaluation points
    return hb if hb <= 31 else max(hb, 31 + 8)


def _split_bits(hb: int) -> tuple[int, int]:
    """A chunk hash is a primary residue (at most 31 bits) and an optional secondary one."""
    if hb <= 31:
        return hb, 0
    if hb < 39:
        raise ValueError(f"chunk hash width {hb} leaves a secondary residue under 8 bits")
    return 31, hb - 31


_PREV_PRIME: dict[int, int] = {}


def _residue_prime(bits: int) -> int:
    if bits not in _PREV_PRIME:
        from sympy import prevprime

        _PREV_PRIME[bits] = int(prevprime(1 << bits))
    return _PREV_PRIME[bits]


def _chunk_hashers(seed: int, hb: int):
    b1, b2 = _split_bits(hb)
    primes = [_residue_prime(b1)] + ([_residue_prime(b2)] if b2 else [])
    return list(zip(_points(seed, "chunk", primes), primes, [b1, b2][: len(primes)]))


def _chunk_hash(piece, hashers) -> int:
    v = 0
    for r, q, bits in hashers:
        v = (v << bits) | poly_hash(piece, r, q)
    return v


def erasure_capacity(K: int) -> int:
    return math.ceil(K / ERASURE_DIV)


def de_sketch(x: Sequence, K: int, delta: float, seed: int, scheme: int = HASH,
              sigma: int | None = None) -> DEMessage:
    """Alice's fingerprint of ``x`` for the K-document-exchange problem.

    ``sigma`` is the alphabet size used for field sizing (default: the size
    of ``x``'s space).
    """
    if K < 0:
        raise ValueError("K must be non-negative")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    seed &= 2**64 - 1
    sigma = x.space.size if sigma is None else sigma
    letters = tuple(x.letters.tolist())
    n = len(letters)
    delta32 = float(np.float32(delta))
    if scheme == HASH:
        mersenne, vb, comps = hash_field(K, n, delta, sigma)
        primes = _field_primes(mersenne, vb, comps)
        pts = _points(seed, "fp", primes)
        fp = tuple(poly_hash(letters, r, p) for r, p in zip(pts, primes))
        return DEMessage(HASH, K, n, delta32, seed, mersenne=mersenne, value_bits=vb,
                         fingerprint=fp)
    if scheme != CHUNKED:
        raise ValueError(f"unknown scheme {scheme}")
    L = chunk_target(n, K)
    lb, hb = width_for(CHUNK_MAX_FACTOR * L), chunk_hash_bits(n, L, sigma)
    bounds = chunk_bounds(letters, L, seed)
    s = erasure_capacity(K) + CHECK_EVALUATIONS
    letter_bits = width_for(max(sigma - 1, 1))
    # sizes are known before hashing, so a shorter verbatim copy costs nothing to pick
    sketch_bits = 1 + 8 + 8 + 32 + len(bounds) * (lb + hb) + 16 + 31 * s
    if 1 + 8 + n * letter_bits <= sketch_bits:
        return DEMessage(CHUNKED, K, n, delta32, seed, verbatim=letters, letter_bits=letter_bits)
    hashers = _chunk_hashers(seed, hb)
    chunks, start = [], 0
    for end in bounds:
        piece = letters[start:end]
        chunks.append((len(piece), _chunk_hash(piece, hashers)))
        start = end
    gpts = _points(seed, "global", [MERSENNE31] * s)
    evals = tuple(poly_hash(letters, g, MERSENNE31) for g in gpts)
    return DEMessage(CHUNKED, K, n, delta32, seed, len_bits=lb, hash_bits=hb,
                     chunks=tuple(chunks), evaluations=evals)


def de_recover(msg: DEMessage, y: Sequence, K: int, seed: int, alphabet=None,
               cap: int = DEFAULT_CANDIDATE_CAP):
    """Bob's decoder: Alice's string, or ``FAIL``.

    ``alphabet`` restricts the letters tried by insertions and substitutions
    (default: every point of ``y``'s space).  Raises :class:`ResourceExceeded`
    when more than ``cap`` candidates would be generated.
    """
    seed &= 2**64 - 1
    if msg.K != K or msg.seed != seed:
        raise ValueError("message was produced with a different K or seed")
    if msg.scheme == CHUNKED and msg.verbatim is not None:
        return y.with_letters(msg.verbatim)
    if abs(len(y) - msg.n) > K:
        return FAIL
    if alphabet is None:
        alphabet = range(y.space.size)
    alphabet = tuple(sorted(set(int(a) for a in alphabet)))
    if msg.scheme == HASH:
        return _recover_hash(msg, y, alphabet, cap)
    if msg.scheme == CHUNKED:
        return _ChunkDecoder(msg, y, alphabet, cap).run()
    raise ValueError(f"unknown scheme {msg.scheme}")


def _recover_hash(msg, y, alphabet, cap):
    primes = _field_primes(msg.mersenne, msg.value_bits, len(msg.fingerprint))
    pts = _points(msg.seed, "fp", primes)
    r0, p0, f0 = pts[0], primes[0], msg.fingerprint[0]
    budget = [cap]
    ball = EditBall(tuple(y.letters.tolist()), alphabet, msg.K, msg.n, budget)
    for k in range(msg.K + 1):
        for cand in ball.level(k):
            if poly_hash(cand, r0, p0) != f0:
                continue
            if all(poly_hash(cand, r, p) == f for r, p, f in zip(pts, primes, msg.fingerprint)):
                return y.with_letters(cand)
    return FAIL


class _ChunkDecoder:
    MAX_STARTS = 24

    def __init__(self, msg, y, alphabet, cap):
        self.msg = msg
        self.y = y
        self.yl = tuple(y.letters.tolist())
        self.alphabet = alphabet
        self.sigma = y.space.size
        self.mask = np.zeros(max(self.sigma, max(alphabet, default=0) + 1), dtype=bool)
        self.mask[list(alphabet)] = True
        self.hashers = _chunk_hashers(msg.seed, msg.hash_bits)
        self.r, self.q, _ = self.hashers[0]
        self.low_bits = self.hashers[1][2] if len(self.hashers) > 1 else 0
        self.rinv = pow(self.r, -1, self.q)
        longest = max((ell for ell, _ in msg.chunks), default=0) + CHUNK_E_MAX + 2
        self.pw = self._powers(self.r, longest)
        self.pinv = self._powers(self.rinv, longest)
        self.budget = cap

    def _powers(self, base, count):
        out = np.empty(count, dtype=np.int64)
        v = 1
        for i in range(count):
            out[i] = v
            v = v * base % self.q
        return out

    def _spend(self, k):
        self.budget -= k
        if self.budget < 0:
            raise ResourceExceeded("chunk search exceeded the candidate cap")

    # -- residue arithmetic ------------------------------------------------
    def _prefix(self, U):
        """Prefix residues of every row of ``U`` (shape ``B x m``)."""
        B, m = U.shape
        P = np.zeros((B, m + 1), dtype=np.int64)
        if m:
            P[:, 1:] = np.cumsum((U + 1) * self.pw[:m] % self.q, axis=1) % self.q
        return P

    def _letters_ok(self, c):
        ok = (c >= 0) & (c < self.mask.size)
        ok[ok] = self.mask[c[ok]]
        return ok

    def _one_edit(self, U, ell, h):
        """Solve, for every row of ``U``, the single edits that reach length ``ell`` and residue ``h``.

        Returns ``(row, kind, position, letter)`` tuples with kind 's', 'd' or 'i'.
        """
        q = self.q
        B, m = U.shape
        self._spend(B)
        P = self._prefix(U)
        H = P[:, -1:]
        if m == ell:
            c = (U + 1 + (h - H) % q * self.pinv[:m] % q) % q - 1
            ok = self._letters_ok(c) & (c != U)
            return [(b, "s", j, int(c[b, j])) for b, j in zip(*np.nonzero(ok))]
        if m == ell + 1:
            hdel = (P[:, :-1] + (H - P[:, 1:]) % q * self.rinv) % q
            return [(b, "d", j, -1) for b, j in zip(*np.nonzero(hdel == h))]
        if m == ell - 1:
            rest = (H - P) % q * self.r % q
            c = (h - P - rest) % q * self.pinv[: m + 1] % q - 1
            ok = self._letters_ok(c)
            return [(b, "i", j, int(c[b, j])) for b, j in zip(*np.nonzero(ok))]
        return []

    def _first_edits(self, w):
        """All single edits of ``w`` grouped by result length, as row batches."""
        a = np.asarray(w, dtype=np.int64)
        m = a.size
        alpha = np.asarray(self.alphabet, dtype=np.int64)
        out = []
        if m:
            keep = ~np.eye(m, dtype=bool)
            out.append(np.broadcast_to(a, (m, m))[keep].reshape(m, m - 1))
            pos = np.repeat(np.arange(m), alpha.size)
            let = np.tile(alpha, m)
            sel = let != a[pos]
            pos, let = pos[sel], let[sel]
            subs = np.repeat(a[None, :], pos.size, axis=0)
            subs[np.arange(pos.size), pos] = let
            out.append(subs)
        pos = np.repeat(np.arange(m + 1), alpha.size)
        let = np.tile(alpha, m + 1)
        ins = np.empty((pos.size, m + 1), dtype=np.int64)
        idx = np.arange(m + 1)[None, :]
        src = idx - (idx > pos[:, None])
        ins[:] = a[np.clip(src, 0, max(m - 1, 0))] if m else 0
        ins[np.arange(pos.size), pos] = let
        out.append(ins)
        return out

    @staticmethod
    def _apply(row, kind, j, c):
        if kind == "s":
            return row[:j] + (c,) + row[j + 1:]
        if kind == "d":
            return row[:j] + row[j + 1:]
        return row[:j] + (c,) + row[j:]

    # -- chunk search --------------------------------------------------------
    def _search(self, a, ell, h, e):
        """Candidates at edit distance exactly ``e`` from a window starting at ``a``.

        Yields ``(candidate, window_end)``.
        """
        ny = len(self.yl)
        h1 = h >> self.low_bits
        for t in _offsets(e):
            b = a + ell + t
            if b < a or b > ny:
                continue
            w = self.yl[a:b]
            if e == 0:
                self._spend(1)
                if _chunk_hash(w, self.hashers) == h:
                    yield w, b
            elif e == 1:
                U = np.asarray([w], dtype=np.int64).reshape(1, -1)
                for _, kind, j, c in self._one_edit(U, ell, h1):
                    cand = self._apply(w, kind, j, c)
                    if _chunk_hash(cand, self.hashers) == h:
                        yield cand, b
            else:
                if (len(w) + 1) ** 2 * len(self.alphabet) > CHUNK_E2_WORK:
                    continue
                for U in self._first_edits(w):
                    if abs(U.shape[1] - ell) > 1:
                        continue
                    for row, kind, j, c in self._one_edit(U, ell, h1):
                        cand = self._apply(tuple(U[row].tolist()), kind, j, c)
                        if _chunk_hash(cand, self.hashers) == h and edit_distance(cand, w) == 2:
                            yield cand, b

    def run(self):
        msg = self.msg
        out: list = []
        erased: list[tuple[int, int]] = []  # (offset, length)
        suspects: list[tuple[int, int]] = []  # matched only at radius 2
        starts = [0]
        used = 0
        capacity = erasure_capacity(msg.K)
        for ell, h in msg.chunks:
            found, ends, level = None, [], None
            for e in range(CHUNK_E_MAX + 1):
                if used + e > msg.K:
                    break
                if e == 2 and self._radius2_cost(len(starts), ell) > self.budget:
                    # an unaffordable search only costs an erasure, never the whole decode
                    break
                for a in starts:
                    for cand, b in self._search(a, ell, h, e):
                        if found is None:
                            found = cand
                        if cand == found and b not in ends:
                            ends.append(b)
                if found is not None:
                    level = e
                    break
            if found is None:
                erased.append((len(out), ell))
                if sum(k for _, k in erased) > capacity:
                    return FAIL
                out.extend([None] * ell)
                starts = self._widen(starts, ell)
                continue
            if level == 2:
                suspects.append((len(out), ell))
            used += level
            out.extend(found)
            starts = sorted(ends)[: self.MAX_STARTS]
        if len(out) != msg.n:
            return FAIL
        base = sum(k for _, k in erased)
        attempts = [erased] + [erased + [sp] for sp in suspects if base + sp[1] <= capacity]
        for spans in attempts:
            trial = list(out)
            for off, ell in spans:
                trial[off:off + ell] = [None] * ell
            filled = self._fill(trial, [i for off, ell in spans for i in range(off, off + ell)])
            if filled is not None:
                return self.y.with_letters(filled)
        return FAIL

    def _radius2_cost(self, nstarts, ell):
        windows = nstarts * (2 * CHUNK_E_MAX + 1)
        return windows * 3 * (ell + CHUNK_E_MAX + 1) * len(self.alphabet)

    def _widen(self, starts, ell):
        ny = len(self.yl)
        spread = {a + ell + t for a in starts for t in range(-CHUNK_E_MAX, CHUNK_E_MAX + 1)}
        ranked = sorted((b for b in spread if 0 <= b <= ny),
                        key=lambda b: (abs(b - (starts[0] + ell)), b))
        return sorted(ranked[: self.MAX_STARTS])

    def _fill(self, out, unknown):
        """Solve the erased letters from the global evaluations, then check all of them."""
        p = MERSENNE31
        gpts = _points(self.msg.seed, "global", [p] * len(self.msg.evaluations))
        rows, rhs = [], []
        for g, val in zip(gpts, self.msg.evaluations):
            acc, pw = 0, 1
            coeffs = []
            for c in out:
                if c is None:
                    coeffs.append(pw)
                else:
                    acc = (acc + (c + 1) * pw) % p
                pw = pw * g % p
            rows.append(coeffs)
            rhs.append((val - acc) % p)
        sol = _solve_mod(rows, rhs, p)
        if sol is None:
            return None
        filled = list(out)
        for pos, v in zip(unknown, sol):
            c = v - 1
            if not (0 <= c < self.mask.size and self.mask[c]):
                return None
            filled[pos] = c
        return filled


def _solve_mod(rows, rhs, p):
    """Least-determined solve of an overdetermined system mod ``p``; None if inconsistent."""
    m = len(rows[0]) if rows else 0
    A = [list(r) + [b] for r, b in zip(rows, rhs)]
    piv_row = 0
    pivots = []
    for col in range(m):
        sel = next((i for i in range(piv_row, len(A)) if A[i][col] % p), None)
        if sel is None:
            return None
        A[piv_row], A[sel] = A[sel], A[piv_row]
        inv = pow(A[piv_row][col], -1, p)
        A[piv_row] = [v * inv % p for v in A[piv_row]]
        for i in range(len(A)):
            if i != piv_row and A[i][col]:
                f = A[i][col]
                A[i] = [(v - f * w) % p for v, w in zip(A[i], A[piv_row])]
        pivots.append(col)
        piv_row += 1
    if any(A[i][m] % p for i in range(piv_row, len(A))):
        return None
    return [A[i][m] for i in range(m)]


def _offsets(e):
    yield 0
    for t in range(1, e + 1):
        yield -t
        yield t
