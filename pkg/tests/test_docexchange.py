import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dtwsketch.docexchange import (CHUNKED, C_DE, FAIL, HASH, DEMessage, EditBall,
                                   ResourceExceeded, chunk_bounds, chunked_message_bits, de_recover,
                                   de_sketch, erasure_capacity, hash_field, hash_message_bits,
                                   poly_hash, single_edits)
from dtwsketch.dtw import Sequence, edit_distance
from dtwsketch.metric import GeneralizedHamming
from dtwsketch.wire import BitReader, BitWriter


def seq(letters, size=8):
    return Sequence(letters, GeneralizedHamming(size))


def mutate(letters, k, sigma, rng):
    """Apply k random single edits."""
    s = list(letters)
    for _ in range(k):
        op = rng.integers(0, 3)
        if op == 0 and len(s) > 1:
            del s[rng.integers(0, len(s))]
        elif op == 1:
            s[rng.integers(0, len(s))] = int(rng.integers(0, sigma))
        else:
            s.insert(int(rng.integers(0, len(s) + 1)), int(rng.integers(0, sigma)))
    return s


def roundtrip(msg: DEMessage) -> DEMessage:
    w = BitWriter()
    msg.write(w)
    r = BitReader(w.bits)
    out = DEMessage.read(r)
    assert r.done()
    return out


@pytest.mark.parametrize("scheme", [HASH, CHUNKED])
def test_sketch_is_deterministic(scheme, rng):
    x = seq(rng.integers(0, 8, 200))
    assert de_sketch(x, 6, 0.01, 99, scheme) == de_sketch(x, 6, 0.01, 99, scheme)
    assert de_sketch(x, 6, 0.01, 99, scheme) != de_sketch(x, 6, 0.01, 100, scheme)


def test_hash_size_formula_example():
    x = seq(np.arange(512) % 4, size=4)
    msg = de_sketch(x, 8, 1 / 512, 1, HASH)
    assert msg.bits == hash_message_bits(8, 512, 1 / 512, 4)
    assert msg.fingerprint_bits <= C_DE[HASH] * (8 * 9 + 9)


@given(st.integers(0, 40), st.integers(2, 4096), st.floats(1e-6, 0.5), st.integers(2, 1 << 16))
def test_hash_field_covers_union_bound(K, n, delta, sigma):
    mersenne, vb, comps = hash_field(K, n, delta, sigma)
    field_bits = comps * 61 if mersenne else vb - 1
    need = max(2 * (K * math.log2(n) + math.log2(1 / delta)),
               K * math.log2(3 * n * sigma) + math.log2(1 / delta))
    assert field_bits >= need - 1e-9
    # never more than one spare component above the target
    assert field_bits <= max(need, 16) + 62


@given(st.lists(st.integers(0, 7), min_size=1, max_size=300), st.integers(0, 40),
       st.integers(0, 2**64 - 1))
def test_messages_round_trip_bit_exactly(letters, K, seed):
    x = seq(letters)
    for scheme in (HASH, CHUNKED):
        msg = de_sketch(x, K, 0.05, seed, scheme)
        back = roundtrip(msg)
        assert back == msg
        if scheme == HASH:
            assert msg.bits == hash_message_bits(K, len(letters), 0.05, 8)
        elif msg.verbatim is None:
            assert msg.bits == chunked_message_bits(len(letters), K, 8, len(msg.chunks))


@pytest.mark.parametrize("scheme", [HASH, CHUNKED])
def test_recover_identical(scheme, rng):
    x = seq(rng.integers(0, 8, 40))
    for K in (0, 1, 3):
        msg = de_sketch(x, K, 0.01, 5, scheme)
        assert de_recover(msg, x, K, 5) == x


def test_k_zero_is_equality_test(rng):
    x = seq(rng.integers(0, 8, 40))
    y = seq(mutate(x.letters, 1, 8, rng))
    msg = de_sketch(x, 0, 0.01, 3, HASH)
    assert de_recover(msg, y, 0, 3) is FAIL


def test_hash_recovers_one_substitution():
    x = seq([0, 1, 2, 3, 0, 1, 2, 3, 1, 1], size=4)
    y = seq([0, 1, 2, 3, 0, 2, 2, 3, 1, 1], size=4)
    assert edit_distance(x, y) == 1
    msg = de_sketch(x, 2, 0.01, 11, HASH)
    assert de_recover(msg, y, 2, 11) == x


def test_chunked_recovers_one_substitution(rng):
    base = rng.integers(0, 256, 400)
    x = Sequence(base, GeneralizedHamming(256))
    yl = base.copy()
    yl[123] = (yl[123] + 1) % 256
    y = x.with_letters(yl)
    msg = de_sketch(x, 8, 0.01, 4, CHUNKED)
    assert msg.verbatim is None
    assert de_recover(msg, y, 8, 4) == x


def test_hash_fails_when_far():
    """ed(x, y) = 5 with K = 2 must answer FAIL (up to hash collisions)."""
    rng = np.random.default_rng(0)
    x = [0, 1, 2, 0, 1, 2, 0, 1]
    fails = trials = 0
    for seed in range(1000):
        y = list(x)
        for i in rng.choice(len(x), 5, replace=False):
            y[i] = (y[i] + int(rng.integers(1, 3))) % 3
        if edit_distance(x, y) != 5:
            continue
        trials += 1
        msg = de_sketch(seq(x, 3), 2, 1 / 100, seed, HASH)
        fails += de_recover(msg, seq(y, 3), 2, seed) is FAIL
    assert trials >= 100
    assert fails / trials >= 1 - 1 / 100


def test_chunked_fails_when_far(rng):
    space = GeneralizedHamming(256)
    for seed in range(50):
        x = rng.integers(0, 256, 600)
        y = rng.integers(0, 256, 600)
        msg = de_sketch(Sequence(x, space), 10, 0.01, seed, CHUNKED)
        assert msg.verbatim is None
        assert de_recover(msg, Sequence(y, space), 10, seed) is FAIL


def test_collision_frequency_below_delta():
    x1 = seq([0, 1, 2, 3] * 4, 4)
    x2 = seq([0, 1, 2, 3] * 3 + [0, 1, 3, 2], 4)
    delta = 1 / 512
    hits = 0
    for seed in range(10_000):
        a = de_sketch(x1, 0, delta, seed, HASH)
        b = de_sketch(x2, 0, delta, seed, HASH)
        hits += a.fingerprint == b.fingerprint
    assert hits / 10_000 <= delta


def test_hash_completeness_rate():
    rng = np.random.default_rng(1)
    delta = 0.05
    ok = 0
    for seed in range(1000):
        x = list(rng.integers(0, 3, 8))
        k = int(rng.integers(0, 3))
        y = mutate(x, k, 3, rng)
        if edit_distance(x, y) > 2:
            ok += 1  # outside the promise; not counted against completeness
            continue
        msg = de_sketch(seq(x, 3), 2, delta, seed, HASH)
        ok += de_recover(msg, seq(y, 3), 2, seed) == seq(x, 3)
    assert ok / 1000 >= 1 - 2 * delta


def test_chunked_completeness_on_sparse_edits():
    rng = np.random.default_rng(2)
    space = GeneralizedHamming(1024)
    ok = total = 0
    for seed in range(60):
        x = rng.integers(0, 1024, 512)
        y = mutate(x, 4, 1024, rng)
        msg = de_sketch(Sequence(x, space), 16, 0.01, seed, CHUNKED)
        total += 1
        ok += de_recover(msg, Sequence(y, space), 16, seed) == Sequence(x, space)
    assert ok / total >= 0.95


def test_resource_cap_is_distinct_from_fail():
    x = seq([0, 1, 2, 3] * 5, 8)
    y = seq([1, 1, 2, 3] * 5, 8)
    msg = de_sketch(x, 4, 0.01, 1, HASH)
    with pytest.raises(ResourceExceeded):
        de_recover(msg, y, 4, 1, cap=1000)


def test_length_gap_beyond_k_fails_fast():
    msg = de_sketch(seq([1] * 50), 2, 0.01, 1, HASH)
    assert de_recover(msg, seq([1] * 40), 2, 1) is FAIL


def test_mismatched_parameters_rejected():
    msg = de_sketch(seq([1, 2, 3]), 2, 0.01, 1, HASH)
    with pytest.raises(ValueError):
        de_recover(msg, seq([1, 2, 3]), 3, 1)


def test_single_edits_order_and_coverage():
    out = list(single_edits((0, 1), (0, 1)))
    assert out[:2] == [(1,), (0,)]  # deletions first, leftmost first
    assert (1, 1) in out and (0, 0, 1) in out
    assert all(edit_distance(list(o), [0, 1]) <= 1 for o in out)


def test_edit_ball_levels_are_exact_distances():
    ball = EditBall((0, 1, 2), (0, 1, 2), 2)
    for k in range(3):
        for s in ball.level(k):
            assert edit_distance(list(s), [0, 1, 2]) == k


def test_poly_hash_distinguishes_trailing_zero():
    assert poly_hash((1, 0), 7, 101) != poly_hash((1,), 7, 101)


def test_chunk_bounds_are_content_defined():
    rng = np.random.default_rng(3)
    a = list(rng.integers(0, 50, 300))
    b = a[:100] + [7] + a[100:]
    ea, eb = chunk_bounds(a, 6, 1), chunk_bounds(b, 6, 1)
    assert max(np.diff([0] + ea)) <= 12
    # cuts well after the insertion are shifted copies of the original ones
    late_a = {e for e in ea if e > 130}
    late_b = {e - 1 for e in eb if e > 131}
    assert len(late_a & late_b) >= 0.8 * len(late_a)


def test_erasure_capacity_scales_with_k():
    assert erasure_capacity(6) == 1 and erasure_capacity(96) == 16


@settings(max_examples=25)
@given(st.integers(0, 2**32))
def test_chunked_recovers_single_edits(seed):
    rng = np.random.default_rng(seed)
    space = GeneralizedHamming(512)
    x = rng.integers(0, 512, 300)
    y = mutate(x, 1, 512, rng)
    msg = de_sketch(Sequence(x, space), 12, 0.01, seed, CHUNKED)
    assert de_recover(msg, Sequence(y, space), 12, seed) == Sequence(x, space)
