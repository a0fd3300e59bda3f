import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dtwsketch.dtw import dtw, dtw_brute
from dtwsketch.gadgets import (FAMILIES, GadgetError, gen_index_gadget, gen_int_gadget,
                               gen_linear_gadget, gen_set_gadget, index_block, int_block,
                               linear_addend)


def test_index_examples():
    assert index_block(1, 2) == [0, 0, 1, 1, 2, 2]
    g = gen_index_gadget("00", 1, 2)
    assert g.evaluate() == 1 and g.holds()
    g = gen_index_gadget("10", 1, 2)
    assert g.evaluate() >= 2 and g.holds() and g.predicate == "dtw >= 2"


def test_index_small_case_matches_brute_force():
    g = gen_index_gadget("1", 1, 2)
    assert dtw_brute(g.x, g.y) == g.evaluate()


def test_int_examples():
    assert int_block(1, 2, 2) == [0, 0, 1, 1, 2, 2]
    assert gen_int_gadget([1], 1, 1, 2, 2).evaluate() >= 2
    g = gen_int_gadget([1], 1, 2, 3, 3)
    assert g.evaluate() <= 1 and g.holds()


def test_set_examples():
    assert gen_set_gadget({3, 9}, 3, 4, 8).evaluate() == 1
    assert gen_set_gadget({3, 9}, 7, 4, 8).evaluate() == 8
    assert gen_set_gadget({5}, 5, 6, 6).evaluate() == 0


def test_linear_examples():
    g = gen_linear_gadget("0", 1)
    assert g.x.letters.tolist() == [1, 0, 0, 1] and g.y.letters.tolist() == [1, 0, 1, 1]
    assert g.evaluate() == 0
    g = gen_linear_gadget("1", 1)
    assert g.y.letters.tolist() == [1, 1, 2, 1] and g.evaluate() == 1
    e = linear_addend(5, 3)
    assert np.flatnonzero(e).tolist() == [10]  # position 4(i-1)+3 counted from one


@pytest.mark.parametrize("alpha", range(2, 9))
def test_index_exhaustive_small(alpha):
    for t in range(1, 5):
        for code in range(2 ** t):
            bits = format(code, f"0{t}b")
            for i in range(1, t + 1):
                assert gen_index_gadget(bits, i, alpha).holds()


def test_int_exhaustive_small():
    for m in (2, 3, 4):
        for alpha in range(m, 7):
            for k in (1, 2):
                for xs in np.ndindex(*([m - 1] * k)):
                    xvec = [v + 1 for v in xs]
                    for i in range(1, k + 1):
                        for yi in range(1, m):
                            assert gen_int_gadget(xvec, i, yi, alpha, m).holds()


@given(st.integers(1, 64), st.data())
def test_linear_value_equals_probed_bit(n, data):
    bits = data.draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    i = data.draw(st.integers(1, n))
    g = gen_linear_gadget(bits, i)
    assert g.evaluate() == bits[i - 1]
    assert np.array_equal(g.y.letters, g.x.letters + linear_addend(n, i))


@given(st.integers(1, 16), st.integers(1, 8), st.data())
def test_set_values_exact(blocks, alpha, data):
    n = blocks * alpha
    S = data.draw(st.sets(st.integers(0, 200), min_size=blocks, max_size=blocks))
    inside = data.draw(st.sampled_from(sorted(S)))
    assert gen_set_gadget(S, inside, alpha, n).evaluate() == blocks - 1
    outside = max(S) + 1
    assert gen_set_gadget(S, outside, alpha, n).evaluate() == n


def test_errors():
    with pytest.raises(GadgetError):
        gen_index_gadget("01", 3, 2)
    with pytest.raises(GadgetError):
        gen_index_gadget("0a", 1, 2)
    with pytest.raises(GadgetError):
        gen_int_gadget([1], 1, 1, 2, 3)  # m > alpha
    with pytest.raises(GadgetError):
        gen_int_gadget([3], 1, 1, 4, 3)  # letter equals m
    with pytest.raises(GadgetError):
        gen_set_gadget({1, 2, 3}, 1, 4, 8)
    with pytest.raises(GadgetError):
        gen_linear_gadget("", 1)


def test_registry_is_complete():
    assert set(FAMILIES) == {"index", "int", "set", "linear"}


def test_instances_record_true_lengths():
    g = gen_int_gadget([1, 2], 2, 1, 3, 3)
    assert len(g.x) == 2 * (3 * 3 + 3 - 2)
    assert dtw(g.x, g.y) == g.evaluate()
