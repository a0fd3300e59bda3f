import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dtwsketch.metric import (FiniteMatrix, GeneralizedHamming, IntegerLine, LpGrid, MetricError,
                              validate)

from conftest import random_metric


def test_line_distance():
    assert IntegerLine(10).distance(3, 7) == 4


def test_hamming_identity():
    assert GeneralizedHamming(8).distance(5, 5) == 0


def test_grid_l1():
    g = LpGrid(4, 2, 1)
    assert g.distance(g.point((0, 0)), g.point((1, 2))) == 3


def test_grid_l2_and_linf():
    g = LpGrid(5, 2, 2)
    assert math.isclose(g.distance(g.point((0, 0)), g.point((3, 4))), 5.0)
    h = LpGrid(5, 3, math.inf)
    assert h.distance(h.point((0, 0, 0)), h.point((1, 4, 2))) == 4
    assert h.diameter == 4


def test_non_integer_p_is_supported():
    g = LpGrid(3, 2, 1.5)
    d = g.distance(g.point((0, 0)), g.point((1, 1)))
    assert math.isclose(d, 2 ** (1 / 1.5))


def test_unknown_point_rejected():
    with pytest.raises(MetricError):
        IntegerLine(4).distance(0, 4)
    with pytest.raises(MetricError):
        GeneralizedHamming(4).distance(-1, 0)


def test_empty_space_rejected():
    with pytest.raises(MetricError):
        IntegerLine(0)


def test_normalize_matrix_example():
    m = FiniteMatrix([[0, 2, 6], [2, 0, 4], [6, 4, 0]])
    nm = m.normalize()
    assert np.allclose(nm.matrix(), [[0, 1, 3], [1, 0, 2], [3, 2, 0]])
    assert nm.min_dist == 1
    assert math.isclose(nm.aspect_ratio, m.aspect_ratio)


def test_normalize_idempotent_on_normalized():
    line = IntegerLine(7)
    assert line.normalize() is line
    m = FiniteMatrix([[0, 1], [1, 0]])
    assert m.normalize() is m


def test_normalize_degenerate():
    with pytest.raises(MetricError):
        IntegerLine(1).normalize()
    with pytest.raises(MetricError):
        FiniteMatrix([[0, 0], [0, 0]]).normalize()


def test_validate_reports():
    ok = validate(FiniteMatrix([[0, 1, 2], [1, 0, 1], [2, 1, 0]]))
    assert ok.ok and ok.aspect_ratio == 2.0
    asym = validate(FiniteMatrix([[0, 1, 2], [3, 0, 1], [2, 1, 0]]))
    assert not asym.ok and any("symmetry" in v for v in asym.violations)
    tri = validate(FiniteMatrix([[0, 1, 5], [1, 0, 1], [5, 1, 0]]))
    assert not tri.ok and any("triangle" in v for v in tri.violations)


def test_validate_skips_triangle_for_nonmetric():
    rep = validate(FiniteMatrix([[0, 1, 5], [1, 0, 1], [5, 1, 0]], metric=False))
    assert rep.ok


def test_validate_poly_report():
    rep = validate(IntegerLine(100), n=10, poly_degree=2)
    assert rep.poly_bounded is True
    rep = validate(IntegerLine(1000), n=10, poly_degree=2)
    assert rep.poly_bounded is False


SPACES = [
    IntegerLine(20),
    GeneralizedHamming(16),
    LpGrid(4, 2, 1),
    LpGrid(4, 3, 2),
    LpGrid(3, 2, 3.5),
    LpGrid(4, 2, math.inf),
]


@pytest.mark.parametrize("space", SPACES, ids=lambda s: s.header())
def test_symmetric_zero_exactly_on_diagonal(space):
    m = np.asarray(space.matrix(), dtype=float)
    assert np.array_equal(m, m.T)
    assert np.all(np.diag(m) == 0)
    off = m[~np.eye(space.size, dtype=bool)]
    assert np.all(off > 0)
    assert validate(space).ok


def test_random_matrices_are_metrics(rng):
    for k in (2, 5, 16, 64):
        assert validate(random_metric(k, rng)).ok


@given(st.integers(2, 24), st.floats(0.1, 50))
def test_normalize_preserves_distance_order(k, scale):
    rng = np.random.default_rng(k)
    m = random_metric(k, rng).matrix() * scale
    space = FiniteMatrix(m)
    nm = space.normalize().matrix()
    iu = np.triu_indices(k, 1)
    assert np.array_equal(np.argsort(m[iu], kind="stable"), np.argsort(nm[iu], kind="stable"))
    assert math.isclose(float(nm[iu].min()), 1.0)


def test_hamming_is_inequality_indicator():
    h = GeneralizedHamming(12)
    for a, b in itertools.product(range(12), repeat=2):
        assert h.distance(a, b) == int(a != b)
