import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from rmplab.projective import (DualPoint, GroupAtom, InvalidInputError, ProjPoint, act, coefficient_log,
                               cocycle, dual_pairing, hyperplane_distance, operator_norm, proj_distance,
                               random_orthogonal)

E1 = ProjPoint.from_vector([1, 0])
E2 = ProjPoint.from_vector([0, 1])
DIAG = ProjPoint.from_vector([1, 1])


def test_operator_norm_examples():
    assert operator_norm(np.eye(3)) == pytest.approx(1.0)
    assert operator_norm(np.diag([3, 0.5])) == pytest.approx(3.0)
    assert operator_norm([[1, 1], [0, 1]]) == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-10)


def test_distance_examples():
    assert proj_distance(DIAG, DIAG) == pytest.approx(0.0, abs=1e-15)
    assert proj_distance(E1, E2) == pytest.approx(1.0)
    assert proj_distance(E1, DIAG) == pytest.approx(math.sqrt(2) / 2, abs=1e-12)


def test_action_examples():
    assert act(np.eye(2), DIAG) == DIAG
    assert act(np.diag([2, 1]), E1) == E1
    assert act([[0, -1], [1, 0]], E1) == E2


def test_cocycle_examples():
    assert cocycle(np.eye(2), DIAG) == pytest.approx(0.0, abs=1e-15)
    assert cocycle(-3 * np.eye(2), DIAG) == pytest.approx(math.log(3))
    assert cocycle(np.diag([2, 1]), DIAG) == pytest.approx(math.log(math.sqrt(2.5)), abs=1e-10)


def test_pairing_and_coefficient_examples():
    f1, f2 = DualPoint.from_vector([1, 0]), DualPoint.from_vector([0, 1])
    assert dual_pairing(E1, f1) == 1.0
    assert dual_pairing(E1, f2) == 0.0
    assert dual_pairing(DIAG, f1) == pytest.approx(math.sqrt(2) / 2)
    assert coefficient_log(np.eye(2), E1, f1) == 0.0
    assert coefficient_log(3 * np.eye(2), E1, f1) == pytest.approx(math.log(3))
    assert coefficient_log([[1, 1], [0, 1]], E2, f1) == pytest.approx(0.0, abs=1e-15)
    assert coefficient_log(np.eye(2), E1, f2) == float("-inf")


def test_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        ProjPoint.from_vector([0, 0])
    with pytest.raises(InvalidInputError):
        GroupAtom.from_matrix([[1, 2], [2, 4]])
    with pytest.raises(InvalidInputError):
        operator_norm([[1, np.nan], [0, 1]])
    with pytest.raises(InvalidInputError):
        operator_norm(np.ones((2, 3)))


def test_big_n_at_least_one():
    a = GroupAtom.from_matrix([[2, 1], [1, 1]])
    assert a.big_n >= 1.0
    assert a.op_norm * a.inv_op_norm >= 1.0 - 1e-12


def test_hyperplane_distance_matches_pairing():
    rng = np.random.default_rng(3)
    for _ in range(200):
        d = int(rng.integers(2, 5))
        x = ProjPoint.from_vector(rng.standard_normal(d))
        y = DualPoint.from_vector(rng.standard_normal(d))
        assert hyperplane_distance(x, y) == pytest.approx(dual_pairing(x, y), abs=1e-12)


vec3 = arrays(np.float64, 3, elements=st.floats(-10, 10, allow_subnormal=False)).filter(lambda v: np.linalg.norm(v) > 1e-3)
mat3 = arrays(np.float64, (3, 3), elements=st.floats(-5, 5, allow_subnormal=False)).filter(
    lambda m: abs(np.linalg.det(m)) > 1e-2 * max(1.0, np.abs(m).max()) ** 3)


@settings(max_examples=200, deadline=None)
@given(mat3, mat3, vec3)
def test_cocycle_additive(g2, g1, v):
    x = ProjPoint.from_vector(v)
    assert cocycle(g2 @ g1, x) == pytest.approx(cocycle(g2, act(g1, x)) + cocycle(g1, x), abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(vec3, vec3, vec3)
def test_distance_is_a_metric(a, b, c):
    x, y, z = (ProjPoint.from_vector(v) for v in (a, b, c))
    assert 0.0 <= proj_distance(x, y) <= 1.0
    assert proj_distance(x, y) == pytest.approx(proj_distance(y, x), abs=1e-12)
    assert proj_distance(x, z) <= proj_distance(x, y) + proj_distance(y, z) + 1e-12


@settings(max_examples=100, deadline=None)
@given(vec3, vec3, st.integers(0, 2**32 - 1))
def test_distance_orthogonally_invariant(a, b, seed):
    k = random_orthogonal(3, np.random.default_rng(seed))
    x, y = ProjPoint.from_vector(a), ProjPoint.from_vector(b)
    assert proj_distance(act(k, x), act(k, y)) == pytest.approx(proj_distance(x, y), abs=1e-10)


@settings(max_examples=200, deadline=None)
@given(mat3, vec3)
def test_cocycle_bounded_by_norms(g, v):
    a = GroupAtom.from_matrix(g)
    s = cocycle(a, ProjPoint.from_vector(v))
    assert -math.log(a.inv_op_norm) - 1e-10 <= s <= math.log(a.op_norm) + 1e-10


@settings(max_examples=200, deadline=None)
@given(mat3, vec3, vec3)
def test_coefficient_split(g, v, f):
    x, y = ProjPoint.from_vector(v), DualPoint.from_vector(f)
    pair = dual_pairing(act(g, x), y)
    if pair > 1e-8:
        assert coefficient_log(g, x, y) == pytest.approx(cocycle(g, x) + math.log(pair), abs=1e-9)
