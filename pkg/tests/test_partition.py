import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rmplab.partition import (PartitionOfUnity, build_partition, chi_tilde, count_for, holder_seminorm,
                              phi_aggregates, verify_partition)
from rmplab.projective import DualPoint

Y = DualPoint.from_vector([1, 1])


def point_at_distance(y: DualPoint, d: float) -> np.ndarray:
    f = y.rep
    p = np.array([-f[1], f[0]])
    return math.sqrt(1 - d * d) * p + d * f


def test_chi_tilde_shape():
    t = np.linspace(0, 1, 1001)
    assert np.allclose(chi_tilde(t) + chi_tilde(t - 1), 1.0, atol=1e-15)
    assert np.all(chi_tilde(np.array([0.0, 0.1, -0.1])) == 1.0)
    assert np.all(chi_tilde(np.array([0.9, -0.95, 3.0])) == 0.0)


@pytest.mark.parametrize("zeta", [1.0, 0.25])
def test_plateau_centre(zeta):
    part = PartitionOfUnity(Y, zeta, 12)
    for k in (0, 3, 7):
        w = point_at_distance(Y, math.exp(-k * zeta))
        vals = np.array([float(part.chi(j, w)) for j in range(part.K + 1)])
        assert vals[k] == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.delete(vals, k) == 0.0)


@pytest.mark.parametrize("zeta", [1.0, 0.25])
def test_between_centres(zeta):
    part = PartitionOfUnity(Y, zeta, 12)
    for k in (0, 4, 10):
        w = point_at_distance(Y, math.exp(-(k + 0.5) * zeta))
        assert float(part.chi(k, w) + part.chi(k + 1, w)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("zeta", [1.0, 0.25])
def test_build_verifies_invariants(zeta):
    part = build_partition(Y, zeta, 60)
    check = verify_partition(part, 10_000, seed=1, c1_k_max=40)
    assert check.support_ok and check.overlap_ok
    assert check.sum_error <= 1e-12
    assert check.c1_ratio <= 1.0


def test_build_rejects_bad_parameters():
    with pytest.raises(ValueError):
        build_partition(Y, 0.0, 5)
    with pytest.raises(ValueError):
        build_partition(Y, 0.5, 0)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-30, 1.0), st.sampled_from([1.0, 0.5, 0.25]), st.integers(1, 80))
def test_sum_is_one(d, zeta, K):
    part = PartitionOfUnity(Y, zeta, K)
    dd = np.array([d])
    total = part.weights_at_distance(dd).sum(axis=1) + part.tail_at_distance(dd)
    assert total[0] == pytest.approx(1.0, abs=1e-12)
    assert np.count_nonzero(part.weights_at_distance(dd)) <= 2


def test_count_for():
    assert count_for(64, 1.5, 1.0) == math.floor(1.5 * math.log(64))
    assert count_for(2, 0.5, 1.0) == 0


def test_aggregates_at_zero_frequency():
    part = PartitionOfUnity(Y, 1.0, 20)
    agg = phi_aggregates(part, 256, 0.0, 1.5)
    d = np.geomspace(1e-12, 1, 500)
    assert np.allclose(agg.combined_at_distance(d), 1.0, atol=1e-12)


def test_single_term_when_count_is_zero():
    part = PartitionOfUnity(Y, 1.0, 5)
    agg = phi_aggregates(part, 2, 3.0, 0.5)
    assert agg.count == 0
    d = np.geomspace(1e-3, 1, 50)
    assert np.allclose(agg.phi_at_distance(d), part.chi_at_distance(0, d))


def test_aggregate_conventions():
    part = PartitionOfUnity(Y, 0.25, 60)
    with pytest.raises(ValueError):
        phi_aggregates(part, 64, 1.0, 1.5, "+")
    with pytest.raises(ValueError):
        phi_aggregates(part, 64, 1.0, 1.5, "-", zeta=1.0)
    minus = phi_aggregates(part, 64, 1.0, 1.5, "-")
    assert np.allclose(minus.phases(), np.exp(-1j * np.arange(minus.count + 1) * 0.25 / 8))
    with pytest.raises(ValueError):
        phi_aggregates(PartitionOfUnity(Y, 1.0, 2), 4096, 1.0, 1.5)


def test_holder_growth_rate():
    alpha, A = 0.1, 1.5
    ns = 2 ** np.arange(6, 13)
    part = PartitionOfUnity(Y, 1.0, 30)
    norms = []
    for n in ns:
        agg = phi_aggregates(part, int(n), 1.0, A)
        norms.append(holder_seminorm(agg.phi_at_distance, alpha, smallest=float(n) ** (-A - 1)))
    slope = np.polyfit(np.log(ns), np.log(norms), 1)[0]
    assert slope <= alpha * A + 0.05
