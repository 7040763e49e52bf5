import math

import numpy as np
import pytest

from rmplab.measure import (EnumerationCapError, MatrixMeasure, MeasureError, benchmark_measure,
                            check_model, check_proximal, check_strong_irreducibility,
                            convolution_enumerate)


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return [[c, -s], [s, c]]


def test_weights_normalised():
    m = MatrixMeasure.from_matrices([np.eye(2), 2 * np.eye(2)], [1, 1])
    assert np.allclose(m.weights, [0.5, 0.5])
    assert benchmark_measure().weights.sum() == pytest.approx(1.0, abs=1e-12)


def test_zero_weight_rejected():
    with pytest.raises(MeasureError, match="zero weight atom"):
        MatrixMeasure.from_matrices([np.eye(2), 2 * np.eye(2)], [1, 0])


def test_mixed_dimensions_rejected():
    with pytest.raises(MeasureError, match="dimension"):
        MatrixMeasure.from_matrices([np.eye(2), np.eye(3)])


def test_singular_atom_rejected():
    with pytest.raises(MeasureError, match="atom 1"):
        MatrixMeasure.from_matrices([np.eye(2), [[1, 1], [1, 1]]])


def test_proximal_examples():
    rep = check_proximal(MatrixMeasure.from_matrices([np.diag([2, 1])]))
    assert list(rep.proximal_witness) == [0]
    assert rep.gap_ratio == pytest.approx(2.0)
    assert check_proximal(MatrixMeasure.from_matrices([rotation(math.pi / 4)])).proximal_witness is None
    bench = check_proximal(benchmark_measure())
    assert bench.proximal_witness is not None and len(bench.proximal_witness) <= 2


def test_irreducibility_examples():
    rot = MatrixMeasure.from_matrices([rotation(math.sqrt(2))])
    assert check_strong_irreducibility(rot).irreducibility_verdict == "inconclusive"
    diag = MatrixMeasure.from_matrices([np.diag([2, 1]), np.diag([1, 2])])
    assert check_strong_irreducibility(diag).irreducibility_verdict == "fail"
    assert check_strong_irreducibility(benchmark_measure()).irreducibility_verdict == "pass"
    assert not check_model(benchmark_measure()).hard_failure


def test_enumeration_sizes():
    m = benchmark_measure()
    prods, w = convolution_enumerate(m, 1)
    assert np.allclose(prods, m.matrices) and np.allclose(w, m.weights)
    prods, w = convolution_enumerate(m, 2)
    assert prods.shape == (4, 2, 2) and np.allclose(w, 0.25)
    prods, w = convolution_enumerate(m, 10)
    assert prods.shape[0] == 1024
    assert w.sum() == pytest.approx(1.0, abs=1e-9)


def test_enumeration_order_last_letter_most_significant():
    m = benchmark_measure()
    g1, g2 = m.matrices
    prods, _ = convolution_enumerate(m, 2)
    # index 1 = word (a2, a1) = (0, 1): g_{a2} g_{a1} with the first letter acting first
    assert np.allclose(prods[1], g1 @ g2)


def test_enumeration_cap():
    with pytest.raises(EnumerationCapError):
        convolution_enumerate(benchmark_measure(), 40)
