import math

import numpy as np
import pytest

from rmplab.measure import MatrixMeasure, benchmark_measure, convolution_enumerate
from rmplab.projective import ProjPoint
from rmplab.spectral import (OperatorGrid, TransferOperator, apply_operator, apply_power_exact,
                             high_frequency_decay, lambda_curve, lambda_estimates_check, leading_eigen,
                             spectral_gap_at_zero, trig_basket)

X = ProjPoint.from_vector([1, 0])


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return [[c, -s], [s, c]]


@pytest.fixture(scope="module")
def bench_curve():
    grid = OperatorGrid.circle(1024)
    return lambda_curve(benchmark_measure(), grid)


def test_stochastic_at_zero():
    grid = OperatorGrid.circle(256)
    out = apply_operator(benchmark_measure(), 0, np.ones(grid.size), grid)
    assert np.allclose(out, 1.0, atol=1e-12)


def test_rotation_by_grid_step_is_a_shift():
    m_size = 128
    grid = OperatorGrid.circle(m_size)
    m = MatrixMeasure.from_matrices([rotation(math.pi / m_size)])
    phi = np.cos(2 * grid.angles()) + 0.3 * np.sin(6 * grid.angles())
    assert np.allclose(apply_operator(m, 0, phi, grid), np.roll(phi, -1), atol=1e-9)


def test_grid_power_close_to_exact_power():
    m = benchmark_measure()
    grid = OperatorGrid.circle(4096)
    op = TransferOperator(m, grid)
    xi = 0.7
    phi = np.cos(2 * grid.angles())
    cur = phi.astype(complex)
    for _ in range(6):
        cur = op.apply(1j * xi, cur)
    exact = apply_power_exact(m, 1j * xi, lambda p: p[:, 0] ** 2 - p[:, 1] ** 2, X, 6)
    # linear interpolation error is O(M^-2) per step, times Lipschitz factors
    assert abs(cur[0] - exact) <= 1e-4


def test_exact_power_matches_enumeration():
    m = benchmark_measure()
    prods, w = convolution_enumerate(m, 6)
    sig = np.log(np.linalg.norm(prods @ X.rep, axis=1))
    for xi in (0.0, 0.4, -1.3):
        direct = np.sum(w * np.exp(1j * xi * sig))
        assert apply_power_exact(m, 1j * xi, lambda p: np.ones(len(p)), X, 6) == pytest.approx(direct, abs=1e-12)


def test_leading_eigen_at_zero():
    grid = OperatorGrid.circle(512)
    lam, phi, res = leading_eigen(benchmark_measure(), 0, grid)
    assert lam == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(phi, 1.0, atol=1e-8)


def test_scalar_walk_eigenvalue():
    grid = OperatorGrid.circle(64)
    m = MatrixMeasure.from_matrices([2 * np.eye(2)])
    lam, _, _ = leading_eigen(m, 0.8j, grid)
    assert lam == pytest.approx(np.exp(0.8j * math.log(2)), abs=1e-10)
    curve = lambda_curve(m, grid, with_gap=False, refine=False)
    assert curve.fitted_gamma == pytest.approx(math.log(2), abs=1e-9)
    assert curve.fitted_rho_sq == pytest.approx(0.0, abs=1e-9)
    rep = lambda_estimates_check(curve)
    assert rep.degenerate and rep.xi0_hat == 0.0


def test_curve_symmetry_and_modulus(bench_curve):
    xi = bench_curve.xi_grid
    lam = bench_curve.lambda_values
    for k in range(xi.size):
        j = int(np.argmin(np.abs(xi + xi[k])))
        assert lam[j] == pytest.approx(np.conj(lam[k]), abs=1e-8)
    assert np.all(np.abs(lam) <= 1 + 1e-9)


def test_curve_against_enumerated_growth_rate(bench_curve):
    m = benchmark_measure()
    xi = 0.1
    vals = [apply_power_exact(m, 1j * xi, lambda p: np.ones(len(p)), X, n) for n in (11, 12)]
    # the ratio of successive Fourier functionals isolates the leading eigenvalue
    assert vals[1] / vals[0] == pytest.approx(bench_curve.value(xi), rel=1e-3)


def test_gap_and_expansion(bench_curve):
    assert bench_curve.gap_at_zero is not None and bench_curve.gap_at_zero < 1
    assert bench_curve.fitted_rho_sq > 0
    assert bench_curve.cubic_remainder_slope() >= 2.7


def test_gap_without_spectral_gap():
    grid = OperatorGrid.circle(256)
    rot = MatrixMeasure.from_matrices([rotation(math.sqrt(2) * math.pi)])
    est = spectral_gap_at_zero(rot, grid)
    assert est.available and est.rho > 0.9
    red = MatrixMeasure.from_matrices([np.diag([4, 1]), np.diag([1, 4])])
    assert spectral_gap_at_zero(red, grid).available


def test_lambda_estimates_trivial_at_zero(bench_curve):
    rep = lambda_estimates_check(bench_curve, n_list=(64, 256, 1024))
    assert rep.xi0_hat > 0 and math.isfinite(rep.c_fit)


def test_decay_examples():
    grid = OperatorGrid.circle(256)
    scalar = MatrixMeasure.from_matrices([2 * np.eye(2)])
    fit = high_frequency_decay(scalar, grid, 2 * math.pi / math.log(2), n_max=50)
    assert fit.rho_k == pytest.approx(1.0, abs=1e-9)
    basket = trig_basket(grid)
    assert np.all(basket[0] == 0)
    bench = high_frequency_decay(benchmark_measure(), OperatorGrid.circle(1024), 1.0, n_max=200)
    assert bench.rho_k < 1.0
