"""Acceptance criteria on the benchmark measure, each at its stated tolerance and time budget."""
import math
import time

import numpy as np
import pytest

from rmplab import experiments as ex
from rmplab.config import default_config_text, parse_config
from rmplab.measure import benchmark_measure
from rmplab.montecarlo import dkw_epsilon, exact_functionals, functionals_cdf, ks_distance, simulate
from rmplab.partition import PartitionOfUnity, verify_partition
from rmplab.projective import DualPoint, ProjPoint, act, coefficient_log, cocycle, dual_pairing
from rmplab.smoothing import base_density, base_fourier, mass_by_quadrature
from rmplab.spectral import OperatorGrid, lambda_curve

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def cfg():
    return parse_config(default_config_text(), "<benchmark>")


@pytest.fixture(scope="module")
def estimates(cfg):
    return ex.run_estimate(cfg)


def random_words(rng, count, max_len=10):
    """Products of i.i.d. benchmark atoms with random word lengths."""
    mats = benchmark_measure().matrices
    out = np.broadcast_to(np.eye(2), (count, 2, 2)).copy()
    lengths = rng.integers(1, max_len + 1, count)
    for step in range(max_len):
        live = lengths > step
        letters = rng.integers(0, 2, count)
        out[live] = np.einsum("nij,njk->nik", mats[letters[live]], out[live])
    return out


def random_points(rng, count):
    return [ProjPoint.from_vector(v) for v in rng.standard_normal((count, 2))]


def test_cocycle_additivity(record):
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    count = 100_000
    g1s, g2s = random_words(rng, count), random_words(rng, count)
    worst = 0.0
    for g2, g1, x in zip(g2s, g1s, random_points(rng, count)):
        lhs = cocycle(g2 @ g1, x)
        rhs = cocycle(g2, act(g1, x)) + cocycle(g1, x)
        worst = max(worst, abs(lhs - rhs))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 10
    record(1, ok, f"max |defect| {worst:.2e} (tol 1e-10), {elapsed:.1f} s (< 10 s)")
    assert ok


def test_coefficient_split(record):
    start = time.perf_counter()
    rng = np.random.default_rng(2)
    count = 10_000
    gs = random_words(rng, count)
    xs = random_points(rng, count)
    ys = [DualPoint.from_vector(v) for v in rng.standard_normal((count, 2))]
    worst = 0.0
    for g, x, y in zip(gs, xs, ys):
        split = cocycle(g, x) + math.log(dual_pairing(act(g, x), y))
        worst = max(worst, abs(coefficient_log(g, x, y) - split))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 5
    record(2, ok, f"max |defect| {worst:.2e} (tol 1e-9), {elapsed:.1f} s (< 5 s)")
    assert ok


def test_partition_of_unity(record):
    start = time.perf_counter()
    details, ok = [], True
    y = DualPoint.from_vector([1, 1])
    for zeta in (1.0, 0.25):
        check = verify_partition(PartitionOfUnity(y, zeta, 60), 10_000, seed=3, c1_k_max=40)
        ok &= check.ok
        details.append(f"zeta={zeta}: support {check.support_ok}, overlap {check.overlap_ok}, "
                       f"sum err {check.sum_error:.1e}, max C1/bound {check.c1_ratio:.3f}")
    elapsed = time.perf_counter() - start
    ok = ok and elapsed < 30
    record(3, ok, "; ".join(details) + f"; {elapsed:.1f} s (< 30 s)")
    assert ok


def test_kernel_contract(record):
    start = time.perf_counter()
    mass = mass_by_quadrature()
    u = np.linspace(-1000, 1000, 10_000)
    positive = bool(np.all(base_density(u) > 0))
    outside = np.concatenate((np.linspace(1.0 + 1e-12, 100, 5000), -np.linspace(1.0 + 1e-12, 100, 5000)))
    vanishes = bool(np.all(base_fourier(outside) == 0.0))
    bounded = float(np.max(np.abs(base_fourier(np.linspace(-1, 1, 10_000)))))
    elapsed = time.perf_counter() - start
    ok = abs(mass - 1) <= 1e-8 and positive and vanishes and bounded <= 1 and elapsed < 10
    record(4, ok, f"|mass - 1| {abs(mass - 1):.1e}, positive {positive}, zero beyond 1 {vanishes}, "
                  f"max |transform| {bounded:.12f}, {elapsed:.1f} s (< 10 s)")
    assert ok


def test_oracle_equivalence(cfg, record):
    start = time.perf_counter()
    m = benchmark_measure()
    exact = functionals_cdf(exact_functionals(m, cfg.x_point, cfg.y_point, 12))
    band = dkw_epsilon(10**6, 0.01)
    dists = []
    for s in range(20):
        f = simulate(m, cfg.x_point, cfg.y_point, [12], 10**6, cfg.seed + s)[12]
        dists.append(ks_distance(exact, functionals_cdf(f)))
    elapsed = time.perf_counter() - start
    worst = max(dists)
    ok = worst <= band and elapsed < 120
    record(5, ok, f"max KS over 20 seeds {worst:.5f} vs 99% DKW band {band:.5f}, {elapsed:.1f} s (< 120 s)")
    assert ok


def test_characteristic_function_identity(cfg, estimates, record):
    start = time.perf_counter()
    gamma = estimates.gamma
    xis = np.linspace(-10, 10, 50)
    err, worst_xi = ex.characteristic_function_check(cfg.measure(), cfg.x_point, cfg.y_point, 8,
                                                     gamma, cfg.A, xis)
    elapsed = time.perf_counter() - start
    ok = err <= 1e-6 and elapsed < 60
    record(6, ok, f"max error {err:.2e} at xi = {worst_xi:.3f} over 50 frequencies (tol 1e-6), "
                  f"{elapsed:.1f} s (< 60 s)")
    assert ok


def test_spectral_expansion(cfg, estimates, record):
    start = time.perf_counter()
    curve = lambda_curve(cfg.measure(), OperatorGrid.circle(4096))
    slope = curve.cubic_remainder_slope()
    elapsed = time.perf_counter() - start
    se_g = math.hypot(curve.fit_std_error[0], estimates.gamma_se)
    se_r = math.hypot(curve.fit_std_error[1], estimates.rho_sq_se)
    dg = abs(curve.fitted_gamma - estimates.gamma)
    dr = abs(curve.fitted_rho_sq - estimates.rho_sq)
    ok = dg <= 3 * se_g and dr <= 3 * se_r and slope >= 2.7 and elapsed < 120
    record(7, ok, f"gamma {curve.fitted_gamma:.8f} vs {estimates.gamma:.8f} ({dg / se_g:.2f} se), "
                  f"rho^2 {curve.fitted_rho_sq:.7f} vs {estimates.rho_sq:.7f} ({dr / se_r:.2f} se), "
                  f"cubic slope {slope:.3f} (>= 2.7), {elapsed:.1f} s (< 120 s)")
    assert ok


@pytest.fixture(scope="module")
def flagship(cfg, estimates):
    """Berry-Esseen and local limit runs on shared samples; returns reports and total runtime."""
    ex.clear_sample_cache()
    start = time.perf_counter()
    be = ex.run_be_experiment(cfg, estimates)
    llt = ex.run_llt_experiment(cfg, estimates)
    elapsed = time.perf_counter() - start
    ex.clear_sample_cache()
    return be, llt, elapsed


def test_berry_esseen_rate(flagship, record):
    be, _, elapsed = flagship
    g = be.gaps()
    ok = -0.65 <= be.slope <= -0.35 and g[4096] < g[64] / 4 and elapsed < 1800
    record(8, ok, f"slope {be.slope:.4f} (in [-0.65, -0.35]), gap(4096)/gap(64) {be.ratio:.4f} (< 0.25), "
                  f"{elapsed:.0f} s for criteria 8 and 9 (< 1800 s)")
    assert ok


def test_local_limit_convergence(flagship, record):
    _, llt, elapsed = flagship
    dev = llt.sup_dev()
    limit = 0.1 * llt.scale
    ok = llt.decreasing and dev[4096] < limit and elapsed < 1800
    record(9, ok, f"sup-dev {dev[64]:.4f} at n=64 -> {dev[4096]:.4f} at n=4096 "
                  f"(limit {limit:.4f}), decreasing {llt.decreasing}")
    assert ok


def test_large_deviations(cfg, estimates, record):
    start = time.perf_counter()
    rep = ex.run_ld_experiment(cfg, estimates)
    elapsed = time.perf_counter() - start
    parts = []
    for ev, fit in rep.fits.items():
        if fit.identifiable:
            parts.append(f"{ev} slope {fit.slope:.4f} CI [{fit.ci_low:.4f}, {fit.ci_high:.4f}]")
        else:
            freqs = [r[4] for r in rep.rows if r[0] == ev]
            parts.append(f"{ev} not identifiable (frequencies {freqs})")
    ok = all(f.negative for f in rep.fits.values()) and elapsed < 300
    record(10, ok, "; ".join(parts) + f"; {elapsed:.0f} s (< 300 s)")
    assert ok


def test_determinism(cfg, estimates, tmp_path, record):
    small = cfg.with_overrides(n_grid=[64, 128, 256], samples=200_000, ld_samples=200_000)
    names = ("be_gaps.csv", "llt.csv", "ld_rates.csv", "ld_fit.csv")
    outs = {}
    for workers in (1, 3):
        out = tmp_path / f"w{workers}"
        ex.clear_sample_cache()
        ex.run_be_experiment(small, estimates, out, workers=workers)
        ex.run_llt_experiment(small, estimates, out, workers=workers)
        ex.run_ld_experiment(small, estimates, out, workers=workers)
        outs[workers] = {n: (out / n).read_bytes() for n in names}
    ex.clear_sample_cache()
    same = [n for n in names if outs[1][n] == outs[3][n]]
    ok = len(same) == len(names)
    record(11, ok, f"byte-identical for workers 1 vs 3: {', '.join(same)}")
    assert ok
