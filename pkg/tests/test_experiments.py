import math

import numpy as np
import pytest

from rmplab import experiments as ex
from rmplab.config import parse_config
from rmplab.estimators import richardson_lyapunov
from rmplab.measure import benchmark_measure
from rmplab.montecarlo import dkw_epsilon, exact_functionals, run_paths
from rmplab.partition import PartitionOfUnity, count_for
from rmplab.projective import DualPoint, ProjPoint

BASE = """
measure.atom.1 = 2, 1; 1, 1
measure.atom.2 = 1, 1; 1, 2
x = 1, 0
y = 1, 1
"""
X = ProjPoint.from_vector([1, 0])
Y = DualPoint.from_vector([1, 1])


@pytest.fixture(scope="module")
def gamma():
    return richardson_lyapunov(benchmark_measure())


@pytest.fixture(scope="module")
def estimates(gamma):
    cfg = parse_config(BASE + "estimate.n = 1024\nestimate.samples = 20000\n")
    return ex.run_estimate(cfg)


def test_characteristic_function_at_zero(gamma):
    err, _ = ex.characteristic_function_check(benchmark_measure(), X, Y, 8, gamma, 1.5, [0.0])
    assert err <= 1e-12


def test_fn_atoms_have_unit_mass(gamma):
    f = exact_functionals(benchmark_measure(), X, Y, 8)
    count = count_for(8, 1.5, 1.0)
    vals, mass = ex.fn_atoms(f, PartitionOfUnity(Y, 1.0, count + 2), count, gamma)
    assert mass.sum() == pytest.approx(1.0, abs=1e-12)


def test_pipeline_check_n8(gamma, tmp_path):
    cfg = parse_config(BASE)
    rep = ex.fn_pipeline_check(cfg, gamma, out=tmp_path)
    assert rep.cf_max_error <= 1e-6
    assert rep.single_term_error <= 1e-6
    assert rep.window_max_error <= 1e-6
    assert math.isfinite(rep.sandwich_constant)
    assert rep.ok
    assert "pass" in (tmp_path / "pipeline_check.txt").read_text()


def test_cf_identity_n10_at_one_frequency(gamma):
    err, _ = ex.characteristic_function_check(benchmark_measure(), X, Y, 10, gamma, 1.5, [0.3])
    assert err <= 1e-6


def test_be_exact_vs_monte_carlo(estimates):
    m = benchmark_measure()
    exact = exact_functionals(m, X, Y, 12)
    mc = run_paths(m, X, Y, 12, 200_000, seed=9, record_end=False)
    g_exact, _ = ex.be_gap(exact, estimates.gamma, estimates.rho)
    g_mc, _ = ex.be_gap(mc, estimates.gamma, estimates.rho)
    assert abs(g_exact - g_mc) <= dkw_epsilon(200_000)


def test_llt_exact_vs_monte_carlo_at_zero(estimates):
    m = benchmark_measure()
    exact = ex.llt_table(exact_functionals(m, X, Y, 12), estimates.gamma, estimates.rho, -0.5, 0.5, 1)
    samples = 200_000
    mc = ex.llt_table(run_paths(m, X, Y, 12, samples, seed=9, record_end=False),
                      estimates.gamma, estimates.rho, -0.5, 0.5, 1)
    p_exact = exact[0][2] / math.sqrt(12)
    p_mc = mc[0][2] / math.sqrt(12)
    half = 3.29 * math.sqrt(p_exact * (1 - p_exact) / samples)
    assert abs(p_mc - p_exact) <= half


def test_llt_empty_window(estimates):
    f = exact_functionals(benchmark_measure(), X, Y, 10)
    rows = ex.llt_table(f, estimates.gamma, estimates.rho, 0.3, 0.3, 21)
    # atoms are continuous in value, so no atom sits exactly on the degenerate window
    assert all(r[2] == 0.0 and r[3] == 0.0 for r in rows)


def test_window_probability_counts():
    f = exact_functionals(benchmark_measure(), X, Y, 2)
    vals = np.array([0.0, 1.0, 2.0, 3.0])
    p = ex.window_probability(f, vals, np.array([0.5, -1.0]), np.array([2.0, 10.0]))
    assert np.allclose(p, [0.5, 1.0])


def test_ld_large_epsilon(estimates, tmp_path):
    cfg = parse_config(BASE + "ld.epsilon = 5\nld.samples = 5000\nld.n_grid = 4, 8, 16\n")
    rep = ex.run_ld_experiment(cfg, estimates, tmp_path)
    assert all(r[2] == 0 for r in rep.rows if r[0] == "cocycle_deviation")
    assert not rep.fits["cocycle_deviation"].identifiable
    for ev, n, mc, exact, eps in rep.crosscheck:
        assert abs(mc - exact) <= eps


def test_rate_fit_recovers_slope():
    rng = np.random.default_rng(0)
    n = np.array([10, 20, 30, 40, 50])
    p = 0.3 * np.exp(-0.08 * n)
    m = np.full(n.size, 10**6)
    k = rng.binomial(m, p)
    fit = ex.fit_exponential_rate(n, k, m)
    assert fit.identifiable and fit.negative
    assert fit.ci_low <= -0.08 <= fit.ci_high


def test_rate_fit_unidentifiable():
    fit = ex.fit_exponential_rate([1, 2, 3], [0, 0, 0], [100, 100, 100])
    assert not fit.identifiable and not fit.negative


def test_degenerate_be():
    cfg = parse_config("measure.atom.1 = 2, 0; 0, 2\nx = 1, 0\ny = 1, 0\nn_grid = 4, 8\n")
    est = ex.Estimates(math.log(2), 0.0, 0.0, 0.0)
    rep = ex.run_be_experiment(cfg, est)
    assert rep.verdict.startswith("degenerate")
    f = exact_functionals(cfg.measure(), cfg.x_point, cfg.y_point, 5)
    assert np.allclose(f.coeff_log, 5 * math.log(2))


def test_auto_functional_meets_the_attractor():
    y = ex.auto_functional(benchmark_measure())
    f = run_paths(benchmark_measure(), X, y, 64, 20_000, seed=1, record_end=False)
    assert np.mean(f.log_dist <= -2) > 0.01


def test_be_small_run_is_worker_independent(estimates, tmp_path):
    cfg = parse_config(BASE + "n_grid = 20, 40\nsamples = 150000\n")
    a, b = tmp_path / "a", tmp_path / "b"
    ex.clear_sample_cache()
    ex.run_be_experiment(cfg, estimates, a, workers=1)
    ex.clear_sample_cache()
    ex.run_be_experiment(cfg, estimates, b, workers=3)
    ex.clear_sample_cache()
    assert (a / "be_gaps.csv").read_bytes() == (b / "be_gaps.csv").read_bytes()


def test_report_without_outputs(tmp_path):
    text = ex.build_report(tmp_path)
    assert text.startswith("Experiment report")
