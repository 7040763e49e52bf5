"""Experiment drivers: Berry-Esseen gaps, local limit windows, large deviations, pipeline identities."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize, special

from .config import ExperimentConfig
from .estimators import estimate_constants, read_estimates, write_estimates
from .measure import (ENUMERATION_CAP, AssumptionReport, MatrixMeasure, _attractor, check_model,
                      check_proximal, word_product)
from .montecarlo import (PathFunctionals, dkw_epsilon, empirical_cdf, exact_functionals, simulate)
from .partition import PartitionOfUnity, count_for, phi_aggregates
from .projective import DualPoint, ProjPoint
from .smoothing import approximants, conjugate_cf, upper_trapezoid
from .spectral import OperatorGrid, apply_power_exact, lambda_curve, write_curve_csv

ESTIMATES_FILE = "estimates.txt"
AUTO_EXACT_SIZE = 1 << 16
DEGENERATE_VARIANCE = 1e-12


class MissingEstimatesError(RuntimeError):
    pass


@dataclass(frozen=True)
class Estimates:
    gamma: float
    gamma_se: float
    rho_sq: float
    rho_sq_se: float

    @property
    def rho(self) -> float:
        return math.sqrt(max(self.rho_sq, 0.0))

    @property
    def degenerate(self) -> bool:
        return self.rho_sq <= DEGENERATE_VARIANCE


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(v) for v in row])


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------- estimates and spectrum


def run_estimate(cfg: ExperimentConfig, out=None, workers: int = 1, seed: int | None = None) -> Estimates:
    s = cfg.seed if seed is None else seed
    lyap, var = estimate_constants(cfg.measure(), cfg.estimate_n, cfg.estimate_samples, s,
                                   x=cfg.x_point, burn_in=cfg.burn_in, workers=workers)
    est = Estimates(lyap.gamma_hat, lyap.std_error, var.rho_sq_hat, var.std_error)
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_estimates(Path(out) / ESTIMATES_FILE, {
            "gamma_hat": (est.gamma, est.gamma_se),
            "rho_sq_hat": (est.rho_sq, est.rho_sq_se),
            "n": cfg.estimate_n, "samples": cfg.estimate_samples, "seed": s, "burn_in": cfg.burn_in,
        })
    return est


def load_estimates(out) -> Estimates:
    path = Path(out) / ESTIMATES_FILE
    if not path.exists():
        raise MissingEstimatesError(f"no estimates found at {path}; run `rmplab estimate` first")
    vals = read_estimates(path)
    try:
        g, gse = vals["gamma_hat"]
        r, rse = vals["rho_sq_hat"]
    except (KeyError, TypeError, ValueError):
        raise MissingEstimatesError(f"{path} is incomplete; rerun `rmplab estimate`") from None
    return Estimates(g, gse, r, rse)


def run_spectrum(cfg: ExperimentConfig, out=None):
    measure = cfg.measure()
    grid = OperatorGrid.for_dimension(measure.dim, cfg.spectrum_grid)
    curve = lambda_curve(measure, grid)
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_curve_csv(Path(out) / "lambda_curve.csv", curve)
        gap = "unavailable" if curve.gap_at_zero is None else repr(float(curve.gap_at_zero))
        lines = [
            f"grid size: {curve.grid_size}{' (approximate)' if curve.approximate else ''}",
            f"fitted gamma: {curve.fitted_gamma!r} +- {curve.fit_std_error[0]!r}",
            f"fitted rho^2: {curve.fitted_rho_sq!r} +- {curve.fit_std_error[1]!r}",
            f"spectral gap at zero (second eigenvalue modulus): {gap}",
            f"cubic remainder slope: {curve.cubic_remainder_slope()!r}",
        ]
        (Path(out) / "spectrum.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return curve


def assumption_report(measure: MatrixMeasure) -> AssumptionReport:
    return check_model(measure)


# ---------------------------------------------------------------- sampling


_SAMPLE_CACHE: dict = {}


def clear_sample_cache() -> None:
    _SAMPLE_CACHE.clear()


def _use_exact(measure: MatrixMeasure, n: int, exact: bool) -> bool:
    size = measure.size**n
    if exact:
        if size > ENUMERATION_CAP:
            raise ValueError(f"--exact requested but {measure.size}^{n} exceeds the enumeration cap")
        return True
    return size <= AUTO_EXACT_SIZE


def coefficient_samples(measure: MatrixMeasure, x: ProjPoint, y: DualPoint, n_grid, samples: int,
                        seed: int, workers: int = 1, exact: bool = False) -> dict[int, PathFunctionals]:
    """Path functionals at each n: exact law when enumeration is small (or forced), else Monte Carlo.

    Results are memoized per process so that the Berry-Esseen and local limit experiments share
    the same samples.
    """
    key = (tuple(np.asarray(measure.matrices).ravel()), tuple(measure.weights), tuple(x.rep),
           tuple(y.rep), tuple(n_grid), samples, seed, exact)
    if key in _SAMPLE_CACHE:
        return _SAMPLE_CACHE[key]
    out: dict[int, PathFunctionals] = {}
    mc = []
    for n in n_grid:
        if _use_exact(measure, n, exact):
            out[n] = exact_functionals(measure, x, y, n)
        else:
            mc.append(n)
    if mc:
        out.update(simulate(measure, x, y, mc, samples, seed, workers))
    out = {n: out[n] for n in n_grid}
    _SAMPLE_CACHE[key] = out
    return out


def _mode(funcs: PathFunctionals) -> str:
    return "exact" if funcs.weights is not None else "monte-carlo"


def _fit_slope(n, vals) -> tuple[float, float]:
    x = np.log(np.asarray(n, dtype=float))
    y = np.log(np.asarray(vals, dtype=float))
    if x.size < 2:
        return float("nan"), float("nan")
    coef, cov = np.polyfit(x, y, 1, cov=True) if x.size > 2 else (np.polyfit(x, y, 1), np.full((2, 2), np.nan))
    return float(coef[0]), float(np.sqrt(cov[0, 0]))


# ---------------------------------------------------------------- Berry-Esseen


@dataclass
class BEReport:
    verdict: str
    rows: list = field(default_factory=list)  # (n, gap, trunc_frac, samples, seed, mode)
    slope: float = float("nan")
    slope_se: float = float("nan")
    estimates: Estimates | None = None
    centering_bias: float = float("nan")
    assumptions: str = ""

    def gaps(self) -> dict[int, float]:
        acc: dict[int, list] = {}
        for n, gap, *_ in self.rows:
            acc.setdefault(n, []).append(gap)
        return {n: float(np.mean(v)) for n, v in acc.items()}

    @property
    def ratio(self) -> float:
        g = self.gaps()
        ns = sorted(g)
        return g[ns[-1]] / g[ns[0]] if len(ns) > 1 and g[ns[0]] > 0 else float("nan")

    def summary(self) -> str:
        lines = [f"Berry-Esseen experiment: {self.verdict}"]
        if self.estimates is not None:
            e = self.estimates
            lines.append(f"gamma_hat = {e.gamma!r} +- {e.gamma_se!r}; rho_sq_hat = {e.rho_sq!r} +- {e.rho_sq_se!r}")
        if self.assumptions:
            lines.append(self.assumptions)
        for n, gap in sorted(self.gaps().items()):
            lines.append(f"  n = {n:6d}  gap = {gap:.6f}")
        if self.rows:
            lines.append(f"fitted slope of log gap vs log n: {self.slope:.4f} +- {self.slope_se:.4f} (target -0.5)")
            lines.append(f"gap(last) / gap(first) = {self.ratio:.4f}")
            lines.append(f"centering bias sqrt(n_max) |gamma_hat - gamma| bound: {self.centering_bias:.3g}")
        return "\n".join(lines)


def be_gap(funcs: PathFunctionals, gamma: float, rho: float, b_points: int = 10_000) -> tuple[float, float]:
    """sup over a b-grid on [-6 rho, 6 rho] of |P((coeff_log - n gamma)/sqrt n <= b) - H(b)|."""
    n = funcs.n
    z = (funcs.coeff_log - n * gamma) / math.sqrt(n)
    ecdf = empirical_cdf(z, funcs.weights)
    b = np.linspace(-6 * rho, 6 * rho, b_points)
    gap = float(np.max(np.abs(ecdf.query(b) - special.ndtr(b / rho))))
    return gap, ecdf


def truncation_fraction(funcs: PathFunctionals, A: float) -> float:
    return funcs.probability(funcs.log_dist <= -A * math.log(funcs.n))


def run_be_experiment(cfg: ExperimentConfig, est: Estimates, out=None, workers: int = 1,
                      exact: bool = False, seed: int | None = None) -> BEReport:
    measure = cfg.measure()
    assumptions = assumption_report(measure)
    if est.degenerate:
        rep = BEReport("degenerate: rho^2 = 0, the normalized law has no Gaussian limit", estimates=est,
                       assumptions=assumptions.summary())
        _emit_be(rep, out)
        return rep
    base = cfg.seed if seed is None else seed
    rows = []
    for s in range(cfg.seeds):
        sd = base + s
        data = coefficient_samples(measure, cfg.x_point, cfg.y_point, cfg.n_grid, cfg.samples, sd, workers, exact)
        for n in cfg.n_grid:
            f = data[n]
            gap, _ = be_gap(f, est.gamma, est.rho, cfg.b_points)
            rows.append((n, gap, truncation_fraction(f, cfg.A), f.size, sd, _mode(f)))
    rep = BEReport("ok", rows, estimates=est, assumptions=assumptions.summary())
    g = rep.gaps()
    ns = sorted(g)
    rep.slope, rep.slope_se = _fit_slope(ns, [g[n] for n in ns])
    rep.centering_bias = math.sqrt(ns[-1]) * est.gamma_se
    _emit_be(rep, out)
    return rep


def _emit_be(rep: BEReport, out) -> None:
    if out is None:
        return
    Path(out).mkdir(parents=True, exist_ok=True)
    write_csv(Path(out) / "be_gaps.csv", ["n", "gap", "trunc_frac", "samples", "seed"],
              [r[:5] for r in rep.rows])
    (Path(out) / "be_summary.txt").write_text(rep.summary() + "\n", encoding="utf-8")


# ---------------------------------------------------------------- local limit


def window_probability(funcs: PathFunctionals, shifted: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """P(lo <= shifted <= hi) for each (lo, hi) pair, from sorted values."""
    order = np.argsort(shifted, kind="stable")
    vals = shifted[order]
    w = np.full(vals.size, 1.0 / vals.size) if funcs.weights is None else funcs.weights[order]
    cum = np.concatenate(([0.0], np.cumsum(w)))
    i_lo = np.searchsorted(vals, lo, side="left")
    i_hi = np.searchsorted(vals, hi, side="right")
    return np.maximum(cum[i_hi] - cum[i_lo], 0.0)


def llt_table(funcs: PathFunctionals, gamma: float, rho: float, a: float, b: float,
              t_points: int = 21) -> list[tuple]:
    n = funcs.n
    t = np.linspace(-3 * rho * math.sqrt(n), 3 * rho * math.sqrt(n), t_points)
    centered = funcs.coeff_log - n * gamma
    p = window_probability(funcs, centered, a - t, b - t)
    a_hat = math.sqrt(n) * p
    target = np.exp(-t**2 / (2 * rho**2 * n)) * (b - a) / (math.sqrt(2 * math.pi) * rho)
    return [(n, float(tt), float(ah), float(tg), float(abs(ah - tg))) for tt, ah, tg in zip(t, a_hat, target)]


@dataclass
class LLTReport:
    verdict: str
    rows: list = field(default_factory=list)  # (n, t, a_hat, target, abs_dev)
    scale: float = float("nan")
    uniformity: list = field(default_factory=list)  # (x_angle, y_angle, n, sup_dev, scale)

    def sup_dev(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for n, _, _, _, dev in self.rows:
            out[n] = max(out.get(n, 0.0), dev)
        return out

    @property
    def decreasing(self) -> bool:
        d = self.sup_dev()
        ns = sorted(d)
        return len(ns) > 1 and d[ns[-1]] < d[ns[0]]

    def summary(self) -> str:
        lines = [f"Local limit experiment: {self.verdict}",
                 f"target peak (b-a)/(sqrt(2 pi) rho_hat) = {self.scale:.6g}"]
        for n, dev in sorted(self.sup_dev().items()):
            lines.append(f"  n = {n:6d}  sup_t |A_hat - target| = {dev:.6f}  ({dev / self.scale:.2%} of peak)")
        if self.rows:
            lines.append(f"sup-deviation decreases from first to last n: {self.decreasing}")
        if self.uniformity:
            lines.append("uniformity spot-check over an (x, y) grid (a sampling of the uniform claim):")
            worst = max(self.uniformity, key=lambda r: r[3])
            for xa, ya, n, dev, sc in self.uniformity:
                lines.append(f"  x angle {xa:.4f}  y angle {ya:.4f}  n = {n}  sup dev / peak = {dev / sc:.4f}")
            lines.append(f"  worst pair: x angle {worst[0]:.4f}, y angle {worst[1]:.4f}, ratio {worst[3] / worst[4]:.4f}")
        return "\n".join(lines)


def _angle_point(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])


def run_llt_experiment(cfg: ExperimentConfig, est: Estimates, out=None, workers: int = 1,
                       exact: bool = False, seed: int | None = None,
                       uniformity_samples: int = 100_000) -> LLTReport:
    if est.degenerate:
        rep = LLTReport("degenerate: rho^2 = 0")
        _emit_llt(rep, out)
        return rep
    measure = cfg.measure()
    sd = cfg.seed if seed is None else seed
    data = coefficient_samples(measure, cfg.x_point, cfg.y_point, cfg.n_grid, cfg.samples, sd, workers, exact)
    rows = []
    for n in cfg.n_grid:
        rows.extend(llt_table(data[n], est.gamma, est.rho, cfg.a, cfg.b, cfg.t_points))
    scale = (cfg.b - cfg.a) / (math.sqrt(2 * math.pi) * est.rho)
    rep = LLTReport("ok", rows, scale)
    if cfg.uniformity_grid > 0 and measure.dim == 2:
        rep.uniformity = llt_uniformity(cfg, est, cfg.uniformity_grid, uniformity_samples, sd, workers)
    _emit_llt(rep, out)
    return rep


def llt_uniformity(cfg: ExperimentConfig, est: Estimates, size: int, samples: int, seed: int,
                   workers: int = 1) -> list[tuple]:
    """Sup-deviation at the largest n for a size x size grid of (x, y) directions in the plane."""
    measure = cfg.measure()
    n = cfg.n_grid[-1]
    scale = (cfg.b - cfg.a) / (math.sqrt(2 * math.pi) * est.rho)
    out = []
    for i in range(size):
        xa = math.pi * i / size
        for j in range(size):
            ya = math.pi * (j + 0.5) / size
            x = ProjPoint.from_vector(_angle_point(xa))
            y = DualPoint.from_vector(_angle_point(ya))
            f = simulate(measure, x, y, [n], samples, seed, workers)[n]
            dev = max(r[4] for r in llt_table(f, est.gamma, est.rho, cfg.a, cfg.b, cfg.t_points))
            out.append((xa, ya, n, dev, scale))
    return out


def _emit_llt(rep: LLTReport, out) -> None:
    if out is None:
        return
    Path(out).mkdir(parents=True, exist_ok=True)
    write_csv(Path(out) / "llt.csv", ["n", "t", "a_hat", "target", "abs_dev"], rep.rows)
    if rep.uniformity:
        write_csv(Path(out) / "llt_uniformity.csv", ["x_angle", "y_angle", "n", "sup_dev", "peak"], rep.uniformity)
    (Path(out) / "llt_summary.txt").write_text(rep.summary() + "\n", encoding="utf-8")


# ---------------------------------------------------------------- large deviations


def auto_functional(measure: MatrixMeasure) -> DualPoint:
    """Functional whose kernel passes through the attracting direction of a proximal word.

    That direction lies in the support of the stationary measure, so small distances to H_y
    are actually visited.
    """
    rep = check_proximal(measure)
    if rep.proximal_witness is None:
        raise ValueError("ld.y = auto needs a proximal word; none was found")
    v = _attractor(word_product(measure, rep.proximal_witness))
    basis = np.eye(measure.dim)
    e = basis[int(np.argmin(np.abs(v)))]
    f = e - (e @ v) * v
    return DualPoint.from_vector(f)


@dataclass
class RateFit:
    slope: float
    ci_low: float
    ci_high: float
    intercept: float
    identifiable: bool

    @property
    def negative(self) -> bool:
        return self.identifiable and self.ci_high < 0


def fit_exponential_rate(n, counts, samples) -> RateFit:
    """Binomial maximum likelihood for log p = a + s n, with a 95% Wald interval for s."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(counts, dtype=float)
    m = np.asarray(samples, dtype=float)
    if k.sum() == 0 or np.count_nonzero(k) < 2 and np.all(k[k > 0] == m[k > 0]):
        return RateFit(float("nan"), float("nan"), float("nan"), float("nan"), False)
    nc = n - n.mean()

    def nll(p):
        logp = np.minimum(p[0] + p[1] * nc, -1e-12)
        return -float(np.sum(k * logp + (m - k) * np.log1p(-np.exp(logp))))

    pos = k > 0
    start = np.array([math.log(max(k.sum() / m.sum(), 1e-300)), 0.0])
    if pos.sum() >= 2:
        c = np.polyfit(nc[pos], np.log(k[pos] / m[pos]), 1)
        start = np.array([c[1], c[0]])
    res = optimize.minimize(nll, start, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 20000})
    a, s = res.x
    logp = a + s * nc
    p = np.exp(logp)
    # Fisher information of the log-linear binomial model
    wgt = m * p / (1 - p)
    info = np.array([[wgt.sum(), (wgt * nc).sum()], [(wgt * nc).sum(), (wgt * nc * nc).sum()]])
    try:
        cov = np.linalg.inv(info)
        se = math.sqrt(cov[1, 1])
        ident = bool(np.isfinite(se)) and np.count_nonzero(k) >= 2
    except np.linalg.LinAlgError:
        se, ident = float("inf"), False
    z = 1.959963984540054
    return RateFit(float(s), float(s - z * se), float(s + z * se), float(a - s * n.mean()), ident)


@dataclass
class LDReport:
    rows: list  # (event, n, count, samples, frequency)
    fits: dict
    epsilon: float
    y: DualPoint
    crosscheck: list = field(default_factory=list)  # (event, n, mc_freq, exact_freq, dkw)

    def summary(self) -> str:
        lines = [f"Large deviation experiment, epsilon = {self.epsilon}",
                 f"functional y = {np.array2string(self.y.rep, precision=6)}"]
        for ev, fit in self.fits.items():
            if fit.identifiable:
                lines.append(f"  {ev}: slope {fit.slope:.5f}, 95% CI [{fit.ci_low:.5f}, {fit.ci_high:.5f}], "
                             f"negative: {fit.negative}")
            else:
                lines.append(f"  {ev}: slope not identifiable (events observed at fewer than two n)")
        for ev, n, mc, ex, eps in self.crosscheck:
            lines.append(f"  cross-check {ev} at n = {n}: Monte Carlo {mc:.6f}, exact {ex:.6f}, "
                         f"|diff| {abs(mc - ex):.2e} vs DKW {eps:.2e}")
        return "\n".join(lines)


def ld_events(f: PathFunctionals, gamma: float, eps: float) -> dict[str, np.ndarray]:
    return {
        "cocycle_deviation": np.abs(f.sigma - f.n * gamma) >= f.n * eps,
        "hyperplane_proximity": f.log_dist <= -eps * f.n,
    }


def run_ld_experiment(cfg: ExperimentConfig, est: Estimates, out=None, workers: int = 1,
                      seed: int | None = None, crosscheck_n: int | None = 12) -> LDReport:
    measure = cfg.measure()
    y = auto_functional(measure) if cfg.ld_y == "auto" else DualPoint.from_vector(
        np.array([float(v) for v in cfg.ld_y.replace(",", " ").split()]))
    sd = cfg.seed if seed is None else seed
    eps = cfg.ld_epsilon
    data = simulate(measure, cfg.x_point, y, cfg.ld_n_grid, cfg.ld_samples, sd, workers)
    rows = []
    for n in cfg.ld_n_grid:
        for ev, mask in ld_events(data[n], est.gamma, eps).items():
            c = int(np.count_nonzero(mask))
            rows.append((ev, n, c, cfg.ld_samples, c / cfg.ld_samples))
    fits = {}
    for ev in ("cocycle_deviation", "hyperplane_proximity"):
        sel = [r for r in rows if r[0] == ev]
        fits[ev] = fit_exponential_rate([r[1] for r in sel], [r[2] for r in sel], [r[3] for r in sel])
    rep = LDReport(rows, fits, eps, y)
    if crosscheck_n and measure.size**crosscheck_n <= AUTO_EXACT_SIZE:
        ex = exact_functionals(measure, cfg.x_point, y, crosscheck_n)
        mc = simulate(measure, cfg.x_point, y, [crosscheck_n], cfg.ld_samples, sd, workers)[crosscheck_n]
        ex_ev = ld_events(ex, est.gamma, eps)
        for ev, mask in ld_events(mc, est.gamma, eps).items():
            rep.crosscheck.append((ev, crosscheck_n, float(mask.mean()), ex.probability(ex_ev[ev]),
                                   dkw_epsilon(cfg.ld_samples)))
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        write_csv(Path(out) / "ld_rates.csv", ["event", "n", "count", "samples", "frequency"], rows)
        write_csv(Path(out) / "ld_fit.csv", ["event", "slope", "ci_low", "ci_high", "identifiable"],
                  [(ev, f.slope, f.ci_low, f.ci_high, f.identifiable) for ev, f in fits.items()])
        (Path(out) / "ld_summary.txt").write_text(rep.summary() + "\n", encoding="utf-8")
    return rep


# ---------------------------------------------------------------- distribution F_n and pipeline identities


def fn_atoms(funcs: PathFunctionals, part: PartitionOfUnity, count: int, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Atoms and masses of F_n: (sigma - n gamma - k)/sqrt n with mass w chi_k, plus the tail term."""
    n = funcs.n
    w = funcs.weights if funcs.weights is not None else np.full(funcs.size, 1.0 / funcs.size)
    dist = np.exp(funcs.log_dist)
    chis = part.weights_at_distance(dist)[:, : count + 1]
    tail = 1.0 - chis.sum(axis=1)
    base = funcs.sigma - n * gamma
    k = np.arange(count + 1)
    vals = np.concatenate(((base[:, None] - k[None, :]).ravel(), base)) / math.sqrt(n)
    mass = np.concatenate(((w[:, None] * chis).ravel(), w * tail))
    keep = mass > 0
    return vals[keep], mass[keep]


@dataclass
class PipelineReport:
    n: int
    cf_max_error: float
    cf_worst_xi: float
    sandwich_constant: float
    sandwich_worst_b: float
    window_max_error: float
    window_worst_t: float
    single_term_error: float
    tolerance: float = 1e-6

    @property
    def cf_ok(self) -> bool:
        return self.cf_max_error <= self.tolerance

    @property
    def sandwich_ok(self) -> bool:
        return math.isfinite(self.sandwich_constant)

    @property
    def window_ok(self) -> bool:
        return self.window_max_error <= self.tolerance and self.single_term_error <= self.tolerance

    @property
    def ok(self) -> bool:
        return self.cf_ok and self.sandwich_ok and self.window_ok

    def summary(self) -> str:
        return "\n".join([
            f"Pipeline check at n = {self.n}: {'pass' if self.ok else 'FAIL'}",
            f"  (i) characteristic function of F_n, direct vs transfer operator: max error "
            f"{self.cf_max_error:.3e} (worst xi = {self.cf_worst_xi:.4f})",
            f"  (ii) sandwich holds with fitted constant C = {self.sandwich_constant:.4f} "
            f"(binding at b = {self.sandwich_worst_b:.4f})",
            f"  (iii) window functional, direct vs Fourier: max error {self.window_max_error:.3e} "
            f"(worst t = {self.window_worst_t:.4f}); single term k = 0: {self.single_term_error:.3e}",
        ])


def characteristic_function_check(measure: MatrixMeasure, x: ProjPoint, y: DualPoint, n: int,
                                  gamma: float, A: float, xis) -> tuple[float, float]:
    """Max |phi_{F_n}(xi) from atoms - e^{i xi sqrt(n) gamma} P^n_{-i xi/sqrt n}(Phi_{n,xi} + Phi*)(x)|."""
    count = count_for(n, A, 1.0)
    part = PartitionOfUnity(y, 1.0, count + 2)
    funcs = exact_functionals(measure, x, y, n)
    vals, mass = fn_atoms(funcs, part, count, gamma)
    direct = conjugate_cf((vals, mass), np.asarray(xis))
    errs = []
    for xi, dv in zip(xis, direct):
        agg = phi_aggregates(part, n, xi, A, "+")

        def phi(pts, agg=agg):
            return agg.combined_at_distance(part.distance(pts))

        via_op = np.exp(1j * xi * math.sqrt(n) * gamma) * apply_power_exact(measure, -1j * xi / math.sqrt(n), phi, x, n)
        errs.append(abs(dv - via_op))
    i = int(np.argmax(errs))
    return float(errs[i]), float(xis[i])


def sandwich_constant(funcs: PathFunctionals, part: PartitionOfUnity, count: int, gamma: float,
                      A: float, b_grid) -> tuple[float, float]:
    """Smallest C with F_n(b - 1/sqrt n) - C/sqrt n <= L_n(b) <= F_n(b + 1/sqrt n) + C/sqrt n on the grid."""
    n = funcs.n
    rn = math.sqrt(n)
    vals, mass = fn_atoms(funcs, part, count, gamma)
    fn = empirical_cdf(vals, mass / mass.sum())
    keep = funcs.log_dist > -A * math.log(n)
    w = funcs.weights if funcs.weights is not None else np.full(funcs.size, 1.0 / funcs.size)
    z = (funcs.coeff_log - n * gamma) / rn
    order = np.argsort(z)
    zs, ws = z[order], (w * keep)[order]
    cum = np.concatenate(([0.0], np.cumsum(ws)))
    b = np.asarray(b_grid, dtype=float)
    ln = cum[np.searchsorted(zs, b, side="right")]
    upper = ln - fn.query(b + 1 / rn)
    lower = fn.query(b - 1 / rn) - ln
    worst = np.maximum(upper, lower)
    i = int(np.argmax(worst))
    return float(max(worst[i], 0.0) * rn), float(b[i])


def window_identity_check(measure: MatrixMeasure, x: ProjPoint, y: DualPoint, n: int, gamma: float,
                          zeta: float, B: float, delta: float, a: float, b: float, t_values) -> tuple[float, float, float]:
    """E_n(psi+_{t,k} chi_k) summed over k plus the tail, by a direct atom sum with real-space
    convolution against the Fourier-integral form built on powers of the twisted operator.

    Returns (max error over t, worst t, error of the single k = 0 term at t = 0).
    """
    psi = upper_trapezoid(a, b, zeta)
    plus = approximants(psi, delta).plus
    count = count_for(n, B, zeta)
    part = PartitionOfUnity(y, zeta, count + 2)
    funcs = exact_functionals(measure, x, y, n)
    w = funcs.weights
    chis = part.weights_at_distance(np.exp(funcs.log_dist))[:, : count + 1]
    tail = 1.0 - chis.sum(axis=1)
    base = funcs.sigma - n * gamma
    rn = math.sqrt(n)

    def direct(t: float, k_only: int | None = None) -> float:
        total = 0.0
        ks = range(count + 1) if k_only is None else [k_only]
        for k in ks:
            sel = chis[:, k] > 0
            for j in np.nonzero(sel)[0]:
                total += w[j] * chis[j, k] * plus.direct(base[j] + t - k * zeta)
        if k_only is None:
            for j in np.nonzero(tail > 0)[0]:
                total += w[j] * tail[j] * plus.direct(base[j] + t)
        return rn * total

    # Fourier side: nodes on (-cutoff, cutoff); the exponent reaches |sigma - n gamma| + |t| + k zeta
    reach = float(np.max(np.abs(base))) + max(abs(float(v)) for v in t_values) + (count + 1) * zeta
    nodes, wts = plus.quadrature(reach + abs(plus.center()))
    eta = np.concatenate((-nodes[::-1], nodes))
    weta = np.concatenate((wts[::-1], wts))
    transform = plus.fourier(eta)
    k = np.arange(count + 1)

    def agg(pts):
        d = part.distance(pts)
        ch = part.weights_at_distance(d)[:, : count + 1]
        tl = 1.0 - ch.sum(axis=1)
        ph = np.exp(-1j * np.outer(eta, k * zeta))
        return ph @ ch.T + tl[None, :]

    def single(pts):
        d = part.distance(pts)
        return np.broadcast_to(part.weights_at_distance(d)[:, 0], (eta.size, d.size))

    power = apply_power_exact(measure, 1j * eta, agg, x, n)
    power0 = apply_power_exact(measure, 1j * eta, single, x, n)

    def fourier(t: float, pw) -> float:
        integrand = transform * np.exp(1j * eta * (t - n * gamma)) * pw
        return float((rn / (2 * math.pi) * np.sum(weta * integrand)).real)

    errs = [abs(direct(t) - fourier(t, power)) for t in t_values]
    i = int(np.argmax(errs))
    single_err = abs(direct(0.0, 0) - fourier(0.0, power0))
    return float(errs[i]), float(t_values[i]), float(single_err)


def fn_pipeline_check(cfg: ExperimentConfig, gamma: float, n: int | None = None, out=None) -> PipelineReport:
    measure = cfg.measure()
    n = cfg.pipeline_n if n is None else n
    if measure.size**n > ENUMERATION_CAP:
        raise ValueError(f"pipeline check needs exact enumeration; {measure.size}^{n} exceeds the cap")
    x, y = cfg.x_point, cfg.y_point
    xis = np.linspace(-10.0, 10.0, cfg.pipeline_frequencies)
    cf_err, cf_xi = characteristic_function_check(measure, x, y, n, gamma, cfg.A, xis)
    count = count_for(n, cfg.A, 1.0)
    part = PartitionOfUnity(y, 1.0, count + 2)
    funcs = exact_functionals(measure, x, y, n)
    z = (funcs.coeff_log[np.isfinite(funcs.coeff_log)] - n * gamma) / math.sqrt(n)
    b_grid = np.linspace(z.min() - 2, z.max() + 2, 4001)
    c_tilde, c_b = sandwich_constant(funcs, part, count, gamma, cfg.A, b_grid)
    t_values = [0.0, -0.5, 0.5, 1.3]
    win_err, win_t, single_err = window_identity_check(measure, x, y, n, gamma, cfg.zeta, cfg.B, cfg.delta,
                                                       cfg.a, cfg.b, t_values)
    rep = PipelineReport(n, cf_err, cf_xi, c_tilde, c_b, win_err, win_t, single_err)
    if out is not None:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "pipeline_check.txt").write_text(rep.summary() + "\n", encoding="utf-8")
    return rep


# ---------------------------------------------------------------- report


def build_report(out) -> str:
    out = Path(out)
    lines = ["Experiment report", "================="]
    est_path = out / ESTIMATES_FILE
    if est_path.exists():
        lines += ["", "Estimates:", est_path.read_text(encoding="utf-8").rstrip()]
    if (out / "spectrum.txt").exists():
        lines += ["", "Spectrum:", (out / "spectrum.txt").read_text(encoding="utf-8").rstrip()]
    if (out / "be_gaps.csv").exists():
        rows = read_csv(out / "be_gaps.csv")
        acc: dict[int, list] = {}
        for r in rows:
            acc.setdefault(int(r["n"]), []).append(float(r["gap"]))
        ns = sorted(acc)
        gaps = [float(np.mean(acc[n])) for n in ns]
        lines += ["", "Berry-Esseen gaps (sup_b |F_hat - H|):"]
        lines += [f"  n = {n:6d}  gap = {g:.6f}" for n, g in zip(ns, gaps)]
        if len(ns) > 1 and all(g > 0 for g in gaps):
            s, se = _fit_slope(ns, gaps)
            lines.append(f"  fitted slope: {s:.4f} +- {se:.4f} (target -0.5)")
    if (out / "llt.csv").exists():
        rows = read_csv(out / "llt.csv")
        sup: dict[int, float] = {}
        peak: dict[int, float] = {}
        for r in rows:
            n = int(r["n"])
            sup[n] = max(sup.get(n, 0.0), float(r["abs_dev"]))
            peak[n] = max(peak.get(n, 0.0), float(r["target"]))
        lines += ["", "Local limit sup-deviation table:", "       n   sup_t |A_hat - target|   relative to peak"]
        lines += [f"  {n:6d}   {sup[n]:.6f}               {sup[n] / peak[n] if peak[n] else float('nan'):.4f}"
                  for n in sorted(sup)]
    if (out / "llt_uniformity.csv").exists():
        rows = read_csv(out / "llt_uniformity.csv")
        ratios = [float(r["sup_dev"]) / float(r["peak"]) for r in rows]
        lines += ["", f"Uniformity spot-check over {len(rows)} (x, y) pairs (a sampling, not a proof): "
                      f"max relative sup-deviation {max(ratios):.4f}, median {float(np.median(ratios)):.4f}"]
    if (out / "ld_fit.csv").exists():
        lines += ["", "Large deviation rate fits:"]
        for r in read_csv(out / "ld_fit.csv"):
            lines.append(f"  {r['event']}: slope {r['slope']} CI [{r['ci_low']}, {r['ci_high']}] "
                         f"identifiable={r['identifiable']}")
    if (out / "pipeline_check.txt").exists():
        lines += ["", (out / "pipeline_check.txt").read_text(encoding="utf-8").rstrip()]
    text = "\n".join(lines) + "\n"
    (out / "report.txt").write_text(text, encoding="utf-8")
    return text
