"""Estimates of the Lyapunov exponent, the CLT variance, the stationary measure and its regularity."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import chain_points
from .measure import MatrixMeasure, convolution_enumerate
from .montecarlo import _cdf, simulate
from .projective import DualPoint, ProjPoint, canonical_rows
from .rng import stream_states

DEFAULT_BURN_IN = 1000
MIN_TUBE_COUNT = 50


@dataclass(frozen=True)
class LyapunovEstimate:
    gamma_hat: float
    std_error: float
    n_used: int
    samples_used: int
    seed: int
    burn_in: int = DEFAULT_BURN_IN
    norm_substitution_bound: float = 0.0


@dataclass(frozen=True)
class VarianceEstimate:
    rho_sq_hat: float
    method: str
    std_error: float
    degenerate: bool = False


def _e1(d: int) -> ProjPoint:
    e = np.zeros(d)
    e[0] = 1.0
    return ProjPoint.from_vector(e)


def _lyapunov_from_sigma(sigma: np.ndarray, n: int, samples: int, seed: int, d: int,
                         burn_in: int) -> LyapunovEstimate:
    g = float(sigma.mean() / n)
    se = float(sigma.std(ddof=1) / np.sqrt(samples) / n) if samples > 1 else float("nan")
    return LyapunovEstimate(g, se, n, samples, seed, burn_in, float(np.log(np.sqrt(d)) / n))


def _variance_from_sigma(sigma: np.ndarray, n: int, gamma_hat: float) -> VarianceEstimate:
    dev2 = (sigma - n * gamma_hat) ** 2
    rho_sq = float(dev2.mean() / n)
    se = float(dev2.std(ddof=1) / np.sqrt(dev2.size) / n) if dev2.size > 1 else float("nan")
    degenerate = rho_sq <= 1e-12 * max(1.0, gamma_hat**2)
    return VarianceEstimate(rho_sq, "clt-empirical", se, degenerate)


def estimate_lyapunov(measure: MatrixMeasure, n: int, samples: int, seed: int,
                      x: ProjPoint | None = None, burn_in: int = DEFAULT_BURN_IN,
                      workers: int = 1) -> LyapunovEstimate:
    """Mean of sigma(S_n, x)/n over paths whose start has been mixed for `burn_in` steps."""
    x = x or _e1(measure.dim)
    f = simulate(measure, x, DualPoint.from_vector(x.rep), [n], samples, seed, workers, burn_in)[n]
    return _lyapunov_from_sigma(f.sigma, n, samples, seed, measure.dim, burn_in)


def estimate_variance_clt(measure: MatrixMeasure, n: int, samples: int, seed: int,
                          gamma_hat: float, x: ProjPoint | None = None,
                          burn_in: int = DEFAULT_BURN_IN, workers: int = 1) -> VarianceEstimate:
    """Mean square of sigma(S_n, x) - n*gamma_hat, divided by n."""
    x = x or _e1(measure.dim)
    f = simulate(measure, x, DualPoint.from_vector(x.rep), [n], samples, seed, workers, burn_in)[n]
    return _variance_from_sigma(f.sigma, n, gamma_hat)


def estimate_constants(measure: MatrixMeasure, n: int, samples: int, seed: int,
                       x: ProjPoint | None = None, burn_in: int = DEFAULT_BURN_IN,
                       workers: int = 1) -> tuple[LyapunovEstimate, VarianceEstimate]:
    """Both estimates from one set of paths; the variance is centred at the path mean."""
    x = x or _e1(measure.dim)
    f = simulate(measure, x, DualPoint.from_vector(x.rep), [n], samples, seed, workers, burn_in)[n]
    lyap = _lyapunov_from_sigma(f.sigma, n, samples, seed, measure.dim, burn_in)
    return lyap, _variance_from_sigma(f.sigma, n, lyap.gamma_hat)


def exact_mean_sigma(measure: MatrixMeasure, x: ProjPoint, n: int) -> float:
    prods, w = convolution_enumerate(measure, n)
    return float(w @ np.log(np.linalg.norm(prods @ x.rep, axis=1)))


def richardson_lyapunov(measure: MatrixMeasure, x: ProjPoint | None = None,
                        ns=(8, 10, 12)) -> float:
    """Extrapolate E sigma(S_n, x)/n = gamma + b/n + c/n^2 + ... from exact enumeration."""
    x = x or _e1(measure.dim)
    ns = np.asarray(ns, dtype=float)
    means = np.array([exact_mean_sigma(measure, x, int(n)) / n for n in ns])
    design = np.vstack([ns ** (-k) for k in range(len(ns))]).T
    return float(np.linalg.solve(design, means)[0])


@dataclass(frozen=True, eq=False)
class StationaryCloud:
    points: np.ndarray
    weights: np.ndarray
    burn_in: int
    chain_length: int

    @property
    def size(self) -> int:
        return self.points.shape[0]


def estimate_stationary(measure: MatrixMeasure, burn_in: int = DEFAULT_BURN_IN,
                        chain_length: int = 100_000, seed: int = 0, chains: int = 1,
                        x: ProjPoint | None = None) -> StationaryCloud:
    """Occupation measure of `chains` independent chains, concatenated by chain index."""
    x = x or _e1(measure.dim)
    mats = np.ascontiguousarray(measure.matrices)
    cdf = _cdf(np.asarray(measure.weights))
    states = stream_states(seed, np.arange(chains, dtype=np.uint64))
    pts = np.empty((chains * chain_length, measure.dim))
    for c in range(chains):
        block = np.empty((chain_length, measure.dim))
        chain_points(mats, cdf, np.ascontiguousarray(x.rep), states[c], burn_in, chain_length, block)
        pts[c * chain_length:(c + 1) * chain_length] = block
    pts = canonical_rows(pts)
    w = np.full(pts.shape[0], 1.0 / pts.shape[0])
    return StationaryCloud(pts, w, burn_in, chain_length * chains)


def default_test_functions(d: int, count: int = 20, seed: int = 0) -> list:
    """Smooth functions on projective space (even in v)."""
    if d == 2:
        fns = []
        for k in range(1, count // 2 + 1):
            fns.append(lambda v, k=k: np.cos(2 * k * np.arctan2(v[:, 1], v[:, 0])))
            fns.append(lambda v, k=k: np.sin(2 * k * np.arctan2(v[:, 1], v[:, 0])))
        return fns[:count]
    rng = np.random.default_rng(seed)
    fns = []
    for _ in range(count):
        a = rng.standard_normal((d, d))
        a = (a + a.T) / 2
        fns.append(lambda v, a=a: np.einsum("ni,ij,nj->n", v, a, v))
    return fns


def invariance_residuals(cloud: StationaryCloud, measure: MatrixMeasure,
                         test_functions=None) -> list[tuple[float, float]]:
    """(|nu(P phi) - nu(phi)|, 3 sd(phi)/sqrt(L)) for each test function."""
    fns = test_functions or default_test_functions(measure.dim)
    out = []
    for phi in fns:
        base = phi(cloud.points)
        pushed = np.zeros_like(base)
        for a, w in zip(measure.atoms, measure.weights):
            img = cloud.points @ a.entries.T
            pushed += w * phi(canonical_rows(img))
        resid = abs(float(cloud.weights @ pushed - cloud.weights @ base))
        sd = float(np.sqrt(cloud.weights @ (base - cloud.weights @ base) ** 2))
        out.append((resid, 3.0 * sd / np.sqrt(cloud.chain_length)))
    return out


@dataclass(frozen=True)
class RegularityFit:
    verdict: str
    eta_hat: float = float("nan")
    c_hat: float = float("nan")
    eta_std_error: float = float("nan")
    radii_used: int = 0


def regularity_exponent(cloud: StationaryCloud, y: DualPoint, r_grid) -> RegularityFit:
    """Slope of log nu(tube of radius r around H_y) against log r, on radii with enough hits."""
    r = np.asarray(r_grid, dtype=float)
    dist = np.abs(cloud.points @ y.rep)
    order = np.argsort(dist)
    sd = dist[order]
    cw = np.cumsum(cloud.weights[order])
    counts = np.searchsorted(sd, r, side="right")
    keep = counts >= MIN_TUBE_COUNT
    if np.count_nonzero(keep) < 2:
        return RegularityFit("no fit", radii_used=int(np.count_nonzero(keep)))
    mass = cw[counts[keep] - 1]
    lx, ly = np.log(r[keep]), np.log(mass)
    coef, res, *_ = np.polyfit(lx, ly, 1, full=True)
    k = lx.size
    if k > 2:
        resid = ly - np.polyval(coef, lx)
        s2 = float(resid @ resid) / (k - 2)
        se = float(np.sqrt(s2 / np.sum((lx - lx.mean()) ** 2)))
    else:
        se = float("nan")
    return RegularityFit("fit", float(coef[0]), float(np.exp(coef[1])), se, k)


def write_estimates(path, entries: dict) -> None:
    """entries: name -> value or (value, error)."""
    lines = []
    for name, val in entries.items():
        if isinstance(val, tuple):
            lines.append(f"{name} = {val[0]!r} ± {val[1]!r}")
        else:
            lines.append(f"{name} = {val!r}" if isinstance(val, float) else f"{name} = {val}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_estimates(path) -> dict:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'name = value'")
        name, rest = (s.strip() for s in line.split("=", 1))
        if "±" in rest:
            v, e = rest.split("±", 1)
            out[name] = (float(v), float(e))
        else:
            try:
                out[name] = float(rest)
            except ValueError:
                out[name] = rest
    return out
