"""Seeded, worker-count independent sampling of path functionals, and the exact small-n law."""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._kernels import walk_block
from .measure import MatrixMeasure, convolution_enumerate
from .projective import DualPoint, ProjPoint
from .rng import stream_states

BLOCK_SIZE = 1 << 16


@dataclass(frozen=True, eq=False)
class PathFunctionals:
    """Functionals of S_n x along many paths, stored column-wise.

    `weights` is None for Monte Carlo samples and holds exact atom masses otherwise.
    """

    n: int
    sigma: np.ndarray
    log_dist: np.ndarray
    end_points: np.ndarray | None = None
    weights: np.ndarray | None = None
    center: float | None = None

    @property
    def coeff_log(self) -> np.ndarray:
        return self.sigma + self.log_dist

    @property
    def sigma_centered(self) -> np.ndarray:
        return self.sigma - self.n * self.center if self.center is not None else self.sigma

    @property
    def size(self) -> int:
        return self.sigma.shape[0]

    @property
    def vanishing_count(self) -> int:
        return int(np.count_nonzero(np.isneginf(self.log_dist)))

    def probability(self, mask: np.ndarray) -> float:
        if self.weights is None:
            return float(np.count_nonzero(mask)) / self.size
        return float(self.weights[mask].sum())


def _cdf(weights: np.ndarray) -> np.ndarray:
    c = np.cumsum(weights)
    c[-1] = 1.0
    return c


def simulate(measure: MatrixMeasure, x: ProjPoint, y: DualPoint, checkpoints, samples: int,
             seed: int, workers: int = 1, burn_in: int = 0, record_end: bool = False,
             center: float | None = None) -> dict[int, PathFunctionals]:
    """Run `samples` paths up to max(checkpoints) and record functionals at every checkpoint.

    Path p always uses the stream (seed, p) and blocks are merged in path order, so the
    result does not depend on `workers`.
    """
    cps = np.array(sorted(set(int(c) for c in checkpoints)), dtype=np.int64)
    if cps.size == 0 or cps[0] < 1:
        raise ValueError("checkpoints must be positive integers")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    mats = np.ascontiguousarray(measure.matrices)
    cdf = _cdf(np.asarray(measure.weights))
    xv = np.ascontiguousarray(x.rep, dtype=float)
    fv = np.ascontiguousarray(y.rep, dtype=float)
    d = measure.dim
    sigma = np.empty((cps.size, samples))
    logd = np.empty((cps.size, samples))
    ends = np.empty((cps.size, samples, d)) if record_end else np.empty((1, 1, d))

    def run(start: int) -> None:
        stop = min(start + BLOCK_SIZE, samples)
        states = stream_states(seed, np.arange(start, stop, dtype=np.uint64))
        s_blk = np.empty((cps.size, stop - start))
        l_blk = np.empty((cps.size, stop - start))
        e_blk = np.empty((cps.size, stop - start, d)) if record_end else np.empty((1, 1, d))
        walk_block(mats, cdf, xv, fv, states, cps, int(burn_in), s_blk, l_blk, e_blk, record_end)
        sigma[:, start:stop] = s_blk
        logd[:, start:stop] = l_blk
        if record_end:
            ends[:, start:stop] = e_blk

    starts = range(0, samples, BLOCK_SIZE)
    if workers <= 1:
        for st in starts:
            run(st)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    out = {}
    for i, n in enumerate(cps):
        out[int(n)] = PathFunctionals(int(n), sigma[i], logd[i],
                                      ends[i] if record_end else None, None, center)
    return out


def run_paths(measure: MatrixMeasure, x: ProjPoint, y: DualPoint, n: int, samples: int,
              seed: int, workers: int = 1, burn_in: int = 0, record_end: bool = True,
              center: float | None = None) -> PathFunctionals:
    if n < 1:
        raise ValueError("n must be >= 1")
    return simulate(measure, x, y, [n], samples, seed, workers, burn_in, record_end, center)[n]


def exact_functionals(measure: MatrixMeasure, x: ProjPoint, y: DualPoint, n: int,
                      center: float | None = None) -> PathFunctionals:
    """Exact law of (sigma, log-distance) at step n from the enumerated convolution power."""
    prods, weights = convolution_enumerate(measure, n)
    v = prods @ x.rep
    nrm = np.linalg.norm(v, axis=1)
    ends = v / nrm[:, None]
    pair = np.minimum(np.abs(ends @ y.rep), 1.0)
    with np.errstate(divide="ignore"):
        logd = np.log(pair)
    return PathFunctionals(n, np.log(nrm), logd, ends, weights, center)


def direct_coefficient_log(measure: MatrixMeasure, x: ProjPoint, y: DualPoint, n: int) -> np.ndarray:
    """log |<f, S_n v>| straight from the product matrices (no split)."""
    prods, _ = convolution_enumerate(measure, n)
    c = np.abs((prods @ x.rep) @ y.rep)
    with np.errstate(divide="ignore"):
        return np.log(c)


@dataclass(frozen=True, eq=False)
class EmpiricalCDF:
    values: np.ndarray
    cumulative: np.ndarray
    count: int
    weighted: bool

    def query(self, b):
        """P(X <= b), right-continuous; accepts scalars or arrays."""
        idx = np.searchsorted(self.values, b, side="right")
        c = np.concatenate(([0.0], self.cumulative))
        out = c[idx]
        return float(out) if np.ndim(out) == 0 else out

    def left_limit(self, b):
        idx = np.searchsorted(self.values, b, side="left")
        c = np.concatenate(([0.0], self.cumulative))
        out = c[idx]
        return float(out) if np.ndim(out) == 0 else out

    @property
    def atoms(self) -> tuple[np.ndarray, np.ndarray]:
        return self.values, np.diff(np.concatenate(([0.0], self.cumulative)))


def empirical_cdf(values, weights=None) -> EmpiricalCDF:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("empirical c.d.f. of an empty sample")
    order = np.argsort(v, kind="stable")
    v = v[order]
    if weights is None:
        cum = np.arange(1, v.size + 1, dtype=float) / v.size
        return EmpiricalCDF(v, cum, v.size, False)
    w = np.asarray(weights, dtype=float).ravel()[order]
    if w.shape != v.shape or np.any(w < 0):
        raise ValueError("weights must be nonnegative and match the values")
    total = w.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"weights sum to {total}, not 1")
    cum = np.cumsum(w)
    cum[-1] = 1.0
    return EmpiricalCDF(v, cum, v.size, True)


def query(ecdf: EmpiricalCDF, b):
    return ecdf.query(b)


def functionals_cdf(funcs: PathFunctionals, values: np.ndarray | None = None) -> EmpiricalCDF:
    vals = funcs.coeff_log if values is None else values
    return empirical_cdf(vals, funcs.weights)


def ks_distance(a: EmpiricalCDF, b: EmpiricalCDF, tol: float = 1e-9) -> float:
    """Kolmogorov distance, probing each jump at +-tol so rounding-level ties do not count."""
    jumps = np.concatenate((a.values, b.values))
    jumps = jumps[np.isfinite(jumps)]
    probes = np.concatenate((jumps - tol, jumps + tol))
    return float(np.max(np.abs(a.query(probes) - b.query(probes))))


def dkw_epsilon(samples: int, alpha: float = 0.01) -> float:
    """Half-width of the Dvoretzky-Kiefer-Wolfowitz band at level 1 - alpha."""
    return float(np.sqrt(np.log(2.0 / alpha) / (2.0 * samples)))


def write_functionals_csv(path, funcs: PathFunctionals) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["path_index", "sigma", "log_dist", "coeff_log"])
        for i, (s, l, c) in enumerate(zip(funcs.sigma, funcs.log_dist, funcs.coeff_log)):
            wr.writerow([i, repr(float(s)), repr(float(l)), repr(float(c))])
