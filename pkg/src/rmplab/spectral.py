"""Discretised transfer operators on projective space and their leading spectral data."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from .measure import MatrixMeasure
from .projective import ProjPoint, canonical_rows

DEFAULT_M = 4096
FIT_RADIUS = 0.3


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class OperatorGrid:
    """Carrier of grid functions: equispaced angles for d = 2, a point cloud otherwise."""

    dim: int
    size: int
    points: np.ndarray
    approximate: bool
    _tree: cKDTree | None = None

    @classmethod
    def circle(cls, size: int = DEFAULT_M) -> "OperatorGrid":
        theta = np.arange(size) * np.pi / size
        return cls(2, size, np.column_stack((np.cos(theta), np.sin(theta))), False)

    @classmethod
    def cloud(cls, dim: int, size: int, seed: int = 0) -> "OperatorGrid":
        if dim == 3:
            # golden-spiral points on the upper hemisphere
            k = np.arange(size) + 0.5
            z = 1.0 - k / size
            phi = k * np.pi * (3.0 - np.sqrt(5.0))
            r = np.sqrt(1.0 - z * z)
            pts = np.column_stack((r * np.cos(phi), r * np.sin(phi), z))
        else:
            pts = np.random.default_rng(seed).standard_normal((size, dim))
        pts = canonical_rows(pts)
        return cls(dim, size, pts, True, cKDTree(np.vstack((pts, -pts))))

    @classmethod
    def for_dimension(cls, dim: int, size: int = DEFAULT_M, seed: int = 0) -> "OperatorGrid":
        return cls.circle(size) if dim == 2 else cls.cloud(dim, size, seed)

    def angles(self) -> np.ndarray:
        if self.dim != 2:
            raise ValueError("angles are defined for d = 2 only")
        return np.arange(self.size) * np.pi / self.size

    def stencil(self, vecs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Interpolation indices and weights, each of shape (N, k), for unit vectors (N, d)."""
        if self.dim == 2:
            theta = np.mod(np.arctan2(vecs[:, 1], vecs[:, 0]), np.pi)
            pos = theta * (self.size / np.pi)
            i0 = np.floor(pos).astype(np.int64)
            frac = pos - i0
            i0 = np.mod(i0, self.size)
            i1 = np.mod(i0 + 1, self.size)
            return np.column_stack((i0, i1)), np.column_stack((1.0 - frac, frac))
        dist, idx = self._tree.query(vecs, k=4)
        idx = np.mod(idx, self.size)
        exact = dist[:, 0] < 1e-14
        wts = 1.0 / np.maximum(dist, 1e-300)
        wts[exact] = 0.0
        wts[exact, 0] = 1.0
        wts /= wts.sum(axis=1, keepdims=True)
        return idx, wts

    def interpolate(self, values: np.ndarray, vecs: np.ndarray) -> np.ndarray:
        idx, wts = self.stencil(np.atleast_2d(vecs))
        return np.sum(values[..., idx] * wts, axis=-1)

    def sample(self, fn) -> np.ndarray:
        return fn(self.points)


class TransferOperator:
    """Sparse representation of phi -> sum_a w_a e^{z sigma(g_a, x)} phi(g_a x) on a grid."""

    def __init__(self, measure: MatrixMeasure, grid: OperatorGrid):
        self.measure = measure
        self.grid = grid
        rows, cols, base, sig = [], [], [], []
        m = grid.size
        for a, w in zip(measure.atoms, measure.weights):
            img = grid.points @ a.entries.T
            nrm = np.linalg.norm(img, axis=1)
            idx, wts = grid.stencil(img / nrm[:, None])
            k = idx.shape[1]
            rows.append(np.repeat(np.arange(m), k))
            cols.append(idx.ravel())
            base.append((w * wts).ravel())
            sig.append(np.repeat(np.log(nrm), k))
        self._rows = np.concatenate(rows)
        self._cols = np.concatenate(cols)
        self._base = np.concatenate(base)
        self._sigma = np.concatenate(sig)
        self._cache: dict = {}

    def matrix(self, z: complex) -> sparse.csr_matrix:
        key = complex(z)
        mat = self._cache.get(key)
        if mat is None:
            if key == 0:
                data = self._base
            else:
                data = self._base * np.exp(key * self._sigma)
                if key.imag == 0:
                    data = data.real
            mat = sparse.csr_matrix((data, (self._rows, self._cols)),
                                    shape=(self.grid.size, self.grid.size))
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[key] = mat
        return mat

    def apply(self, z: complex, phi: np.ndarray) -> np.ndarray:
        return self.matrix(z) @ phi


def apply_operator(measure: MatrixMeasure, z: complex, phi: np.ndarray, grid: OperatorGrid,
                   operator: TransferOperator | None = None) -> np.ndarray:
    op = operator or TransferOperator(measure, grid)
    return op.apply(z, phi)


def apply_power_exact(measure: MatrixMeasure, z, phi, x: ProjPoint, n: int) -> np.ndarray:
    """n-th power of the operator at x, by recursion over the tree of images (no grid).

    `z` may be an array; `phi(points)` returns values of shape (N,) or (len(z), N).
    Telescoped cocycle sums along the tree are used, never product matrices.
    """
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    pts = x.rep[None, :]
    logw = np.zeros(1)
    sig = np.zeros(1)
    for _ in range(n):
        new_pts, new_logw, new_sig = [], [], []
        for a, w in zip(measure.atoms, measure.weights):
            img = pts @ a.entries.T
            nrm = np.linalg.norm(img, axis=1)
            new_pts.append(img / nrm[:, None])
            new_logw.append(logw + np.log(w))
            new_sig.append(sig + np.log(nrm))
        pts = np.vstack(new_pts)
        logw = np.concatenate(new_logw)
        sig = np.concatenate(new_sig)
    vals = np.asarray(phi(pts))
    if vals.ndim == 1:
        vals = np.broadcast_to(vals, (zz.size, vals.size))
    terms = np.exp(logw[None, :] + zz[:, None] * sig[None, :]) * vals
    out = terms.sum(axis=1)
    return out if np.ndim(z) else out[0]


def _normalise(phi: np.ndarray, ref: int) -> np.ndarray:
    p = phi[ref]
    if abs(p) > 0:
        phi = phi * (abs(p) / p)
    return phi / np.max(np.abs(phi))


def leading_eigen(measure: MatrixMeasure, z: complex, grid: OperatorGrid, tol: float = 1e-10,
                  max_iter: int = 20000, start: np.ndarray | None = None, ref_index: int = 0,
                  operator: TransferOperator | None = None) -> tuple[complex, np.ndarray, float]:
    """Power iteration with Rayleigh quotient; returns (lambda, eigenfunction, residual)."""
    op = operator or TransferOperator(measure, grid)
    mat = op.matrix(z)
    phi = np.ones(grid.size, dtype=complex) if start is None else np.asarray(start, complex).copy()
    phi = phi / np.max(np.abs(phi))
    resid = np.inf
    lam = 0j
    for _ in range(max_iter):
        img = mat @ phi
        lam = complex(np.vdot(phi, img) / np.vdot(phi, phi))
        resid = float(np.max(np.abs(img - lam * phi)) / np.max(np.abs(phi)))
        if resid <= tol:
            break
        top = np.max(np.abs(img))
        if top == 0:
            raise ConvergenceError("iterate vanished", resid)
        phi = img / top
    else:
        raise ConvergenceError(f"power iteration at z={z} did not converge", resid)
    return lam, _normalise(phi, ref_index), resid


def left_eigen(measure: MatrixMeasure, grid: OperatorGrid, tol: float = 1e-12,
               max_iter: int = 20000, operator: TransferOperator | None = None) -> np.ndarray:
    """Stationary grid mass: the left eigenvector of the z = 0 operator, summing to 1."""
    op = operator or TransferOperator(measure, grid)
    mt = op.matrix(0).T.tocsr()
    nu = np.full(grid.size, 1.0 / grid.size)
    for _ in range(max_iter):
        nxt = mt @ nu
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - nu)) <= tol * np.max(nu):
            return nxt
        nu = nxt
    raise ConvergenceError("left eigenvector did not converge", float(np.max(np.abs(nxt - nu))))


@dataclass
class GapEstimate:
    rho: float | None
    available: bool
    approximate: bool
    message: str = ""


def spectral_gap_at_zero(measure: MatrixMeasure, grid: OperatorGrid, iterations: int = 400,
                         seed: int = 0, operator: TransferOperator | None = None) -> GapEstimate:
    """Second-eigenvalue modulus from power iteration on the deflated z = 0 operator."""
    op = operator or TransferOperator(measure, grid)
    try:
        nu = left_eigen(measure, grid, operator=op)
    except ConvergenceError as exc:
        return GapEstimate(None, False, grid.approximate, f"gap estimate unavailable: {exc}")
    mat = op.matrix(0)
    phi = np.random.default_rng(seed).standard_normal(grid.size)
    phi -= nu @ phi
    logs = []
    for _ in range(iterations):
        phi = mat @ phi
        phi -= nu @ phi
        nrm = np.max(np.abs(phi))
        if nrm == 0 or not np.isfinite(nrm):
            break
        logs.append(np.log(nrm))
        phi /= nrm
        if nrm < 1e-200:
            break
    if len(logs) < 8:
        return GapEstimate(0.0, True, grid.approximate, "deflated operator annihilates the test vector")
    tail = np.array(logs[len(logs) // 2:])
    rho = float(np.exp(tail.mean()))
    return GapEstimate(min(rho, 1.0), True, grid.approximate)


@dataclass
class SpectralCurve:
    xi_grid: np.ndarray
    lambda_values: np.ndarray
    residuals: np.ndarray
    eigenfunctions: np.ndarray
    gap_at_zero: float | None
    fitted_gamma: float
    fitted_rho_sq: float
    fit_std_error: tuple = (float("nan"), float("nan"))
    approximate: bool = False
    grid_size: int = 0

    def value(self, xi: float) -> complex:
        k = int(np.argmin(np.abs(self.xi_grid - xi)))
        if abs(self.xi_grid[k] - xi) > 1e-12:
            raise KeyError(f"xi={xi} not on the curve grid")
        return complex(self.lambda_values[k])

    def interpolate(self, xi) -> np.ndarray:
        from scipy.interpolate import CubicSpline
        re = CubicSpline(self.xi_grid, self.lambda_values.real)
        im = CubicSpline(self.xi_grid, self.lambda_values.imag)
        return re(xi) + 1j * im(xi)

    def quadratic_model(self, xi) -> np.ndarray:
        g, r2 = self.fitted_gamma, self.fitted_rho_sq
        xi = np.asarray(xi, dtype=float)
        return 1 + 1j * g * xi - (r2 + g * g) / 2 * xi**2

    def cubic_remainder_slope(self, radius: float = FIT_RADIUS) -> float:
        sel = (self.xi_grid > 0) & (self.xi_grid <= radius + 1e-12)
        xi = self.xi_grid[sel]
        rem = np.abs(self.lambda_values[sel] - self.quadratic_model(xi))
        ok = rem > 0
        return float(np.polyfit(np.log(xi[ok]), np.log(rem[ok]), 1)[0])


def default_xi_grid(xi_max: float = 2.0, fit_points: int = 30, step: float = 0.02) -> np.ndarray:
    fine = np.linspace(0.01, FIT_RADIUS, fit_points)
    coarse = np.arange(FIT_RADIUS + step, xi_max + 1e-9, step)
    pos = np.concatenate((fine, coarse))
    return np.concatenate((-pos[::-1], [0.0], pos))


def _fit_expansion(xi: np.ndarray, lam: np.ndarray) -> tuple[float, float, tuple]:
    """Quartic least squares on log lambda: Re = a2 x^2 + a4 x^4, Im = b1 x + b3 x^3.

    Exponentiating gives lambda = 1 + i b1 x + (a2 - b1^2/2) x^2 + O(x^3), so b1 is gamma and
    -2 a2 is the variance. Working with the logarithm keeps gamma^2 out of the x^2 coefficient.
    """
    ll = np.log(lam)
    dr = np.column_stack((xi**2, xi**4))
    di = np.column_stack((xi, xi**3))
    a, *_ = np.linalg.lstsq(dr, ll.real, rcond=None)
    b, *_ = np.linalg.lstsq(di, ll.imag, rcond=None)
    gamma = float(b[0])
    rho_sq = float(-2 * a[0])

    def coef_se(design, y, coef):
        r = y - design @ coef
        dof = max(1, len(y) - design.shape[1])
        cov = np.linalg.inv(design.T @ design) * (r @ r) / dof
        return np.sqrt(np.diag(cov))

    se_gamma = float(coef_se(di, ll.imag, b)[0])
    se_rho = float(2 * coef_se(dr, ll.real, a)[0])
    return gamma, rho_sq, (se_gamma, se_rho)


def lambda_curve(measure: MatrixMeasure, grid: OperatorGrid, xi_grid=None, tol: float = 1e-10,
                 max_iter: int = 20000, with_gap: bool = True, refine: bool = True,
                 operator: TransferOperator | None = None) -> SpectralCurve:
    """Leading eigenvalue of the operator at z = i xi along a grid of xi, plus the expansion fit."""
    op = operator or TransferOperator(measure, grid)
    xi = np.asarray(default_xi_grid() if xi_grid is None else xi_grid, dtype=float)
    order = np.argsort(np.abs(xi), kind="stable")
    lam = np.empty(xi.size, dtype=complex)
    res = np.empty(xi.size)
    eig = np.empty((xi.size, grid.size), dtype=complex)
    warm = {1: None, -1: None}
    for k in order:
        side = 1 if xi[k] >= 0 else -1
        l, phi, r = leading_eigen(measure, 1j * xi[k], grid, tol, max_iter, warm[side], operator=op)
        lam[k], res[k], eig[k] = l, r, phi
        warm[side] = phi
    sel = np.abs(xi) <= FIT_RADIUS + 1e-12
    if np.count_nonzero(sel) >= 5:
        g, r2, se = _fit_expansion(xi[sel], lam[sel])
        if refine and grid.dim == 2 and grid.size >= 64:
            # discretisation error: repeat the fit on a grid of half the resolution
            coarse = OperatorGrid.circle(grid.size // 2)
            cop = TransferOperator(measure, coarse)
            lc = np.array([leading_eigen(measure, 1j * v, coarse, tol, max_iter, operator=cop)[0]
                           for v in xi[sel]])
            g2, r22, _ = _fit_expansion(xi[sel], lc)
            se = (max(se[0], abs(g - g2)), max(se[1], abs(r2 - r22)))
    else:
        g, r2, se = float("nan"), float("nan"), (float("nan"), float("nan"))
    gap = None
    if with_gap:
        ge = spectral_gap_at_zero(measure, grid, operator=op)
        gap = ge.rho
    return SpectralCurve(xi, lam, res, eig, gap, g, r2, se, grid.approximate, grid.size)


@dataclass
class LambdaEstimatesReport:
    xi0_hat: float
    c_fit: float
    degenerate: bool
    rows: list = field(default_factory=list)

    def summary(self) -> str:
        lines = [f"largest admissible xi0: {self.xi0_hat:.4g}", f"fitted constant c: {self.c_fit:.4g}"]
        if self.degenerate:
            lines.append("degenerate: fitted variance is not positive")
        for n, c2, c3 in self.rows:
            lines.append(f"n={n}: c needed (|xi| <= n^(1/6)) {c2:.4g}, (beyond) {c3:.4g}")
        return "\n".join(lines)


def _needed_constants(curve: SpectralCurve, n: int, xi0: float, s_min: float,
                      points: int) -> tuple[float, float]:
    g, r2 = curve.fitted_gamma, curve.fitted_rho_sq
    rn = np.sqrt(n)
    xi = np.linspace(s_min * rn, xi0 * rn, points)
    s = xi / rn
    twisted = np.exp(n * np.log(curve.interpolate(s) * np.exp(-1j * g * s)))
    gauss = np.exp(-r2 * xi**2 / 2)
    err = np.abs(twisted - gauss)
    inner = xi <= n ** (1 / 6)
    outer = ~inner
    c2 = float(np.max(err[inner] * rn / (xi[inner] ** 3 * gauss[inner]))) if inner.any() else 0.0
    c3 = float(np.max(err[outer] * rn / np.exp(-r2 * xi[outer] ** 2 / 4))) if outer.any() else 0.0
    return c2, c3


def lambda_estimates_check(curve: SpectralCurve, n_list=(64, 256, 1024), points: int = 400,
                           growth_limit: float = 2.0) -> LambdaEstimatesReport:
    """Check the three decay/approximation bounds for lambda^n at i xi / sqrt(n).

    The first bound reduces to log|lambda(i s)| <= -rho^2 s^2 / 3 for |s| <= xi0, independent of n.
    For the other two a single constant c must serve every n, so xi0 is shrunk until the constant
    needed at the largest n is within `growth_limit` of the one needed at the smallest n.
    Frequencies below the first resolved curve point are skipped: there the remainder is of the
    size of the fit noise and dividing by |xi|^3 only amplifies it.
    """
    r2 = curve.fitted_rho_sq
    if not (r2 > 0):
        return LambdaEstimatesReport(0.0, float("nan"), True)
    pos = np.sort(curve.xi_grid[curve.xi_grid > 0])
    s_min = float(pos[0])
    s_grid = np.linspace(s_min, pos[-1], points)
    ok = np.log(np.abs(curve.interpolate(s_grid))) <= -r2 * s_grid**2 / 3
    bad = np.nonzero(~ok)[0]
    if bad.size == 0:
        xi0 = float(pos[-1])
    elif bad[0] == 0:
        return LambdaEstimatesReport(0.0, float("nan"), False)
    else:
        xi0 = float(s_grid[bad[0] - 1])
    ns = sorted(int(n) for n in n_list)
    while xi0 > s_min:
        rows = [(n, *_needed_constants(curve, n, xi0, s_min, points)) for n in ns]
        first = max(rows[0][1], rows[0][2], 1e-12)
        last = max(rows[-1][1], rows[-1][2])
        if last <= growth_limit * first or len(ns) == 1:
            c_all = max(max(r[1], r[2]) for r in rows)
            return LambdaEstimatesReport(xi0, c_all, False, rows)
        xi0 *= 0.9
    return LambdaEstimatesReport(0.0, float("nan"), False)


@dataclass
class DecayFit:
    rho_k: float
    band: tuple
    norms: np.ndarray
    monotone_after_burn_in: bool


def trig_basket(grid: OperatorGrid, count: int = 20) -> np.ndarray:
    """Test functions: the zero function plus trigonometric polynomials in grid coordinates."""
    if grid.dim == 2:
        th = grid.angles()
        rows = [np.zeros(grid.size)]
        k = 0
        while len(rows) < count:
            rows.append(np.cos(2 * k * th))
            if len(rows) < count and k > 0:
                rows.append(np.sin(2 * k * th))
            k += 1
        return np.array(rows, dtype=complex)
    rng = np.random.default_rng(1)
    rows = [np.zeros(grid.size)]
    for _ in range(count - 1):
        a = rng.standard_normal(grid.dim)
        rows.append(np.cos(2 * grid.points @ a))
    return np.array(rows, dtype=complex)


def high_frequency_decay(measure: MatrixMeasure, grid: OperatorGrid, xi: float, n_max: int = 200,
                         operator: TransferOperator | None = None) -> DecayFit:
    """Fit the geometric decay rate of sup-norms of P_{i xi}^n applied to a test basket."""
    op = operator or TransferOperator(measure, grid)
    mat = op.matrix(1j * xi)
    basket = trig_basket(grid).T
    norms = []
    cur = basket
    for _ in range(n_max):
        cur = mat @ cur
        top = float(np.max(np.abs(cur)))
        norms.append(top)
        if top < 1e-250:
            break
    norms = np.array(norms)
    burn = len(norms) // 4
    ns = np.arange(1, len(norms) + 1)[burn:]
    ln = np.log(np.maximum(norms[burn:], 1e-300))
    if ln.size < 3:
        return DecayFit(0.0, (0.0, 0.0), norms, True)
    coef = np.polyfit(ns, ln, 1)
    resid = ln - np.polyval(coef, ns)
    se = float(np.sqrt((resid @ resid) / max(1, ln.size - 2) / np.sum((ns - ns.mean()) ** 2)))
    rho = float(np.exp(coef[0]))
    band = (float(np.exp(coef[0] - 1.96 * se)), float(np.exp(coef[0] + 1.96 * se)))
    monotone = bool(np.all(np.diff(norms[burn:]) <= 1e-12 * norms[burn:-1] + 1e-300))
    return DecayFit(min(rho, 1.0) if rho < 1 + 1e-9 else rho, band, norms, monotone)


def grid_refinement(measure: MatrixMeasure, xi: float, sizes=(512, 1024, 2048, 4096)) -> tuple[float, list]:
    """Observed convergence order s from |lambda_M - lambda_{2M}| ~ C / M^s (d = 2)."""
    vals = [leading_eigen(measure, 1j * xi, OperatorGrid.circle(m))[0] for m in sizes]
    diffs = [abs(vals[i + 1] - vals[i]) for i in range(len(vals) - 1)]
    m = np.array(sizes[:-1], dtype=float)
    ok = np.array(diffs) > 0
    if np.count_nonzero(ok) < 2:
        return float("inf"), diffs
    s = -float(np.polyfit(np.log(m[ok]), np.log(np.array(diffs)[ok]), 1)[0])
    return s, diffs


def write_curve_csv(path, curve: SpectralCurve) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["xi", "re_lambda", "im_lambda", "abs_lambda", "residual"])
        for x, l, r in zip(curve.xi_grid, curve.lambda_values, curve.residuals):
            wr.writerow([repr(float(x)), repr(float(l.real)), repr(float(l.imag)),
                         repr(float(abs(l))), repr(float(r))])
