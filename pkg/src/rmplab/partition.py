"""Smooth partitions of unity subordinate to log-annuli around a projective hyperplane."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .projective import DualPoint

PLATEAU = 0.1
VERIFY_TOL = 1e-12


def _smoothstep(s: np.ndarray) -> np.ndarray:
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3 - 2 * s)


def _smoothstep_slope(s: np.ndarray) -> np.ndarray:
    inside = (s > 0) & (s < 1)
    return np.where(inside, 6 * s * (1 - s), 0.0)


def chi_tilde(t) -> np.ndarray:
    """Even bump: 1 for |t| <= 0.1, 0 for |t| >= 0.9, chi(t) + chi(t - 1) = 1 on [0, 1]."""
    t = np.asarray(t, dtype=float)
    return 1.0 - _smoothstep((np.abs(t) - PLATEAU) / (1 - 2 * PLATEAU))


def chi_tilde_slope(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return -np.sign(t) * _smoothstep_slope((np.abs(t) - PLATEAU) / (1 - 2 * PLATEAU)) / (1 - 2 * PLATEAU)


class PartitionError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class PartitionOfUnity:
    """chi_k(w) = chi_tilde(log d(w, H_y) / zeta + k) for k = 0..K, plus the tail 1 - sum_k chi_k."""

    y: DualPoint
    zeta: float
    K: int

    def distance(self, w) -> np.ndarray:
        """d(w, H_y) for unit vectors w (shape (d,) or (N, d))."""
        w = np.asarray(w, dtype=float)
        return np.minimum(1.0, np.abs(w @ self.y.rep))

    def _level(self, d) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(d) / self.zeta

    def chi_at_distance(self, k: int, d) -> np.ndarray:
        return chi_tilde(self._level(d) + k)

    def weights_at_distance(self, d) -> np.ndarray:
        """Matrix (N, K+1) of chi_k values."""
        lv = np.atleast_1d(self._level(d))
        return chi_tilde(lv[:, None] + np.arange(self.K + 1)[None, :])

    def tail_at_distance(self, d) -> np.ndarray:
        """Closed form of 1 - sum_{k<=K} chi_k; vanishes when log d / zeta >= -K - 0.1."""
        r = -(self._level(d) + self.K)
        r = np.asarray(r, dtype=float)
        return np.where(r <= 0, 0.0, np.where(r >= 1, 1.0, chi_tilde(r - 1)))

    def chi(self, k: int, w) -> np.ndarray:
        return self.chi_at_distance(k, self.distance(w))

    def tail(self, w) -> np.ndarray:
        return self.tail_at_distance(self.distance(w))

    def annulus(self, k: int) -> tuple[float, float]:
        """Open interval of distances forming the annulus T_k."""
        return float(np.exp(-(k + 1) * self.zeta)), float(np.exp(-(k - 1) * self.zeta))

    def c1_norm(self, k: int, points: int = 4001, rel_step: float = 1e-5) -> float:
        """sup|chi_k| + sup |d chi_k / d phi| by central differences along the geodesic
        w(phi) = cos(phi) p + sin(phi) f orthogonal to H_y, where d(w, H_y) = sin(phi).

        The step is relative to phi so that annuli far below 1e-5 are resolved.
        """
        lo, hi = self.annulus(k)
        phi = np.arcsin(np.geomspace(lo, min(hi, 1.0), points))
        h = rel_step * phi
        fwd = self.chi_at_distance(k, np.sin(np.minimum(phi + h, np.pi / 2)))
        bwd = self.chi_at_distance(k, np.sin(phi - h))
        span = np.minimum(phi + h, np.pi / 2) - (phi - h)
        slope = np.abs(fwd - bwd) / span
        return float(np.max(self.chi_at_distance(k, np.sin(phi))) + np.max(slope))

    def c1_bound(self, k: int) -> float:
        return 12.0 / self.zeta * np.exp(k * self.zeta)


def _random_unit(rng: np.random.Generator, dim: int, count: int, y: np.ndarray) -> np.ndarray:
    """Random unit vectors whose distances to H_y are spread over many orders of magnitude."""
    v = rng.standard_normal((count, dim))
    v -= np.outer(v @ y, y)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    target = np.exp(-rng.uniform(0, 40, count)) * rng.choice([-1.0, 1.0], count)
    w = np.sqrt(1 - target**2)[:, None] * v + target[:, None] * y[None, :]
    return w / np.linalg.norm(w, axis=1, keepdims=True)


@dataclass
class PartitionCheck:
    support_ok: bool
    overlap_ok: bool
    sum_error: float
    c1_ratio: float
    points: int

    @property
    def ok(self) -> bool:
        return self.support_ok and self.overlap_ok and self.sum_error <= VERIFY_TOL and self.c1_ratio <= 1.0


def verify_partition(part: PartitionOfUnity, points: int = 10_000, seed: int = 0,
                     c1_k_max: int | None = None) -> PartitionCheck:
    rng = np.random.default_rng(seed)
    w = _random_unit(rng, part.y.dim, points, np.asarray(part.y.rep))
    d = part.distance(w)
    d = d[d > 0]
    weights = part.weights_at_distance(d)
    ks = np.arange(part.K + 1)
    lo = np.exp(-(ks + 1) * part.zeta)
    hi = np.exp(-(ks - 1) * part.zeta)
    outside = (d[:, None] <= lo[None, :]) | (d[:, None] >= hi[None, :])
    support_ok = bool(np.all(weights[outside] == 0))
    overlap_ok = bool(np.all((weights > 0).sum(axis=1) <= 2))
    total = weights.sum(axis=1) + part.tail_at_distance(d)
    sum_error = float(np.max(np.abs(total - 1)))
    kmax = part.K if c1_k_max is None else min(part.K, c1_k_max)
    ratio = max(part.c1_norm(k) / part.c1_bound(k) for k in range(kmax + 1))
    return PartitionCheck(support_ok, overlap_ok, sum_error, ratio, int(d.size))


def build_partition(y: DualPoint, zeta: float, K: int, verify_points: int = 10_000,
                    seed: int = 0) -> PartitionOfUnity:
    if not (0 < zeta <= 1):
        raise ValueError(f"zeta must lie in (0, 1], got {zeta}")
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    part = PartitionOfUnity(y, float(zeta), int(K))
    check = verify_partition(part, verify_points, seed, c1_k_max=40)
    if not check.ok:
        raise PartitionError(f"partition invariants failed: {check}")
    return part


def count_for(n: int, scale_constant: float, zeta: float) -> int:
    """Largest k with k <= scale_constant * log(n) / zeta."""
    return int(np.floor(scale_constant * np.log(n) / zeta + 1e-12))


@dataclass(frozen=True, eq=False)
class Aggregates:
    """Phi_{n,xi}(w) = sum_{k<=K_n} e^{+-i xi k zeta / sqrt n} chi_k(w) and Phi*_n = 1 - sum chi_k."""

    partition: PartitionOfUnity
    n: int
    xi: float
    count: int
    sign: str

    def phases(self) -> np.ndarray:
        s = 1.0 if self.sign == "+" else -1.0
        k = np.arange(self.count + 1)
        return np.exp(s * 1j * self.xi * k * self.partition.zeta / np.sqrt(self.n))

    def _weights(self, d) -> np.ndarray:
        return self.partition.weights_at_distance(d)[:, : self.count + 1]

    def phi_at_distance(self, d) -> np.ndarray:
        return self._weights(d) @ self.phases()

    def tail_at_distance(self, d) -> np.ndarray:
        return 1.0 - self._weights(d).sum(axis=1)

    def phi(self, w) -> np.ndarray:
        return self.phi_at_distance(np.atleast_1d(self.partition.distance(w)))

    def tail(self, w) -> np.ndarray:
        return self.tail_at_distance(np.atleast_1d(self.partition.distance(w)))

    def combined_at_distance(self, d) -> np.ndarray:
        return self.phi_at_distance(d) + self.tail_at_distance(d)


def phi_aggregates(partition: PartitionOfUnity, n: int, xi: float, scale_constant: float,
                   sign: str = "+", zeta: float | None = None) -> Aggregates:
    """sign '+' uses phases e^{i xi k / sqrt n} (unit scale, needs zeta = 1); '-' uses e^{-i xi k zeta / sqrt n}."""
    if sign not in ("+", "-"):
        raise ValueError("sign must be '+' or '-'")
    if zeta is not None and abs(zeta - partition.zeta) > 1e-15:
        raise ValueError(f"partition built with zeta={partition.zeta}, aggregates requested zeta={zeta}")
    if sign == "+" and partition.zeta != 1.0:
        raise ValueError("the '+' convention is defined for the unit-scale partition (zeta = 1)")
    count = count_for(n, scale_constant, partition.zeta)
    if count > partition.K:
        raise ValueError(f"partition has K={partition.K} < required {count}")
    return Aggregates(partition, int(n), float(xi), count, sign)


def holder_seminorm(func_of_distance, alpha: float, points: int = 2500,
                    smallest: float = 1e-9) -> float:
    """sup |f(w) - f(w')| / d(w, w')^alpha over w, w' on a geodesic crossing H_y orthogonally.

    f depends on w only through d(w, H_y) = |sin(phi)|; same-side pairs dominate, and on one side
    d(w, w') = sin|phi - phi'|.
    """
    phi = np.concatenate((np.geomspace(smallest, 0.05, points // 2),
                          np.linspace(0.05, np.pi / 2, points - points // 2)[1:]))
    vals = np.asarray(func_of_distance(np.sin(phi)))
    best = 0.0
    step = 256
    for s in range(0, phi.size, step):
        dphi = np.abs(phi[s:s + step, None] - phi[None, :])
        dist = np.sin(np.minimum(dphi, np.pi / 2))
        diff = np.abs(vals[s:s + step, None] - vals[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(dist > 0, diff / dist**alpha, 0.0)
        best = max(best, float(q.max()))
    return best
