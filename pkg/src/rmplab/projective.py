"""Linear algebra on real projective space: norms, distances, actions, the norm cocycle."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEGENERACY_RTOL = 1e-12
SIGN_TOL = 1e-14
UNIT_TOL = 1e-12


class InvalidInputError(ValueError):
    pass


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise InvalidInputError("matrix has non-finite entries")
    return a


def operator_norm(m) -> float:
    """Largest singular value."""
    a = _as_matrix(m)
    return float(np.linalg.svd(a, compute_uv=False)[0])


def canonical(v) -> np.ndarray:
    """Unit vector with its first non-negligible coordinate positive."""
    u = np.asarray(v, dtype=float)
    if u.ndim != 1 or not np.isfinite(u).all():
        raise InvalidInputError("expected a finite 1-d vector")
    nrm = math.hypot(*u)
    if nrm == 0.0:
        raise InvalidInputError("zero vector has no projective class")
    u = u / nrm
    for c in u:
        if abs(c) > SIGN_TOL:
            if c < 0:
                u = -u
            break
    return u


def canonical_rows(vs: np.ndarray) -> np.ndarray:
    """Row-wise version of `canonical` for an (N, d) array."""
    u = vs / np.linalg.norm(vs, axis=1, keepdims=True)
    big = np.abs(u) > SIGN_TOL
    first = np.argmax(big, axis=1)
    sgn = np.sign(u[np.arange(len(u)), first])
    sgn[sgn == 0] = 1.0
    return u * sgn[:, None]


@dataclass(frozen=True, eq=False)
class ProjPoint:
    rep: np.ndarray

    @classmethod
    def from_vector(cls, v) -> "ProjPoint":
        u = canonical(v)
        u.setflags(write=False)
        return cls(u)

    @property
    def dim(self) -> int:
        return self.rep.shape[0]

    def __eq__(self, other):
        if not isinstance(other, ProjPoint):
            return NotImplemented
        return self.dim == other.dim and proj_distance(self, other) <= 1e-12

    def __hash__(self):
        return hash(tuple(np.round(self.rep, 10)))

    def __repr__(self):
        return f"ProjPoint({np.array2string(self.rep, precision=6)})"


@dataclass(frozen=True, eq=False)
class DualPoint:
    """A line of linear functionals; its kernel is the hyperplane H_y."""

    rep: np.ndarray

    @classmethod
    def from_vector(cls, f) -> "DualPoint":
        u = canonical(f)
        u.setflags(write=False)
        return cls(u)

    @property
    def dim(self) -> int:
        return self.rep.shape[0]

    def __eq__(self, other):
        if not isinstance(other, DualPoint):
            return NotImplemented
        return self.dim == other.dim and _sine(self.rep, other.rep) <= 1e-12

    def __hash__(self):
        return hash(tuple(np.round(self.rep, 10)))

    def __repr__(self):
        return f"DualPoint({np.array2string(self.rep, precision=6)})"


@dataclass(frozen=True, eq=False)
class GroupAtom:
    entries: np.ndarray
    op_norm: float
    inv_op_norm: float
    big_n: float

    @classmethod
    def from_matrix(cls, m) -> "GroupAtom":
        a = _as_matrix(m).copy()
        s = np.linalg.svd(a, compute_uv=False)
        d = a.shape[0]
        det = abs(np.linalg.det(a))
        if s[0] == 0.0 or det < DEGENERACY_RTOL * s[0] ** d:
            raise InvalidInputError(f"matrix is singular or nearly so (|det| = {det:.3e})")
        a.setflags(write=False)
        op, inv = float(s[0]), float(1.0 / s[-1])
        return cls(a, op, inv, max(op, inv))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other: "GroupAtom") -> "GroupAtom":
        return GroupAtom.from_matrix(self.entries @ other.entries)


def _entries(g) -> np.ndarray:
    return g.entries if isinstance(g, GroupAtom) else _as_matrix(g)


def _sine(u: np.ndarray, v: np.ndarray) -> float:
    # component of v orthogonal to u; avoids the cancellation in sqrt(1 - c^2)
    r = v - np.dot(u, v) * u
    r = r - np.dot(u, r) * u
    return float(min(1.0, np.linalg.norm(r)))


def proj_distance(x: ProjPoint, w: ProjPoint) -> float:
    """Sine of the angle between the two lines."""
    return _sine(x.rep, w.rep)


def proj_distance_rows(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Row-wise distance between unit vectors u, v of shape (N, d)."""
    c = np.einsum("ij,ij->i", u, v)
    r = v - c[:, None] * u
    c2 = np.einsum("ij,ij->i", u, r)
    r = r - c2[:, None] * u
    return np.minimum(1.0, np.linalg.norm(r, axis=1))


def act(g, x: ProjPoint) -> ProjPoint:
    return ProjPoint.from_vector(_entries(g) @ x.rep)


def cocycle(g, x: ProjPoint) -> float:
    """log |g v| for the unit representative v of x."""
    return math.log(math.hypot(*(_entries(g) @ x.rep)))


def dual_pairing(x: ProjPoint, y: DualPoint) -> float:
    """|<f, v>| for unit representatives, i.e. the distance from x to H_y."""
    return float(min(1.0, abs(np.dot(y.rep, x.rep))))


def hyperplane_distance(x: ProjPoint, y: DualPoint) -> float:
    """Distance from x to its orthogonal projection onto H_y (independent of dual_pairing)."""
    f = y.rep
    v = x.rep
    h = v - np.dot(f, v) * f
    if np.linalg.norm(h) == 0.0:
        return 1.0
    return proj_distance(x, ProjPoint.from_vector(h))


def coefficient_log(g, x: ProjPoint, y: DualPoint) -> float:
    """log |<f, g v>| for unit f, v; -inf when the coefficient vanishes exactly."""
    c = abs(float(np.dot(y.rep, _entries(g) @ x.rep)))
    if c == 0.0:
        return float("-inf")
    return float(np.log(c))


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))
