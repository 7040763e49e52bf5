"""Finitely supported probability measures on GL_d(R) and heuristic checks of the standing assumptions."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .projective import GroupAtom, InvalidInputError, canonical_rows, proj_distance_rows

ENUMERATION_CAP = 2**24
PROXIMAL_GAP = 1e-6


class MeasureError(ValueError):
    pass


class EnumerationCapError(MeasureError):
    pass


@dataclass(frozen=True, eq=False)
class MatrixMeasure:
    atoms: tuple
    weights: np.ndarray
    dim: int
    max_big_n: float

    @property
    def matrices(self) -> np.ndarray:
        return np.stack([a.entries for a in self.atoms])

    @property
    def size(self) -> int:
        return len(self.atoms)

    @classmethod
    def from_matrices(cls, matrices, weights=None) -> "MatrixMeasure":
        mats = list(matrices)
        if not mats:
            raise MeasureError("measure has empty support")
        if weights is None:
            weights = np.ones(len(mats))
        return validate_parts(mats, weights)


def validate_parts(matrices, weights) -> MatrixMeasure:
    w = np.asarray(weights, dtype=float)
    if len(matrices) == 0:
        raise MeasureError("measure has empty support")
    if w.shape != (len(matrices),):
        raise MeasureError(f"{len(matrices)} atoms but {w.size} weights")
    atoms = []
    dim = None
    for i, m in enumerate(matrices):
        try:
            a = m if isinstance(m, GroupAtom) else GroupAtom.from_matrix(m)
        except InvalidInputError as exc:
            raise MeasureError(f"atom {i}: {exc}") from None
        if dim is None:
            dim = a.dim
        elif a.dim != dim:
            raise MeasureError(f"atom {i}: dimension {a.dim} differs from {dim}")
        atoms.append(a)
    if dim < 2:
        raise MeasureError("dimension must be at least 2")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise MeasureError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise MeasureError("zero total weight")
    for i, wi in enumerate(w):
        if wi == 0:
            raise MeasureError(f"atom {i}: zero weight atom")
    w = w / total
    w.setflags(write=False)
    return MatrixMeasure(tuple(atoms), w, dim, max(a.big_n for a in atoms))


def validate(measure: MatrixMeasure) -> MatrixMeasure:
    """Re-validate and renormalize a measure."""
    return validate_parts(list(measure.atoms), measure.weights)


def benchmark_measure() -> MatrixMeasure:
    return MatrixMeasure.from_matrices([[[2, 1], [1, 1]], [[1, 1], [1, 2]]], [0.5, 0.5])


@dataclass
class AssumptionReport:
    proximal_witness: tuple | None = None
    gap_ratio: float | None = None
    irreducibility_verdict: str = "inconclusive"
    evidence: list = field(default_factory=list)

    @property
    def proximal_verdict(self) -> str:
        return "pass" if self.proximal_witness is not None else "inconclusive"

    @property
    def hard_failure(self) -> bool:
        return self.irreducibility_verdict == "fail"

    def merge(self, other: "AssumptionReport") -> "AssumptionReport":
        out = AssumptionReport(self.proximal_witness, self.gap_ratio,
                               self.irreducibility_verdict, list(self.evidence))
        if other.proximal_witness is not None and out.proximal_witness is None:
            out.proximal_witness, out.gap_ratio = other.proximal_witness, other.gap_ratio
        if other.irreducibility_verdict != "inconclusive" or not other.evidence:
            out.irreducibility_verdict = other.irreducibility_verdict
        out.evidence.extend(other.evidence)
        return out

    def summary(self) -> str:
        lines = []
        if self.proximal_witness is None:
            lines.append("proximal: inconclusive (no witness found)")
        else:
            lines.append(f"proximal: witness word {list(self.proximal_witness)}, "
                         f"gap ratio {self.gap_ratio:.6g}")
        lines.append(f"strong irreducibility (heuristic): {self.irreducibility_verdict}")
        lines.extend(f"  - {e}" for e in self.evidence)
        return "\n".join(lines)


def word_product(measure: MatrixMeasure, word) -> np.ndarray:
    """g_{w[-1]} ... g_{w[0]}: the first letter acts first."""
    p = np.eye(measure.dim)
    for a in word:
        p = measure.atoms[a].entries @ p
    return p


def _words(measure: MatrixMeasure, max_word_len: int, trials: int, rng_seed: int):
    m = measure.size
    budget = 4096
    for length in range(1, max_word_len + 1):
        if m**length > budget:
            break
        yield from itertools.product(range(m), repeat=length)
    rng = np.random.default_rng(rng_seed)
    for _ in range(trials):
        length = int(rng.integers(1, max_word_len + 1))
        yield tuple(int(a) for a in rng.choice(m, size=length, p=measure.weights))


def _gap_ratio(p: np.ndarray) -> float:
    mods = np.sort(np.abs(np.linalg.eigvals(p)))[::-1]
    if mods[1] == 0.0:
        return float("inf")
    return float(mods[0] / mods[1])


def check_proximal(measure: MatrixMeasure, max_word_len: int = 4, trials: int = 256,
                   rng_seed: int = 0) -> AssumptionReport:
    """Look for a word whose top eigenvalue modulus is strictly separated from the next."""
    for word in _words(measure, max_word_len, trials, rng_seed):
        ratio = _gap_ratio(word_product(measure, word))
        if ratio > 1.0 + PROXIMAL_GAP:
            return AssumptionReport(tuple(word), ratio, "inconclusive",
                                    [f"word {list(word)} has eigenvalue-modulus ratio {ratio:.6g}"])
    return AssumptionReport(None, None, "inconclusive",
                            ["no word with separated top eigenvalue found"])


def _attractor(p: np.ndarray) -> np.ndarray | None:
    vals, vecs = np.linalg.eig(p)
    order = np.argsort(-np.abs(vals))
    if np.abs(vals[order[0]]) <= (1 + PROXIMAL_GAP) * np.abs(vals[order[1]]):
        return None
    v = vecs[:, order[0]]
    v = np.real(v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))])))
    return v / np.linalg.norm(v)


def _real_eigenlines(p: np.ndarray) -> list:
    vals, vecs = np.linalg.eig(p)
    out = []
    for k in range(len(vals)):
        if abs(vals[k].imag) <= 1e-12 * max(1.0, abs(vals[k])):
            v = vecs[:, k]
            v = np.real(v * np.exp(-1j * np.angle(v[np.argmax(np.abs(v))])))
            out.append(v / np.linalg.norm(v))
    return out


def _distinct(lines: list, tol: float = 1e-8) -> np.ndarray:
    kept: list = []
    for v in lines:
        if all(proj_distance_rows(v[None], u[None])[0] > tol for u in kept):
            kept.append(v)
    return canonical_rows(np.array(kept)) if kept else np.zeros((0, 0))


def _set_invariant(measure: MatrixMeasure, lines: np.ndarray, tol: float = 1e-8) -> bool:
    for a in measure.atoms:
        img = canonical_rows(lines @ a.entries.T)
        for v in img:
            if np.min(proj_distance_rows(np.repeat(v[None], len(lines), 0), lines)) > tol:
                return False
    return True


def check_strong_irreducibility(measure: MatrixMeasure, trials: int = 256,
                                rng_seed: int = 0, max_word_len: int = 6) -> AssumptionReport:
    """Heuristic verdict: fail on an exhibited invariant finite union, pass on enough attractors."""
    attractors = []
    for word in _words(measure, max_word_len, trials, rng_seed):
        v = _attractor(word_product(measure, word))
        if v is not None:
            attractors.append(v)
    attr = _distinct(attractors)
    n_attr = len(attr)
    evidence = [f"{n_attr} distinct attracting directions among sampled proximal words"]
    if measure.dim == 2:
        cands = [v for a in measure.atoms for v in _real_eigenlines(a.entries)]
        cands += list(attr[:8]) if n_attr else []
        cands = _distinct(cands)
        for size in (1, 2):
            for combo in itertools.combinations(range(len(cands)), size):
                sub = cands[list(combo)]
                if _set_invariant(measure, sub):
                    desc = "; ".join(np.array2string(v, precision=4) for v in sub)
                    evidence.append(f"invariant set of {size} line(s) found: {desc}")
                    return AssumptionReport(None, None, "fail", evidence)
        if n_attr >= 3:
            evidence.append("no invariant set of one or two lines among eigenlines")
            return AssumptionReport(None, None, "pass", evidence)
        evidence.append("fewer than 3 attractors and no invariant set exhibited")
        return AssumptionReport(None, None, "inconclusive", evidence)

    d = measure.dim
    for v in _real_eigenlines(measure.atoms[0].entries):
        images = [a.entries @ v for a in measure.atoms]
        if all(proj_distance_rows(v[None], (u / np.linalg.norm(u))[None])[0] <= 1e-8
               for u in images):
            evidence.append(f"common eigenvector {np.array2string(v, precision=4)}")
            return AssumptionReport(None, None, "fail", evidence)
    rng = np.random.default_rng(rng_seed + 1)
    deficient = False
    for _ in range(8):
        v = rng.standard_normal(d)
        orbit = [v]
        for word in itertools.islice(_words(measure, 3, 64, rng_seed), 200):
            orbit.append(word_product(measure, word) @ v)
        orbit = np.array(orbit)
        orbit /= np.linalg.norm(orbit, axis=1, keepdims=True)
        if np.linalg.matrix_rank(orbit, tol=1e-8) < d:
            deficient = True
            break
    if deficient:
        evidence.append("orbit of a random line spans a proper subspace")
        return AssumptionReport(None, None, "fail", evidence)
    evidence.append("orbits of random lines span the whole space; no common eigenvector")
    if n_attr >= d + 1:
        return AssumptionReport(None, None, "pass", evidence)
    return AssumptionReport(None, None, "inconclusive", evidence)


def check_model(measure: MatrixMeasure, trials: int = 256, rng_seed: int = 0) -> AssumptionReport:
    return check_proximal(measure, trials=trials, rng_seed=rng_seed).merge(
        check_strong_irreducibility(measure, trials=trials, rng_seed=rng_seed))


def enumeration_size(measure: MatrixMeasure, n: int) -> int:
    return measure.size**n


def convolution_enumerate(measure: MatrixMeasure, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact atoms of the n-fold convolution power as (products, weights).

    Products are g_{a_n} ... g_{a_1}; the index is the word read with a_n most significant.
    """
    if n < 1:
        raise MeasureError("n must be >= 1")
    need = enumeration_size(measure, n)
    if need > ENUMERATION_CAP:
        raise EnumerationCapError(
            f"enumeration at n={n} needs {measure.size}^{n} = {need} atoms, "
            f"above the cap of {ENUMERATION_CAP}")
    g = measure.matrices
    w = measure.weights
    prods, weights = g.copy(), w.copy()
    d = measure.dim
    for _ in range(n - 1):
        prods = np.einsum("aij,bjk->abik", g, prods).reshape(-1, d, d)
        weights = np.outer(w, weights).ravel()
    return prods, weights
