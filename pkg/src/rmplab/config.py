"""Flat `key = value` experiment configuration.

Matrices are written row-major with `;` between rows and `,` (or spaces) between entries.
Several atoms are given as `measure.atom.1`, `measure.atom.2`, ... with `measure.weights`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .measure import MatrixMeasure, validate_parts
from .projective import DualPoint, InvalidInputError, ProjPoint


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None, source: str = "<config>"):
        where = source
        if line is not None:
            where += f":{line}"
        if key is not None:
            where += f": {key}"
        super().__init__(f"{where}: {message}")
        self.line = line
        self.key = key


def _floats(text: str) -> list[float]:
    parts = [p for p in re.split(r"[,\s]+", text.strip()) if p]
    return [float(p) for p in parts]


def parse_matrix(text: str) -> np.ndarray:
    rows = [_floats(r) for r in text.split(";") if r.strip()]
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ValueError("rows of unequal length")
    return np.array(rows, dtype=float)


def parse_vectors(text: str) -> list[np.ndarray]:
    """One or more vectors separated by `|`."""
    return [np.array(_floats(v), dtype=float) for v in text.split("|") if v.strip()]


@dataclass
class ExperimentConfig:
    atoms: list = field(default_factory=lambda: [np.array([[2.0, 1.0], [1.0, 1.0]]),
                                                 np.array([[1.0, 1.0], [1.0, 2.0]])])
    weights: list = field(default_factory=lambda: [0.5, 0.5])
    x: list = field(default_factory=lambda: [np.array([1.0, 0.0])])
    y: list = field(default_factory=lambda: [np.array([1.0, 1.0]) / np.sqrt(2.0)])
    n_grid: list = field(default_factory=lambda: [64, 128, 256, 512, 1024, 2048, 4096])
    samples: int = 1_000_000
    seed: int = 20240601
    seeds: int = 1
    burn_in: int = 1000
    A: float = 1.5
    B: float = 1.5
    alpha: float = 0.1
    zeta: float = 0.25
    delta: float = 0.25
    a: float = -0.5
    b: float = 0.5
    t_points: int = 21
    b_points: int = 10_000
    estimate_n: int = 4096
    estimate_samples: int = 100_000
    spectrum_grid: int = 4096
    ld_epsilon: float = 0.1
    ld_n_grid: list = field(default_factory=lambda: [16, 32, 64, 128, 256])
    ld_samples: int = 1_000_000
    ld_y: str = "auto"
    pipeline_n: int = 8
    pipeline_frequencies: int = 50
    uniformity_grid: int = 0
    output: str = "out"

    def measure(self) -> MatrixMeasure:
        return validate_parts(self.atoms, self.weights)

    def x_points(self) -> list[ProjPoint]:
        return [ProjPoint.from_vector(v) for v in self.x]

    def y_points(self) -> list[DualPoint]:
        return [DualPoint.from_vector(v) for v in self.y]

    @property
    def x_point(self) -> ProjPoint:
        return self.x_points()[0]

    @property
    def y_point(self) -> DualPoint:
        return self.y_points()[0]

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _int_list(text: str) -> list[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ValueError("expected integers")
    return [int(v) for v in vals]


def _u64(text: str) -> int:
    v = int(text.strip(), 0)
    if not 0 <= v < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return v


_SCALARS = {
    "samples": ("samples", int), "seed": ("seed", _u64), "seeds": ("seeds", int),
    "burn_in": ("burn_in", int), "A": ("A", float), "B": ("B", float), "alpha": ("alpha", float),
    "zeta": ("zeta", float), "delta": ("delta", float),
    "llt.a": ("a", float), "llt.b": ("b", float), "llt.t_points": ("t_points", int),
    "be.b_points": ("b_points", int),
    "estimate.n": ("estimate_n", int), "estimate.samples": ("estimate_samples", int),
    "spectrum.grid_size": ("spectrum_grid", int),
    "ld.epsilon": ("ld_epsilon", float), "ld.samples": ("ld_samples", int), "ld.y": ("ld_y", str),
    "ld.n_grid": ("ld_n_grid", _int_list), "n_grid": ("n_grid", _int_list),
    "pipeline.n": ("pipeline_n", int), "pipeline.frequencies": ("pipeline_frequencies", int),
    "uniformity.grid": ("uniformity_grid", int), "output": ("output", str),
    "x": ("x", parse_vectors), "y": ("y", parse_vectors),
}


def parse_config(text: str, source: str = "<config>", base_dir: Path | None = None) -> ExperimentConfig:
    cfg = ExperimentConfig()
    atoms: dict[int, tuple[np.ndarray, int]] = {}
    weights_line = None
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno, None, source)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", lineno, None, source)
        if key in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[key]})", lineno, key, source)
        seen[key] = lineno
        try:
            if key.startswith("measure.atom."):
                idx = int(key.rsplit(".", 1)[1])
                atoms[idx] = (parse_matrix(value), lineno)
            elif key == "measure.weights":
                weights_line = (_floats(value), lineno)
            elif key == "measure.file":
                path = Path(value)
                if base_dir is not None and not path.is_absolute():
                    path = base_dir / path
                sub = parse_config(path.read_text(encoding="utf-8"), str(path), path.parent)
                cfg.atoms, cfg.weights = sub.atoms, sub.weights
            elif key in _SCALARS:
                attr, conv = _SCALARS[key]
                setattr(cfg, attr, conv(value))
            else:
                raise ConfigError("unknown key", lineno, key, source)
        except ConfigError:
            raise
        except (ValueError, OSError) as exc:
            raise ConfigError(str(exc), lineno, key, source) from None
    if atoms:
        cfg.atoms = [atoms[i][0] for i in sorted(atoms)]
        if weights_line is None:
            cfg.weights = [1.0 / len(atoms)] * len(atoms)
    if weights_line is not None:
        if len(weights_line[0]) != len(cfg.atoms):
            raise ConfigError(f"{len(weights_line[0])} weights for {len(cfg.atoms)} atoms",
                              weights_line[1], "measure.weights", source)
        cfg.weights = weights_line[0]
    _validate(cfg, seen, source)
    return cfg


def _validate(cfg: ExperimentConfig, seen: dict, source: str) -> None:
    def fail(key, msg):
        raise ConfigError(msg, seen.get(key), key, source)

    try:
        cfg.measure()
    except (ValueError, InvalidInputError) as exc:
        key = next((k for k in seen if k.startswith("measure.")), "measure")
        fail(key, str(exc))
    for name, grid in (("n_grid", cfg.n_grid), ("ld.n_grid", cfg.ld_n_grid)):
        if not grid or any(v < 1 for v in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            fail(name, "grid must be positive and strictly ascending")
    for name, val in (("samples", cfg.samples), ("ld.samples", cfg.ld_samples),
                      ("estimate.samples", cfg.estimate_samples)):
        if val < 1000:
            fail(name, "at least 1000 samples required")
    if cfg.b < cfg.a:
        fail("llt.b", "interval [a, b] is empty")
    if not 0 < cfg.zeta <= 1:
        fail("zeta", "zeta must lie in (0, 1]")
    if not 0 < cfg.delta <= 1:
        fail("delta", "delta must lie in (0, 1]")
    d = cfg.measure().dim
    for key, vecs in (("x", cfg.x), ("y", cfg.y)):
        if any(v.shape != (d,) or not np.any(v) for v in vecs):
            fail(key, f"expected nonzero vectors of length {d}")
    if cfg.ld_y != "auto":
        try:
            v = np.array(_floats(cfg.ld_y))
        except ValueError:
            fail("ld.y", "expected 'auto' or a vector")
        if v.shape != (d,) or not np.any(v):
            fail("ld.y", f"expected 'auto' or a nonzero vector of length {d}")


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", source=str(p)) from None
    return parse_config(text, str(p), p.parent)


def default_config_text() -> str:
    return (Path(__file__).parent / "data" / "benchmark.cfg").read_text(encoding="utf-8")


def config_fields() -> list[str]:
    return [f.name for f in fields(ExperimentConfig)]
