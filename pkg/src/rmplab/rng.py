"""Counter-based uniforms: one independent stream per (seed, path index)."""
from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = np.uint64(30), np.uint64(27), np.uint64(31), np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


def mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finaliser, applied elementwise to uint64 arrays (wrapping arithmetic)."""
    z = z ^ (z >> _S30)
    z = z * _M1
    z = z ^ (z >> _S27)
    z = z * _M2
    return z ^ (z >> _S31)


def seed_key(seed: int) -> np.uint64:
    with np.errstate(over="ignore"):
        return mix64(np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64))[0]


def stream_states(seed: int, path_index: np.ndarray) -> np.ndarray:
    """Per-path base state derived from the master seed and the path index."""
    idx = np.asarray(path_index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(idx * _GOLDEN + seed_key(seed))


def uniforms(states: np.ndarray, step: int) -> np.ndarray:
    """Uniform [0, 1) doubles for draw number `step` of each stream."""
    with np.errstate(over="ignore"):
        z = mix64(states + np.uint64(step + 1) * _GOLDEN)
    return (z >> _S11).astype(np.float64) * _INV53
