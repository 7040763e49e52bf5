"""Compiled inner loops for the path simulator."""
from __future__ import annotations

import numba as nb
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0


@nb.njit(inline="always")
def _mix(z):
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


@nb.njit(inline="always")
def _uniform(state, step):
    z = _mix(state + np.uint64(step + 1) * _GOLDEN)
    return np.float64(z >> np.uint64(11)) * _INV53


@nb.njit(nogil=True, cache=True)
def walk_block(mats, cdf, x, f, states, checkpoints, burn_in,
               out_sigma, out_logd, out_end, record_end):
    """Simulate each path of a block; record sigma and log-distance at the checkpoint steps.

    Draw k of a path is the uniform for step k (burn-in steps come first).
    """
    m = mats.shape[0]
    d = mats.shape[1]
    n_paths = states.shape[0]
    n_max = checkpoints[checkpoints.shape[0] - 1]
    v = np.empty(d)
    w = np.empty(d)
    for p in range(n_paths):
        st = states[p]
        for i in range(d):
            v[i] = x[i]
        s = 0.0
        prod = 1.0
        c = 0
        for k in range(burn_in + n_max):
            u = _uniform(st, k)
            a = m - 1
            for j in range(m - 1):
                if u < cdf[j]:
                    a = j
                    break
            nrm2 = 0.0
            for i in range(d):
                acc = 0.0
                for j in range(d):
                    acc += mats[a, i, j] * v[j]
                w[i] = acc
                nrm2 += acc * acc
            nrm = np.sqrt(nrm2)
            for i in range(d):
                v[i] = w[i] / nrm
            if k >= burn_in:
                prod *= nrm
                step = k - burn_in + 1
                if prod > 1e100 or prod < 1e-100:
                    s += np.log(prod)
                    prod = 1.0
                if step == checkpoints[c]:
                    s += np.log(prod)
                    prod = 1.0
                    pair = 0.0
                    for i in range(d):
                        pair += f[i] * v[i]
                    out_sigma[c, p] = s
                    pair = min(abs(pair), 1.0)
                    out_logd[c, p] = np.log(pair) if pair > 0.0 else -np.inf
                    if record_end:
                        for i in range(d):
                            out_end[c, p, i] = v[i]
                    c += 1


@nb.njit(nogil=True, cache=True)
def chain_points(mats, cdf, x, state, burn_in, length, out):
    """Positions x_1..x_length of one chain after burn_in discarded steps."""
    m = mats.shape[0]
    d = mats.shape[1]
    v = np.empty(d)
    w = np.empty(d)
    for i in range(d):
        v[i] = x[i]
    for k in range(burn_in + length):
        u = _uniform(state, k)
        a = m - 1
        for j in range(m - 1):
            if u < cdf[j]:
                a = j
                break
        nrm2 = 0.0
        for i in range(d):
            acc = 0.0
            for j in range(d):
                acc += mats[a, i, j] * v[j]
            w[i] = acc
            nrm2 += acc * acc
        nrm = np.sqrt(nrm2)
        for i in range(d):
            v[i] = w[i] / nrm
        if k >= burn_in:
            for i in range(d):
                out[k - burn_in, i] = v[i]
