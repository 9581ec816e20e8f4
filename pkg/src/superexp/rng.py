"""Counter-based normal variates keyed by (seed, path, step, component).

Each variate is ``ppnd16(u)`` where ``u`` comes from the SplitMix64 output
function applied to ``path_key + (counter + 1) * GOLDEN`` and
``path_key = mix64(mix64(seed) + path_index * GOLDEN)``.  Nothing depends on
how many other paths are drawn or in what order, so any chunking of the
path index range reproduces the same bits.

The inverse normal CDF is Wichura's AS241 (PPND16, ~1e-16 relative
accuracy).  It is implemented here rather than taken from scipy so the
stream is fixed by this file alone.
"""

from __future__ import annotations

import numba as nb
import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1

__all__ = ["mix64", "derive_seed", "normals", "ppnd16"]


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int (mod 2**64)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(seed: int, stream: int) -> int:
    """Seed of an independent substream ``stream`` of ``seed``."""
    return mix64((seed & _MASK) + (stream + 1) * 0xD1B54A32D192ED03)


@nb.njit(cache=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def ppnd16(p):
    """Wichura (1988) AS241: normal quantile for 0 < p < 1."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * (((((((r * 2509.0809287301226727 +
                          33430.575583588128105) * r + 67265.770927008700853) * r +
                        45921.953931549871457) * r + 13731.693765509461125) * r +
                      1971.5909503065514427) * r + 133.14166789178437745) * r +
                    3.387132872796366608) / \
            (((((((r * 5226.495278852545925 +
                   28729.085735721942674) * r + 39307.89580009271061) * r +
                 21213.794301586595867) * r + 5394.1960214247511077) * r +
               687.1870074920579083) * r + 42.313330701600911252) * r + 1.0)
    r = p if q < 0.0 else 1.0 - p
    r = np.sqrt(-np.log(r))
    if r <= 5.0:
        r -= 1.6
        val = (((((((r * 7.7454501427834140764e-4 +
                     0.0227238449892691845833) * r + 0.24178072517745061177) * r +
                   1.27045825245236838258) * r + 3.64784832476320460504) * r +
                 5.7694972214606914055) * r + 4.6303378461565452959) * r +
               1.42343711074968357734) / \
            (((((((r * 1.05075007164441684324e-9 +
                   5.475938084995344946e-4) * r + 0.0151986665636164571966) * r +
                 0.14810397642748007459) * r + 0.68976733498510000455) * r +
               1.6763848301838038494) * r + 2.05319162663775882187) * r + 1.0)
    else:
        r -= 5.0
        val = (((((((r * 2.01033439929228813265e-7 +
                     2.71155556874348757815e-5) * r + 0.0012426609473880784386) * r +
                   0.026532189526576123093) * r + 0.29656057182850489123) * r +
                 1.7848265399172913358) * r + 5.4637849111641143699) * r +
               6.6579046435011037772) / \
            (((((((r * 2.04426310338993978564e-15 +
                   1.4215117583164458887e-7) * r + 1.8463183175100546818e-5) * r +
                 7.868691311456132591e-4) * r + 0.0148753612908506148525) * r +
               0.13692988092273580531) * r + 0.59983220655588793769) * r + 1.0)
    return -val if q < 0.0 else val


@nb.njit(cache=True, nogil=True)
def _fill_normals(seed_key, start, n_steps, d, scale, out):
    golden = np.uint64(GOLDEN)
    n_paths = out.shape[1]
    keys = np.empty(n_paths, dtype=np.uint64)
    for k in range(n_paths):
        keys[k] = _mix64(seed_key + np.uint64(start + k) * golden)
    for i in range(n_steps):
        for k in range(n_paths):
            for j in range(d):
                counter = np.uint64(i * d + j + 1)
                z = _mix64(keys[k] + counter * golden)
                u = (np.float64(z >> np.uint64(11)) + 0.5) * (1.0 / 9007199254740992.0)
                out[i, k, j] = ppnd16(u) * scale


def normals(seed: int, start: int, stop: int, n_steps: int, d: int, scale: float = 1.0):
    """Scaled standard normals, time-major: shape ``(n_steps, stop - start, d)``."""
    out = np.empty((n_steps, stop - start, d))
    _fill_normals(np.uint64(mix64(seed)), start, n_steps, d, float(scale), out)
    return out
