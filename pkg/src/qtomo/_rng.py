"""Deterministic seeding and Poisson count sampling.

All randomness flows through counter-based Philox streams keyed by explicit
64-bit seeds, so results are bit-identical across platforms, reruns, and
worker schedules.  Child seeds are derived with a splitmix64 chain:

    s = splitmix64(master); for each word w: s = splitmix64(s ^ splitmix64(w))

Poisson variates are generated from the uniform stream by sequential-search
inversion for means below 30 and by Hormann's transformed-rejection (PTRS)
scheme above, so the sampling path never depends on the host library's
Poisson implementation.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1

_PTRS_SWITCH = 30.0


def splitmix64(x: int) -> int:
    """One splitmix64 output for the 64-bit input ``x``."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *path: int) -> int:
    """Fold integer path words into ``master`` to obtain a child seed.

    The chain is documented in the module docstring and echoed in report
    files; it is the single seed-splitting scheme used everywhere.
    """
    s = splitmix64(master & _MASK64)
    for w in path:
        s = splitmix64(s ^ splitmix64(w & _MASK64))
    return s


def philox_stream(seed: int, substream: int = 0) -> np.random.Generator:
    """Philox generator keyed by the (seed, substream) pair."""
    key = np.array([seed & _MASK64, substream & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _poisson_inversion(gen: np.random.Generator, mean: float) -> int:
    # Sequential search over the CDF; exp(-mean) stays well above underflow
    # for mean < 30.  The iteration cap is unreachable in that range and only
    # guards against a uniform draw in the far round-off tail of the CDF.
    p = math.exp(-mean)
    cum = p
    u = gen.random()
    k = 0
    while u > cum and k < 600:
        k += 1
        p *= mean / k
        cum += p
    return k


def _poisson_ptrs(gen: np.random.Generator, mean: float) -> int:
    # Hormann's PTRS transformed rejection, valid for mean >= 10.
    b = 0.931 + 2.53 * math.sqrt(mean)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    v_r = 0.9277 - 3.6224 / (b - 2.0)
    log_mean = math.log(mean)
    while True:
        u = gen.random() - 0.5
        v = gen.random()
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + mean + 0.43)
        if us >= 0.07 and v <= v_r:
            return int(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        if math.log(v * inv_alpha / (a / (us * us) + b)) <= k * log_mean - mean - math.lgamma(k + 1.0):
            return int(k)


def poisson_draw(seed: int, substream: int, mean: float) -> int:
    """One Poisson variate on the (seed, substream) Philox stream.

    A zero (or negative within round-off) mean always yields zero counts.
    """
    if mean <= 0.0:
        return 0
    gen = philox_stream(seed, substream)
    if mean < _PTRS_SWITCH:
        return _poisson_inversion(gen, mean)
    return _poisson_ptrs(gen, mean)
