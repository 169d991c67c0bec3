"""Reproducible pseudo-random numbers for datasets, initialization and shuffles.

SplitMix64 is small enough to re-implement in any language, which keeps
datasets and He initializations bit-identical across implementations.

Algorithm (all arithmetic modulo 2**64):

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)

Uniform doubles take the top 53 bits of an output. Normal variates use the
basic Box-Muller transform on two uniforms and return both outputs in order
(cosine branch first).
"""

import math

import numpy as np

MASK64 = 0xFFFF_FFFF_FFFF_FFFF
SPLIT_STREAM = 0
SHUFFLE_STREAM = 1

GOLDEN_GAMMA = 0x9E37_79B9_7F4A_7C15
MIX_MULTIPLIER_1 = 0xBF58_476D_1CE4_E5B9
MIX_MULTIPLIER_2 = 0x94D0_49BB_1331_11EB

_TWO_POW_MINUS_53 = 1.0 / (1 << 53)


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX_MULTIPLIER_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MULTIPLIER_2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """SplitMix64 generator with uniform, normal and shuffle helpers."""

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError(f"Seed must be a non-negative integer, got {seed}")
        self.state = seed & MASK64
        self._spare_normal = None

    def next_u64(self) -> int:
        """Return the next raw 64-bit output."""
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return _mix64(self.state)

    def uniform(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * _TWO_POW_MINUS_53

    def uniform_open(self) -> float:
        """Uniform double in (0, 1); safe to pass to log."""
        return ((self.next_u64() >> 11) + 0.5) * _TWO_POW_MINUS_53

    def normal(self) -> float:
        """Standard normal variate via Box-Muller."""
        if self._spare_normal is not None:
            value, self._spare_normal = self._spare_normal, None
            return value

        u1 = self.uniform_open()
        u2 = self.uniform()
        radius = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._spare_normal = radius * math.sin(theta)
        return radius * math.cos(theta)

    def normals(self, n: int) -> np.ndarray:
        """Return n standard normal variates as a float64 array."""
        return np.fromiter((self.normal() for _ in range(n)), dtype=np.float64, count=n)

    def randbelow(self, bound: int) -> int:
        """Unbiased integer in [0, bound) by rejection sampling."""
        if bound <= 0:
            raise ValueError(f"Bound must be positive, got {bound}")
        threshold = (1 << 64) % bound
        while True:
            value = self.next_u64()
            if value >= threshold:
                return value % bound

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates shuffle of range(n)."""
        order = np.arange(n, dtype=np.int64)
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            order[i], order[j] = order[j], order[i]
        return order


def derive_seed(seed: int, *keys: int) -> int:
    """Mix integer keys into a seed, e.g. derive_seed(base_seed, epoch)."""
    state = seed & MASK64
    for key in keys:
        state = _mix64(((state ^ (key & MASK64)) + GOLDEN_GAMMA) & MASK64)
    return _mix64((state + GOLDEN_GAMMA) & MASK64)
