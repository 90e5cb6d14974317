"""Deterministic random number generation for reproducible experiments.

The generator identity is part of the output-file contract: any
implementation of the same scenario format must draw the same noise for the
same seed.  The pinned algorithm is ``splitmix64-boxmuller-v1``:

* splitmix64 advances a 64-bit state and mixes it into one output word;
* each word maps to a uniform double in (0, 1] via ``(word >> 11 + 1) * 2^-53``;
* standard normals come from Box-Muller pairs (cos then sin component),
  consumed one at a time with the second of each pair cached.
"""

import math

__all__ = ["GENERATOR_ID", "SplitMix64", "NormalSource"]

GENERATOR_ID = "splitmix64-boxmuller-v1"

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """64-bit splitmix generator (public-domain constants)."""

    def __init__(self, seed):
        self._state = int(seed) & _MASK64

    def next_uint64(self):
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_uniform(self):
        """Uniform double in (0, 1] (never 0, so log() is safe)."""
        return ((self.next_uint64() >> 11) + 1) * (2.0 ** -53)


class NormalSource:
    """Stream of standard normal variates via Box-Muller over splitmix64."""

    def __init__(self, seed):
        self._uniform = SplitMix64(seed)
        self._spare = None

    def next_normal(self):
        if self._spare is not None:
            z, self._spare = self._spare, None
            return z
        u1 = self._uniform.next_uniform()
        u2 = self._uniform.next_uniform()
        radius = math.sqrt(-2.0 * math.log(u1))
        angle = 2.0 * math.pi * u2
        self._spare = radius * math.sin(angle)
        return radius * math.cos(angle)

    def normals(self, count):
        """List of ``count`` standard normals."""
        return [self.next_normal() for _ in range(count)]
