"""Deterministic, portable random number generation for the channel simulator.

Every stochastic component in the simulator (noise injectors, loss models)
draws from :class:`NoiseRng`, a counter-based SplitMix64 generator.  The
output for draw index ``i`` of a stream seeded with ``s`` is::

    mix64(s + (i + 1) * 0x9E3779B97F4A7C15)    (all arithmetic mod 2**64)

where ``mix64`` is the standard SplitMix64 finalizer.  Uniform doubles take
the top 53 bits of the mixed word; normal variates are produced from pairs
of uniforms with the Box-Muller transform.  Nothing here depends on numpy's
own RNG, so the byte-identical stream can be reproduced in any language.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53_SCALE = float(2.0**-53)


def mix64(z: np.ndarray | int) -> np.ndarray | np.uint64:
    """SplitMix64 finalizer on uint64 values (scalar or array).

    Arithmetic runs on 1-d arrays: numpy wraps unsigned array overflow
    silently, while the scalar path would raise RuntimeWarnings.
    """
    scalar = np.ndim(z) == 0
    out = np.atleast_1d(np.asarray(z, dtype=np.uint64)).copy()
    out = (out ^ (out >> np.uint64(30))) * _MIX1
    out = (out ^ (out >> np.uint64(27))) * _MIX2
    out ^= out >> np.uint64(31)
    return np.uint64(out[0]) if scalar else out


class NoiseRng:
    """Counter-based SplitMix64 stream.

    The stream position is an explicit counter, so generator state is just
    ``(seed, counter)`` and can be copied, compared, or serialized freely.
    """

    def __init__(self, seed: int, counter: int = 0):
        self.seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        self.counter = int(counter)

    def derive(self, tag: int) -> "NoiseRng":
        """Independent child stream; same (seed, tag) always gives the same child."""
        mask = 0xFFFFFFFFFFFFFFFF
        z = (int(self.seed) + (tag & mask) * int(_GOLDEN)) & mask
        return NoiseRng(int(mix64(z)) ^ int(_GOLDEN))

    def raw(self, n: int) -> np.ndarray:
        """Next n raw uint64 words."""
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        return mix64(self.seed + idx * _GOLDEN)

    def uniforms(self, n: int) -> np.ndarray:
        """Next n float64 uniforms in [0, 1)."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * _U53_SCALE

    def normals(self, n: int) -> np.ndarray:
        """Next n standard-normal float64 draws (Box-Muller, cosine branch).

        Consumes 2n uniforms: u1 block then u2 block.  Only the cosine output
        of each pair is used, which keeps the draw count a simple function
        of n at the cost of half the entropy.
        """
        u1 = self.uniforms(n)
        u2 = self.uniforms(n)
        r = np.sqrt(-2.0 * np.log1p(-u1))
        return r * np.cos(2.0 * np.pi * u2)

    def __repr__(self) -> str:
        return f"NoiseRng(seed={int(self.seed):#x}, counter={self.counter})"
