"""Counter-based Gaussian increment streams.

Every stochastic routine in this package draws its noise from a
:class:`NoiseStream`, which wraps a Philox counter-based generator keyed by
``(seed, substream_id)`` and tracks a cursor counting increments consumed.
Two streams built from the same key always produce the same increment
sequence, independent of chunking, worker layout, or execution order, and a
stream can be reopened at any cursor position.  Normals are produced by
inverse-CDF transform of 64-bit uniforms so that exactly one counter word is
consumed per increment, which is what makes the cursor exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

__all__ = ["NoiseStream"]

_MASK64 = (1 << 64) - 1

# Half-ulp offset mapping the [0, 1) uniform lattice to (0, 1) so ndtri is
# finite at both ends.
_HALF_ULP = 2.0 ** -54


def _mix64(x: int) -> int:
    """SplitMix64 finalizer; bijective on 64-bit ints."""
    x &= _MASK64
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & _MASK64
    return x ^ (x >> 31)


@dataclass
class NoiseStream:
    """Reproducible Gaussian increment stream.

    Args:
        seed: master seed (any int; reduced mod 2**64).
        substream_id: independent substream selector (any int).
        cursor: number of increments already consumed.
    """

    seed: int
    substream_id: int
    cursor: int = 0
    _gen: Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.cursor < 0:
            raise ValueError("cursor must be >= 0")
        self._gen = self._generator_at(self.cursor)

    def _key(self) -> int:
        return ((self.substream_id & _MASK64) << 64) | (self.seed & _MASK64)

    def _generator_at(self, cursor: int) -> Generator:
        bg = Philox(key=self._key())
        # Philox.advance moves whole 4-word counter blocks; one float64 draw
        # consumes one word, so seek block-wise then burn the remainder.
        if cursor:
            bg.advance(cursor // 4)
            rem = cursor % 4
            if rem:
                bg.random_raw(rem)
        return Generator(bg)

    def normals(self, n: int) -> np.ndarray:
        """Draw the next ``n`` standard normal increments."""
        if n < 0:
            raise ValueError("n must be >= 0")
        u = self._gen.random(n)
        self.cursor += n
        return ndtri(u + _HALF_ULP)

    def seek(self, cursor: int) -> None:
        """Reposition the stream at an absolute increment index."""
        if cursor < 0:
            raise ValueError("cursor must be >= 0")
        if cursor != self.cursor:
            self.cursor = cursor
            self._gen = self._generator_at(cursor)

    def fork(self) -> "NoiseStream":
        """Independent handle on the same substream at the current cursor."""
        return NoiseStream(self.seed, self.substream_id, self.cursor)

    def child(self, index: int) -> "NoiseStream":
        """Derived stream for a subtask.

        The child substream id mixes the parent id with ``index`` through a
        bijective 64-bit hash, so nested derivations (experiment -> sample ->
        stage) stay collision-free in practice without any coordination.
        """
        if index < 0:
            raise ValueError("index must be >= 0")
        sub = _mix64((self.substream_id & _MASK64) ^ _mix64(index ^ 0x9E3779B97F4A7C15))
        return NoiseStream(self.seed, sub, 0)
