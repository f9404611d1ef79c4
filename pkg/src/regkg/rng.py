"""Deterministic 64-bit xorshift* PRNG used wherever sampling must be reproducible.

The generator is fixed (shifts 12/25/27, multiplier 0x2545F4914F6CDD1D) so that
samples can be re-derived in any language from the seed alone.
"""
from __future__ import annotations

from typing import Sequence, TypeVar

_MASK = 0xFFFFFFFFFFFFFFFF
_MULTIPLIER = 0x2545F4914F6CDD1D
# xorshift state must be nonzero; seed 0 is remapped to this fixed constant
_ZERO_SEED_SUBSTITUTE = 0x9E3779B97F4A7C15

T = TypeVar("T")


class XorShift64Star:
    def __init__(self, seed: int):
        self._state = (seed & _MASK) or _ZERO_SEED_SUBSTITUTE

    def next_u64(self) -> int:
        s = self._state
        s ^= s >> 12
        s ^= (s << 25) & _MASK
        s ^= s >> 27
        self._state = s
        return (s * _MULTIPLIER) & _MASK

    def below(self, n: int) -> int:
        """Uniform-ish integer in [0, n) (modulo reduction; n is tiny vs 2^64)."""
        if n <= 0:
            raise ValueError("n must be positive")
        return self.next_u64() % n


def shuffled(items: Sequence[T], rng: XorShift64Star) -> list[T]:
    """Fisher-Yates shuffle, high index down, swap target drawn as below(i + 1)."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = rng.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def sample_without_replacement(items: Sequence[T], k: int, seed: int) -> list[T]:
    """First k elements of the seeded shuffle of items (items taken in given order)."""
    if k > len(items):
        raise ValueError(f"sample size {k} exceeds population {len(items)}")
    return shuffled(items, XorShift64Star(seed))[:k]
