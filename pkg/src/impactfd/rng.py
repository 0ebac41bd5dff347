"""SplitMix64: the simulator's only source of randomness.

Chosen because it is tiny and fully specified, so another implementation
can reproduce a run bit-for-bit from the same 64-bit seed.
"""

from __future__ import annotations

from fractions import Fraction

MASK64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        if not 0 <= seed <= MASK64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        self.state = seed

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in the closed range [lo, hi], by rejection."""
        if lo > hi:
            raise ValueError("empty range")
        n = hi - lo + 1
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return lo + x % n

    def bernoulli(self, p: Fraction) -> bool:
        """True with probability exactly ``p`` (up to the 2**-64 grid)."""
        x = self.next_u64()
        return x * p.denominator < p.numerator * (1 << 64)
