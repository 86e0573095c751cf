"""Seeded, portable 64-bit random generator (splitmix64).

The generator algorithm is pinned in protocol.md so that a given build
reproduces its own runs exactly: one u64 of state, advanced by a fixed
odd constant, with two xor-shift-multiply finalizer rounds per output.
"""

from __future__ import annotations

_MASK = 0xFFFFFFFFFFFFFFFF


class SplitMix64:
    """Deterministic u64 stream; uniform doubles use the top 53 bits."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """Uniform double in [lo, hi)."""
        unit = (self.next_u64() >> 11) * (2.0 ** -53)
        return lo + unit * (hi - lo)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi] via rejection-free modulo of a wide draw."""
        span = hi - lo + 1
        return lo + self.next_u64() % span
