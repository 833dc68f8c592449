"""Portable, seedable pseudo-random numbers (splitmix64).

Dataset generation must be reproducible bit-for-bit across languages, so
instead of a platform RNG this module implements splitmix64 with the
published constants:

    state  = (state + 0x9E3779B97F4A7C15) mod 2^64
    z      = state
    z      = ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z      = ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output = z XOR (z >> 31)

Floats are drawn as ``(output >> 11) * 2^-53`` (uniform in [0, 1)), and
integers via ``floor(u * span)``, which any IEEE-754 implementation
reproduces exactly.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """splitmix64 stream; identical seeds yield identical streams."""

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        return _mix(self._state)

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """Uniform float in [lo, hi)."""
        u = (self.next_u64() >> 11) * 2.0**-53
        return lo + u * (hi - lo)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in the inclusive range [lo, hi]."""
        if hi < lo:
            raise ValueError(f"empty range [{lo}, {hi}]")
        span = hi - lo + 1
        u = (self.next_u64() >> 11) * 2.0**-53
        return lo + min(int(u * span), span - 1)


def derive_seed(base: int, *indices: int) -> int:
    """Fold stream indices into a base seed, one mix round per index.

    Used to give every (image, pair) its own independent stream so that
    parallel and serial generation produce identical output.
    """
    h = base & _MASK
    for ix in indices:
        h = _mix((h ^ ((ix + 1) * _GOLDEN)) & _MASK)
    return h
