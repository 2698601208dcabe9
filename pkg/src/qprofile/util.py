"""Small shared helpers."""

from __future__ import annotations

_MASK = (1 << 64) - 1


def mix_seed(*parts: int) -> int:
    """Fold integers into one 63-bit seed with a splitmix64-style mixer.

    Stable across platforms and releases; used to derive per-(n, run,
    iteration) RNG keys from a single master seed.
    """
    h = 0x9E3779B97F4A7C15
    for p in parts:
        h = (h + (int(p) & _MASK)) & _MASK
        h ^= h >> 30
        h = (h * 0xBF58476D1CE4E5B9) & _MASK
        h ^= h >> 27
        h = (h * 0x94D049BB133111EB) & _MASK
        h ^= h >> 31
    return h & ((1 << 63) - 1)
