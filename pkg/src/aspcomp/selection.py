"""Seeded, platform-independent instance sampling.

The seed string's decimal digits are folded into a 64-bit integer, XOR-ed
with the FNV-1a hash of the selection key (the problem's domain), and the
result seeds a splitmix64 stream that drives a partial Fisher-Yates shuffle.
All arithmetic is explicit mod 2**64 so every implementation agrees
bit-for-bit.
"""

from __future__ import annotations

from typing import Iterator, Sequence, TypeVar

T = TypeVar("T")

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fold_seed(seed: str) -> int:
    """Fold the decimal digits of ``seed`` into a 64-bit integer.

    Non-digit characters (separators such as spaces or dashes) are skipped.
    """
    value = 0
    digits = 0
    for ch in seed:
        if "0" <= ch <= "9":
            value = (value * 10 + (ord(ch) - 48)) & MASK64
            digits += 1
    if digits == 0:
        raise ValueError(f"seed {seed!r} contains no decimal digits")
    return value


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def splitmix64(state: int) -> Iterator[int]:
    """Infinite splitmix64 output stream starting from ``state``."""
    state &= MASK64
    while True:
        state = (state + GOLDEN_GAMMA) & MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        yield z ^ (z >> 31)


def stream_seed(seed: str, key: str) -> int:
    return fold_seed(seed) ^ fnv1a64(key.encode("utf-8"))


def partial_shuffle(pool: Sequence[T], n: int, rng: Iterator[int]) -> list[T]:
    """First ``n`` elements of a Fisher-Yates shuffle of ``pool``.

    Position ``i`` swaps with ``i + (r mod (len - i))``; the modulo bias is
    accepted for the sake of a trivially portable definition.
    """
    items = list(pool)
    k = min(n, len(items))
    for i in range(k):
        j = i + next(rng) % (len(items) - i)
        items[i], items[j] = items[j], items[i]
    return items[:k]


def seeded_sample(pool: Sequence[T], n: int, seed: str, key: str) -> list[T]:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not seed:
        raise ValueError("seed must be non-empty")
    if not pool:
        raise ValueError(f"empty instance pool for {key!r}")
    return partial_shuffle(pool, n, splitmix64(stream_seed(seed, key)))
