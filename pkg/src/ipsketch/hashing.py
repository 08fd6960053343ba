"""Seeded uniform hashing shared by every sketch.

Coordination between independently built sketches rests entirely on this
module: two sketches built with the same seed see the same ``h(i)`` for every
index ``i``. The mixer is the splitmix64 finalizer applied to
``mix(seed) + (i + 1) * golden``, so each seed behaves like a separate
splitmix64 stream indexed by ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)

# float64 carries 53 mantissa bits; the top 53 bits of the mixed word become
# the fraction, so h(i) lies on the grid {k / 2**53 : 0 <= k < 2**53}.
RESOLUTION_BITS = 53
_INV_RES = 1.0 / float(1 << RESOLUTION_BITS)


def mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _S30)) * _C1
        z = (z ^ (z >> _S27)) * _C2
    return z ^ (z >> _S31)


def seed_key(seed: int) -> np.uint64:
    """Scramble a user seed into the additive stream key."""
    return np.uint64(int(mix64(np.array([int(seed) & MASK64], dtype=np.uint64))[0]))


def derive_seed(seed: int, *parts: int | str) -> int:
    """Derive an independent 64-bit seed from ``seed`` and a label path.

    Used for per-trial seeds and for the auxiliary hash streams of the
    baselines (JL signs, CountSketch buckets, MinHash repetitions).
    """
    acc = int(seed) & MASK64
    for part in parts:
        if isinstance(part, str):
            part = int.from_bytes(part.encode("utf-8")[:8].ljust(8, b"\0"), "little")
        acc = int(mix64(np.array([(acc ^ (int(part) & MASK64)) & MASK64], dtype=np.uint64))[0])
        acc = (acc + int(GOLDEN)) & MASK64
    return acc


def raw_hashes(keys: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """uint64 hashes for every (key, index) pair under numpy broadcasting."""
    idx = np.asarray(indices, dtype=np.uint64)
    with np.errstate(over="ignore"):
        state = np.asarray(keys, dtype=np.uint64) + (idx + _ONE) * GOLDEN
    return mix64(state)


def to_unit(words: np.ndarray) -> np.ndarray:
    """Map uint64 words to [0, 1) on the 2**-53 grid."""
    return (words >> _S11).astype(np.float64) * _INV_RES


def unit_hashes(seeds: np.ndarray | int, indices: np.ndarray) -> np.ndarray:
    """Uniform hashes for many seeds at once.

    ``seeds`` of shape ``(T,)`` and ``indices`` of shape ``(N,)`` give a
    ``(T, N)`` matrix whose row ``t`` equals ``UniformHasher(seeds[t]).unit(indices)``.
    """
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.uint64))
    keys = mix64(seeds)
    return to_unit(raw_hashes(keys[:, None], np.asarray(indices, dtype=np.uint64)[None, :]))


@dataclass(frozen=True)
class UniformHasher:
    """Deterministic map ``i -> h(i)`` in [0, 1) for a given seed."""

    seed: int
    _key: np.uint64 = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "seed", int(self.seed) & MASK64)
        object.__setattr__(self, "_key", seed_key(self.seed))

    def unit(self, indices: np.ndarray) -> np.ndarray:
        return to_unit(raw_hashes(self._key, indices))

    def words(self, indices: np.ndarray) -> np.ndarray:
        return raw_hashes(self._key, indices)

    def __call__(self, i: int) -> float:
        return float(self.unit(np.array([i], dtype=np.uint64))[0])


class TableHasher(UniformHasher):
    """Hasher whose outputs are pinned for listed indices.

    Meant for reproducing hand-worked examples: indices present in ``table``
    hash to the given value, everything else falls through to the seeded
    mixer.
    """

    def __init__(self, table: Mapping[int, float], seed: int = 0) -> None:
        super().__init__(seed)
        object.__setattr__(self, "table", dict(table))

    def unit(self, indices: np.ndarray) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.uint64)
        out = super().unit(idx)
        for pos, i in enumerate(idx.tolist()):
            if i in self.table:
                out[pos] = self.table[i]
        return out


def hash_unit(hasher: UniformHasher, i: int) -> float:
    return hasher(i)
