"""Comparison baselines: JL/AMS projection, CountSketch and unweighted MinHash."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hashing import GOLDEN, derive_seed, mix64, raw_hashes, seed_key, to_unit
from .sparse_vector import SparseVector

_TOP = np.uint64(63)


@dataclass(frozen=True, eq=False)
class LinearSketch:
    coords: np.ndarray
    m: int
    seed: int
    kind: str

    def storage_words(self) -> float:
        return float(self.m)


def _row_keys(seed: int, label: str, rows: int) -> np.ndarray:
    base = seed_key(derive_seed(seed, label))
    with np.errstate(over="ignore"):
        return mix64(base + np.arange(rows, dtype=np.uint64) * GOLDEN)


def jl_sketch(a: SparseVector, seed: int, m: int, chunk_rows: int = 64) -> LinearSketch:
    """Dense +-1/sqrt(m) projection; O(nnz * m) hashing, one sign per (row, index)."""
    if m < 1:
        raise ValueError("m must be >= 1")
    keys = _row_keys(seed, "jl", m)
    coords = np.zeros(m)
    if a.nnz():
        for lo in range(0, m, chunk_rows):
            bits = raw_hashes(keys[lo : lo + chunk_rows, None], a.indices[None, :]) >> _TOP
            signs = 1.0 - 2.0 * bits.astype(np.float64)
            coords[lo : lo + chunk_rows] = signs @ a.values
        coords /= math.sqrt(m)
    return LinearSketch(coords, m, seed, "jl")


def _bucket_sign(seed: int, indices: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    words = raw_hashes(seed_key(derive_seed(seed, "cs")), indices)
    buckets = (to_unit(words) * m).astype(np.int64)
    signs = 1.0 - 2.0 * (words & np.uint64(1)).astype(np.float64)
    return buckets, signs


def countsketch(a: SparseVector, seed: int, m: int) -> LinearSketch:
    """Single-repetition CountSketch: one hash picks the bucket, its low bit the sign."""
    if m < 1:
        raise ValueError("m must be >= 1")
    coords = np.zeros(m)
    if a.nnz():
        buckets, signs = _bucket_sign(seed, a.indices, m)
        np.add.at(coords, buckets, signs * a.values)
    return LinearSketch(coords, m, seed, "countsketch")


def linear_estimate(sa: LinearSketch, sb: LinearSketch) -> float:
    if (sa.kind, sa.m, sa.seed) != (sb.kind, sb.m, sb.seed):
        raise ValueError(
            f"linear sketches differ: {(sa.kind, sa.m, sa.seed)} vs {(sb.kind, sb.m, sb.seed)}"
        )
    return float(sa.coords @ sb.coords)


@dataclass(frozen=True, eq=False)
class MinHashSketch:
    """Per repetition: the minimum hash over the support, its index and value."""

    min_hashes: np.ndarray
    keys: np.ndarray
    values: np.ndarray
    m: int
    seed: int

    def storage_words(self) -> float:
        return 1.5 * self.m


def minhash_sketch(a: SparseVector, seed: int, m: int, chunk_rows: int = 64) -> MinHashSketch:
    """``m`` independent hash functions, each contributing its argmin over supp(a)."""
    keys = _row_keys(seed, "mh", m)
    mins = np.ones(m)
    arg = np.zeros(m, dtype=np.int64)
    if a.nnz():
        for lo in range(0, m, chunk_rows):
            h = to_unit(raw_hashes(keys[lo : lo + chunk_rows, None], a.indices[None, :]))
            j = h.argmin(axis=1)
            arg[lo : lo + chunk_rows] = j
            mins[lo : lo + chunk_rows] = h[np.arange(h.shape[0]), j]
        return MinHashSketch(mins, a.indices[arg], a.values[arg], m, seed)
    return MinHashSketch(mins, np.zeros(m, np.uint64), np.zeros(m), m, seed)


def union_size_estimate(sa: MinHashSketch, sb: MinHashSketch) -> float:
    """Distinct-elements estimate of ``|supp(a) U supp(b)|`` from combined minima.

    Each combined minimum is the smallest of U uniform draws, so their sum is
    approximately Gamma(m, U) and ``(m - 1) / sum`` is unbiased for U.
    """
    combined = np.minimum(sa.min_hashes, sb.min_hashes)
    return (sa.m - 1) / float(combined.sum())


def minhash_estimate(sa: MinHashSketch, sb: MinHashSketch) -> float:
    """Uniform with-replacement union sampling scaled by the estimated union size."""
    if (sa.m, sa.seed) != (sb.m, sb.seed):
        raise ValueError("MinHash sketches built with different parameters")
    match = (sa.min_hashes == sb.min_hashes) & (sa.keys == sb.keys)
    if not match.any():
        return 0.0
    return union_size_estimate(sa, sb) / sa.m * float((sa.values[match] * sb.values[match]).sum())
