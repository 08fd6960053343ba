"""Sparse vectors and the exact reference operations every sketch is checked against."""

from __future__ import annotations

import csv
import hashlib
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

UNIVERSE_64 = 1 << 64


class DimensionError(ValueError):
    """Two vectors live in different universes."""


@dataclass(frozen=True, eq=False)
class SparseVector:
    """Immutable sparse vector over ``{0, ..., universe_size - 1}``.

    ``indices`` is strictly increasing (uint64) and ``values`` holds the
    matching nonzero float64 entries. Explicit zeros are rejected so that a
    generator bug shows up at construction instead of as a silently smaller
    support.
    """

    universe_size: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        idx = np.ascontiguousarray(self.indices, dtype=np.uint64)
        val = np.ascontiguousarray(self.values, dtype=np.float64)
        n = int(self.universe_size)
        if n <= 0:
            raise ValueError(f"universe_size must be positive, got {n}")
        if idx.ndim != 1 or idx.shape != val.shape:
            raise ValueError("indices and values must be 1-d arrays of equal length")
        if idx.size:
            if np.any(idx[1:] <= idx[:-1]):
                raise ValueError("indices must be strictly increasing")
            if n < UNIVERSE_64 and int(idx[-1]) >= n:
                raise ValueError(f"index {int(idx[-1])} outside universe of size {n}")
            if not np.all(np.isfinite(val)):
                raise ValueError("values must be finite")
            if np.any(val == 0.0):
                raise ValueError("explicit zero entries are not allowed")
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "universe_size", n)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_dict(cls, universe_size: int, entries: Mapping[int, float]) -> "SparseVector":
        items = sorted((int(k), float(v)) for k, v in entries.items() if v != 0)
        idx = np.array([k for k, _ in items], dtype=np.uint64)
        val = np.array([v for _, v in items], dtype=np.float64)
        return cls(universe_size, idx, val)

    @classmethod
    def from_dense(cls, dense: Iterable[float]) -> "SparseVector":
        arr = np.asarray(list(dense) if not isinstance(dense, np.ndarray) else dense, dtype=np.float64)
        nz = np.flatnonzero(arr)
        return cls(arr.size, nz.astype(np.uint64), arr[nz])

    @classmethod
    def empty(cls, universe_size: int) -> "SparseVector":
        return cls(universe_size, np.empty(0, np.uint64), np.empty(0, np.float64))

    def nnz(self) -> int:
        return int(self.indices.size)

    def __len__(self) -> int:
        return self.nnz()

    def value(self, i: int) -> float:
        pos = np.searchsorted(self.indices, np.uint64(i))
        if pos < self.indices.size and int(self.indices[pos]) == int(i):
            return float(self.values[pos])
        return 0.0

    def support(self) -> set[int]:
        return set(self.indices.tolist())

    def scaled(self, c: float) -> "SparseVector":
        if c == 0:
            return SparseVector.empty(self.universe_size)
        return SparseVector(self.universe_size, self.indices, self.values * c)

    def map_values(self, fn) -> "SparseVector":
        return SparseVector(self.universe_size, self.indices, fn(self.values))

    def to_dense(self) -> np.ndarray:
        if self.universe_size > 10**8:
            raise ValueError("universe too large to densify")
        out = np.zeros(self.universe_size)
        out[self.indices.astype(np.int64)] = self.values
        return out

    def __repr__(self) -> str:
        return f"SparseVector(n={self.universe_size}, nnz={self.nnz()})"


@dataclass(frozen=True)
class DerivedTriple:
    """The vectors ``a``, ``a**2`` and ``1_a`` used by the join-correlation reduction."""

    base: SparseVector
    squared: SparseVector
    indicator: SparseVector


def _check_dims(a: SparseVector, b: SparseVector) -> None:
    if a.universe_size != b.universe_size:
        raise DimensionError(f"universe sizes differ: {a.universe_size} vs {b.universe_size}")


def intersect(a: SparseVector, b: SparseVector) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shared indices with their positions in ``a`` and ``b`` (ascending index order)."""
    common, ia, ib = np.intersect1d(a.indices, b.indices, assume_unique=True, return_indices=True)
    return common, ia, ib


def exact_inner_product(a: SparseVector, b: SparseVector) -> float:
    """Exact ``<a, b>`` by sorted merge; correctly rounded sum in ascending index order."""
    _check_dims(a, b)
    _, ia, ib = intersect(a, b)
    return math.fsum((a.values[ia] * b.values[ib]).tolist())


def norms(a: SparseVector) -> tuple[float, float]:
    """Return ``(||a||_1, ||a||_2**2)``."""
    return math.fsum(np.abs(a.values).tolist()), math.fsum((a.values * a.values).tolist())


def restricted_sq_norm(a: SparseVector, b: SparseVector) -> float:
    """``||a_I||_2**2`` where I is the support overlap of ``a`` and ``b``."""
    _check_dims(a, b)
    _, ia, _ = intersect(a, b)
    return math.fsum((a.values[ia] ** 2).tolist())


def derive_triple(a: SparseVector) -> DerivedTriple:
    return DerivedTriple(
        base=a,
        squared=SparseVector(a.universe_size, a.indices, a.values * a.values),
        indicator=SparseVector(a.universe_size, a.indices, np.ones_like(a.values)),
    )


def key_index(key: str) -> int:
    """Stable 64-bit index for a table key (blake2b, little endian).

    Distinct keys that collide land on the same index and are summed, the
    same treatment repeated keys receive.
    """
    return int.from_bytes(hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "little")


def from_key_values(
    pairs: Iterable[tuple[str, float]], key_mode: str = "hash", universe_size: int | None = None
) -> SparseVector:
    """Aggregate ``(key, value)`` rows into a sparse vector.

    ``key_mode="hash"`` maps keys through :func:`key_index` into a 2**64
    universe; ``key_mode="int"`` uses integer keys as indices directly.
    Repeated keys are pre-aggregated by summation; sums that cancel to zero
    drop out of the support.
    """
    acc: dict[int, float] = defaultdict(float)
    for key, value in pairs:
        if key_mode == "hash":
            idx = key_index(str(key))
        elif key_mode == "int":
            idx = int(key)
            if idx < 0:
                raise ValueError(f"negative integer key {idx}")
        else:
            raise ValueError(f"unknown key_mode {key_mode!r}")
        acc[idx] += float(value)
    if universe_size is None:
        universe_size = UNIVERSE_64 if key_mode == "hash" else (max(acc) + 1 if acc else 1)
    return SparseVector.from_dict(universe_size, acc)


def read_csv_vector(
    path: str,
    key_column: str | int = 0,
    value_column: str | int | None = 1,
    key_mode: str = "hash",
    universe_size: int | None = None,
    has_header: bool | None = None,
) -> SparseVector:
    """Read a ``key,value`` CSV (header optional) into a sparse vector.

    With ``value_column=None`` every row counts 1, which turns a key column
    into a key-frequency vector. ``has_header=None`` sniffs the header from
    a non-numeric value cell; count tables have no value cell to sniff and
    are assumed headerless unless ``has_header`` says otherwise.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return SparseVector.empty(universe_size or UNIVERSE_64)
    header = rows[0]
    named = isinstance(key_column, str) or isinstance(value_column, str)
    if has_header is None:
        has_header = named or (value_column is not None and not _looks_numeric(header[value_column]))
    if has_header:
        body = rows[1:]
        kcol = header.index(key_column) if isinstance(key_column, str) else key_column
        vcol = header.index(value_column) if isinstance(value_column, str) else value_column
    else:
        body = rows
        kcol, vcol = key_column, value_column
    pairs = ((r[kcol], 1.0 if vcol is None else float(r[vcol])) for r in body if r)
    return from_key_values(pairs, key_mode=key_mode, universe_size=universe_size)


def _looks_numeric(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True
