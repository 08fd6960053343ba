"""Threshold (Poisson) sampling with an adaptively chosen budget multiplier."""

from __future__ import annotations

import logging
import math

import numpy as np

from .hashing import UniformHasher, unit_hashes
from .sketch import Method, SampleSketch, weights
from .sparse_vector import SparseVector

log = logging.getLogger(__name__)


def solve_m_prime(probs: np.ndarray, m: float, start: float | None = None) -> float:
    """Find ``m'`` with ``sum(min(1, m' * probs)) == m``.

    ``probs`` are positive per-entry weights (they need not sum to one). The
    saturated set grows monotonically from the starting guess, which must
    satisfy ``sum(min(1, start * probs)) <= m``; the default ``m / sum(probs)``
    always does. Each pass re-solves the linear equation on the unsaturated
    entries, so the loop runs at most ``m`` times over a presorted array.

    Returns ``inf`` when ``m`` is at least the number of entries: every entry
    is then kept with probability one.
    """
    p = np.asarray(probs, dtype=np.float64)
    n = p.size
    if m <= 0:
        raise ValueError(f"m must be positive, got {m}")
    if np.any(p <= 0):
        raise ValueError("weights must be positive")
    if m >= n:
        if m > n:
            log.info("budget %s exceeds support size %d; clamping and keeping everything", m, n)
        return math.inf
    desc = np.sort(p)[::-1]
    # tail[k] = sum of the entries left unsaturated when the k largest saturate
    tail = np.concatenate([np.cumsum(desc[::-1])[::-1], [0.0]])
    m_prime = m / tail[0] if start is None else float(start)
    for _ in range(n + 1):
        # saturated set: entries with m' * p >= 1
        k = int(np.searchsorted(-desc, -1.0 / m_prime, side="right"))
        if k + m_prime * tail[k] >= m * (1 - 1e-12):
            return m_prime
        m_prime = (m - k) / tail[k]
    raise RuntimeError("multiplier search failed to converge")  # pragma: no cover


def expected_size(probs: np.ndarray, m_prime: float) -> float:
    """``sum(min(1, m' * probs))``: expected sample count at multiplier ``m'``."""
    if math.isinf(m_prime):
        return float(np.count_nonzero(np.asarray(probs) > 0))
    return float(np.minimum(1.0, m_prime * np.asarray(probs)).sum())


def adaptive_m_prime(a: SparseVector, m: int) -> float:
    """Multiplier ``m' >= m`` making the expected l2 threshold sample size exactly ``m``."""
    w = a.values * a.values
    return solve_m_prime(w / w.sum(), m)


def _variant(
    a: SparseVector, m: int, prob: str, adaptive: bool, hasher: UniformHasher
) -> SampleSketch:
    method = Method.of("threshold", prob)
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    n = a.universe_size
    empty = np.empty(0, np.uint64), np.empty(0, np.float64)
    if a.nnz() == 0:
        # all-zero input: empty sketch, tau left at the budget
        aux = None if prob == "l2" else 0.0
        return SampleSketch(*empty, tau=float(m), method=method, m=m, seed=hasher.seed, aux=aux, universe_size=n)
    w = weights(prob, a.values)
    total = float(w.sum())
    m_prime = solve_m_prime(w / total, m) if adaptive else float(m)
    if prob == "l2":
        tau, aux = m_prime / total, None
    else:
        tau, aux = m_prime, total
    draft = SampleSketch(*empty, tau=tau, method=method, m=m, seed=hasher.seed, aux=aux, universe_size=n)
    pos = np.flatnonzero(hasher.unit(a.indices) <= draft.scale * w)
    return SampleSketch(
        a.indices.take(pos), a.values.take(pos), tau=tau, method=method, m=m, seed=hasher.seed, aux=aux, universe_size=n
    )


def threshold_sketch(
    a: SparseVector,
    seed: int,
    m: int,
    adaptive: bool = True,
    *,
    prob: str = "l2",
    hasher: UniformHasher | None = None,
) -> SampleSketch:
    """Keep index ``i`` iff ``h(i) <= m' * p_i(a)``.

    With ``adaptive=False`` the multiplier is ``m`` itself and the expected
    size is at most ``m``; with ``adaptive=True`` (default) ``m'`` is solved
    so the expected size equals ``min(m, nnz)``. ``hasher`` overrides the
    seeded hash, e.g. with a :class:`~ipsketch.hashing.TableHasher`.
    """
    return _variant(a, m, prob, adaptive, hasher if hasher is not None else UniformHasher(seed))


def sketch_sizes(a: SparseVector, m: int, seeds: np.ndarray, adaptive: bool = True) -> np.ndarray:
    """Sample counts of the l2 threshold sketch of ``a`` for many seeds at once."""
    w = a.values * a.values
    p = w / w.sum()
    m_prime = solve_m_prime(p, m) if adaptive else float(m)
    thr = m_prime * p
    out = np.empty(len(seeds), dtype=np.int64)
    step = max(1, 2_000_000 // max(1, a.nnz()))
    for lo in range(0, len(seeds), step):
        h = unit_hashes(seeds[lo : lo + step], a.indices)
        out[lo : lo + step] = (h <= thr).sum(axis=1)
    return out


def sketch_size_tail_check(a: SparseVector, m: int, delta: float, trials: int, adaptive: bool = True) -> float:
    """Fraction of seeds whose sketch holds more than ``m + sqrt(m / delta)`` samples."""
    if not 0 < delta < 1:
        raise ValueError("delta must be in (0, 1)")
    sizes = sketch_sizes(a, m, np.arange(trials, dtype=np.uint64), adaptive=adaptive)
    return float(np.mean(sizes > m + math.sqrt(m / delta)))
