"""Priority (sequential Poisson) sampling: the m smallest ranks, fixed sketch size."""

from __future__ import annotations

import math

import numpy as np

from .hashing import UniformHasher
from .sketch import Method, SampleSketch, weights
from .sparse_vector import SparseVector


def rank_selection(ranks: np.ndarray, m: int) -> tuple[np.ndarray, float]:
    """Positions of the ``m`` smallest ranks and the ``(m+1)``-st smallest rank.

    Equal ranks are ordered by position, so callers passing ranks in
    ascending index order get the smaller-index-first tie rule. Selection is
    an introselect partition (linear time) followed by tie resolution at the
    boundary. Returns a boolean mask over ``ranks`` and ``tau`` (``inf`` when
    there are at most ``m`` ranks).
    """
    r = np.asarray(ranks, dtype=np.float64)
    n = r.size
    if m < 0:
        raise ValueError("m must be non-negative")
    if n <= m:
        return np.ones(n, dtype=bool), math.inf
    tau = float(np.partition(r, m)[m])
    keep = r < tau
    short = m - int(keep.sum())
    if short > 0:
        ties = np.flatnonzero(r == tau)
        keep[ties[:short]] = True
    return keep, tau


def _variant(a: SparseVector, m: int, prob: str, hasher: UniformHasher) -> SampleSketch:
    method = Method.of("priority", prob)
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    w = weights(prob, a.values)
    aux = None if prob == "l2" else float(w.sum())
    if prob != "l2" and a.nnz():
        w = w / aux
    ranks = hasher.unit(a.indices) / w if a.nnz() else np.empty(0)
    keep, tau = rank_selection(ranks, m)
    # flatnonzero + take gathers faster than boolean indexing on dense random masks
    pos = np.flatnonzero(keep)
    return SampleSketch(
        a.indices.take(pos), a.values.take(pos), tau=tau, method=method, m=m, seed=hasher.seed, aux=aux,
        universe_size=a.universe_size,
    )


def priority_sketch(
    a: SparseVector, seed: int, m: int, *, prob: str = "l2", hasher: UniformHasher | None = None
) -> SampleSketch:
    """Rank every nonzero by ``h(i) / p_i(a)`` and keep the ``m`` smallest.

    The ``(m+1)``-st smallest rank is stored as ``tau``; with at most ``m``
    nonzeros everything is kept and ``tau`` is infinite, which makes the
    estimator exact.
    """
    return _variant(a, m, prob, hasher if hasher is not None else UniformHasher(seed))
