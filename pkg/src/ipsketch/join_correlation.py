"""Post-join Pearson correlation from inner-product sketches.

Every term of the correlation of the joined columns is an inner product
between ``a``, ``a**2``, ``1_a`` and their counterparts for ``b``::

    n      = <1_a, 1_b>     sum_x  = <a, 1_b>     sum_y  = <1_a, b>
    <x, y> = <a, b>         sum_x2 = <a**2, 1_b>  sum_y2 = <1_a, b**2>

so any inner-product sketch yields a correlation estimate. The global
sketches below store one sample set per column that serves all three views.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .estimator import estimate_inner_product
from .hashing import UniformHasher
from .sketch import SampleSketch
from .sparse_vector import SparseVector, derive_triple, intersect
from .threshold_sketch import solve_m_prime

log = logging.getLogger(__name__)

PRODUCTS = ("n", "sum_x", "sum_y", "sum_xy", "sum_x2", "sum_y2")


class NoOverlapError(ValueError):
    """The (estimated) join is empty."""


@dataclass
class CorrelationReport:
    """``rho`` is None when the estimate is undefined; ``reason`` says why."""

    rho: float | None
    products: dict[str, float]
    matched_count: int = 0
    reason: str = ""

    @property
    def defined(self) -> bool:
        return self.rho is not None

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "defined": self.defined,
            "reason": self.reason,
            "matched_count": self.matched_count,
            "products": self.products,
        }


def correlation_formula(
    n: float, sum_x: float, sum_y: float, sum_x2: float, sum_y2: float, ip_xy: float, rel_tol: float = 1e-12
) -> float | None:
    """Pearson correlation from sums; None when a column is (numerically) constant.

    Raises :class:`NoOverlapError` when ``n <= 0``. The result is clamped to
    [-1, 1] since estimated sums can push the raw ratio outside it.
    """
    if not n > 0:
        raise NoOverlapError(f"join size estimate is {n}")
    num = n * ip_xy - sum_x * sum_y
    var_x = n * sum_x2 - sum_x * sum_x
    var_y = n * sum_y2 - sum_y * sum_y
    if var_x <= rel_tol * abs(n * sum_x2) or var_y <= rel_tol * abs(n * sum_y2):
        return None
    rho = num / (math.sqrt(var_x) * math.sqrt(var_y))
    return max(-1.0, min(1.0, rho))


def combine(products: dict[str, float], matched: int = 0) -> CorrelationReport:
    """Turn the six inner products into a report, never raising on sampling noise."""
    try:
        rho = correlation_formula(
            products["n"], products["sum_x"], products["sum_y"],
            products["sum_x2"], products["sum_y2"], products["sum_xy"],
        )
    except NoOverlapError:
        return CorrelationReport(None, products, matched, "no-overlap")
    if rho is None:
        log.debug("non-positive variance term in correlation estimate: %s", products)
        return CorrelationReport(None, products, matched, "non-positive-variance")
    return CorrelationReport(rho, products, matched)


def exact_join_correlation(a: SparseVector, b: SparseVector) -> float | None:
    """Two-pass Pearson correlation of the values on the shared keys."""
    _, ia, ib = intersect(a, b)
    if ia.size == 0:
        raise NoOverlapError("tables share no keys")
    x, y = a.values[ia], b.values[ib]
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        return None
    return max(-1.0, min(1.0, float(dx @ dy) / math.sqrt(sxx * syy)))


def exact_products(a: SparseVector, b: SparseVector) -> dict[str, float]:
    _, ia, ib = intersect(a, b)
    x, y = a.values[ia], b.values[ib]
    return {
        "n": float(ia.size), "sum_x": math.fsum(x), "sum_y": math.fsum(y),
        "sum_xy": math.fsum(x * y), "sum_x2": math.fsum(x * x), "sum_y2": math.fsum(y * y),
    }


# --------------------------------------------------------------------------
# global sketches


@dataclass(frozen=True, eq=False)
class CorrelationSketch:
    """One sample of ``(i, a_i)`` pairs plus a normalizer per derived view.

    The indicator and squared views are recomputed from the raw values at
    estimation time. ``m_prime`` records the budget multiplier in use; for
    the priority family it is the largest per-rank-function sample count.
    """

    keys: np.ndarray
    values: np.ndarray
    tau_indicator: float
    tau_base: float
    tau_squared: float
    family: str
    m_prime: float
    budget: int
    seed: int
    universe_size: int = 1 << 64
    nnz: int = field(default=0)

    def __len__(self) -> int:
        return int(self.keys.size)

    def thresholds(self, values: np.ndarray | None = None) -> np.ndarray:
        """``max(tau_1, v**2 tau_a, v**4 tau_a2)`` per stored entry."""
        v = self.values if values is None else values
        v2 = v * v
        return np.maximum(self.tau_indicator, np.maximum(v2 * self.tau_base, v2 * v2 * self.tau_squared))

    def storage_words(self) -> float:
        return 1.5 * len(self) + 3


def _global_weights(a: SparseVector) -> tuple[np.ndarray, float, float, int]:
    v2 = a.values * a.values
    s2, s4 = float(v2.sum()), float((v2 * v2).sum())
    n = a.nnz()
    return np.maximum(np.maximum(v2 / s2, 1.0 / n), v2 * v2 / s4), s2, s4, n


def correlation_threshold_sketch(
    a: SparseVector, seed: int, m_budget: int, *, hasher: UniformHasher | None = None
) -> CorrelationSketch:
    """Threshold sample at ``T_i = max(tau_i(1_a), tau_i(a), tau_i(a**2))``.

    ``m'`` starts at ``m_budget / 3`` and grows by the saturated-set
    iteration until ``sum(min(1, T_i)) == m_budget``.
    """
    if m_budget < 3:
        raise ValueError("correlation sketches need a budget of at least 3")
    hasher = hasher if hasher is not None else UniformHasher(seed)
    if a.nnz() == 0:
        return _empty(a, "threshold", m_budget, hasher.seed)
    c, s2, s4, n = _global_weights(a)
    m_prime = solve_m_prime(c, m_budget, start=m_budget / 3)
    sk = CorrelationSketch(
        np.empty(0, np.uint64), np.empty(0), m_prime / n, m_prime / s2, m_prime / s4,
        "threshold", m_prime, m_budget, hasher.seed, a.universe_size, n,
    )
    keep = hasher.unit(a.indices) <= sk.thresholds(a.values)
    return CorrelationSketch(
        a.indices[keep], a.values[keep], sk.tau_indicator, sk.tau_base, sk.tau_squared,
        "threshold", m_prime, m_budget, hasher.seed, a.universe_size, n,
    )


def _empty(a: SparseVector, family: str, budget: int, seed: int) -> CorrelationSketch:
    return CorrelationSketch(
        np.empty(0, np.uint64), np.empty(0), math.inf, math.inf, math.inf, family, math.inf, budget, seed,
        a.universe_size, 0,
    )


def correlation_priority_sketch(
    a: SparseVector, seed: int, m_budget: int, *, hasher: UniformHasher | None = None
) -> CorrelationSketch:
    """Union of the smallest ranks under ``h``, ``h / a_i**2`` and ``h / a_i**4``.

    The per-function sample counts walk the staircase
    ``(k, k, k) -> (k+1, k, k) -> (k+1, k+1, k) -> (k+1, k+1, k+1)`` from
    ``k = m_budget // 3``; each step adds at most one index, so a binary
    search over the staircase lands on a sketch of exactly ``m_budget``
    entries whenever the support is larger than the budget.
    """
    if m_budget < 3:
        raise ValueError("correlation sketches need a budget of at least 3")
    hasher = hasher if hasher is not None else UniformHasher(seed)
    n = a.nnz()
    if n == 0:
        return _empty(a, "priority", m_budget, hasher.seed)
    if n <= m_budget:
        return CorrelationSketch(
            a.indices, a.values, math.inf, math.inf, math.inf, "priority", float(m_budget), m_budget,
            hasher.seed, a.universe_size, n,
        )
    h = hasher.unit(a.indices)
    v2 = a.values * a.values
    ranks = np.stack([h, h / v2, h / (v2 * v2)])  # indicator, base, squared
    orders = np.argsort(ranks, axis=1, kind="stable")
    pos = np.empty_like(orders)
    rows = np.arange(3)[:, None]
    pos[rows, orders] = np.arange(n)[None, :]
    base = m_budget // 3

    def counts(t: int) -> np.ndarray:
        return base + t // 3 + (np.arange(3) < t % 3)

    def size(t: int) -> int:
        return int(np.any(pos < counts(t)[:, None], axis=0).sum())

    lo, hi = 0, 3 * (m_budget - base)
    while lo < hi:
        mid = (lo + hi) // 2
        if size(mid) >= m_budget:
            hi = mid
        else:
            lo = mid + 1
    k = counts(lo)
    keep = np.any(pos < k[:, None], axis=0)
    taus = ranks[np.arange(3), orders[np.arange(3), k]]
    return CorrelationSketch(
        a.indices[keep], a.values[keep], float(taus[0]), float(taus[1]), float(taus[2]),
        "priority", float(k.max()), m_budget, hasher.seed, a.universe_size, n,
    )


def correlation_sketch(a: SparseVector, seed: int, m_budget: int, family: str = "priority", **kw) -> CorrelationSketch:
    if family == "threshold":
        return correlation_threshold_sketch(a, seed, m_budget, **kw)
    if family == "priority":
        return correlation_priority_sketch(a, seed, m_budget, **kw)
    raise ValueError(f"unknown family {family!r}")


def global_products(ga: CorrelationSketch, gb: CorrelationSketch) -> tuple[dict[str, float], int]:
    """The six inner-product estimates ``sum f(a_i) g(b_i) / p_i`` over shared keys."""
    if ga.seed != gb.seed:
        raise ValueError("correlation sketches use different seeds")
    if ga.family != gb.family:
        raise ValueError("correlation sketches come from different families")
    _, ia, ib = np.intersect1d(ga.keys, gb.keys, assume_unique=True, return_indices=True)
    x, y = ga.values[ia], gb.values[ib]
    p = np.minimum(1.0, np.minimum(ga.thresholds(x), gb.thresholds(y)))
    inv = 1.0 / p
    products = {
        "n": math.fsum(inv), "sum_x": math.fsum(x * inv), "sum_y": math.fsum(y * inv),
        "sum_xy": math.fsum(x * y * inv), "sum_x2": math.fsum(x * x * inv), "sum_y2": math.fsum(y * y * inv),
    }
    return products, int(ia.size)


def estimate_join_correlation(ga, gb) -> CorrelationReport:
    """Estimate the post-join correlation from two global sketches or two sketch triples.

    Raises :class:`NoOverlapError` when no key is shared. Triples are ``(S(a), S(a**2), S(1_a))`` built by any sample sketch with
    a shared seed.
    """
    if isinstance(ga, CorrelationSketch):
        products, matched = global_products(ga, gb)
    else:
        products, matched = triple_products(ga, gb, lambda s, t: estimate_inner_product(s, t).estimate)
    if products["n"] == 0:
        raise NoOverlapError("no shared keys in the sketches; the join estimate is empty")
    return combine(products, matched)


def triple_products(ta, tb, estimate: Callable) -> tuple[dict[str, float], int]:
    """Six inner products from per-view sketches ``(base, squared, indicator)``."""
    base_a, sq_a, ind_a = ta
    base_b, sq_b, ind_b = tb
    products = {
        "n": estimate(ind_a, ind_b),
        "sum_x": estimate(base_a, ind_b),
        "sum_y": estimate(ind_a, base_b),
        "sum_xy": estimate(base_a, base_b),
        "sum_x2": estimate(sq_a, ind_b),
        "sum_y2": estimate(ind_a, sq_b),
    }
    matched = 0
    if hasattr(base_a, "keys"):
        matched = len(np.intersect1d(
            np.concatenate([s.keys for s in ta]), np.concatenate([s.keys for s in tb])
        ))
    return products, matched


def triple_sketches(a: SparseVector, build: Callable[[SparseVector], object]) -> tuple:
    """Apply ``build`` to ``a``, ``a**2`` and ``1_a``."""
    t = derive_triple(a)
    return build(t.base), build(t.squared), build(t.indicator)


def sample_correlation(sa: SampleSketch, sb: SampleSketch) -> CorrelationReport:
    """Pearson correlation of the values on the keys both samples kept.

    This is the estimator of the KMV-style correlation sketches; it ignores
    inclusion probabilities and needs at least three matched keys.
    """
    _, ia, ib = np.intersect1d(sa.keys, sb.keys, assume_unique=True, return_indices=True)
    x, y = sa.values[ia], sb.values[ib]
    k = int(ia.size)
    products = {
        "n": float(k), "sum_x": float(x.sum()), "sum_y": float(y.sum()),
        "sum_xy": float(x @ y), "sum_x2": float(x @ x), "sum_y2": float(y @ y),
    }
    if k < 3:
        return CorrelationReport(None, products, k, "fewer-than-3-matches")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = float(dx @ dx), float(dy @ dy)
    if sxx == 0 or syy == 0:
        return CorrelationReport(None, products, k, "non-positive-variance")
    return CorrelationReport(max(-1.0, min(1.0, float(dx @ dy) / math.sqrt(sxx * syy))), products, k)
