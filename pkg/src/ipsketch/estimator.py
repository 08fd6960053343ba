"""Unbiased inner-product estimation from two coordinated sample sketches."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .hashing import unit_hashes
from .sketch import Method, SampleSketch, weights
from .sparse_vector import SparseVector, exact_inner_product, intersect, norms, restricted_sq_norm
from .threshold_sketch import solve_m_prime


class IncompatibleSketchError(ValueError):
    """Sketches were built with different seeds or sampling probabilities."""


@dataclass
class EstimateReport:
    estimate: float
    matched_count: int
    normalized_error: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def check_compatible(sa, sb) -> None:
    if sa.seed != sb.seed:
        raise IncompatibleSketchError(f"sketches use different seeds ({sa.seed} vs {sb.seed})")
    if sa.method.prob != sb.method.prob:
        raise IncompatibleSketchError(
            f"cannot combine {sa.method.value} with {sb.method.value}: sampling probabilities differ"
        )
    if sa.universe_size != sb.universe_size:
        raise IncompatibleSketchError("sketches cover different universes")


def inclusion_probabilities(sa: SampleSketch, sb: SampleSketch, ia: np.ndarray, ib: np.ndarray) -> np.ndarray:
    """``min(1, threshold_a(i), threshold_b(i))`` for matched sketch positions."""
    ta = sa.thresholds(sa.values[ia])
    tb = sb.thresholds(sb.values[ib])
    return np.minimum(1.0, np.minimum(ta, tb))


def estimate_inner_product(
    sa: SampleSketch, sb: SampleSketch, truth: float | None = None, norm_product: float | None = None
) -> EstimateReport:
    """Sum ``a_i * b_i / p_i`` over the keys both sketches kept.

    Threshold and priority sketches of the same probability family may be
    mixed: each side's stored normalizer is exactly the conditional
    threshold its own inclusion was tested against. An infinite ``tau``
    saturates to probability one.
    """
    check_compatible(sa, sb)
    _, ia, ib = np.intersect1d(sa.keys, sb.keys, assume_unique=True, return_indices=True)
    p = inclusion_probabilities(sa, sb, ia, ib)
    terms = sa.values[ia] * sb.values[ib] / p
    w = math.fsum(terms.tolist())
    err = None
    if truth is not None and norm_product:
        err = abs(w - truth) / norm_product
    return EstimateReport(estimate=w, matched_count=int(ia.size), normalized_error=err)


def variance_bound(a: SparseVector, b: SparseVector, m: int, family: str = "threshold") -> float:
    """Worst-case variance bound ``c(m) * max(||a_I||^2 ||b||^2, ||a||^2 ||b_I||^2)``.

    ``c(m) = 2/m`` for threshold sampling and ``2/(m-1)`` for priority sampling.
    """
    _, a2 = norms(a)
    _, b2 = norms(b)
    worst = max(restricted_sq_norm(a, b) * b2, a2 * restricted_sq_norm(b, a))
    denom = m if family == "threshold" else m - 1
    return 2.0 / denom * worst


def _seed_chunks(seeds: np.ndarray, width: int, budget: int = 4_000_000):
    step = max(1, budget // max(1, width))
    for lo in range(0, len(seeds), step):
        yield lo, seeds[lo : lo + step]


def _side_scale(v: SparseVector, m: int, prob: str, adaptive: bool) -> tuple[np.ndarray, float]:
    """Raw weights and fixed threshold scale of a threshold sketch of ``v``."""
    w = weights(prob, v.values)
    total = float(w.sum())
    m_prime = solve_m_prime(w / total, m) if adaptive else float(m)
    return w, (m_prime / total)


def batch_estimates(
    a: SparseVector,
    b: SparseVector,
    m: int,
    seeds: np.ndarray,
    method: Method | str,
    adaptive: bool = True,
) -> np.ndarray:
    """Estimator value for every seed in ``seeds``, without building sketch objects.

    Numerically this follows the same decisions as building both sketches
    with :func:`ipsketch.sampling_variants.variant_sketch` and calling
    :func:`estimate_inner_product`; only the final summation order differs.
    Threshold sketches need hashes on the support overlap only, priority
    sketches need them on both full supports to find each ``tau``.
    """
    method = Method(method)
    seeds = np.asarray(seeds, dtype=np.uint64)
    common, ia, ib = intersect(a, b)
    out = np.zeros(len(seeds))
    if common.size == 0:
        return out
    prob = method.prob
    ab = a.values[ia] * b.values[ib]
    if method.family == "threshold":
        wa, sca = _side_scale(a, m, prob, adaptive)
        wb, scb = _side_scale(b, m, prob, adaptive)
        ta, tb = sca * wa[ia], scb * wb[ib]
        p = np.minimum(1.0, np.minimum(ta, tb))
        coef = ab / p
        for lo, chunk in _seed_chunks(seeds, common.size):
            h = unit_hashes(chunk, common)
            out[lo : lo + len(chunk)] = ((h <= ta) & (h <= tb)) @ coef
        return out

    union = np.union1d(a.indices, b.indices)
    pa = np.searchsorted(union, a.indices)
    pb = np.searchsorted(union, b.indices)
    wa, wb = weights(prob, a.values), weights(prob, b.values)
    if prob != "l2":
        wa, wb = wa / wa.sum(), wb / wb.sum()
    for lo, chunk in _seed_chunks(seeds, union.size):
        h = unit_hashes(chunk, union)
        ra = h[:, pa] / wa
        rb = h[:, pb] / wb
        tau_a = np.partition(ra, m, axis=1)[:, m] if a.nnz() > m else np.full(len(chunk), np.inf)
        tau_b = np.partition(rb, m, axis=1)[:, m] if b.nnz() > m else np.full(len(chunk), np.inf)
        keep = (ra[:, ia] < tau_a[:, None]) & (rb[:, ib] < tau_b[:, None])
        with np.errstate(invalid="ignore"):
            p = np.minimum(1.0, np.minimum(tau_a[:, None] * wa[ia], tau_b[:, None] * wb[ib]))
        out[lo : lo + len(chunk)] = np.where(keep, ab / np.where(keep, p, 1.0), 0.0).sum(axis=1)
    return out


def monte_carlo_moments(
    a: SparseVector,
    b: SparseVector,
    m: int,
    trials: int,
    method: Method | str = Method.THRESHOLD_L2,
    seed: int = 0,
    adaptive: bool = True,
) -> tuple[float, float]:
    """Empirical mean and (unbiased sample) variance of the estimator over ``trials`` seeds."""
    if trials < 2:
        raise ValueError("need at least two trials")
    seeds = np.arange(trials, dtype=np.uint64) + np.uint64(int(seed) * trials)
    w = batch_estimates(a, b, m, seeds, method, adaptive=adaptive)
    return float(w.mean()), float(w.var(ddof=1))


def normalized_error(estimate: float, a: SparseVector, b: SparseVector) -> float:
    """``|estimate - <a,b>| / (||a|| ||b||)``."""
    _, a2 = norms(a)
    _, b2 = norms(b)
    return abs(estimate - exact_inner_product(a, b)) / math.sqrt(a2 * b2)
