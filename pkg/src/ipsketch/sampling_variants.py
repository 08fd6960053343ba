"""One entry point for all six (family x probability) sample sketches.

``l2`` samples proportionally to ``a_i**2``, ``l1`` to ``|a_i|`` (for the
threshold family this is End-Biased sampling) and ``uniform`` gives every
nonzero the same probability (uniform priority sampling is the KMV sketch).
"""

from __future__ import annotations

import numpy as np

from .priority_sketch import priority_sketch
from .threshold_sketch import solve_m_prime, threshold_sketch
from .hashing import UniformHasher
from .sketch import FAMILIES, PROBS, Method, SampleSketch, weights
from .sparse_vector import SparseVector


def variant_sketch(
    a: SparseVector,
    seed: int,
    m: int,
    prob: str = "l2",
    family: str = "priority",
    *,
    adaptive: bool = True,
    hasher: UniformHasher | None = None,
) -> SampleSketch:
    if prob not in PROBS:
        raise ValueError(f"unknown probability {prob!r}; expected one of {PROBS}")
    if family == "threshold":
        return threshold_sketch(a, seed, m, adaptive, prob=prob, hasher=hasher)
    if family == "priority":
        return priority_sketch(a, seed, m, prob=prob, hasher=hasher)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def build(a: SparseVector, method: Method | str, seed: int, m: int, **kw) -> SampleSketch:
    method = Method(method)
    return variant_sketch(a, seed, m, method.prob, method.family, **kw)


def sampling_probabilities(a: SparseVector, prob: str) -> np.ndarray:
    """Normalized ``p_i(a)`` over the support (sums to one)."""
    w = weights(prob, a.values)
    return w / w.sum()


def marginal_inclusion(a: SparseVector, m: int, prob: str, adaptive: bool = False) -> np.ndarray:
    """Per-entry threshold-sampling inclusion probabilities ``min(1, m' p_i)``."""
    p = sampling_probabilities(a, prob)
    m_prime = solve_m_prime(p, m) if adaptive else float(m)
    return np.minimum(1.0, m_prime * p)
