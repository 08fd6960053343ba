import math

import numpy as np
import pytest
from conftest import EXAMPLE_HASHES, random_pair

from ipsketch.estimator import (
    IncompatibleSketchError,
    batch_estimates,
    estimate_inner_product,
    monte_carlo_moments,
    normalized_error,
    variance_bound,
)
from ipsketch.hashing import TableHasher
from ipsketch.sampling_variants import variant_sketch
from ipsketch.sketch import Method
from ipsketch.sparse_vector import SparseVector, exact_inner_product
from ipsketch.threshold_sketch import threshold_sketch


def test_worked_example_estimate(example_pair):
    a, b = example_pair
    hasher = TableHasher(EXAMPLE_HASHES)
    sa = threshold_sketch(a, 0, 4, adaptive=False, hasher=hasher)
    sb = threshold_sketch(b, 0, 4, adaptive=False, hasher=hasher)
    rep = estimate_inner_product(sa, sb, truth=-31.85, norm_product=1.0)
    # hand computation: 2.5 * -3.1 / 0.4948 + 4 * -4.2 / 0.9772 over shared keys 3 and 8
    na, nb = (a.values**2).sum(), (b.values**2).sum()
    hand = 2.5 * -3.1 / min(1, 4 * 6.25 / na, 4 * 9.61 / nb) + 4 * -4.2 / min(1, 4 * 16 / na, 4 * 17.64 / nb)
    assert rep.estimate == pytest.approx(hand, rel=1e-12)
    assert rep.estimate == pytest.approx(-32.85, abs=0.01)
    assert rep.matched_count == 2
    assert rep.normalized_error == pytest.approx(abs(rep.estimate + 31.85))


@pytest.mark.parametrize("method", list(Method))
def test_batch_path_matches_object_path(method, rng):
    a, b = random_pair(rng, 3000, 300, 90, outliers=6)
    seeds = np.arange(25, dtype=np.uint64)
    batch = batch_estimates(a, b, 40, seeds, method)
    objs = [
        estimate_inner_product(
            variant_sketch(a, int(s), 40, method.prob, method.family),
            variant_sketch(b, int(s), 40, method.prob, method.family),
        ).estimate
        for s in seeds
    ]
    assert batch == pytest.approx(objs, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("method", list(Method))
def test_unbiased_quick(method, rng):
    a, b = random_pair(rng, 2000, 200, 60, outliers=4)
    trials = 20_000
    w = batch_estimates(a, b, 30, np.arange(trials, dtype=np.uint64), method)
    se = w.std(ddof=1) / math.sqrt(trials)
    assert abs(w.mean() - exact_inner_product(a, b)) <= 4 * se


def test_variance_within_bound(rng):
    a, b = random_pair(rng, 2000, 200, 100, outliers=4)
    for method, family in [(Method.THRESHOLD_L2, "threshold"), (Method.PRIORITY_L2, "priority")]:
        _, var = monte_carlo_moments(a, b, 32, 20_000, method)
        assert var <= 1.05 * variance_bound(a, b, 32, family)


def test_saturated_sketches_are_exact(example_pair):
    a, b = example_pair
    for method in Method:
        sa = variant_sketch(a, 3, 10, method.prob, method.family)
        sb = variant_sketch(b, 3, 10, method.prob, method.family)
        assert estimate_inner_product(sa, sb).estimate == pytest.approx(-31.85, abs=1e-12)


def test_disjoint_supports_estimate_zero():
    a = SparseVector.from_dict(10, {1: 1.0, 2: 2.0})
    b = SparseVector.from_dict(10, {3: 1.0})
    rep = estimate_inner_product(variant_sketch(a, 0, 1), variant_sketch(b, 0, 1))
    assert rep.estimate == 0.0 and rep.matched_count == 0


def test_seed_mismatch_rejected(example_pair):
    a, b = example_pair
    with pytest.raises(IncompatibleSketchError):
        estimate_inner_product(threshold_sketch(a, 1, 3), threshold_sketch(b, 2, 3))


def test_probability_mismatch_rejected(example_pair):
    a, b = example_pair
    with pytest.raises(IncompatibleSketchError):
        estimate_inner_product(variant_sketch(a, 1, 3, "l2"), variant_sketch(b, 1, 3, "l1"))


def test_mixed_families_are_unbiased(rng):
    a, b = random_pair(rng, 2000, 200, 80, outliers=4)
    truth = exact_inner_product(a, b)
    ests = np.array([
        estimate_inner_product(variant_sketch(a, s, 30, "l2", "threshold"),
                               variant_sketch(b, s, 30, "l2", "priority")).estimate
        for s in range(4000)
    ])
    assert abs(ests.mean() - truth) <= 4 * ests.std(ddof=1) / math.sqrt(ests.size)


def test_normalized_error(example_pair):
    a, b = example_pair
    expected = 1.0 / math.sqrt((a.values**2).sum() * (b.values**2).sum())
    assert normalized_error(-32.85, a, b) == pytest.approx(expected)


def test_monte_carlo_needs_two_trials(example_pair):
    with pytest.raises(ValueError):
        monte_carlo_moments(*example_pair, 3, 1)


def forty_dim_pair(seed=0):
    rng = np.random.default_rng(seed)
    a, b = random_pair(rng, 40, 20, 10)
    return a, b


@pytest.mark.parametrize("method", [Method.THRESHOLD_L2, Method.PRIORITY_L2])
def test_forty_dim_pair_moments(method):
    a, b = forty_dim_pair()
    mean, var = monte_carlo_moments(a, b, 10, 100_000, method)
    assert abs(mean - exact_inner_product(a, b)) <= 3 * math.sqrt(var / 100_000)
    assert var <= 1.05 * variance_bound(a, b, 10, method.family)


def test_identical_saturated_vectors_have_zero_variance():
    a, _ = forty_dim_pair(1)
    for method in (Method.THRESHOLD_L2, Method.PRIORITY_L2):
        mean, var = monte_carlo_moments(a, a, 25, 1000, method)
        assert var == pytest.approx(0.0, abs=1e-20) and mean == pytest.approx((a.values**2).sum())


def test_chebyshev_coverage(rng):
    a, b = random_pair(rng, 5000, 500, 100, outliers=10)
    eps, delta = 0.25, 0.2
    m = math.ceil((2 / delta) / eps**2)
    w = batch_estimates(a, b, m, np.arange(5000, dtype=np.uint64), Method.THRESHOLD_L2)
    na, nb = (a.values**2).sum(), (b.values**2).sum()
    from ipsketch.sparse_vector import restricted_sq_norm

    scale = max(math.sqrt(restricted_sq_norm(a, b) * nb), math.sqrt(na * restricted_sq_norm(b, a)))
    assert np.mean(np.abs(w - exact_inner_product(a, b)) > eps * scale) <= delta


def test_scale_equivariance(rng):
    a, b = random_pair(rng, 2000, 200, 80, outliers=4)
    w = batch_estimates(a.scaled(-3.5), b, 30, np.arange(20_000, dtype=np.uint64), Method.PRIORITY_L2)
    truth = -3.5 * exact_inner_product(a, b)
    assert abs(w.mean() - truth) <= 4 * w.std(ddof=1) / math.sqrt(w.size)
    # l2 weights are scale invariant, so the sample and the estimate scale exactly
    w1 = batch_estimates(a, b, 30, np.arange(50, dtype=np.uint64), Method.PRIORITY_L2)
    assert w[:50] == pytest.approx(-3.5 * w1)
