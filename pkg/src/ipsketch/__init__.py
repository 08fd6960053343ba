"""Coordinated sampling sketches for inner products, join sizes and join correlations."""

from .baselines import (
    LinearSketch,
    MinHashSketch,
    countsketch,
    jl_sketch,
    linear_estimate,
    minhash_estimate,
    minhash_sketch,
)
from .estimator import (
    EstimateReport,
    IncompatibleSketchError,
    batch_estimates,
    estimate_inner_product,
    monte_carlo_moments,
    variance_bound,
)
from .hashing import TableHasher, UniformHasher, derive_seed
from .join_correlation import (
    CorrelationReport,
    CorrelationSketch,
    NoOverlapError,
    correlation_formula,
    correlation_sketch,
    estimate_join_correlation,
    exact_join_correlation,
)
from .priority_sketch import priority_sketch
from .sampling_variants import variant_sketch
from .sketch import Method, SampleSketch
from .sparse_vector import (
    DimensionError,
    SparseVector,
    exact_inner_product,
    from_key_values,
    read_csv_vector,
)
from .threshold_sketch import adaptive_m_prime, solve_m_prime, threshold_sketch

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
