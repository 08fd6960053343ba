"""Synthetic experiment grids with equal-storage comparisons and CSV output."""

from __future__ import annotations

import csv
import json
import math
import os
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import baselines as bl
from .estimator import estimate_inner_product
from .hashing import derive_seed
from .join_correlation import (
    CorrelationReport,
    NoOverlapError,
    combine,
    correlation_sketch,
    exact_join_correlation,
    estimate_join_correlation,
    sample_correlation,
    triple_products,
    triple_sketches,
)
from .sampling_variants import variant_sketch
from .sparse_vector import SparseVector, exact_inner_product, from_key_values, norms

THREADS_ENV = "IPSKETCH_THREADS"
SAMPLE_WORDS = 1.5


class ConfigError(ValueError):
    pass


@dataclass
class SyntheticSpec:
    universe_size: int = 100_000
    nnz: int = 20_000
    overlap_fraction: float = 0.1
    outlier_fraction: float = 0.02
    outlier_range: tuple[float, float] = (0.0, 10.0)
    value_range: tuple[float, float] = (-1.0, 1.0)
    binary: bool = False
    shared_outliers: bool = True
    target_correlation: float | None = None
    seed: int = 0

    def overlap_count(self) -> int:
        return int(round(self.overlap_fraction * self.nnz))


@dataclass
class ResultRow:
    experiment: str
    setting: str
    method: str
    budget: int
    storage_words: float
    sketch_size: int
    trial: int
    seed: int
    estimate: float | None
    truth: float | None
    normalized_error: float | None
    wall_time_sketch: float = field(default=0.0, metadata={"timing": True})
    wall_time_estimate: float = field(default=0.0, metadata={"timing": True})


# --------------------------------------------------------------------------
# data generation


def _uniform_nonzero(rng: np.random.Generator, lo: float, hi: float, size: int) -> np.ndarray:
    out = rng.uniform(lo, hi, size)
    while np.any(out == 0):
        zeros = out == 0
        out[zeros] = rng.uniform(lo, hi, int(zeros.sum()))
    return out


def _outliers(spec: SyntheticSpec, rng: np.random.Generator, count: int) -> np.ndarray:
    return _uniform_nonzero(rng, *spec.outlier_range, count)


def _vector(n: int, idx: np.ndarray, vals: np.ndarray) -> SparseVector:
    order = np.argsort(idx)
    return SparseVector(n, idx[order].astype(np.uint64), vals[order])


def gen_pair(spec: SyntheticSpec) -> tuple[SparseVector, SparseVector]:
    """Two vectors with ``nnz`` nonzeros each, sharing ``round(overlap * nnz)`` indices.

    Values are uniform on ``value_range``. Outliers drawn from
    ``outlier_range`` replace ``round(outlier_fraction * k)`` entries of the
    shared block and ``round(outlier_fraction * (nnz - k))`` entries of each
    private block, so every vector has an exact outlier count. With
    ``shared_outliers`` the shared-block outliers sit at the same indices in
    both vectors (outliers are properties of universe entries); otherwise
    each vector places its own. Binary mode sets every nonzero to one.
    """
    k = spec.overlap_count()
    if not 0 < spec.overlap_fraction <= 1 or spec.nnz < 1 or 2 * spec.nnz - k > spec.universe_size:
        raise ConfigError(f"infeasible synthetic spec: {spec}")
    rng = np.random.default_rng(spec.seed)
    nnz = spec.nnz
    pos = rng.choice(spec.universe_size, size=2 * nnz - k, replace=False)
    idx_a = pos[:nnz]
    idx_b = np.concatenate([pos[:k], pos[nnz:]])
    if spec.binary:
        return _vector(spec.universe_size, idx_a, np.ones(nnz)), _vector(spec.universe_size, idx_b, np.ones(nnz))
    va = _uniform_nonzero(rng, *spec.value_range, nnz)
    vb = _uniform_nonzero(rng, *spec.value_range, nnz)
    n_shared = int(round(spec.outlier_fraction * k))
    n_private = int(round(spec.outlier_fraction * (nnz - k)))
    s = rng.choice(k, n_shared, replace=False)
    va[s] = _outliers(spec, rng, n_shared)
    if not spec.shared_outliers:
        s = rng.choice(k, n_shared, replace=False)
    vb[s] = _outliers(spec, rng, n_shared)
    for v in (va, vb):
        p = k + rng.choice(nnz - k, n_private, replace=False)
        v[p] = _outliers(spec, rng, n_private)
    return _vector(spec.universe_size, idx_a, va), _vector(spec.universe_size, idx_b, vb)


def gen_correlated_pair(spec: SyntheticSpec) -> tuple[SparseVector, SparseVector]:
    """Pair whose shared entries have post-join correlation close to ``target_correlation``.

    On the overlap ``b`` is replaced by ``rho * z(a) + sqrt(1 - rho**2) * noise``
    rescaled to the mean and spread of the original ``b`` entries (regression
    construction). The realized correlation is measured, never assumed.
    """
    rho = spec.target_correlation
    if rho is None or not abs(rho) <= 1 - 1e-6:
        raise ConfigError(f"target correlation must satisfy |rho| <= 1 - 1e-6, got {rho}")
    if spec.overlap_count() < 3:
        raise ConfigError("correlation needs at least 3 shared keys")
    a, b = gen_pair(spec)
    rng = np.random.default_rng(derive_seed(spec.seed, "correlate"))
    shared, ia, ib = np.intersect1d(a.indices, b.indices, assume_unique=True, return_indices=True)
    x = a.values[ia]
    z = (x - x.mean()) / x.std()
    noise = rng.standard_normal(z.size)
    noise = (noise - noise.mean()) / noise.std()
    y = rho * z + math.sqrt(1 - rho * rho) * noise
    orig = b.values[ib]
    spread = orig.std() if orig.std() > 0 else 1.0
    y = y * spread + orig.mean()
    y[y == 0] = np.finfo(float).tiny
    vals = b.values.copy()
    vals[ib] = y
    return a, SparseVector(b.universe_size, b.indices, vals)


def join_size_vectors(
    keys_a: Iterable, keys_b: Iterable, key_mode: str = "hash"
) -> tuple[SparseVector, SparseVector]:
    """Key-frequency vectors of two tables; their inner product is the join size."""
    ca, cb = Counter(keys_a), Counter(keys_b)
    universe = None
    if key_mode == "int":
        universe = max([int(k) for k in list(ca) + list(cb)] or [0]) + 1
    a = from_key_values(((k, float(c)) for k, c in ca.items()), key_mode=key_mode, universe_size=universe)
    b = from_key_values(((k, float(c)) for k, c in cb.items()), key_mode=key_mode, universe_size=universe)
    return a, b


def zipf_keys(rng: np.random.Generator, rows: int, domain: int, exponent: float) -> np.ndarray:
    """``rows`` keys from a bounded Zipf law over a randomly permuted key domain."""
    ranks = np.arange(1, domain + 1, dtype=np.float64)
    p = ranks**-exponent
    p /= p.sum()
    perm = rng.permutation(domain)
    return perm[rng.choice(domain, size=rows, p=p)]


# --------------------------------------------------------------------------
# methods


def samples_for_budget(words: float) -> int:
    """Samples affordable in ``words`` 64-bit words at 1.5 words per sample."""
    return max(1, int(words // SAMPLE_WORDS))


SAMPLING = {
    "ts-weighted": ("threshold", "l2"),
    "ps-weighted": ("priority", "l2"),
    "ts-uniform": ("threshold", "uniform"),
    "ps-uniform": ("priority", "uniform"),
    "ts-l1": ("threshold", "l1"),
    "ps-l1": ("priority", "l1"),
}
LINEAR = {"jl": bl.jl_sketch, "cs": bl.countsketch}
IP_METHODS = (*SAMPLING, *LINEAR, "mh")
CORR_METHODS = ("ts-weighted", "ps-weighted", "ts-uniform", "ps-uniform", "jl", "cs", "mh")


def _timed(fn: Callable, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def run_ip_method(method: str, a: SparseVector, b: SparseVector, budget: int, seed: int) -> dict:
    """Sketch both vectors at ``budget`` words and estimate ``<a, b>``."""
    if method in SAMPLING:
        family, prob = SAMPLING[method]
        m = samples_for_budget(budget)
        build = lambda v: variant_sketch(v, seed, m, prob, family)  # noqa: E731
        (sa, sb), ts = _timed(lambda: (build(a), build(b)))
        rep, te = _timed(estimate_inner_product, sa, sb)
        return dict(estimate=rep.estimate, storage=(sa.storage_words() + sb.storage_words()) / 2,
                    size=(len(sa) + len(sb)) // 2, ts=ts, te=te)
    if method in LINEAR:
        fn = LINEAR[method]
        (sa, sb), ts = _timed(lambda: (fn(a, seed, budget), fn(b, seed, budget)))
        est, te = _timed(bl.linear_estimate, sa, sb)
        return dict(estimate=est, storage=float(budget), size=budget, ts=ts, te=te)
    if method == "mh":
        m = samples_for_budget(budget)
        (sa, sb), ts = _timed(lambda: (bl.minhash_sketch(a, seed, m), bl.minhash_sketch(b, seed, m)))
        est, te = _timed(bl.minhash_estimate, sa, sb)
        return dict(estimate=est, storage=sa.storage_words(), size=m, ts=ts, te=te)
    raise ConfigError(f"unknown method {method!r}; valid: {', '.join(IP_METHODS)}")


def _corr_or_none(ga, gb) -> CorrelationReport:
    try:
        return estimate_join_correlation(ga, gb)
    except NoOverlapError:
        return CorrelationReport(None, {}, 0, "no-overlap")


def run_corr_method(method: str, a: SparseVector, b: SparseVector, budget: int, seed: int) -> dict:
    """Estimate the post-join correlation at ``budget`` words per column."""
    if method in ("ts-weighted", "ps-weighted"):
        family = SAMPLING[method][0]
        m = samples_for_budget(budget)
        (ga, gb), ts = _timed(lambda: (correlation_sketch(a, seed, m, family), correlation_sketch(b, seed, m, family)))
        rep, te = _timed(_corr_or_none, ga, gb)
        return dict(estimate=rep.rho, storage=(ga.storage_words() + gb.storage_words()) / 2,
                    size=(len(ga) + len(gb)) // 2, ts=ts, te=te)
    if method in ("ts-uniform", "ps-uniform"):
        family, prob = SAMPLING[method]
        m = samples_for_budget(budget)
        (sa, sb), ts = _timed(lambda: (variant_sketch(a, seed, m, prob, family), variant_sketch(b, seed, m, prob, family)))
        rep, te = _timed(sample_correlation, sa, sb)
        return dict(estimate=rep.rho, storage=(sa.storage_words() + sb.storage_words()) / 2,
                    size=(len(sa) + len(sb)) // 2, ts=ts, te=te)
    if method in LINEAR:
        fn = LINEAR[method]
        per = max(1, budget // 3)
        build = lambda v: triple_sketches(v, lambda u: fn(u, seed, per))  # noqa: E731
        (ta, tb), ts = _timed(lambda: (build(a), build(b)))
        (products, _), te = _timed(triple_products, ta, tb, bl.linear_estimate)
        return dict(estimate=combine(products).rho, storage=float(3 * per), size=3 * per, ts=ts, te=te)
    if method == "mh":
        m = samples_for_budget(budget)
        (sa, sb), ts = _timed(lambda: (bl.minhash_sketch(a, seed, m), bl.minhash_sketch(b, seed, m)))
        match = (sa.min_hashes == sb.min_hashes) & (sa.keys == sb.keys)
        x, y = sa.values[match], sb.values[match]
        rho = None
        if x.size >= 3 and x.std() > 0 and y.std() > 0:
            rho = float(np.corrcoef(x, y)[0, 1])
        return dict(estimate=rho, storage=sa.storage_words(), size=m, ts=ts, te=0.0)
    raise ConfigError(f"unknown method {method!r}; valid: {', '.join(CORR_METHODS)}")


# --------------------------------------------------------------------------
# grids


@dataclass
class GridConfig:
    """Declarative experiment grid; see README for the JSON schema."""

    experiment: str = "ip"
    methods: list[str] = field(default_factory=lambda: ["ts-weighted", "ps-weighted", "jl", "cs"])
    budgets: list[int] = field(default_factory=lambda: [300])
    trials: int = 20
    seed: int = 0
    universe_size: int = 10_000
    nnz: int = 2_000
    overlaps: list[float] = field(default_factory=lambda: [0.01, 0.1, 0.5, 1.0])
    outlier_fraction: float = 0.02
    outlier_range: tuple[float, float] = (0.0, 10.0)
    value_range: tuple[float, float] = (-1.0, 1.0)
    shared_outliers: bool = True
    correlations: list[float] = field(default_factory=lambda: [-0.2, 0.4, -0.6, 0.8])
    corr_overlap: float = 0.1
    rows_a: int = 20_000
    rows_b: int = 20_000
    key_domain: int = 50_000
    zipf_exponents: list[float] = field(default_factory=lambda: [1.1])

    @classmethod
    def from_dict(cls, d: dict) -> "GridConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "GridConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def validate(self) -> None:
        valid = CORR_METHODS if self.experiment == "corr" else IP_METHODS
        if self.experiment not in ("ip", "binary", "corr", "joinsize"):
            raise ConfigError(f"unknown experiment {self.experiment!r}; valid: ip, binary, corr, joinsize")
        bad = [m for m in self.methods if m not in valid]
        if bad:
            raise ConfigError(f"unknown method(s) {bad}; valid: {', '.join(valid)}")
        if self.trials < 1 or any(b < 1 for b in self.budgets):
            raise ConfigError("trials and budgets must be positive")

    def settings(self) -> list[tuple[str, dict]]:
        if self.experiment in ("ip", "binary"):
            return [(f"overlap={o:g}", {"overlap": o}) for o in self.overlaps]
        if self.experiment == "corr":
            return [(f"rho={r:g}", {"rho": r}) for r in self.correlations]
        return [(f"zipf={z:g}", {"zipf": z}) for z in self.zipf_exponents]


def make_pair(cfg: GridConfig, setting: dict, seed: int) -> tuple[SparseVector, SparseVector, float, float]:
    """Build one data pair and return it with its truth and error scale."""
    if cfg.experiment == "joinsize":
        rng = np.random.default_rng(seed)
        ka = zipf_keys(rng, cfg.rows_a, cfg.key_domain, setting["zipf"])
        kb = zipf_keys(rng, cfg.rows_b, cfg.key_domain, setting["zipf"])
        a, b = join_size_vectors(ka.tolist(), kb.tolist(), key_mode="int")
        return a, b, exact_inner_product(a, b), math.sqrt(norms(a)[1] * norms(b)[1])
    spec = SyntheticSpec(
        universe_size=cfg.universe_size, nnz=cfg.nnz,
        overlap_fraction=setting.get("overlap", cfg.corr_overlap),
        outlier_fraction=cfg.outlier_fraction, outlier_range=tuple(cfg.outlier_range),
        value_range=tuple(cfg.value_range), shared_outliers=cfg.shared_outliers, binary=cfg.experiment == "binary",
        target_correlation=setting.get("rho"), seed=seed,
    )
    if cfg.experiment == "corr":
        a, b = gen_correlated_pair(spec)
        return a, b, exact_join_correlation(a, b), 1.0
    a, b = gen_pair(spec)
    return a, b, exact_inner_product(a, b), math.sqrt(norms(a)[1] * norms(b)[1])


def _work(cfg: GridConfig, s_idx: int, label: str, setting: dict, trial: int) -> list[ResultRow]:
    data_seed = derive_seed(cfg.seed, s_idx, trial, "data")
    sketch_seed = derive_seed(cfg.seed, s_idx, trial, "sketch")
    a, b, truth, scale = make_pair(cfg, setting, data_seed)
    runner = run_corr_method if cfg.experiment == "corr" else run_ip_method
    rows = []
    for method in cfg.methods:
        for budget in cfg.budgets:
            r = runner(method, a, b, budget, sketch_seed)
            est = r["estimate"]
            err = None if est is None or truth is None else abs(est - truth) / scale
            rows.append(ResultRow(
                cfg.experiment, label, method, budget, r["storage"], r["size"], trial, sketch_seed,
                est, truth, err, r["ts"], r["te"],
            ))
    return rows


def run_grid(cfg: GridConfig, threads: int | None = None) -> list[ResultRow]:
    """Run every (setting, trial) work item; rows come back in a fixed order.

    Each trial draws a fresh data pair; all methods and budgets of a trial
    see the same pair and the same sketch seed. ``threads`` defaults to the
    ``IPSKETCH_THREADS`` environment variable (1 when unset).
    """
    cfg.validate()
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1"))
    items = [
        (s_idx, label, setting, trial)
        for s_idx, (label, setting) in enumerate(cfg.settings())
        for trial in range(cfg.trials)
    ]
    if not cfg.methods:
        return []
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda it: _work(cfg, *it), items))
    else:
        chunks = [_work(cfg, *it) for it in items]
    rows = [r for chunk in chunks for r in chunk]
    setting_order = {label: i for i, (label, _) in enumerate(cfg.settings())}
    method_order = {m: i for i, m in enumerate(cfg.methods)}
    rows.sort(key=lambda r: (setting_order[r.setting], method_order[r.method], r.budget, r.trial))
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


RESULT_COLUMNS = [f.name for f in fields(ResultRow) if not f.metadata.get("timing")]
TIMING_COLUMNS = ["experiment", "setting", "method", "budget", "trial", "wall_time_sketch", "wall_time_estimate"]


def write_results(rows: Sequence[ResultRow], path: str | Path, timing_path: str | Path | None = None) -> None:
    """Deterministic results CSV; wall times go to the optional ``timing_path``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            d = asdict(r)
            w.writerow([_fmt(d[c]) for c in RESULT_COLUMNS])
    if timing_path is not None:
        with open(timing_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TIMING_COLUMNS)
            for r in rows:
                d = asdict(r)
                w.writerow([_fmt(d[c]) for c in TIMING_COLUMNS])


SUMMARY_COLUMNS = [
    "experiment", "setting", "method", "budget", "trials", "undefined", "mean_error", "median_error",
    "r2", "mean_storage_words", "mean_sketch_size",
]


def r_squared(estimates: np.ndarray, truths: np.ndarray) -> float | None:
    """Coefficient of determination of estimates against ground truth."""
    if truths.size < 2:
        return None
    ss_tot = float(((truths - truths.mean()) ** 2).sum())
    if ss_tot == 0:
        return None
    return 1.0 - float(((estimates - truths) ** 2).sum()) / ss_tot


def summarize(rows: Sequence[ResultRow]) -> list[dict]:
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault((r.experiment, r.setting, r.method, r.budget), []).append(r)
    out = []
    for (exp, setting, method, budget), rs in groups.items():
        ok = [r for r in rs if r.normalized_error is not None]
        errs = np.array([r.normalized_error for r in ok])
        est = np.array([r.estimate for r in ok])
        tru = np.array([r.truth for r in ok])
        out.append({
            "experiment": exp, "setting": setting, "method": method, "budget": budget,
            "trials": len(rs), "undefined": len(rs) - len(ok),
            "mean_error": float(errs.mean()) if ok else None,
            "median_error": float(np.median(errs)) if ok else None,
            "r2": r_squared(est, tru) if ok else None,
            "mean_storage_words": float(np.mean([r.storage_words for r in rs])),
            "mean_sketch_size": float(np.mean([r.sketch_size for r in rs])),
        })
    return out


def write_summary(summary: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for s in summary:
            w.writerow([_fmt(s[c]) for c in SUMMARY_COLUMNS])


def mean_errors(rows: Sequence[ResultRow]) -> dict[tuple[str, str, int], float]:
    """``(setting, method, budget) -> mean normalized error`` over defined rows."""
    return {
        (s["setting"], s["method"], s["budget"]): s["mean_error"] for s in summarize(rows)
    }
