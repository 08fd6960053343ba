"""Command line interface: build sketches, query them, and run benchmark grids."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import baselines as bl
from . import harness as H
from .estimator import EstimateReport, estimate_inner_product
from .join_correlation import (
    CorrelationSketch,
    NoOverlapError,
    correlation_sketch,
    estimate_join_correlation,
)
from .sampling_variants import variant_sketch
from .serialization import load, save
from .sketch import SampleSketch
from .sparse_vector import UNIVERSE_64, SparseVector, read_csv_vector

SKETCH_METHODS = (*H.SAMPLING, "jl", "cs", "mh")


def _column(v: str | None):
    if v is None or v.lower() == "count":
        return None
    return int(v) if v.isdigit() else v


def _add_table_args(p: argparse.ArgumentParser, suffix: str = "") -> None:
    p.add_argument(f"--key-column{suffix}", default="0", help="column name or 0-based position of the join key")
    p.add_argument(f"--value-column{suffix}", default="1",
                   help="column name or position of the values; 'count' counts rows per key")
    p.add_argument("--key-mode", choices=("hash", "int"), default="hash",
                   help="hash keys into a 2**64 universe or use integer keys as indices")
    p.add_argument("--universe-size", type=int, default=None)
    _add_header_arg(p)


def _add_header_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--header", dest="has_header", action="store_const", const=True, default=None,
                   help="first row is a header (default: sniffed from the value column)")
    p.add_argument("--no-header", dest="has_header", action="store_const", const=False)


def read_vector(path: str, args, suffix: str = "") -> SparseVector:
    """Load a vector from a CSV table or from an ``.npz`` written by ``ingest``."""
    if path.endswith(".npz"):
        with np.load(path) as z:
            n = int(z["universe_size"]) or UNIVERSE_64
            return SparseVector(n, z["indices"].astype(np.uint64), z["values"])
    attr = suffix.replace("-", "_")
    return read_csv_vector(
        path,
        key_column=_column(getattr(args, f"key_column{attr}")),
        value_column=_column(getattr(args, f"value_column{attr}")),
        key_mode=args.key_mode,
        universe_size=args.universe_size,
        has_header=args.has_header,
    )


def _dump(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, allow_nan=False, default=str)
    sys.stdout.write("\n")


def build_sketch(v: SparseVector, method: str, seed: int, m: int):
    if method in H.SAMPLING:
        family, prob = H.SAMPLING[method]
        return variant_sketch(v, seed, m, prob, family)
    if method in H.LINEAR:
        return H.LINEAR[method](v, seed, m)
    if method == "mh":
        return bl.minhash_sketch(v, seed, m)
    raise SystemExit(f"unknown method {method!r}; valid: {', '.join(SKETCH_METHODS)}")


def cmd_ingest(args) -> int:
    v = read_vector(args.input, args)
    n = v.universe_size if v.universe_size < UNIVERSE_64 else 0
    np.savez(args.out, universe_size=np.uint64(n), indices=v.indices, values=v.values)
    _dump({"nnz": v.nnz(), "out": args.out})
    return 0


def cmd_sketch(args) -> int:
    v = read_vector(args.input, args)
    if args.correlation:
        family = "threshold" if args.method.startswith("ts") else "priority"
        sk = correlation_sketch(v, args.seed, args.m, family)
    else:
        sk = build_sketch(v, args.method, args.seed, args.m)
    save(sk, args.out)
    _dump({"out": args.out, "storage_words": sk.storage_words(), "nnz": v.nnz()})
    return 0


def _finite(x):
    return x if x is None or math.isfinite(x) else str(x)


def cmd_estimate(args) -> int:
    sa, sb = load(args.sketch_a), load(args.sketch_b)
    if isinstance(sa, SampleSketch):
        rep = estimate_inner_product(sa, sb)
    elif isinstance(sa, bl.LinearSketch):
        rep = EstimateReport(bl.linear_estimate(sa, sb), 0)
    elif isinstance(sa, bl.MinHashSketch):
        rep = EstimateReport(bl.minhash_estimate(sa, sb), int(np.sum(sa.keys == sb.keys)))
    else:
        raise SystemExit("estimate needs two inner-product sketches; use 'corr' for correlation sketches")
    out = rep.to_dict()
    out["estimate"] = _finite(out["estimate"])
    _dump(out)
    return 0


def cmd_corr(args) -> int:
    if not (args.sketch_b if args.sketch_a else args.table_b):
        raise SystemExit("corr needs --table-a with --table-b, or --sketch-a with --sketch-b")
    if args.sketch_a:
        ga, gb = load(args.sketch_a), load(args.sketch_b)
        if not isinstance(ga, CorrelationSketch):
            raise SystemExit("corr expects sketches built with 'sketch --correlation'")
    else:
        a = read_vector(args.table_a, args, "_a")
        b = read_vector(args.table_b, args, "_b")
        family = "threshold" if args.method == "ts-weighted" else "priority"
        m = H.samples_for_budget(args.budget)
        ga, gb = correlation_sketch(a, args.seed, m, family), correlation_sketch(b, args.seed, m, family)
    try:
        rep = estimate_join_correlation(ga, gb)
    except NoOverlapError as e:
        _dump({"rho": None, "defined": False, "reason": "no-overlap", "detail": str(e)})
        return 1
    _dump(rep.to_dict())
    return 0


def _grid_config(args, experiment: str) -> H.GridConfig:
    d = json.loads(Path(args.config).read_text()) if args.config else {}
    d.setdefault("experiment", experiment)
    if experiment and d["experiment"] != experiment:
        raise H.ConfigError(f"config experiment {d['experiment']!r} does not match bench-{experiment}")
    for key in ("methods", "budgets"):
        val = getattr(args, key)
        if val is not None:
            d[key] = [x for x in val.split(",") if x] if key == "methods" else [int(x) for x in val.split(",")]
    if args.trials is not None:
        d["trials"] = args.trials
    if args.seed is not None:
        d["seed"] = args.seed
    return H.GridConfig.from_dict(d)


def cmd_bench(args) -> int:
    try:
        cfg = _grid_config(args, args.experiment)
    except H.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    rows = H.run_grid(cfg, threads=args.threads)
    H.write_results(rows, args.out, args.timing)
    summary = H.summarize(rows)
    if args.summary:
        H.write_summary(summary, args.summary)
    for s in summary:
        err = "undefined" if s["mean_error"] is None else f"{s['mean_error']:.5f}"
        print(f"{s['setting']:>14} {s['method']:>12} budget={s['budget']:<6} mean_error={err}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ipsketch", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="aggregate a key,value CSV into a sparse vector (.npz)")
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0, help="accepted for uniformity; ingestion is deterministic")
    _add_table_args(s)
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("sketch", help="build a sketch file from a CSV table or .npz vector")
    s.add_argument("--input", required=True)
    s.add_argument("--out", required=True, help="output path; .json writes the debug JSON form")
    s.add_argument("--method", default="ps-weighted", choices=SKETCH_METHODS)
    s.add_argument("--m", type=int, required=True, help="samples (sampling, minhash) or rows (linear)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--correlation", action="store_true",
                   help="build a global correlation sketch of m samples (ts-weighted or ps-weighted)")
    _add_table_args(s)
    s.set_defaults(func=cmd_sketch)

    s = sub.add_parser("estimate", help="estimate an inner product from two sketch files")
    s.add_argument("--sketch-a", required=True)
    s.add_argument("--sketch-b", required=True)
    s.add_argument("--seed", type=int, default=None, help="unused; seeds are stored in sketch files")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("corr", help="estimate post-join correlation from tables or correlation sketches")
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--table-a")
    g.add_argument("--sketch-a")
    s.add_argument("--table-b")
    s.add_argument("--sketch-b")
    s.add_argument("--method", choices=("ts-weighted", "ps-weighted"), default="ps-weighted")
    s.add_argument("--budget", type=int, default=400, help="storage budget in 64-bit words per column")
    s.add_argument("--seed", type=int, default=0)
    for suffix in ("-a", "-b"):
        s.add_argument(f"--key-column{suffix}", default="0")
        s.add_argument(f"--value-column{suffix}", default="1")
    s.add_argument("--key-mode", choices=("hash", "int"), default="hash")
    s.add_argument("--universe-size", type=int, default=None)
    _add_header_arg(s)
    s.set_defaults(func=cmd_corr)

    for name, exp in (("bench-ip", "ip"), ("bench-binary", "binary"), ("bench-corr", "corr"),
                      ("bench-joinsize", "joinsize"), ("run-grid", None)):
        s = sub.add_parser(name, help=f"run a {'configured' if exp is None else exp} experiment grid")
        s.add_argument("--config", required=exp is None, help="JSON grid config")
        s.add_argument("--methods", help="comma separated method tags")
        s.add_argument("--budgets", help="comma separated word budgets")
        s.add_argument("--trials", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--threads", type=int, default=None, help=f"worker threads (default ${H.THREADS_ENV} or 1)")
        s.add_argument("--out", default="results.csv")
        s.add_argument("--summary", default=None)
        s.add_argument("--timing", default=None, help="sidecar CSV for wall times")
        s.set_defaults(func=cmd_bench, experiment=exp)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
