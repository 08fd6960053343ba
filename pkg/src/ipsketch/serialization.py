"""Binary and JSON envelopes for every sketch kind.

Binary layout (all little endian)::

    magic "IPSK" | version u16 | kind u8 | tag u8 | kind-specific header | payload

Sample sketches carry ``m u64, seed u64, tau f64, aux f64 (NaN when absent),
universe u64 (0 encodes 2**64), count u64`` followed by ``count`` pairs of
``(index u64, value f64)``. Correlation sketches replace ``tau, aux`` with
the three normalizers and ``m'``; linear sketches store their dense
coordinates; MinHash sketches store ``(min_hash f64, index u64, value f64)``
per repetition.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np

from .baselines import LinearSketch, MinHashSketch
from .join_correlation import CorrelationSketch
from .sketch import Method, SampleSketch

MAGIC = b"IPSK"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<4sHBB")
_SAMPLE = struct.Struct("<QQddQQ")
_CORR = struct.Struct("<QQddddQQQ")
_LINEAR = struct.Struct("<QQQ")
_MINHASH = struct.Struct("<QQ")
_PAIR = np.dtype([("index", "<u8"), ("value", "<f8")])
_MH_ROW = np.dtype([("min_hash", "<f8"), ("index", "<u8"), ("value", "<f8")])

KINDS = {"sample": 0, "correlation": 1, "linear": 2, "minhash": 3}
METHOD_TAGS = {m: i for i, m in enumerate(Method)}
FAMILY_TAGS = {"threshold": 0, "priority": 1}
LINEAR_TAGS = {"jl": 0, "countsketch": 1}
_U64 = 1 << 64


class FormatError(ValueError):
    pass


def _universe_out(n: int) -> int:
    return 0 if n >= _U64 else n


def _universe_in(n: int) -> int:
    return _U64 if n == 0 else n


def _pairs(keys: np.ndarray, values: np.ndarray) -> bytes:
    rec = np.empty(keys.size, dtype=_PAIR)
    rec["index"], rec["value"] = keys, values
    return rec.tobytes()


def dumps(sk) -> bytes:
    if isinstance(sk, SampleSketch):
        head = _PREFIX.pack(MAGIC, FORMAT_VERSION, KINDS["sample"], METHOD_TAGS[sk.method])
        aux = math.nan if sk.aux is None else sk.aux
        body = _SAMPLE.pack(sk.m, sk.seed, sk.tau, aux, _universe_out(sk.universe_size), len(sk))
        return head + body + _pairs(sk.keys, sk.values)
    if isinstance(sk, CorrelationSketch):
        head = _PREFIX.pack(MAGIC, FORMAT_VERSION, KINDS["correlation"], FAMILY_TAGS[sk.family])
        body = _CORR.pack(
            sk.budget, sk.seed, sk.tau_indicator, sk.tau_base, sk.tau_squared, sk.m_prime,
            _universe_out(sk.universe_size), sk.nnz, len(sk),
        )
        return head + body + _pairs(sk.keys, sk.values)
    if isinstance(sk, LinearSketch):
        head = _PREFIX.pack(MAGIC, FORMAT_VERSION, KINDS["linear"], LINEAR_TAGS[sk.kind])
        return head + _LINEAR.pack(sk.m, sk.seed, sk.coords.size) + sk.coords.astype("<f8").tobytes()
    if isinstance(sk, MinHashSketch):
        head = _PREFIX.pack(MAGIC, FORMAT_VERSION, KINDS["minhash"], 0)
        rec = np.empty(sk.m, dtype=_MH_ROW)
        rec["min_hash"], rec["index"], rec["value"] = sk.min_hashes, sk.keys, sk.values
        return head + _MINHASH.pack(sk.m, sk.seed) + rec.tobytes()
    raise TypeError(f"cannot serialize {type(sk).__name__}")


def loads(buf: bytes):
    if len(buf) < _PREFIX.size:
        raise FormatError("buffer too short")
    magic, version, kind, tag = _PREFIX.unpack_from(buf, 0)
    if magic != MAGIC:
        raise FormatError("not an ipsketch file")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    off = _PREFIX.size
    if kind == KINDS["sample"]:
        m, seed, tau, aux, universe, count = _SAMPLE.unpack_from(buf, off)
        rec = _read(buf, off + _SAMPLE.size, _PAIR, count)
        method = list(Method)[tag]
        return SampleSketch(
            rec["index"].copy(), rec["value"].copy(), tau=tau, method=method, m=m, seed=seed,
            aux=None if math.isnan(aux) else aux, universe_size=_universe_in(universe),
        )
    if kind == KINDS["correlation"]:
        budget, seed, t1, ta, t2, m_prime, universe, nnz, count = _CORR.unpack_from(buf, off)
        rec = _read(buf, off + _CORR.size, _PAIR, count)
        family = {v: k for k, v in FAMILY_TAGS.items()}[tag]
        return CorrelationSketch(
            rec["index"].copy(), rec["value"].copy(), t1, ta, t2, family, m_prime, budget, seed,
            _universe_in(universe), nnz,
        )
    if kind == KINDS["linear"]:
        m, seed, size = _LINEAR.unpack_from(buf, off)
        coords = np.frombuffer(buf, dtype="<f8", count=size, offset=off + _LINEAR.size).astype(np.float64)
        return LinearSketch(coords, m, seed, {v: k for k, v in LINEAR_TAGS.items()}[tag])
    if kind == KINDS["minhash"]:
        m, seed = _MINHASH.unpack_from(buf, off)
        rec = _read(buf, off + _MINHASH.size, _MH_ROW, m)
        return MinHashSketch(rec["min_hash"].copy(), rec["index"].copy(), rec["value"].copy(), m, seed)
    raise FormatError(f"unknown sketch kind {kind}")


def _read(buf: bytes, off: int, dtype: np.dtype, count: int) -> np.ndarray:
    need = off + dtype.itemsize * count
    if len(buf) < need:
        raise FormatError(f"truncated payload: need {need} bytes, have {len(buf)}")
    return np.frombuffer(buf, dtype=dtype, count=count, offset=off)


def _f(x: float):
    return x if math.isfinite(x) else str(x)


def _unf(x) -> float:
    return float(x)


def to_json(sk) -> dict:
    """JSON-ready mirror of the binary record; non-finite floats become strings."""
    if isinstance(sk, SampleSketch):
        return {
            "format_version": FORMAT_VERSION, "kind": "sample", "method": sk.method.value, "m": sk.m,
            "seed": sk.seed, "tau": _f(sk.tau), "aux": sk.aux, "universe_size": sk.universe_size,
            "count": len(sk), "keys": sk.keys.tolist(), "values": sk.values.tolist(),
        }
    if isinstance(sk, CorrelationSketch):
        return {
            "format_version": FORMAT_VERSION, "kind": "correlation", "family": sk.family, "budget": sk.budget,
            "seed": sk.seed, "tau_indicator": _f(sk.tau_indicator), "tau_base": _f(sk.tau_base),
            "tau_squared": _f(sk.tau_squared), "m_prime": _f(sk.m_prime), "universe_size": sk.universe_size,
            "nnz": sk.nnz, "count": len(sk), "keys": sk.keys.tolist(), "values": sk.values.tolist(),
        }
    if isinstance(sk, LinearSketch):
        return {
            "format_version": FORMAT_VERSION, "kind": "linear", "sketch_kind": sk.kind, "m": sk.m,
            "seed": sk.seed, "coords": sk.coords.tolist(),
        }
    if isinstance(sk, MinHashSketch):
        return {
            "format_version": FORMAT_VERSION, "kind": "minhash", "m": sk.m, "seed": sk.seed,
            "min_hashes": sk.min_hashes.tolist(), "keys": sk.keys.tolist(), "values": sk.values.tolist(),
        }
    raise TypeError(f"cannot serialize {type(sk).__name__}")


def from_json(d: dict):
    if d.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {d.get('format_version')}")
    keys = np.array(d.get("keys", []), dtype=np.uint64)
    values = np.array(d.get("values", []), dtype=np.float64)
    kind = d["kind"]
    if kind == "sample":
        return SampleSketch(
            keys, values, tau=_unf(d["tau"]), method=Method(d["method"]), m=d["m"], seed=d["seed"],
            aux=d["aux"], universe_size=d["universe_size"],
        )
    if kind == "correlation":
        return CorrelationSketch(
            keys, values, _unf(d["tau_indicator"]), _unf(d["tau_base"]), _unf(d["tau_squared"]),
            d["family"], _unf(d["m_prime"]), d["budget"], d["seed"], d["universe_size"], d["nnz"],
        )
    if kind == "linear":
        return LinearSketch(np.array(d["coords"], dtype=np.float64), d["m"], d["seed"], d["sketch_kind"])
    if kind == "minhash":
        return MinHashSketch(np.array(d["min_hashes"]), keys, values, d["m"], d["seed"])
    raise FormatError(f"unknown sketch kind {kind!r}")


def save(sk, path: str | Path) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(to_json(sk)))
    else:
        path.write_bytes(dumps(sk))


def load(path: str | Path):
    raw = Path(path).read_bytes()
    if raw[:4] == MAGIC:
        return loads(raw)
    return from_json(json.loads(raw))
