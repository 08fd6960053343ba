"""Sample sketch record shared by the threshold and priority samplers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np


class Method(str, enum.Enum):
    THRESHOLD_L2 = "threshold_l2"
    PRIORITY_L2 = "priority_l2"
    THRESHOLD_L1 = "threshold_l1"
    PRIORITY_L1 = "priority_l1"
    THRESHOLD_UNIFORM = "threshold_uniform"
    PRIORITY_UNIFORM = "priority_uniform"

    @property
    def family(self) -> str:
        return self.value.split("_", 1)[0]

    @property
    def prob(self) -> str:
        return self.value.split("_", 1)[1]

    @classmethod
    def of(cls, family: str, prob: str) -> "Method":
        try:
            return cls(f"{family}_{prob}")
        except ValueError:
            raise ValueError(f"unknown sampling variant family={family!r} prob={prob!r}") from None


PROBS = ("l2", "l1", "uniform")
FAMILIES = ("threshold", "priority")


def weights(prob: str, values: np.ndarray) -> np.ndarray:
    """Unnormalized sampling weight of each entry: a_i**2, |a_i| or 1."""
    if prob == "l2":
        return values * values
    if prob == "l1":
        return np.abs(values)
    if prob == "uniform":
        return np.ones_like(values)
    raise ValueError(f"unknown sampling probability {prob!r}; expected one of {PROBS}")


@dataclass(frozen=True, eq=False)
class SampleSketch:
    """Keys, values and normalizer of a coordinated sample.

    For the l2 variants ``tau`` multiplies ``a_i**2`` directly (the classic
    form). For l1 and uniform variants ``tau`` multiplies the normalized
    probability ``w_i / aux`` where ``aux`` is ``||a||_1`` or the support
    size. Either way :attr:`scale` times the raw weight is the per-index
    threshold that inclusion was tested against.
    """

    keys: np.ndarray
    values: np.ndarray
    tau: float
    method: Method
    m: int
    seed: int
    aux: float | None = None
    universe_size: int = 1 << 64

    def __post_init__(self) -> None:
        object.__setattr__(self, "keys", np.ascontiguousarray(self.keys, dtype=np.uint64))
        object.__setattr__(self, "values", np.ascontiguousarray(self.values, dtype=np.float64))
        object.__setattr__(self, "method", Method(self.method))
        if self.method.prob != "l2" and self.aux is None:
            raise ValueError(f"{self.method.value} sketches require the aux normalizer")
        if self.keys.size > 1 and np.any(self.keys[1:] <= self.keys[:-1]):
            raise ValueError("sketch keys must be strictly increasing")

    def __len__(self) -> int:
        return int(self.keys.size)

    @property
    def scale(self) -> float:
        if self.method.prob == "l2" or math.isinf(self.tau):
            return self.tau
        return self.tau / self.aux

    def thresholds(self, values: np.ndarray | None = None) -> np.ndarray:
        """Per-entry inclusion thresholds ``scale * w(v)`` (unclipped)."""
        v = self.values if values is None else values
        w = weights(self.method.prob, v)
        with np.errstate(invalid="ignore"):
            return np.where(w > 0, self.scale * w, 0.0)

    def storage_words(self) -> float:
        """Size in 64-bit words: 1.5 per sample plus stored scalars."""
        scalars = 1 + (self.aux is not None)
        return 1.5 * len(self) + scalars

    def __repr__(self) -> str:
        return f"SampleSketch({self.method.value}, m={self.m}, |K|={len(self)}, tau={self.tau:.6g})"
