"""Summarization of multi-valued per-image features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STAT_NAMES = ("mean", "std", "min", "max", "q25", "q50", "q75")


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    std: float
    min: float
    max: float
    q25: float
    q50: float
    q75: float

    def as_dict(self, prefix: str) -> dict[str, float]:
        return {f"{prefix}_{k}": getattr(self, k) for k in STAT_NAMES}


def summary_stats(values: np.ndarray) -> SummaryStats:
    """Count/mean/std/min/max/quartiles; quartiles by linear interpolation."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        nan = float("nan")
        return SummaryStats(0, nan, nan, nan, nan, nan, nan, nan)
    q25, q50, q75 = np.percentile(values, [25.0, 50.0, 75.0])
    return SummaryStats(
        count=int(values.size),
        mean=float(values.mean()),
        std=float(values.std()),
        min=float(values.min()),
        max=float(values.max()),
        q25=float(q25),
        q50=float(q50),
        q75=float(q75),
    )
