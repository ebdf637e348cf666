"""Memorization screening via fat/gland boundary-mask cross-correlation.

The measure between two binary boundary masks is the zero-lag normalized
cross-correlation |a & b| / sqrt(|a| * |b|). Breasts are centered by
construction, so no translation search is performed. The all-pairs screen is
run as a sparse boolean matrix product, which keeps the intersection counts
exact while scaling to ensemble-sized mask sets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .io import EnsembleManifest, iter_ensemble
from .segment import boundary_mask, segment


def mem_measure(a: np.ndarray, b: np.ndarray) -> float:
    """Zero-lag normalized cross-correlation of two boundary masks."""
    if a.shape != b.shape:
        raise ValueError("boundary masks differ in shape")
    na = int(a.sum())
    nb = int(b.sum())
    if na == 0 or nb == 0:
        return 0.0
    inter = int((a & b).sum())
    return inter / float(np.sqrt(na) * np.sqrt(nb))


def boundary_mask_for_image(image: np.ndarray) -> np.ndarray:
    return boundary_mask(segment(image))


def pack_masks(masks: Iterable[np.ndarray]) -> sp.csr_matrix:
    """Stack boundary masks as rows of a sparse boolean matrix."""
    rows = []
    cols = []
    indptr = [0]
    n_cols = None
    for mask in masks:
        if n_cols is None:
            n_cols = mask.size
        elif mask.size != n_cols:
            raise ValueError("boundary masks differ in shape")
        idx = np.flatnonzero(mask)
        cols.append(idx)
        indptr.append(indptr[-1] + idx.size)
    if n_cols is None:
        raise ValueError("no masks given")
    data = np.ones(indptr[-1], np.float32)
    indices = np.concatenate(cols) if cols else np.empty(0, np.int64)
    return sp.csr_matrix((data, indices, np.asarray(indptr)), shape=(len(indptr) - 1, n_cols))


def pack_ensemble(manifest: EnsembleManifest, *, any_size: bool = False) -> sp.csr_matrix:
    return pack_masks(boundary_mask_for_image(img) for img in iter_ensemble(manifest, any_size=any_size))


def _norms(packed: sp.csr_matrix) -> np.ndarray:
    counts = np.diff(packed.indptr).astype(np.float64)
    return np.sqrt(counts)


def pairwise_measures(a: sp.csr_matrix, b: sp.csr_matrix) -> np.ndarray:
    """Dense |A| x |B| matrix of pair measures (use chunking for big sets)."""
    inter = (a @ b.T).toarray()
    na = _norms(a)
    nb = _norms(b)
    denom = np.outer(na, nb)
    out = np.zeros_like(inter, dtype=np.float64)
    np.divide(inter, denom, out=out, where=denom > 0)
    return out


@dataclass(frozen=True)
class MemorizationCalibration:
    """Flagging threshold: one standard deviation above the calibration max."""

    threshold: float
    calibration_max: float
    calibration_std: float
    subset_n: int
    reference_n: int


def calibrate(
    packed: sp.csr_matrix,
    subset_n: int = 3000,
    seed: int = 0,
    *,
    chunk: int = 256,
) -> MemorizationCalibration:
    """Max and spread of subset-vs-remainder pair measures on training masks."""
    n = packed.shape[0]
    if n <= subset_n:
        raise ValueError(f"ensemble of {n} is too small for a calibration subset of {subset_n}")
    rng = np.random.default_rng(seed)
    subset_idx = rng.choice(n, size=subset_n, replace=False)
    rest_mask = np.ones(n, bool)
    rest_mask[subset_idx] = False
    subset = packed[subset_idx]
    rest = packed[rest_mask]
    total = 0
    s1 = 0.0
    s2 = 0.0
    peak = 0.0
    for start in range(0, subset.shape[0], chunk):
        block = pairwise_measures(subset[start : start + chunk], rest)
        total += block.size
        s1 += float(block.sum())
        s2 += float((block * block).sum())
        peak = max(peak, float(block.max()))
    mean = s1 / total
    std = float(np.sqrt(max(s2 / total - mean * mean, 0.0)))
    return MemorizationCalibration(
        threshold=min(1.0, peak + std),
        calibration_max=peak,
        calibration_std=std,
        subset_n=subset_n,
        reference_n=n - subset_n,
    )


def screen(
    generated: sp.csr_matrix,
    training: sp.csr_matrix,
    threshold: float,
    *,
    ids: Sequence[str] | None = None,
    chunk: int = 256,
) -> tuple[float, list[str], np.ndarray]:
    """Flag generated masks whose best training match exceeds the threshold.

    Returns (memorized fraction, flagged identifiers, per-image max measure).
    """
    n = generated.shape[0]
    best = np.zeros(n)
    for start in range(0, n, chunk):
        block = pairwise_measures(generated[start : start + chunk], training)
        best[start : start + chunk] = block.max(axis=1) if block.size else 0.0
    flagged_idx = np.flatnonzero(best > threshold)
    if ids is None:
        flagged = [str(i) for i in flagged_idx]
    else:
        flagged = [ids[i] for i in flagged_idx]
    return flagged_idx.size / n, flagged, best
