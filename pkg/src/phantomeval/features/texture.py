"""Gray-level co-occurrence texture statistics over the whole breast.

Intensities are quantized to 64 uniform levels over [0, 255] (global bins so
features are comparable across images). Co-occurrence matrices are symmetric,
restricted to pixel pairs that both lie inside the mask, and normalized to
total mass 1.
"""

from __future__ import annotations

import numpy as np

GLCM_LEVELS = 64

# (row, col) displacements: horizontal, vertical, diagonal, antidiagonal.
GLCM_OFFSETS = (
    ("o01", (0, 1)),
    ("o10", (1, 0)),
    ("o11", (1, 1)),
    ("o1m1", (1, -1)),
)

GLCM_STATS = ("contrast", "correlation", "energy", "homogeneity", "entropy", "dissimilarity")

INTENSITY_STATS = ("intensity_mean", "intensity_std", "intensity_q25", "intensity_q75")


def quantize_levels(image: np.ndarray) -> np.ndarray:
    """Map 8-bit intensities onto 0..63 with uniform bins."""
    return (image >> 2).astype(np.uint8)


def glcm_counts(quantized: np.ndarray, mask: np.ndarray, offset: tuple[int, int]) -> np.ndarray:
    """Symmetric pair counts for one displacement, both pixels inside the mask."""
    dy, dx = offset
    h, w = quantized.shape
    ys = slice(max(0, -dy), min(h, h - dy))
    xs = slice(max(0, -dx), min(w, w - dx))
    ys2 = slice(max(0, dy), min(h, h + dy))
    xs2 = slice(max(0, dx), min(w, w + dx))
    a = quantized[ys, xs]
    b = quantized[ys2, xs2]
    valid = mask[ys, xs] & mask[ys2, xs2]
    idx = a[valid].astype(np.int64) * GLCM_LEVELS + b[valid]
    counts = np.bincount(idx, minlength=GLCM_LEVELS * GLCM_LEVELS).reshape(GLCM_LEVELS, GLCM_LEVELS)
    return counts + counts.T


_levels = np.arange(GLCM_LEVELS, dtype=np.float64)
_DIFF = _levels[:, None] - _levels[None, :]
_DIFF2 = _DIFF**2
_ABSDIFF = np.abs(_DIFF)
_HOMOG = 1.0 / (1.0 + _DIFF2)


def haralick_stats(p: np.ndarray) -> dict[str, float]:
    """Texture statistics of one normalized co-occurrence matrix."""
    contrast = float((p * _DIFF2).sum())
    dissimilarity = float((p * _ABSDIFF).sum())
    homogeneity = float((p * _HOMOG).sum())
    energy = float((p * p).sum())
    nz = p[p > 0]
    entropy = float(-(nz * np.log2(nz)).sum())
    pi = p.sum(axis=1)
    pj = p.sum(axis=0)
    mi = float((_levels * pi).sum())
    mj = float((_levels * pj).sum())
    vi = float(((_levels - mi) ** 2 * pi).sum())
    vj = float(((_levels - mj) ** 2 * pj).sum())
    if vi <= 0 or vj <= 0:
        correlation = float("nan")
    else:
        correlation = float(((p * np.outer(_levels - mi, _levels - mj)).sum()) / np.sqrt(vi * vj))
    return {
        "contrast": contrast,
        "correlation": correlation,
        "energy": energy,
        "homogeneity": homogeneity,
        "entropy": entropy,
        "dissimilarity": dissimilarity,
    }


def texture_feature_names() -> list[str]:
    names = []
    for off_name, _ in GLCM_OFFSETS:
        names.extend(f"glcm_{off_name}_{s}" for s in GLCM_STATS)
    names.extend(f"glcm_avg_{s}" for s in GLCM_STATS)
    names.extend(INTENSITY_STATS)
    return names


def texture_features(image: np.ndarray, breast_mask: np.ndarray) -> dict[str, float]:
    out: dict[str, float] = {}
    if not breast_mask.any():
        return {name: float("nan") for name in texture_feature_names()}
    q = quantize_levels(image)
    normalized = []
    for off_name, offset in GLCM_OFFSETS:
        counts = glcm_counts(q, breast_mask, offset)
        total = counts.sum()
        if total == 0:
            stats = {s: float("nan") for s in GLCM_STATS}
            p = None
        else:
            p = counts / total
            stats = haralick_stats(p)
        for s in GLCM_STATS:
            out[f"glcm_{off_name}_{s}"] = stats[s]
        if p is not None:
            normalized.append(p)
    if normalized:
        avg_stats = haralick_stats(np.mean(normalized, axis=0))
    else:
        avg_stats = {s: float("nan") for s in GLCM_STATS}
    for s in GLCM_STATS:
        out[f"glcm_avg_{s}"] = avg_stats[s]
    fg = image[breast_mask].astype(np.float64)
    out["intensity_mean"] = float(fg.mean())
    out["intensity_std"] = float(fg.std())
    out["intensity_q25"] = float(np.percentile(fg, 25.0))
    out["intensity_q75"] = float(np.percentile(fg, 75.0))
    return out
