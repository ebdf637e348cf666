"""Box-counting dimension and gliding-box lacunarity of tissue masks."""

from __future__ import annotations

import numpy as np

from ..segment import TissueMasks

BOX_SIZES = (2, 4, 8, 16, 32, 64)
LACUNARITY_RADII = (4, 8, 16, 32)


def box_dimension(mask: np.ndarray, sizes: tuple[int, ...] = BOX_SIZES) -> float:
    """Slope of log N(s) against log(1/s) with grid-aligned box counting."""
    if not mask.any():
        return float("nan")
    h, w = mask.shape
    counts = []
    for s in sizes:
        ph = (-h) % s
        pw = (-w) % s
        m = np.pad(mask, ((0, ph), (0, pw))) if (ph or pw) else mask
        blocks = m.reshape(m.shape[0] // s, s, m.shape[1] // s, s)
        counts.append(int(blocks.any(axis=(1, 3)).sum()))
    logs = np.log(1.0 / np.asarray(sizes, dtype=np.float64))
    logn = np.log(np.asarray(counts, dtype=np.float64))
    slope = np.polyfit(logs, logn, 1)[0]
    return float(slope)


def _integral_image(mask: np.ndarray) -> np.ndarray:
    h, w = mask.shape
    ii = np.zeros((h + 1, w + 1), np.int64)
    np.cumsum(np.cumsum(mask, axis=0, dtype=np.int64), axis=1, out=ii[1:, 1:])
    return ii


def gliding_box_masses(mask: np.ndarray, r: int, integral: np.ndarray | None = None) -> np.ndarray:
    """Occupancy mass of every r-by-r box fully inside the frame."""
    if integral is None:
        integral = _integral_image(mask)
    return integral[r:, r:] - integral[:-r, r:] - integral[r:, :-r] + integral[:-r, :-r]


def lacunarity(mask: np.ndarray, r: int, integral: np.ndarray | None = None) -> float:
    """Gliding-box lacunarity var(mass)/mean(mass)^2 + 1."""
    if not mask.any():
        return float("nan")
    masses = gliding_box_masses(mask, r, integral)
    n = masses.size
    s1 = float(masses.sum(dtype=np.int64))
    s2 = float((masses.astype(np.int64) ** 2).sum(dtype=np.int64))
    mean = s1 / n
    if mean == 0:
        return float("nan")
    var = s2 / n - mean * mean
    return var / (mean * mean) + 1.0


def fractal_feature_names() -> list[str]:
    names = []
    for t in ("F", "G", "L"):
        names.append(f"frac_{t}_box_dim")
        names.extend(f"frac_{t}_lac_r{r}" for r in LACUNARITY_RADII)
    return names


def fractal_features(masks: TissueMasks) -> dict[str, float]:
    out: dict[str, float] = {}
    for t, mask in (("F", masks.fat), ("G", masks.gland), ("L", masks.ligament)):
        out[f"frac_{t}_box_dim"] = box_dimension(mask)
        if mask.any():
            integral = _integral_image(mask)
            for r in LACUNARITY_RADII:
                out[f"frac_{t}_lac_r{r}"] = lacunarity(mask, r, integral)
        else:
            for r in LACUNARITY_RADII:
                out[f"frac_{t}_lac_r{r}"] = float("nan")
    return out
