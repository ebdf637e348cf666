"""Image moments: raw, central, normalized and Hu invariants.

Computed for fat, gland and whole-breast regions, both unweighted (binary
mask) and weighted by the raw 8-bit intensity. Coordinates follow the usual
image-moment convention x = column, y = row, in absolute image coordinates.
"""

from __future__ import annotations

import numpy as np

from ..segment import TissueMasks

# (p, q) exponent pairs with p + q <= 3, in emission order.
MOMENT_ORDERS = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3))
ETA_ORDERS = tuple((p, q) for p, q in MOMENT_ORDERS if p + q >= 2)


def _power_sums(weights: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """s[q, p] = sum_ij w[i, j] * x[j]**p * y[i]**q for p, q in 0..3."""
    xp = np.stack([np.ones_like(x), x, x * x, x * x * x])
    yq = np.stack([np.ones_like(y), y, y * y, y * y * y])
    return yq @ (weights @ xp.T)


def raw_moments(weights: np.ndarray, x0: float = 0.0, y0: float = 0.0) -> dict[tuple[int, int], float]:
    """m_pq of a weight array whose (0, 0) pixel sits at image coords (x0, y0)."""
    h, w = weights.shape
    x = x0 + np.arange(w, dtype=np.float64)
    y = y0 + np.arange(h, dtype=np.float64)
    s = _power_sums(weights.astype(np.float64), x, y)
    return {(p, q): float(s[q, p]) for p, q in MOMENT_ORDERS}


def central_moments(weights: np.ndarray, x0: float = 0.0, y0: float = 0.0) -> dict[tuple[int, int], float]:
    h, w = weights.shape
    wsum = float(weights.sum())
    if wsum == 0:
        return {k: float("nan") for k in MOMENT_ORDERS}
    x = x0 + np.arange(w, dtype=np.float64)
    y = y0 + np.arange(h, dtype=np.float64)
    wf = weights.astype(np.float64)
    xbar = float((wf.sum(axis=0) * x).sum()) / wsum
    ybar = float((wf.sum(axis=1) * y).sum()) / wsum
    s = _power_sums(wf, x - xbar, y - ybar)
    return {(p, q): float(s[q, p]) for p, q in MOMENT_ORDERS}


def normalized_moments(mu: dict[tuple[int, int], float]) -> dict[tuple[int, int], float]:
    mu00 = mu[(0, 0)]
    out = {}
    for p, q in ETA_ORDERS:
        out[(p, q)] = mu[(p, q)] / mu00 ** (1.0 + (p + q) / 2.0) if mu00 > 0 else float("nan")
    return out


def hu_invariants(eta: dict[tuple[int, int], float]) -> tuple[float, ...]:
    n20, n02, n11 = eta[(2, 0)], eta[(0, 2)], eta[(1, 1)]
    n30, n03, n21, n12 = eta[(3, 0)], eta[(0, 3)], eta[(2, 1)], eta[(1, 2)]
    a = n30 + n12
    b = n21 + n03
    c = n30 - 3 * n12
    d = 3 * n21 - n03
    h1 = n20 + n02
    h2 = (n20 - n02) ** 2 + 4 * n11**2
    h3 = c**2 + d**2
    h4 = a**2 + b**2
    h5 = c * a * (a**2 - 3 * b**2) + d * b * (3 * a**2 - b**2)
    h6 = (n20 - n02) * (a**2 - b**2) + 4 * n11 * a * b
    h7 = d * a * (a**2 - 3 * b**2) - c * b * (3 * a**2 - b**2)
    return (h1, h2, h3, h4, h5, h6, h7)


def _combo_names(tissue: str, weighting: str) -> list[str]:
    names = [f"mom_{tissue}_{weighting}_m{p}{q}" for p, q in MOMENT_ORDERS]
    names += [f"mom_{tissue}_{weighting}_mu{p}{q}" for p, q in MOMENT_ORDERS]
    names += [f"mom_{tissue}_{weighting}_eta{p}{q}" for p, q in ETA_ORDERS]
    names += [f"mom_{tissue}_{weighting}_hu{i}" for i in range(1, 8)]
    return names


def moment_feature_names() -> list[str]:
    names = []
    for t in ("F", "G", "B"):
        for weighting in ("bin", "wgt"):
            names.extend(_combo_names(t, weighting))
    return names


def _region_moment_values(weights: np.ndarray, x0: float, y0: float) -> list[float]:
    if weights.size == 0 or float(weights.sum()) == 0.0:
        return [float("nan")] * (2 * len(MOMENT_ORDERS) + len(ETA_ORDERS) + 7)
    m = raw_moments(weights, x0, y0)
    mu = central_moments(weights, x0, y0)
    eta = normalized_moments(mu)
    hu = hu_invariants(eta)
    vals = [m[k] for k in MOMENT_ORDERS]
    vals += [mu[k] for k in MOMENT_ORDERS]
    vals += [eta[k] for k in ETA_ORDERS]
    vals += list(hu)
    return vals


def moment_features(image: np.ndarray, masks: TissueMasks) -> dict[str, float]:
    out: dict[str, float] = {}
    img = image.astype(np.float64)
    for t, mask in (("F", masks.fat), ("G", masks.gland), ("B", masks.breast)):
        ys, xs = np.nonzero(mask)
        if ys.size == 0:
            crop_bin = np.zeros((0, 0))
            crop_wgt = crop_bin
            x0 = y0 = 0.0
        else:
            sl = (slice(ys.min(), ys.max() + 1), slice(xs.min(), xs.max() + 1))
            sub = mask[sl]
            crop_bin = sub.astype(np.float64)
            crop_wgt = img[sl] * sub
            y0, x0 = float(sl[0].start), float(sl[1].start)
        for weighting, crop in (("bin", crop_bin), ("wgt", crop_wgt)):
            values = _region_moment_values(crop, x0, y0)
            for name, v in zip(_combo_names(t, weighting), values):
                out[name] = v
    return out
