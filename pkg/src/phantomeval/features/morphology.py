"""Connected-component shape statistics and breast outline convexity.

Regions are 8-connected. Per-region properties are computed vectorized
(areas/moments via bincount, perimeter as the exposed-edge count, solidity
from a convex hull of boundary-pixel corners) because images routinely hold
hundreds of small regions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.ndimage as ndi
from scipy.spatial import ConvexHull, QhullError
from skimage.measure import find_contours

from ..segment import TissueMasks
from .summary import STAT_NAMES, summary_stats

_STRUCT8 = np.ones((3, 3), bool)

REGION_PROPS = ("area", "perimeter", "eccentricity", "solidity", "extent")


@dataclass(frozen=True)
class RegionTable:
    """Per-region property arrays for one mask."""

    area: np.ndarray
    perimeter: np.ndarray
    eccentricity: np.ndarray
    solidity: np.ndarray
    extent: np.ndarray

    @property
    def count(self) -> int:
        return int(self.area.size)


def _solidity(labels: np.ndarray, edge_mask: np.ndarray, areas: np.ndarray) -> np.ndarray:
    """Region area over the area of the hull of its pixel squares."""
    n = areas.size
    out = np.ones(n)
    ys, xs = np.nonzero(edge_mask)
    labs = labels[ys, xs]
    order = np.argsort(labs, kind="stable")
    ys, xs, labs = ys[order], xs[order], labs[order]
    starts = np.searchsorted(labs, np.arange(1, n + 2))
    for r in range(n):
        a, b = starts[r], starts[r + 1]
        if b - a == 0:
            continue
        y = ys[a:b].astype(np.float64)
        x = xs[a:b].astype(np.float64)
        corners = np.empty((4 * (b - a), 2))
        for k, (oy, ox) in enumerate(((-0.5, -0.5), (-0.5, 0.5), (0.5, -0.5), (0.5, 0.5))):
            corners[k::4, 0] = y + oy
            corners[k::4, 1] = x + ox
        try:
            hull_area = ConvexHull(corners).volume
        except QhullError:
            continue
        if hull_area > 0:
            out[r] = min(1.0, float(areas[r]) / hull_area)
    return out


def region_table(mask: np.ndarray) -> RegionTable:
    labels, n = ndi.label(mask, structure=_STRUCT8)
    if n == 0:
        empty = np.empty(0)
        return RegionTable(empty, empty, empty, empty, empty)
    area = np.bincount(labels.ravel(), minlength=n + 1)[1:].astype(np.float64)

    ys, xs = np.nonzero(mask)
    labs = labels[ys, xs]
    yf = ys.astype(np.float64)
    xf = xs.astype(np.float64)
    sy = np.bincount(labs, weights=yf, minlength=n + 1)[1:]
    sx = np.bincount(labs, weights=xf, minlength=n + 1)[1:]
    syy = np.bincount(labs, weights=yf * yf, minlength=n + 1)[1:]
    sxx = np.bincount(labs, weights=xf * xf, minlength=n + 1)[1:]
    sxy = np.bincount(labs, weights=xf * yf, minlength=n + 1)[1:]
    mu20 = sxx - sx * sx / area
    mu02 = syy - sy * sy / area
    mu11 = sxy - sx * sy / area
    half_tr = (mu20 + mu02) / (2.0 * area)
    disc = np.sqrt(((mu20 - mu02) / (2.0 * area)) ** 2 + (mu11 / area) ** 2)
    lam1 = half_tr + disc
    lam2 = np.clip(half_tr - disc, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        ecc = np.where(lam1 > 0, np.sqrt(np.clip(1.0 - lam2 / np.where(lam1 > 0, lam1, 1.0), 0.0, 1.0)), 0.0)

    h, w = mask.shape
    pad = np.zeros((h + 2, w + 2), labels.dtype)
    pad[1:-1, 1:-1] = labels
    perim = np.zeros(n + 1)
    edge_mask = np.zeros_like(mask)
    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb = pad[1 + dy : h + 1 + dy, 1 + dx : w + 1 + dx]
        diff = mask & (labels != nb)
        perim += np.bincount(labels[diff], minlength=n + 1)
        edge_mask |= diff
    perimeter = perim[1:]

    extent = np.empty(n)
    for r, sl in enumerate(ndi.find_objects(labels)):
        bbox_area = (sl[0].stop - sl[0].start) * (sl[1].stop - sl[1].start)
        extent[r] = area[r] / bbox_area

    solidity = _solidity(labels, edge_mask, area)
    return RegionTable(area, perimeter, ecc, solidity, extent)


def _smooth_closed(points: np.ndarray, window: int = 7) -> np.ndarray:
    """Circular moving average along a closed polyline."""
    k = np.ones(window) / window
    n = points.shape[0]
    if n <= window:
        return points
    ext = np.vstack([points[-window:], points, points[:window]])
    sm = np.empty_like(ext)
    for c in range(points.shape[1]):
        sm[:, c] = np.convolve(ext[:, c], k, mode="same")
    return sm[window : window + n]


def convexity_perimeter_ratio(mask: np.ndarray) -> float:
    """Convex-hull perimeter over contour perimeter of the largest region.

    The raw marching-squares contour is smoothed before measuring so that
    rasterization stairs do not inflate the contour length; a convex outline
    then scores 1.0 and only genuine concavities pull the ratio down.
    """
    if not mask.any():
        return float("nan")
    labels, n = ndi.label(mask, structure=_STRUCT8)
    if n > 1:
        areas = np.bincount(labels.ravel(), minlength=n + 1)[1:]
        keep = labels == (int(areas.argmax()) + 1)
    else:
        keep = mask
    contours = find_contours(keep.astype(np.float64), 0.5)
    if not contours:
        return float("nan")
    contour = max(contours, key=len)
    closed = bool(np.allclose(contour[0], contour[-1]))
    if closed:
        contour = contour[:-1]
        contour = _smooth_closed(contour)
        diffs = np.diff(np.vstack([contour, contour[:1]]), axis=0)
    else:
        diffs = np.diff(contour, axis=0)
    length = float(np.hypot(diffs[:, 0], diffs[:, 1]).sum())
    if length <= 0:
        return float("nan")
    try:
        hull_perimeter = float(ConvexHull(contour).area)
    except QhullError:
        return float("nan")
    return min(1.0, hull_perimeter / length)


def morphology_feature_names() -> list[str]:
    names = []
    for t in ("F", "G", "B"):
        names.append(f"morph_{t}_region_count")
        for prop in REGION_PROPS:
            names.extend(f"morph_{t}_{prop}_{s}" for s in STAT_NAMES)
    names.extend(f"morph_{t}_area_total" for t in ("F", "G", "S", "L", "B"))
    names.append("morph_B_convexity_ratio")
    return names


def morphology_features(masks: TissueMasks) -> dict[str, float]:
    out: dict[str, float] = {}
    breast = masks.breast
    for t, mask in (("F", masks.fat), ("G", masks.gland), ("B", breast)):
        table = region_table(mask)
        out[f"morph_{t}_region_count"] = float(table.count)
        for prop in REGION_PROPS:
            out.update(summary_stats(getattr(table, prop)).as_dict(f"morph_{t}_{prop}"))
    for t, mask in (("F", masks.fat), ("G", masks.gland), ("S", masks.skin), ("L", masks.ligament), ("B", breast)):
        out[f"morph_{t}_area_total"] = float(mask.sum())
    out["morph_B_convexity_ratio"] = convexity_perimeter_ratio(breast)
    return out
