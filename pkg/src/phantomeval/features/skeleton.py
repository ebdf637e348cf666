"""Topology statistics of the ligament skeleton.

The ligament mask is thinned to one pixel first. Endpoints have exactly one
skeleton neighbor, junctions three or more; branches are the 8-connected
pieces left after junction pixels are removed. Bounded regions are the
4-connected components of the skeleton's complement inside the breast.
"""

from __future__ import annotations

import numpy as np
import scipy.ndimage as ndi
from skimage.morphology import skeletonize

from .summary import STAT_NAMES, summary_stats

_STRUCT8 = np.ones((3, 3), bool)
_STRUCT4 = ndi.generate_binary_structure(2, 1)


def neighbor_counts(skel: np.ndarray) -> np.ndarray:
    """Number of 8-neighbors on the skeleton, for every skeleton pixel."""
    padded = np.pad(skel.astype(np.uint8), 1)
    h, w = skel.shape
    total = np.zeros((h, w), np.uint8)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            total += padded[1 + dy : h + 1 + dy, 1 + dx : w + 1 + dx]
    return np.where(skel, total, 0)


def skeleton_feature_names() -> list[str]:
    names = ["skel_component_count", "skel_endpoint_count", "skel_junction_count", "skel_branch_count"]
    names.extend(f"skel_branch_len_{s}" for s in STAT_NAMES)
    names.append("skel_region_count")
    names.extend(f"skel_region_area_{s}" for s in STAT_NAMES)
    return names


def skeleton_features(lig_mask: np.ndarray, breast_mask: np.ndarray) -> dict[str, float]:
    out: dict[str, float] = {}
    nan = float("nan")
    if not lig_mask.any():
        out["skel_component_count"] = 0.0
        out["skel_endpoint_count"] = 0.0
        out["skel_junction_count"] = 0.0
        out["skel_branch_count"] = 0.0
        out.update({f"skel_branch_len_{s}": nan for s in STAT_NAMES})
        regions = _bounded_regions(np.zeros_like(lig_mask), breast_mask)
        out["skel_region_count"] = float(regions.size)
        out.update(summary_stats(regions).as_dict("skel_region_area"))
        return out

    skel = skeletonize(lig_mask)
    nc = neighbor_counts(skel)
    _, n_comp = ndi.label(skel, structure=_STRUCT8)
    endpoints = int(((nc == 1) & skel).sum())
    junction_mask = (nc >= 3) & skel
    junctions = int(junction_mask.sum())
    branch_labels, n_branch = ndi.label(skel & ~junction_mask, structure=_STRUCT8)
    branch_len = np.bincount(branch_labels.ravel(), minlength=n_branch + 1)[1:].astype(np.float64)

    out["skel_component_count"] = float(n_comp)
    out["skel_endpoint_count"] = float(endpoints)
    out["skel_junction_count"] = float(junctions)
    out["skel_branch_count"] = float(n_branch)
    out.update(summary_stats(branch_len).as_dict("skel_branch_len"))
    regions = _bounded_regions(skel, breast_mask)
    out["skel_region_count"] = float(regions.size)
    out.update(summary_stats(regions).as_dict("skel_region_area"))
    return out


def _bounded_regions(skel: np.ndarray, breast_mask: np.ndarray) -> np.ndarray:
    comp = breast_mask & ~skel
    labels, n = ndi.label(comp, structure=_STRUCT4)
    if n == 0:
        return np.empty(0)
    return np.bincount(labels.ravel(), minlength=n + 1)[1:].astype(np.float64)


def skeleton_component_count(lig_mask: np.ndarray) -> int:
    """Disconnected skeleton pieces after thinning; the break indicator."""
    if not lig_mask.any():
        return 0
    skel = skeletonize(lig_mask)
    return int(ndi.label(skel, structure=_STRUCT8)[1])
