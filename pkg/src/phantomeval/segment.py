"""Threshold segmentation into tissue masks and the fat/gland boundary mask.

Bands are lower-inclusive: background below 30, fat [30, 120), gland
[120, 226), skin/ligament [226, 255]. The high band is split by location:
skin within a 4-pixel morphological band of the outer breast contour,
ligaments strictly interior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.ndimage as ndi

BG_THRESHOLD = 30
GLAND_THRESHOLD = 120
HIGH_THRESHOLD = 226
SKIN_BAND_PX = 4

_STRUCT8 = np.ones((3, 3), bool)


@dataclass(frozen=True)
class TissueMasks:
    """Pairwise-disjoint masks whose union covers every pixel."""

    background: np.ndarray
    fat: np.ndarray
    gland: np.ndarray
    skin: np.ndarray
    ligament: np.ndarray

    @property
    def breast(self) -> np.ndarray:
        return ~self.background

    @property
    def shape(self) -> tuple[int, ...]:
        return self.background.shape


def locate_skin(high_band: np.ndarray, breast_mask: np.ndarray, *, band_px: int = SKIN_BAND_PX) -> tuple[np.ndarray, np.ndarray]:
    """Split the high band into (skin, ligament) by distance from the contour."""
    if high_band.shape != breast_mask.shape:
        raise ValueError("high band and breast mask shapes differ")
    if not breast_mask.any():
        raise ValueError("empty breast mask")
    rim = breast_mask & ~ndi.binary_erosion(breast_mask, _STRUCT8, iterations=band_px)
    skin = high_band & rim
    lig = high_band & ~rim
    return skin, lig


def segment(image: np.ndarray) -> TissueMasks:
    """Decompose an 8-bit image into the five tissue masks."""
    if image.dtype != np.uint8:
        raise ValueError("segment expects an 8-bit image")
    background = image < BG_THRESHOLD
    fat = (image >= BG_THRESHOLD) & (image < GLAND_THRESHOLD)
    gland = (image >= GLAND_THRESHOLD) & (image < HIGH_THRESHOLD)
    high = image >= HIGH_THRESHOLD
    breast = ~background
    if high.any():
        skin, lig = locate_skin(high, breast)
    else:
        skin = np.zeros_like(high)
        lig = np.zeros_like(high)
    return TissueMasks(background=background, fat=fat, gland=gland, skin=skin, ligament=lig)


def boundary_mask(masks: TissueMasks) -> np.ndarray:
    """Fat/gland interface ribbon: tissue pixels 8-adjacent to the other tissue."""
    fat_d = ndi.binary_dilation(masks.fat, _STRUCT8)
    gland_d = ndi.binary_dilation(masks.gland, _STRUCT8)
    return (masks.fat & gland_d) | (masks.gland & fat_d)
