"""Ensemble-level diagnostic analyses.

Breast-type classification by glandular fraction, artifact detectors
calibrated against training baselines, the ensemble mean image, and
semivariograms of the mean image as a diversity check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.ndimage as ndi

from .features.morphology import convexity_perimeter_ratio
from .features.skeleton import skeleton_component_count
from .io import EnsembleManifest, iter_ensemble
from .segment import BG_THRESHOLD, TissueMasks, boundary_mask, segment
from .synth import BREAST_CLASSES

CONVEXITY_FLAG_THRESHOLD = 0.9
STICK_STACK_FRACTION = 0.8
FLIP_CORR_MARGIN = 0.05
FLIP_FLAG_FRACTION = 0.10
BACKGROUND_FLAG_FRACTION = 0.005

_STRUCT8 = np.ones((3, 3), bool)


@dataclass(frozen=True)
class ClassRule:
    """Glandular-fraction cut points mapping fraction to breast type."""

    cuts: tuple[float, float, float]

    def __post_init__(self) -> None:
        c1, c2, c3 = self.cuts
        if not (0.0 < c1 < c2 < c3 < 1.0):
            raise ValueError(f"cut points must be strictly increasing in (0, 1): {self.cuts}")

    def classify(self, fraction: float) -> str:
        c1, c2, c3 = self.cuts
        if fraction < c1:
            return "fatty"
        if fraction < c2:
            return "scattered"
        if fraction < c3:
            return "heterogeneous"
        return "dense"


def calibrate_class_rule(fractions: Sequence[float]) -> ClassRule:
    """Cuts at the 10th/50th/90th percentiles of training glandular fractions."""
    fractions = np.asarray(fractions, dtype=np.float64)
    if fractions.size < 100:
        raise ValueError("need at least 100 training fractions to calibrate")
    cuts = tuple(float(c) for c in np.percentile(fractions, [10.0, 50.0, 90.0]))
    if not (cuts[0] < cuts[1] < cuts[2]):
        raise ValueError(f"degenerate fraction distribution, cut points collide: {cuts}")
    return ClassRule(cuts=cuts)


def gland_fraction_of_masks(masks: TissueMasks) -> float:
    breast = int(masks.breast.sum())
    if breast == 0:
        return 0.0
    return float(masks.gland.sum()) / breast


def class_prevalence(fractions: Sequence[float], rule: ClassRule) -> dict[str, float]:
    """Fraction of images per breast type; sums to 1 exactly."""
    fractions = list(fractions)
    counts = dict.fromkeys(BREAST_CLASSES, 0)
    for f in fractions:
        counts[rule.classify(f)] += 1
    n = len(fractions)
    return {c: counts[c] / n for c in BREAST_CLASSES}


@dataclass
class EnsembleScan:
    """Per-image diagnostic statistics gathered in one pass over an ensemble."""

    n_images: int = 0
    convexity: list[float] = field(default_factory=list)
    skeleton_counts: list[int] = field(default_factory=list)
    bg_nonzero_fraction: list[float] = field(default_factory=list)
    bg_nonzero_mean: list[float] = field(default_factory=list)
    gland_fractions: list[float] = field(default_factory=list)
    boundary_sum: np.ndarray | None = None
    boundary_idx: list[np.ndarray] = field(default_factory=list)  # flat pixel indices
    lig_stack: np.ndarray | None = None
    shape: tuple[int, int] | None = None


def scan_ensemble(images: Iterable[np.ndarray] | EnsembleManifest, *, any_size: bool = False) -> EnsembleScan:
    if isinstance(images, EnsembleManifest):
        images = iter_ensemble(images, any_size=any_size)
    scan = EnsembleScan()
    for image in images:
        masks = segment(image)
        if scan.shape is None:
            scan.shape = image.shape
            scan.boundary_sum = np.zeros(image.shape, np.float64)
            scan.lig_stack = np.zeros(image.shape, np.int32)
        scan.n_images += 1
        scan.convexity.append(convexity_perimeter_ratio(masks.breast))
        scan.skeleton_counts.append(skeleton_component_count(masks.ligament))
        bg = masks.background
        n_bg = int(bg.sum())
        nz = image[bg]
        nz = nz[nz > 0]
        scan.bg_nonzero_fraction.append(nz.size / n_bg if n_bg else 0.0)
        scan.bg_nonzero_mean.append(float(nz.mean()) if nz.size else 0.0)
        scan.gland_fractions.append(gland_fraction_of_masks(masks))
        b = boundary_mask(masks)
        scan.boundary_sum += b
        scan.boundary_idx.append(np.flatnonzero(b).astype(np.int32))
        scan.lig_stack += masks.ligament
    if scan.n_images == 0:
        raise ValueError("empty ensemble")
    return scan


@dataclass(frozen=True)
class TrainBaselines:
    """Training-side reference levels for the artifact detectors."""

    skeleton_count_p95: float
    mean_boundary: np.ndarray
    convexity_min: float
    shape: tuple[int, int]


def train_baselines(scan: EnsembleScan) -> TrainBaselines:
    return TrainBaselines(
        skeleton_count_p95=float(np.percentile(scan.skeleton_counts, 95.0)),
        mean_boundary=scan.boundary_sum / scan.n_images,
        convexity_min=float(np.nanmin(scan.convexity)),
        shape=scan.shape,
    )


def _flip_gap(packed_mask: np.ndarray, shape: tuple[int, int], mean_boundary: np.ndarray) -> float:
    """corr(mirrored mask, mean) - corr(mask, mean); positive favors a flip."""
    mask = np.unpackbits(packed_mask, count=shape[0] * shape[1]).reshape(shape).astype(bool)
    n = int(mask.sum())
    if n == 0:
        return 0.0
    norm_mean = float(np.sqrt((mean_boundary**2).sum()))
    if norm_mean == 0:
        return 0.0
    straight = float(mean_boundary[mask].sum())
    mirrored = float(mean_boundary[np.fliplr(mask)].sum())
    scale = np.sqrt(n) * norm_mean
    return (mirrored - straight) / scale


def detect_artifacts(scan: EnsembleScan, baselines: TrainBaselines) -> tuple[dict[str, bool], dict[str, float]]:
    """Artifact flags plus the statistics behind them.

    boundary: any convexity perimeter ratio below 0.9 (training images all
    sit above it). back: non-zero background pixels at a non-negligible rate.
    break (and its gradual variant): the per-image count of disconnected
    skeletons shifts above the training 95th percentile. stick: some pixel is
    ligament in >= 80% of images. flip: mirrored boundary masks correlate
    better with the training mean boundary than the unmirrored ones do.
    """
    conv = np.asarray(scan.convexity, dtype=np.float64)
    boundary_fraction = float(np.mean(np.nan_to_num(conv, nan=1.0) < CONVEXITY_FLAG_THRESHOLD))

    bg_frac_mean = float(np.mean(scan.bg_nonzero_fraction))
    nz_means = [m for m, f in zip(scan.bg_nonzero_mean, scan.bg_nonzero_fraction) if f > 0]
    bg_gray_mean = float(np.mean(nz_means)) if nz_means else 0.0

    skel_median = float(np.median(scan.skeleton_counts))
    break_flag = skel_median > baselines.skeleton_count_p95

    stack_fraction = float(scan.lig_stack.max()) / scan.n_images if scan.n_images else 0.0
    stick_flag = stack_fraction >= STICK_STACK_FRACTION

    gaps = [_flip_gap(p, scan.shape, baselines.mean_boundary) for p in scan.boundary_masks]
    flip_fraction = float(np.mean(np.asarray(gaps) > FLIP_CORR_MARGIN))
    flip_flag = flip_fraction >= FLIP_FLAG_FRACTION

    flags = {
        "boundary": boundary_fraction > 0.0,
        "background": bg_frac_mean > BACKGROUND_FLAG_FRACTION,
        "break": break_flag,
        "stick": stick_flag,
        "flip": flip_flag,
    }
    stats = {
        "boundary_fraction": boundary_fraction,
        "background_nonzero_fraction_mean": bg_frac_mean,
        "background_nonzero_gray_mean": bg_gray_mean,
        "skeleton_count_median": skel_median,
        "skeleton_count_train_p95": baselines.skeleton_count_p95,
        "stick_max_stack_fraction": stack_fraction,
        "flip_fraction": flip_fraction,
    }
    return flags, stats


@dataclass(frozen=True)
class MeanImage:
    values: np.ndarray  # float64 in [0, 255]
    n_images: int


def mean_image(
    source: EnsembleManifest | Sequence[np.ndarray],
    n: int = 10000,
    seed: int = 0,
    *,
    any_size: bool = False,
) -> MeanImage:
    """Pixelwise mean over a seeded random subset (n clamped to ensemble size)."""
    if isinstance(source, EnsembleManifest):
        total = len(source)
    else:
        total = len(source)
    if total == 0:
        raise ValueError("empty ensemble")
    n = min(n, total)
    rng = np.random.default_rng(seed)
    picks = set(rng.choice(total, size=n, replace=False).tolist())
    acc: np.ndarray | None = None
    if isinstance(source, EnsembleManifest):
        iterator = iter_ensemble(source, any_size=any_size)
    else:
        iterator = iter(source)
    for i, image in enumerate(iterator):
        if i not in picks:
            continue
        if acc is None:
            acc = np.zeros(image.shape, np.float64)
        acc += image
    return MeanImage(values=acc / n, n_images=n)


def bulk_mask(mean: MeanImage, *, threshold: float = float(BG_THRESHOLD), erode_px: int = 8) -> np.ndarray:
    """Interior of the mean image, excluding the size-variation rim."""
    core = mean.values > threshold
    if erode_px > 0:
        core = ndi.binary_erosion(core, _STRUCT8, iterations=erode_px)
    return core


@dataclass(frozen=True)
class Semivariogram:
    lags: np.ndarray  # int
    gamma: np.ndarray  # float64
    counts: np.ndarray  # pair counts per lag


def semivariance(
    values: np.ndarray,
    mask: np.ndarray,
    h_max: int = 128,
    *,
    directions: tuple[str, ...] = ("h", "v"),
) -> Semivariogram:
    """gamma(h) over axis-aligned pixel pairs with both ends inside the mask."""
    if not mask.any():
        raise ValueError("empty mask")
    z = np.asarray(values, dtype=np.float64)
    lags = []
    gammas = []
    counts = []
    for h in range(1, h_max + 1):
        total = 0
        acc = 0.0
        if "h" in directions and h < z.shape[1]:
            m = mask[:, :-h] & mask[:, h:]
            c = int(m.sum())
            if c:
                d = z[:, :-h][m] - z[:, h:][m]
                acc += float((d * d).sum())
                total += c
        if "v" in directions and h < z.shape[0]:
            m = mask[:-h, :] & mask[h:, :]
            c = int(m.sum())
            if c:
                d = z[:-h, :][m] - z[h:, :][m]
                acc += float((d * d).sum())
                total += c
        if total == 0:
            continue  # lag dropped, visible as a gap in `lags`
        lags.append(h)
        gammas.append(acc / (2.0 * total))
        counts.append(total)
    return Semivariogram(
        lags=np.asarray(lags, dtype=np.int64),
        gamma=np.asarray(gammas, dtype=np.float64),
        counts=np.asarray(counts, dtype=np.int64),
    )
