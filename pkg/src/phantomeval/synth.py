"""Ground-truth phantom slice synthesis.

A slice is built in two steps: a categorical label map (egg-shaped breast
region, smoothed-noise glandular blobs, a Voronoi-edge ligament web, a
morphological skin rim) and an intensity rendering that draws per-tissue
fields from affine-scaled Beta laws, imposes texture with a small Gaussian
filter and then restores the prescribed marginal exactly by rank-order
replacement.

The generator is deliberately plain 2-D plumbing: its only contracts are the
tissue-exclusivity/geometry invariants and the per-tissue intensity laws.
Everything is deterministic given a seed; per-image seeds are derived by a
counter-based splitter so ensembles are reproducible under any parallel
schedule.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from enum import IntEnum
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.ndimage as ndi
from scipy.special import betaincinv
from skimage.morphology import skeletonize

from .io import EnsembleManifest, save_image, write_manifest
from .parallel import child_seed, ordered_map


class Tissue(IntEnum):
    BG = 0
    FAT = 1
    GLAND = 2
    SKIN = 3
    LIG = 4


BREAST_CLASSES = ("fatty", "scattered", "heterogeneous", "dense")

# Target glandular fraction of breast area, per class.
CLASS_GLAND_RANGES = {
    "fatty": (0.05, 0.15),
    "scattered": (0.15, 0.35),
    "heterogeneous": (0.35, 0.60),
    "dense": (0.60, 0.80),
}

_QUANTILE_NODES = 8193
_quantile_tables: dict[tuple[float, float], np.ndarray] = {}


def _quantile_table(a: float, b: float) -> np.ndarray:
    key = (float(a), float(b))
    tab = _quantile_tables.get(key)
    if tab is None:
        u = np.linspace(0.0, 1.0, _QUANTILE_NODES)
        tab = betaincinv(a, b, u)
        _quantile_tables[key] = tab
    return tab


@dataclass(frozen=True)
class TissueLaw:
    """Affine-scaled Beta law: value = offset + scale * Beta(a, b)."""

    scale: float
    offset: float
    a: float
    b: float

    @property
    def support(self) -> tuple[float, float]:
        return (self.offset, self.offset + self.scale)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Inverse-CDF draws via a dense interpolated quantile table."""
        tab = _quantile_table(self.a, self.b)
        u = rng.random(n)
        pos = u * (_QUANTILE_NODES - 1)
        i = pos.astype(np.int64)
        t = pos - i
        x = tab[i] * (1.0 - t) + tab[i + 1] * t
        return (self.offset + self.scale * x).astype(np.float32)


@dataclass(frozen=True)
class TissueIntensityModel:
    fat: TissueLaw
    gland: TissueLaw
    skin: TissueLaw
    ligament: TissueLaw
    sigma: float = 0.8  # texture smoothing, pixels; 0 disables smoothing

    def law_for(self, tissue: Tissue) -> TissueLaw:
        return {
            Tissue.FAT: self.fat,
            Tissue.GLAND: self.gland,
            Tissue.SKIN: self.skin,
            Tissue.LIG: self.ligament,
        }[tissue]


DEFAULT_INTENSITY_MODEL = TissueIntensityModel(
    fat=TissueLaw(scale=60.0, offset=52.0, a=2.0, b=4.0),
    gland=TissueLaw(scale=96.0, offset=128.0, a=4.0, b=2.0),
    skin=TissueLaw(scale=16.0, offset=228.0, a=3.0, b=3.0),
    ligament=TissueLaw(scale=16.0, offset=232.0, a=3.0, b=3.0),
)


@dataclass(frozen=True)
class ClassMix:
    """Prevalence of (fatty, scattered, heterogeneous, dense)."""

    fractions: tuple[float, float, float, float] = (0.1, 0.4, 0.4, 0.1)

    def __post_init__(self) -> None:
        if len(self.fractions) != len(BREAST_CLASSES):
            raise ValueError("class mix needs one fraction per breast class")
        if any(f < 0 for f in self.fractions):
            raise ValueError("class mix fractions must be nonnegative")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError(f"class mix must sum to 1, got {sum(self.fractions)}")


DEFAULT_CLASS_MIX = ClassMix()

_THETA_BINS = 2048
_polar_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _polar_grid(size: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel radius and angle-bin index around the image center (cached)."""
    cached = _polar_cache.get(size)
    if cached is None:
        c = (size - 1) / 2.0
        y, x = np.mgrid[:size, :size]
        dy = y - c
        dx = x - c
        r = np.hypot(dy, dx).astype(np.float32)
        theta = np.arctan2(dy, dx)
        tbin = np.floor((theta + np.pi) / (2 * np.pi) * _THETA_BINS).astype(np.int32)
        np.clip(tbin, 0, _THETA_BINS - 1, out=tbin)
        cached = (r, tbin)
        _polar_cache[size] = cached
    return cached


def _breast_mask(rng: np.random.Generator, size: int) -> np.ndarray:
    # Egg-like outline: fixed-phase first harmonic gives the whole population
    # a consistent left/right asymmetry; higher harmonics are small per-image
    # jitter so the size-variation rim stays only a few pixels wide.
    r0 = size * rng.uniform(0.345, 0.365)
    a1 = rng.uniform(0.10, 0.14)
    a2 = rng.uniform(0.0, 0.03)
    a3 = rng.uniform(0.0, 0.02)
    p2 = rng.uniform(0, 2 * np.pi)
    p3 = rng.uniform(0, 2 * np.pi)
    theta = -np.pi + (np.arange(_THETA_BINS) + 0.5) * (2 * np.pi / _THETA_BINS)
    radius = r0 * (1.0 + a1 * np.cos(theta) + a2 * np.cos(2 * theta + p2) + a3 * np.cos(3 * theta + p3))
    np.clip(radius, 8.0, size / 2.0 - 5.0, out=radius)
    r, tbin = _polar_grid(size)
    return r <= radius[tbin].astype(np.float32)


def _gland_field(rng: np.random.Generator, size: int, blob_scale: float) -> np.ndarray:
    # Blob texture is generated at quarter resolution and upsampled. Two
    # correlation lengths are blended left to right: finer blobs on the left,
    # coarser on the right. The blend is variance-normalized so thresholding
    # at a quantile gives a spatially uniform glandular fraction; only the
    # interface length is asymmetric (this is what makes mirrored images
    # detectable without biasing the ensemble mean image).
    quarter = (size + 3) // 4
    fine = ndi.gaussian_filter(rng.standard_normal((quarter, quarter)).astype(np.float32), 4.5 * blob_scale / 4.0, mode="reflect")
    coarse = ndi.gaussian_filter(rng.standard_normal((quarter, quarter)).astype(np.float32), 10.0 * blob_scale / 4.0, mode="reflect")
    fine /= max(float(fine.std()), 1e-12)
    coarse /= max(float(coarse.std()), 1e-12)
    w = np.linspace(0.0, 1.0, quarter, dtype=np.float32)[None, :]
    blend = ((1.0 - w) * fine + w * coarse) / np.sqrt((1.0 - w) ** 2 + w**2)
    field = ndi.zoom(blend, 4, order=1)
    return field[:size, :size]


def _ligament_web(rng: np.random.Generator, region: np.ndarray, size: int) -> np.ndarray:
    """One-pixel-wide Voronoi-edge skeleton clipped to `region`."""
    if not region.any():
        return np.zeros_like(region)
    quarter = region[::4, ::4]
    qidx = np.flatnonzero(quarter)
    if qidx.size < 8:
        return np.zeros_like(region)
    n_seeds = int(rng.integers(42, 72))
    picks = rng.choice(qidx, size=min(n_seeds, qidx.size), replace=False)
    qh, qw = quarter.shape
    seeds = np.zeros((qh, qw), bool)
    seeds[np.unravel_index(picks, (qh, qw))] = True
    _, (iy, ix) = ndi.distance_transform_edt(~seeds, return_indices=True)
    ids4 = (iy.astype(np.int32) * qw + ix.astype(np.int32))
    ids = np.repeat(np.repeat(ids4, 4, axis=0), 4, axis=1)[:size, :size]
    edges = np.zeros_like(region)
    edges[:-1, :] |= ids[:-1, :] != ids[1:, :]
    edges[:, :-1] |= ids[:, :-1] != ids[:, 1:]
    edges &= region
    return skeletonize(edges)


_STRUCT8 = np.ones((3, 3), bool)


def synth_label_map(
    breast_class: str,
    seed: int | np.random.SeedSequence,
    *,
    size: int = 512,
    blob_scale: float = 1.0,
) -> np.ndarray:
    """Per-pixel tissue labels for one slice; deterministic given the seed."""
    if breast_class not in CLASS_GLAND_RANGES:
        raise ValueError(f"unknown breast class: {breast_class!r}")
    rng = np.random.default_rng(seed)

    mask = _breast_mask(rng, size)
    skin_px = int(rng.integers(2, 4))
    interior = ndi.binary_erosion(mask, _STRUCT8, iterations=skin_px)
    # Keep ligaments well clear of the rim so the peripheral/central split
    # downstream is unambiguous.
    lig_region = ndi.binary_erosion(interior, _STRUCT8, iterations=4)
    lig = _ligament_web(rng, lig_region, size)

    lo, hi = CLASS_GLAND_RANGES[breast_class]
    target = rng.uniform(lo, hi)
    field = _gland_field(rng, size, blob_scale)
    cand = interior & ~lig
    cand_idx = np.flatnonzero(cand)
    want = min(int(round(target * int(mask.sum()))), cand_idx.size)
    labels = np.zeros((size, size), np.uint8)
    labels[mask] = Tissue.FAT
    labels[mask & ~interior] = Tissue.SKIN
    if want > 0:
        vals = field.ravel()[cand_idx]
        top = np.argpartition(vals, vals.size - want)[vals.size - want :]
        gsel = np.zeros(labels.size, bool)
        gsel[cand_idx[top]] = True
        labels[gsel.reshape(labels.shape)] = Tissue.GLAND
    labels[lig] = Tissue.LIG
    return labels


def gland_fraction(labels: np.ndarray) -> float:
    """Glandular share of breast area; 0 for an empty breast."""
    breast = int((labels != Tissue.BG).sum())
    if breast == 0:
        return 0.0
    return float((labels == Tissue.GLAND).sum()) / breast


def restore_histogram(values: np.ndarray, fresh: np.ndarray) -> np.ndarray:
    """Rank-order replacement: the output multiset equals sorted(fresh)."""
    if values.shape != fresh.shape:
        raise ValueError("histogram restoration needs equally sized samples")
    order = np.argsort(values, kind="stable")
    out = np.empty_like(fresh)
    out[order] = np.sort(fresh)
    return out


def assign_intensities(
    labels: np.ndarray,
    model: TissueIntensityModel = DEFAULT_INTENSITY_MODEL,
    seed: int | np.random.SeedSequence = 0,
) -> np.ndarray:
    """Render a label map to an 8-bit image under the tissue intensity model.

    Per tissue: draw a full field of law variates over the breast bounding
    box, smooth with a Gaussian kernel (truncated at 4 sigma, reflective
    boundaries), restore the law exactly by rank-order replacement on the
    tissue's pixels, then quantize round-half-to-even. Background stays 0.
    """
    rng = np.random.default_rng(seed)
    fg = labels != Tissue.BG
    canvas = np.zeros(labels.shape, np.float32)
    if fg.any():
        ys, xs = np.nonzero(fg)
        pad = 8
        y0 = max(int(ys.min()) - pad, 0)
        y1 = min(int(ys.max()) + pad + 1, labels.shape[0])
        x0 = max(int(xs.min()) - pad, 0)
        x1 = min(int(xs.max()) + pad + 1, labels.shape[1])
        box = (slice(y0, y1), slice(x0, x1))
        lab_box = labels[box]
        shape = lab_box.shape
        for tissue in (Tissue.FAT, Tissue.GLAND, Tissue.SKIN, Tissue.LIG):
            px = lab_box == tissue
            n = int(px.sum())
            if n == 0:
                continue
            law = model.law_for(tissue)
            field = law.sample(rng, shape[0] * shape[1]).reshape(shape)
            if model.sigma > 0:
                field = ndi.gaussian_filter(field, model.sigma, truncate=4.0, mode="reflect")
                tissue_vals = restore_histogram(field[px], law.sample(rng, n))
            else:
                tissue_vals = field[px]
            canvas[box][px] = tissue_vals
    return np.clip(np.rint(canvas), 0, 255).astype(np.uint8)


def largest_remainder_counts(n: int, fractions: Sequence[float]) -> list[int]:
    """Integer counts summing to n, apportioned by largest remainder."""
    raw = [n * f for f in fractions]
    base = [int(np.floor(v)) for v in raw]
    short = n - sum(base)
    order = sorted(range(len(raw)), key=lambda i: raw[i] - base[i], reverse=True)
    for i in order[:short]:
        base[i] += 1
    return base


def class_sequence(n: int, mix: ClassMix, rng: np.random.Generator) -> list[str]:
    counts = largest_remainder_counts(n, mix.fractions)
    seq: list[str] = []
    for cls, c in zip(BREAST_CLASSES, counts):
        seq.extend([cls] * c)
    return [seq[i] for i in rng.permutation(len(seq))]


def synth_image(
    breast_class: str,
    master_seed: int,
    index: int,
    *,
    model: TissueIntensityModel = DEFAULT_INTENSITY_MODEL,
    size: int = 512,
    blob_scale: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """(labels, image) for ensemble position `index` under `master_seed`."""
    labels = synth_label_map(
        breast_class, child_seed(master_seed, index, stream=0), size=size, blob_scale=blob_scale
    )
    image = assign_intensities(labels, model, child_seed(master_seed, index, stream=1))
    return labels, image


def synth_ensemble(
    n: int,
    mix: ClassMix = DEFAULT_CLASS_MIX,
    seed: int = 0,
    *,
    model: TissueIntensityModel = DEFAULT_INTENSITY_MODEL,
    size: int = 512,
    blob_scale: float = 1.0,
) -> list[tuple[np.ndarray, str]]:
    """Ensemble of (image, class label), class counts by largest remainder."""
    if n < 1:
        raise ValueError("ensemble size must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0xC1A55)))
    classes = class_sequence(n, mix, rng)
    out = []
    for i, cls in enumerate(classes):
        _, image = synth_image(cls, seed, i, model=model, size=size, blob_scale=blob_scale)
        out.append((image, cls))
    return out


def _synth_to_dir_one(args: tuple) -> tuple[str, str, float]:
    (i, cls, seed, model, size, blob_scale, out_dir, stem) = args
    labels, image = synth_image(cls, seed, i, model=model, size=size, blob_scale=blob_scale)
    image_id = f"{stem}_{i:06d}.png"
    save_image(image, Path(out_dir) / image_id)
    return image_id, cls, gland_fraction(labels)


def synth_to_dir(
    n: int,
    mix: ClassMix,
    seed: int,
    out_dir: str | Path,
    *,
    model: TissueIntensityModel = DEFAULT_INTENSITY_MODEL,
    size: int = 512,
    blob_scale: float = 1.0,
    workers: int = 1,
    stem: str = "img",
) -> EnsembleManifest:
    """Write PNGs plus manifest and a provenance sidecar; returns the manifest."""
    if n < 1:
        raise ValueError("ensemble size must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0xC1A55)))
    classes = class_sequence(n, mix, rng)
    tasks = [(i, cls, seed, model, size, blob_scale, str(out_dir), stem) for i, cls in enumerate(classes)]
    rows = ordered_map(_synth_to_dir_one, tasks, workers=workers)
    manifest = EnsembleManifest(root=out_dir, ids=tuple(r[0] for r in rows), classes=tuple(r[1] for r in rows))
    write_manifest(manifest, out_dir / "manifest.txt")
    with open(out_dir / "provenance.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "class", "gland_fraction", "master_seed", "index"])
        for i, (image_id, cls, frac) in enumerate(rows):
            w.writerow([image_id, cls, f"{frac:.8f}", seed, i])
    return manifest


def read_gland_fractions(out_dir: str | Path) -> dict[str, float]:
    """Per-image glandular fractions from a synthesis provenance sidecar."""
    path = Path(out_dir) / "provenance.csv"
    out: dict[str, float] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[row["id"]] = float(row["gland_fraction"])
    return out


def unsmoothed(model: TissueIntensityModel) -> TissueIntensityModel:
    """Control variant of a model with texture smoothing disabled."""
    return replace(model, sigma=0.0)
