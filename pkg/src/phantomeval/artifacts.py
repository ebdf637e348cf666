"""Controlled corruption of synthesized images, used to validate detectors.

Kinds: ``break`` (sharp ligament cuts), ``blend`` (ligaments feathered toward
fat), ``stick`` (one fixed ligament template painted into every image),
``boundary`` (a deep notch cut into the breast rim), ``flip`` (mirror on the
vertical axis) and ``background`` (non-zero low-intensity background noise).
Severity 0 always returns the input unchanged.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import segment as seg
from .parallel import child_seed
from .synth import DEFAULT_INTENSITY_MODEL, Tissue, TissueIntensityModel, synth_label_map

ARTIFACT_KINDS = ("break", "blend", "stick", "boundary", "flip", "background")

_STICK_TEMPLATE_SEED = 0x571C
_template_cache: dict[tuple[int, int], np.ndarray] = {}


def _stick_template(size: int, template_seed: int) -> np.ndarray:
    key = (size, template_seed)
    tem = _template_cache.get(key)
    if tem is None:
        labels = synth_label_map("scattered", np.random.SeedSequence(entropy=(template_seed,)), size=size)
        tem = labels == Tissue.LIG
        _template_cache[key] = tem
    return tem


def _fat_fill(image: np.ndarray, masks: seg.TissueMasks) -> float:
    if masks.fat.any():
        return float(np.median(image[masks.fat]))
    return 72.0


def _cut_ligaments(image: np.ndarray, severity: float, rng: np.random.Generator, sharp: bool) -> np.ndarray:
    masks = seg.segment(image)
    lig_idx = np.flatnonzero(masks.ligament)
    if lig_idx.size == 0:
        return image
    out = image.astype(np.float32)
    fill = _fat_fill(image, masks)
    n_cuts = max(1, int(round(severity * 12)))
    centers = rng.choice(lig_idx, size=min(n_cuts, lig_idx.size), replace=False)
    h, w = image.shape
    cy, cx = np.unravel_index(centers, image.shape)
    lig_y, lig_x = np.nonzero(masks.ligament)
    for k in range(centers.size):
        radius = float(rng.uniform(3.0, 6.0))
        d2 = (lig_y - cy[k]) ** 2 + (lig_x - cx[k]) ** 2
        hit = d2 <= radius * radius
        if not hit.any():
            continue
        if sharp:
            out[lig_y[hit], lig_x[hit]] = fill
        else:
            alpha = np.exp(-d2[hit] / (2.0 * (radius / 1.5) ** 2)).astype(np.float32)
            vals = out[lig_y[hit], lig_x[hit]]
            out[lig_y[hit], lig_x[hit]] = vals * (1 - alpha) + fill * alpha
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _stick(image: np.ndarray, severity: float, rng: np.random.Generator, model: TissueIntensityModel, template_seed: int) -> np.ndarray:
    masks = seg.segment(image)
    out = image.copy()
    fill = _fat_fill(image, masks)
    own = np.flatnonzero(masks.ligament)
    if own.size:
        n_erase = int(round(severity * own.size))
        erase = rng.choice(own, size=n_erase, replace=False)
        out.reshape(-1)[erase] = np.uint8(np.clip(round(fill), 0, 255))
    template = _stick_template(image.shape[0], template_seed) & masks.breast & ~masks.skin
    tem_idx = np.flatnonzero(template)
    if tem_idx.size:
        # The painted subset depends on severity only, never on the per-image
        # rng, so the same template pixels repeat across a whole ensemble.
        sub_rng = np.random.default_rng(np.random.SeedSequence(entropy=(template_seed, int(round(severity * 1e6)))))
        n_paint = int(round(severity * tem_idx.size))
        paint = sub_rng.permutation(tem_idx)[:n_paint]
        vals = model.ligament.sample(rng, paint.size)
        out.reshape(-1)[paint] = np.clip(np.rint(vals), 0, 255).astype(np.uint8)
    return out


def _boundary_notch(image: np.ndarray, severity: float, rng: np.random.Generator) -> np.ndarray:
    breast = image >= seg.BG_THRESHOLD
    if not breast.any():
        return image
    ys, xs = np.nonzero(breast)
    cy = ys.mean()
    cx = xs.mean()
    theta = np.arctan2(ys - cy, xs - cx)
    r = np.hypot(ys - cy, xs - cx)
    nbins = 256
    tbin = np.clip(((theta + np.pi) / (2 * np.pi) * nbins).astype(np.int32), 0, nbins - 1)
    rmax = np.zeros(nbins)
    np.maximum.at(rmax, tbin, r)
    # Wedge width tracks severity but is capped: wide shallow bites shorten
    # the convex hull as much as the contour and stop being detectable.
    half_span = min(severity, 0.55) * (np.pi / 4.0)
    theta0 = rng.uniform(-np.pi, np.pi)
    delta = np.angle(np.exp(1j * (theta - theta0)))
    in_wedge = np.abs(delta) <= half_span
    depth = 0.75
    cut = in_wedge & (r >= (1.0 - depth) * rmax[tbin])
    out = image.copy()
    out[ys[cut], xs[cut]] = 0
    return out


def _background_noise(image: np.ndarray, severity: float, rng: np.random.Generator) -> np.ndarray:
    bg_idx = np.flatnonzero(image == 0)
    if bg_idx.size == 0:
        return image
    n = int(round(severity * bg_idx.size))
    if n == 0:
        return image
    picks = rng.choice(bg_idx, size=n, replace=False)
    # Low-level noise: nonzero, per-image mean well under 6 gray levels and
    # always below the background segmentation threshold.
    vals = np.minimum(1 + rng.poisson(2.0, size=n), seg.BG_THRESHOLD - 1).astype(np.uint8)
    out = image.copy()
    out.reshape(-1)[picks] = vals
    return out


def inject_artifact(
    image: np.ndarray,
    kind: str,
    severity: float,
    seed: int | np.random.SeedSequence = 0,
    *,
    model: TissueIntensityModel = DEFAULT_INTENSITY_MODEL,
    template_seed: int = _STICK_TEMPLATE_SEED,
) -> np.ndarray:
    """Corrupt one image; returns a new array, the input is never mutated."""
    if kind not in ARTIFACT_KINDS:
        raise ValueError(f"unknown artifact kind: {kind!r}")
    if not 0.0 <= severity <= 1.0:
        raise ValueError("severity must be within [0, 1]")
    if severity == 0.0:
        return image.copy()
    rng = np.random.default_rng(seed)
    if kind == "flip":
        return np.fliplr(image).copy()
    if kind == "break":
        return _cut_ligaments(image, severity, rng, sharp=True)
    if kind == "blend":
        return _cut_ligaments(image, severity, rng, sharp=False)
    if kind == "stick":
        return _stick(image, severity, rng, model, template_seed)
    if kind == "boundary":
        return _boundary_notch(image, severity, rng)
    return _background_noise(image, severity, rng)


def inject_ensemble(
    images: Sequence[np.ndarray],
    kind: str,
    severity: float,
    seed: int = 0,
    *,
    model: TissueIntensityModel = DEFAULT_INTENSITY_MODEL,
    template_seed: int = _STICK_TEMPLATE_SEED,
    affected_fraction: float | None = None,
) -> list[np.ndarray]:
    """Corrupt an ensemble.

    ``flip`` mirrors a `severity` fraction of the images (other kinds apply
    per image at the given severity). `affected_fraction`, when set, restricts
    any kind to that fraction of images; the subset is chosen by `seed`.
    """
    if kind not in ARTIFACT_KINDS:
        raise ValueError(f"unknown artifact kind: {kind!r}")
    n = len(images)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, 0xA57)))
    if kind == "flip" and affected_fraction is None:
        affected_fraction = severity
        severity = 1.0
    if affected_fraction is None:
        hit = np.ones(n, bool)
    else:
        hit = np.zeros(n, bool)
        hit[rng.permutation(n)[: int(round(affected_fraction * n))]] = True
    out = []
    for i, img in enumerate(images):
        if hit[i] and severity > 0:
            out.append(
                inject_artifact(
                    img, kind, severity, child_seed(seed, i), model=model, template_seed=template_seed
                )
            )
        else:
            out.append(img.copy())
    return out
