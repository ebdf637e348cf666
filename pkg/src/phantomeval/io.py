"""Ensemble, embedding and report file formats.

Images are 8-bit grayscale PNGs handled as plain uint8 numpy arrays.
Manifests are plain text, one image identifier per line with an optional
tab-separated class label.  Embedding matrices use a small binary container
(magic ``DGMEMB01``, little-endian u64 rows/cols, row-major f32 payload).
Reports are JSON with stable key names.
"""

from __future__ import annotations

import dataclasses
import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Sequence

import numpy as np
from PIL import Image

PIPELINE_SIZE = 512
EMBEDDING_MAGIC = b"DGMEMB01"


class EnsembleError(ValueError):
    """Manifest or image fails validation; message names the offending entry."""


@dataclass(frozen=True)
class EnsembleManifest:
    """Ordered list of image identifiers under a root directory."""

    root: Path
    ids: tuple[str, ...]
    classes: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if len(set(self.ids)) != len(self.ids):
            seen: set[str] = set()
            for i in self.ids:
                if i in seen:
                    raise EnsembleError(f"duplicate identifier in manifest: {i!r}")
                seen.add(i)
        if self.classes is not None and len(self.classes) != len(self.ids):
            raise EnsembleError("class labels do not match identifier count")

    @property
    def count(self) -> int:
        return len(self.ids)

    def __len__(self) -> int:
        return len(self.ids)

    def path_for(self, image_id: str) -> Path:
        return Path(self.root) / image_id


def read_manifest(path: str | Path) -> EnsembleManifest:
    path = Path(path)
    ids: list[str] = []
    classes: list[str] = []
    have_class = False
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        ids.append(parts[0])
        if len(parts) > 1:
            have_class = True
            classes.append(parts[1])
        else:
            classes.append("")
    return EnsembleManifest(
        root=path.parent,
        ids=tuple(ids),
        classes=tuple(classes) if have_class else None,
    )


def write_manifest(manifest: EnsembleManifest, path: str | Path) -> None:
    lines = []
    for i, image_id in enumerate(manifest.ids):
        if manifest.classes is not None:
            lines.append(f"{image_id}\t{manifest.classes[i]}")
        else:
            lines.append(image_id)
    Path(path).write_text("\n".join(lines) + "\n")


def load_image(path: str | Path, *, any_size: bool = False) -> np.ndarray:
    """Load one 8-bit grayscale image; bytes are returned unscaled."""
    path = Path(path)
    if not path.exists():
        raise EnsembleError(f"missing image file: {path}")
    with Image.open(path) as img:
        if img.mode != "L":
            raise EnsembleError(f"not an 8-bit grayscale image ({img.mode}): {path}")
        arr = np.asarray(img, dtype=np.uint8)
    if not any_size and arr.shape != (PIPELINE_SIZE, PIPELINE_SIZE):
        raise EnsembleError(
            f"expected {PIPELINE_SIZE}x{PIPELINE_SIZE}, got {arr.shape[1]}x{arr.shape[0]}: {path}"
        )
    return arr


def save_image(image: np.ndarray, path: str | Path) -> None:
    if image.dtype != np.uint8 or image.ndim != 2:
        raise ValueError("image must be a 2-D uint8 array")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image, mode="L").save(Path(path), format="PNG")


def iter_ensemble(manifest: EnsembleManifest, *, any_size: bool = False) -> Iterator[np.ndarray]:
    for image_id in manifest.ids:
        yield load_image(manifest.path_for(image_id), any_size=any_size)


def load_ensemble(manifest: EnsembleManifest, *, any_size: bool = False) -> list[np.ndarray]:
    """All images of the ensemble, in manifest order."""
    return list(iter_ensemble(manifest, any_size=any_size))


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Per-image embedding vectors produced by an external embedder."""

    values: np.ndarray  # (rows, cols) float32
    source_tag: str = ""

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 2:
            raise ValueError("embedding matrix must be 2-D")
        if not np.isfinite(v).all():
            raise ValueError("embedding matrix contains non-finite values")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


def write_matrix_raw(values: np.ndarray, path: str | Path) -> None:
    """Low-level writer for the f32 matrix container (no finiteness check)."""
    values = np.ascontiguousarray(values, dtype=np.float32)
    if values.ndim != 2:
        raise ValueError("matrix must be 2-D")
    with open(path, "wb") as fh:
        fh.write(EMBEDDING_MAGIC)
        fh.write(struct.pack("<QQ", values.shape[0], values.shape[1]))
        fh.write(values.tobytes())


def read_matrix_raw(path: str | Path) -> np.ndarray:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < len(EMBEDDING_MAGIC) + 16:
        raise ValueError(f"matrix file truncated: {path}")
    if data[: len(EMBEDDING_MAGIC)] != EMBEDDING_MAGIC:
        raise ValueError(f"bad magic in matrix file: {path}")
    rows, cols = struct.unpack_from("<QQ", data, len(EMBEDDING_MAGIC))
    payload = data[len(EMBEDDING_MAGIC) + 16 :]
    expected = rows * cols * 4
    if len(payload) != expected:
        raise ValueError(
            f"matrix payload truncated ({len(payload)} bytes, expected {expected}): {path}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(rows, cols).astype(np.float32)


def write_embeddings(matrix: EmbeddingMatrix | np.ndarray, path: str | Path) -> None:
    if isinstance(matrix, np.ndarray):
        matrix = EmbeddingMatrix(values=np.asarray(matrix, dtype=np.float32))
    write_matrix_raw(matrix.values, path)


def read_embeddings(path: str | Path, *, source_tag: str | None = None) -> EmbeddingMatrix:
    path = Path(path)
    values = read_matrix_raw(path)
    if not np.isfinite(values).all():
        raise ValueError(f"embedding file contains non-finite values: {path}")
    return EmbeddingMatrix(values=values, source_tag=source_tag if source_tag is not None else path.stem)


@dataclass
class Stage1Result:
    frechet_distance: float | None = None
    frechet_pass: bool | None = None
    memorized_fraction: float = 0.0
    memorization_pass: bool = True
    memorization_threshold: float | None = None
    flagged_ids: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.memorization_pass and self.frechet_pass is not False


@dataclass
class Stage2Result:
    ks_mean: float
    ks_std: float
    per_family: dict[str, float] = field(default_factory=dict)
    public_ks_mean: float | None = None
    public_ks_std: float | None = None


@dataclass
class DiagnosticsResult:
    prevalence: list[float] = field(default_factory=list)
    density: list[float | None] = field(default_factory=list)
    coverage: list[float | None] = field(default_factory=list)
    artifact_flags: dict[str, bool] = field(default_factory=dict)
    artifact_stats: dict[str, float | None] = field(default_factory=dict)
    semivariogram: dict[str, float] = field(default_factory=dict)


@dataclass
class EvalReport:
    stage1: Stage1Result
    stage2: Stage2Result | None = None
    diagnostics: DiagnosticsResult | None = None
    config: dict[str, Any] = field(default_factory=dict)
    provenance: dict[str, Any] = field(default_factory=dict)
    created_at: str = ""


def _check_finite(obj: Any, where: str) -> None:
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"non-finite value in report at {where}: {obj}")
    elif isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(v, f"{where}.{k}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _check_finite(v, f"{where}[{i}]")


def report_to_dict(report: EvalReport) -> dict[str, Any]:
    return dataclasses.asdict(report)


def report_from_dict(data: dict[str, Any]) -> EvalReport:
    stage2 = data.get("stage2")
    diagnostics = data.get("diagnostics")
    return EvalReport(
        stage1=Stage1Result(**data["stage1"]),
        stage2=Stage2Result(**stage2) if stage2 is not None else None,
        diagnostics=DiagnosticsResult(**diagnostics) if diagnostics is not None else None,
        config=data.get("config", {}),
        provenance=data.get("provenance", {}),
        created_at=data.get("created_at", ""),
    )


def write_report(report: EvalReport, path: str | Path) -> None:
    """Serialize to JSON; rejects NaN/Inf before anything is written."""
    data = report_to_dict(report)
    _check_finite(data, "report")
    text = json.dumps(data, indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")


def read_report(path: str | Path) -> EvalReport:
    return report_from_dict(json.loads(Path(path).read_text()))
