"""
Compression damage: a block-DCT quantization surrogate and ingestion of frames
decoded by a real codec.

The surrogate predicts every block by its rounded mean (the way intra DC
prediction restores flat areas), then quantizes the orthonormal DCT-II of the
prediction residual with the HEVC step law ``2 ** ((qp - 4) / 6)``.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.fft import dctn, idctn

from .errors import DimensionMismatch, InvalidParams, MissingFrames, UnreadableFile
from .frames import load_image
from .sift import Image

QP_MAX = 51
BLOCK_SIZES = (4, 8, 16)
FRAME_PATTERN = re.compile(r"^frame_(\d{4,})\.(pgm|png)$")
CODING_TYPES = ("I", "P", "B")


@dataclass(frozen=True)
class DegradeParams:
    qp: int
    block: int = 8

    def __post_init__(self):
        if not isinstance(self.qp, (int, np.integer)) or not 0 <= self.qp <= QP_MAX:
            raise InvalidParams(f"qp must be an integer in [0, {QP_MAX}], got {self.qp!r}")
        if self.block not in BLOCK_SIZES:
            raise InvalidParams(f"block must be one of {BLOCK_SIZES}, got {self.block}")

    @property
    def step(self) -> float:
        return 2.0 ** ((self.qp - 4) / 6.0)


def degrade_frame(image: Image, params: DegradeParams) -> Image:
    if not isinstance(params, DegradeParams):
        raise InvalidParams("params must be DegradeParams")
    b = params.block
    h, w = image.height, image.width
    ph, pw = -h % b, -w % b
    a = np.pad(image.samples, ((0, ph), (0, pw)), mode="edge")
    nby, nbx = a.shape[0] // b, a.shape[1] // b
    blocks = a.reshape(nby, b, nbx, b).transpose(0, 2, 1, 3)

    pred = np.rint(blocks.mean(axis=(2, 3), keepdims=True))
    coef = dctn(blocks - pred, type=2, axes=(2, 3), norm="ortho")
    step = params.step
    coef = np.rint(coef / step) * step
    rec = idctn(coef, type=2, axes=(2, 3), norm="ortho") + pred

    out = rec.transpose(0, 2, 1, 3).reshape(nby * b, nbx * b)[:h, :w]
    return Image(np.clip(np.rint(out), 0.0, 255.0))


class SourceKind(enum.Enum):
    SURROGATE = "surrogate"
    EXTERNAL = "external"


@dataclass(frozen=True)
class ExternalSequence:
    frame_ids: tuple[int, ...]
    frames: tuple[Image, ...]
    coding_types: Optional[tuple[str, ...]] = None

    def __len__(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class SequenceSource:
    """Where decoded frames come from: surrogate degradation or a directory."""

    kind: SourceKind
    params: Optional[DegradeParams] = None
    path: Optional[Path] = None
    qp: Optional[int] = None

    @classmethod
    def surrogate(cls, qp: int, block: int = 8) -> "SequenceSource":
        return cls(SourceKind.SURROGATE, params=DegradeParams(qp, block), qp=qp)

    @classmethod
    def external(cls, path, qp: int) -> "SequenceSource":
        return cls(SourceKind.EXTERNAL, path=Path(path), qp=qp)

    def decoded(self, originals: list[Image]) -> tuple[list[Image], Optional[tuple[str, ...]]]:
        if self.kind is SourceKind.SURROGATE:
            return [degrade_frame(im, self.params) for im in originals], None
        seq = load_external_sequence(self.path)
        if len(seq) != len(originals):
            raise MissingFrames(f"{self.path}: {len(seq)} decoded frames for {len(originals)} originals")
        for im in seq.frames:
            if im.samples.shape != originals[0].samples.shape:
                raise DimensionMismatch(f"{self.path}: decoded {im.samples.shape} vs original {originals[0].samples.shape}")
        return list(seq.frames), seq.coding_types


def list_frame_files(path) -> list[tuple[int, Path]]:
    """``frame_NNNN.(pgm|png)`` files of a directory, checked for gaps."""
    path = Path(path)
    if not path.is_dir():
        raise UnreadableFile(f"{path} is not a directory")
    found: dict[int, Path] = {}
    for p in sorted(path.iterdir()):
        m = FRAME_PATTERN.match(p.name)
        if not m:
            continue
        idx = int(m.group(1))
        if idx in found:
            raise UnreadableFile(f"frame {idx} present twice: {found[idx].name}, {p.name}")
        found[idx] = p
    if not found:
        raise MissingFrames(f"no frame_NNNN.pgm/png files in {path}")
    ids = sorted(found)
    gaps = sorted(set(range(ids[0], ids[-1] + 1)) - set(ids))
    if gaps:
        raise MissingFrames(f"{path}: missing frame indices {gaps[:10]}")
    return [(i, found[i]) for i in ids]


def _read_manifest(path: Path, ids: list[int]) -> Optional[tuple[str, ...]]:
    mf = path / "manifest.json"
    if not mf.exists():
        return None
    try:
        data = json.loads(mf.read_text())
        tags = {int(e["index"]): str(e["type"]) for e in data["frames"]}
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UnreadableFile(f"{mf}: {exc}") from exc
    bad = {t for t in tags.values() if t not in CODING_TYPES}
    if bad:
        raise UnreadableFile(f"{mf}: unknown coding types {sorted(bad)}")
    absent = [i for i in ids if i not in tags]
    if absent:
        raise MissingFrames(f"{mf}: no coding type for frames {absent[:10]}")
    return tuple(tags[i] for i in ids)


def load_external_sequence(path) -> ExternalSequence:
    path = Path(path)
    files = list_frame_files(path)
    ids = [i for i, _ in files]
    frames = [load_image(p) for _, p in files]
    shape = frames[0].samples.shape
    for (i, p), im in zip(files, frames):
        if im.samples.shape != shape:
            raise DimensionMismatch(f"{p.name} is {im.width}x{im.height}, expected {shape[1]}x{shape[0]}")
    return ExternalSequence(tuple(ids), tuple(frames), _read_manifest(path, ids))
