"""
Side-information residual: what the decoder needs on top of the keypoints it
re-extracts from decoded video to recover the original keypoint set.

A residual frame lists the original keypoints that were not found at all, the
parameter overrides for matched decoded keypoints, and the decoded keypoints
that have no original counterpart. Indices always refer to the canonical order
of the decoder-side set, which both ends reproduce deterministically.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

from .correspondence import MatchConfig, match_sets, param_deltas
from .errors import EmptyOriginalSet, FrameIdMismatch, IndexOutOfRange, InvariantViolation
from .sift import Keypoint, KeypointSet, to_f32

N_PARAMS = 5


class ToleranceMode(enum.Enum):
    LOSSLESS = "lossless"
    TOLERANT = "tolerant"


@dataclass(frozen=True)
class CodecConfig:
    tolerance_mode: ToleranceMode = ToleranceMode.TOLERANT
    match_config: MatchConfig = field(default_factory=MatchConfig)

    @property
    def lossless(self) -> bool:
        return self.tolerance_mode is ToleranceMode.LOSSLESS

    @property
    def header_tolerances(self) -> tuple[float, float]:
        if self.lossless:
            return 0.0, 0.0
        return self.match_config.tolerance, self.match_config.orientation_tolerance


class Correction(NamedTuple):
    dec_index: int
    mask: int
    values: tuple[float, ...]


def popcount(mask: int) -> int:
    return bin(mask).count("1")


@dataclass(frozen=True)
class ResidualFrame:
    frame_id: int
    missed: tuple[Keypoint, ...] = ()
    corrections: tuple[Correction, ...] = ()
    deletions: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "missed", tuple(self.missed))
        object.__setattr__(self, "corrections", tuple(Correction(int(i), int(m), tuple(v)) for i, m, v in self.corrections))
        object.__setattr__(self, "deletions", tuple(self.deletions))
        if self.frame_id < 0:
            raise InvariantViolation("frame_id must be non-negative")
        _check_increasing([c.dec_index for c in self.corrections], "correction")
        _check_increasing(list(self.deletions), "deletion")
        for c in self.corrections:
            if not 0 < c.mask < 32:
                raise InvariantViolation(f"correction mask {c.mask:#x} must be a non-empty 5-bit set")
            if len(c.values) != popcount(c.mask):
                raise InvariantViolation("correction value count differs from mask popcount")
        if {c.dec_index for c in self.corrections} & set(self.deletions):
            raise InvariantViolation("index both corrected and deleted")

    @property
    def transmitted_params(self) -> int:
        """Original parameters carried by this frame (deletions excluded)."""
        return N_PARAMS * len(self.missed) + sum(popcount(c.mask) for c in self.corrections)

    def is_empty(self) -> bool:
        return not (self.missed or self.corrections or self.deletions)


def _check_increasing(idx: list[int], what: str) -> None:
    if any(i < 0 for i in idx):
        raise InvariantViolation(f"negative {what} index")
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise InvariantViolation(f"{what} indices must be strictly increasing")


@dataclass(frozen=True)
class StreamHeader:
    """Tolerances are held at float32 precision, as stored on the wire."""

    tolerance: float
    orientation_tolerance: float
    version: int = 1

    def __post_init__(self):
        object.__setattr__(self, "tolerance", to_f32(self.tolerance))
        object.__setattr__(self, "orientation_tolerance", to_f32(self.orientation_tolerance))


@dataclass(frozen=True)
class ResidualStream:
    header: StreamHeader
    frames: tuple[ResidualFrame, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        ids = [f.frame_id for f in self.frames]
        if any(b <= a for a, b in zip(ids, ids[1:])):
            raise InvariantViolation("frame ids must be strictly increasing")

    @classmethod
    def for_config(cls, cfg: CodecConfig, frames=()) -> "ResidualStream":
        tol, otol = cfg.header_tolerances
        return cls(StreamHeader(tol, otol), tuple(frames))


def encode_residual(orig: KeypointSet, dec: KeypointSet, cfg: CodecConfig = CodecConfig()) -> ResidualFrame:
    if orig.frame_id != dec.frame_id:
        raise FrameIdMismatch(f"original frame {orig.frame_id} vs decoded frame {dec.frame_id}")
    report = match_sets(orig, dec, cfg.match_config)
    corrections = []
    for p in report.pairs:
        o = orig[p.orig_index]
        mask = param_deltas(o, dec[p.dec_index], p.category, cfg.match_config, exact=cfg.lossless)
        if mask:
            vals = tuple(v for bit, v in enumerate(o.as_tuple()) if mask >> bit & 1)
            corrections.append(Correction(p.dec_index, mask, vals))
    corrections.sort()
    return ResidualFrame(
        frame_id=orig.frame_id,
        missed=tuple(orig[i] for i in report.missed),
        corrections=tuple(corrections),
        deletions=tuple(report.new),
    )


def decode_merge(dec: KeypointSet, residual: ResidualFrame) -> KeypointSet:
    """Rebuild the original keypoint set from decoder-side keypoints plus the residual."""
    if dec.frame_id != residual.frame_id:
        raise FrameIdMismatch(f"decoded frame {dec.frame_id} vs residual frame {residual.frame_id}")
    n = len(dec)
    for i in [c.dec_index for c in residual.corrections] + list(residual.deletions):
        if i >= n:
            raise IndexOutOfRange(f"residual index {i} but only {n} decoded keypoints")
    out = list(dec.keypoints)
    for idx, mask, values in residual.corrections:
        fields = list(out[idx].as_tuple())
        it = iter(values)
        for bit in range(N_PARAMS):
            if mask >> bit & 1:
                fields[bit] = next(it)
        out[idx] = Keypoint(*fields)
    dropped = set(residual.deletions)
    kept = [kp for i, kp in enumerate(out) if i not in dropped]
    return KeypointSet.canonical(dec.frame_id, kept + list(residual.missed))


def side_info_ratio(residual: ResidualFrame, orig: KeypointSet) -> float:
    """Percentage of original keypoint parameters carried as side information."""
    if len(orig) == 0:
        raise EmptyOriginalSet("side-information ratio undefined for an empty original set")
    return 100.0 * residual.transmitted_params / (N_PARAMS * len(orig))
