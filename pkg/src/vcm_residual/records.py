"""JSON projections of keypoint sets and match reports."""

from __future__ import annotations

import json
from pathlib import Path

from .correspondence import MatchReport, mask_fields
from .errors import InvalidParams, UnreadableFile
from .sift import Keypoint, KeypointSet, to_f32


def keypoints_to_json(kps: KeypointSet) -> dict:
    return {
        "frame": kps.frame_id,
        "keypoints": [
            {"x": k.x, "y": k.y, "size": k.size, "angle": k.orientation, "response": k.response}
            for k in kps
        ],
    }


def keypoints_from_json(data: dict) -> KeypointSet:
    """Parse the keypoint schema; values are taken at float32 precision."""
    try:
        frame = int(data["frame"])
        kps = [
            Keypoint(
                to_f32(e["x"]), to_f32(e["y"]), to_f32(e["size"]),
                to_f32(e["angle"]) % 360.0, to_f32(e["response"]),
            )
            for e in data["keypoints"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidParams):
            raise
        raise InvalidParams(f"malformed keypoint record: {exc!r}") from exc
    return KeypointSet.canonical(frame, kps)


def report_to_json(report: MatchReport, frame_id: int) -> dict:
    return {
        "frame": frame_id,
        "n_orig": report.n_orig,
        "n_dec": report.n_dec,
        "counts": {c.value: n for c, n in report.counts().items()},
        "pairs": [
            {
                "orig": p.orig_index,
                "dec": p.dec_index,
                "category": p.category.value,
                "mask": p.param_mask,
                "params": mask_fields(p.param_mask),
            }
            for p in report.pairs
        ],
        "missed": list(report.missed),
        "new": list(report.new),
    }


def dump_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=1, allow_nan=False) + "\n", encoding="utf-8")


def load_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc


def load_keypoints(path) -> KeypointSet:
    return keypoints_from_json(load_json(path))
