"""Command-line entry point: ``vcm-residual <command> ...``."""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .analysis import write_frame_csv
from .bitstream import deserialize, serialize
from .correspondence import MatchConfig, SameRule, match_sets
from .degrade import DegradeParams, SequenceSource, degrade_frame, list_frame_files
from .errors import FrameIdMismatch, InvalidParams, UnreadableFile, VcmError
from .frames import load_image, save_image
from .pipeline import analyze_keypoints, extract_many, run_sweep
from .records import dump_json, keypoints_to_json, load_keypoints, report_to_json
from .residual import CodecConfig, ResidualStream, ToleranceMode, decode_merge
from .sift import SiftParams
from .synthetic import textured_corpus

DEFAULT_QPS = (17, 22, 27, 32, 37, 42, 47)
_STEM_ID = re.compile(r"frame_(\d+)$")


class UsageError(VcmError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _qp_list(text: str) -> list[int]:
    try:
        qps = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad qp list {text!r}")
    if not qps:
        raise argparse.ArgumentTypeError("qp list is empty")
    return qps


def _external(text: str) -> tuple[int, Path]:
    qp, sep, path = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("expected QP=DIR")
    try:
        return int(qp), Path(path)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad qp in {text!r}")


def _add_sift(p):
    g = p.add_argument_group("SIFT parameters")
    g.add_argument("--layers", type=int, default=3)
    g.add_argument("--sigma", type=float, default=1.6)
    g.add_argument("--contrast-threshold", type=float, default=0.04)
    g.add_argument("--edge-threshold", type=float, default=10.0)
    g.add_argument("--border", type=int, default=5)
    g.add_argument("--max-octaves", type=int, default=None)
    g.add_argument("--upsample", action="store_true", help="add the doubled-resolution first octave")


def _add_match(p, lossless=True):
    g = p.add_argument_group("matching / residual")
    g.add_argument("--window-radius", type=int, default=3)
    g.add_argument("--tolerance", type=float, default=0.05, help="relative tolerance for size and response")
    g.add_argument("--orientation-tol", type=float, default=18.0, help="degrees")
    g.add_argument("--same-rule", choices=[r.value for r in SameRule], default=SameRule.LITERAL.value)
    if lossless:
        g.add_argument("--lossless", action="store_true", help="correct every differing parameter exactly")


def _common(p, jobs=True):
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    if jobs:
        p.add_argument("--jobs", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="vcm-residual", description="Residual SIFT keypoint side information for video coding for machines.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="detect keypoints of frames and write keypoint JSON")
    p.add_argument("images", nargs="+", type=Path, help="frame files or frame directories")
    _common(p)
    _add_sift(p)

    p = sub.add_parser("degrade", help="apply the block-DCT compression surrogate")
    p.add_argument("images", nargs="+", type=Path)
    p.add_argument("--qp", type=_qp_list, required=True)
    p.add_argument("--block", type=int, default=8)
    p.add_argument("--format", choices=["pgm", "png"], default="pgm")
    _common(p, jobs=False)

    p = sub.add_parser("match", help="classify keypoints of two keypoint JSON files")
    p.add_argument("orig", type=Path)
    p.add_argument("dec", type=Path)
    _common(p, jobs=False)
    _add_match(p, lossless=False)

    p = sub.add_parser("encode", help="write the residual stream for original/decoded frames")
    p.add_argument("--orig", nargs="+", type=Path, required=True)
    p.add_argument("--dec", nargs="+", type=Path, required=True)
    p.add_argument("--qp", type=int, default=None, help="qp label for the CSV rows")
    _common(p)
    _add_sift(p)
    _add_match(p)

    p = sub.add_parser("decode", help="rebuild original keypoints from decoded frames and a residual stream")
    p.add_argument("--dec", nargs="+", type=Path, required=True)
    p.add_argument("--residual", type=Path, required=True)
    _common(p)
    _add_sift(p)

    p = sub.add_parser("sweep", help="run the full pipeline over a qp sweep and fit L against qp")
    p.add_argument("images", nargs="*", type=Path)
    p.add_argument("--qp", type=_qp_list, default=None)
    p.add_argument("--external", type=_external, action="append", default=[], metavar="QP=DIR",
                   help="decoded frames from a real codec at this qp (repeatable)")
    p.add_argument("--synthetic", type=int, default=0, metavar="N", help="use N generated frames instead of files")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--block", type=int, default=8)
    _common(p)
    _add_sift(p)
    _add_match(p)

    p = sub.add_parser("synth", help="write a seeded corpus of textured frames")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    _common(p, jobs=False)
    return ap


def _sift_params(a) -> SiftParams:
    return SiftParams(
        layers_per_octave=a.layers,
        base_sigma=a.sigma,
        contrast_threshold=a.contrast_threshold,
        edge_threshold=a.edge_threshold,
        border=a.border,
        max_octaves=a.max_octaves,
        upsample=a.upsample,
    )


def _match_config(a) -> MatchConfig:
    return MatchConfig(
        window_radius=a.window_radius,
        tolerance=a.tolerance,
        orientation_tolerance=a.orientation_tol,
        same_rule=SameRule(a.same_rule),
    )


def _codec_config(a) -> CodecConfig:
    mode = ToleranceMode.LOSSLESS if getattr(a, "lossless", False) else ToleranceMode.TOLERANT
    return CodecConfig(mode, _match_config(a))


def _frame_paths(paths: Sequence[Path]) -> list[tuple[int, Path]]:
    """Expand files/directories into (frame id, path); ids come from frame_NNNN names."""
    entries: list[tuple[Optional[int], Path]] = []
    for p in paths:
        if p.is_dir():
            entries.extend(list_frame_files(p))
        elif p.exists():
            m = _STEM_ID.match(p.stem)
            entries.append((int(m.group(1)) if m else None, p))
        else:
            raise UnreadableFile(f"{p} does not exist")
    if any(i is None for i, _ in entries):
        entries = [(k, p) for k, (_, p) in enumerate(entries)]
    ids = [i for i, _ in entries]
    if len(set(ids)) != len(ids):
        raise InvalidParams(f"duplicate frame ids among inputs: {ids}")
    return sorted(entries)


def _load_frames(paths):
    entries = _frame_paths(paths)
    return [i for i, _ in entries], [load_image(p) for _, p in entries]


def _kp_name(frame_id: int) -> str:
    return f"frame_{frame_id:04d}.json"


def cmd_extract(a) -> None:
    ids, images = _load_frames(a.images)
    a.out.mkdir(parents=True, exist_ok=True)
    for kps in extract_many(images, _sift_params(a), ids, a.jobs):
        dump_json(a.out / _kp_name(kps.frame_id), keypoints_to_json(kps))


def cmd_degrade(a) -> None:
    entries = _frame_paths(a.images)
    images = [load_image(p) for _, p in entries]
    params = [DegradeParams(q, a.block) for q in a.qp]
    for prm in params:
        out = a.out if len(params) == 1 else a.out / f"qp{prm.qp:02d}"
        out.mkdir(parents=True, exist_ok=True)
        for (fid, _), im in zip(entries, images):
            save_image(out / f"frame_{fid:04d}.{a.format}", degrade_frame(im, prm))


def cmd_match(a) -> None:
    orig, dec = load_keypoints(a.orig), load_keypoints(a.dec)
    if orig.frame_id != dec.frame_id:
        raise FrameIdMismatch(f"original frame {orig.frame_id} vs decoded frame {dec.frame_id}")
    report = match_sets(orig, dec, _match_config(a))
    a.out.mkdir(parents=True, exist_ok=True)
    dump_json(a.out / f"match_{orig.frame_id:04d}.json", report_to_json(report, orig.frame_id))


def cmd_encode(a) -> None:
    oid, oimg = _load_frames(a.orig)
    did, dimg = _load_frames(a.dec)
    if oid != did:
        raise FrameIdMismatch(f"original frames {oid} vs decoded frames {did}")
    params, codec = _sift_params(a), _codec_config(a)
    orig = extract_many(oimg, params, oid, a.jobs)
    dec = extract_many(dimg, params, did, a.jobs)
    results = [analyze_keypoints(o, d, codec, a.qp) for o, d in zip(orig, dec)]
    stream = ResidualStream.for_config(codec, [r.residual for r in results])
    a.out.mkdir(parents=True, exist_ok=True)
    (a.out / "residual.vcmr").write_bytes(serialize(stream))
    write_frame_csv(a.out / "frames.csv", [r.frame for r in results])


def cmd_decode(a) -> None:
    try:
        data = a.residual.read_bytes()
    except OSError as exc:
        raise UnreadableFile(f"{a.residual}: {exc}") from exc
    stream = deserialize(data)
    did, dimg = _load_frames(a.dec)
    rid = [f.frame_id for f in stream.frames]
    if did != rid:
        raise FrameIdMismatch(f"decoded frames {did} vs residual frames {rid}")
    dec = extract_many(dimg, _sift_params(a), did, a.jobs)
    a.out.mkdir(parents=True, exist_ok=True)
    for d, res in zip(dec, stream.frames):
        dump_json(a.out / _kp_name(d.frame_id), keypoints_to_json(decode_merge(d, res)))


def cmd_sweep(a) -> None:
    if a.synthetic:
        images = textured_corpus(a.seed, a.synthetic, a.size, a.size)
        ids = list(range(len(images)))
    elif a.images:
        ids, images = _load_frames(a.images)
    else:
        raise UsageError("sweep needs input frames or --synthetic N")
    sources = [SequenceSource.external(path, qp) for qp, path in a.external]
    if a.qp is not None or not sources:
        sources += [SequenceSource.surrogate(q, a.block) for q in (a.qp or DEFAULT_QPS)]
    result = run_sweep(images, sources, _sift_params(a), _codec_config(a), ids, a.jobs)
    a.out.mkdir(parents=True, exist_ok=True)
    write_frame_csv(a.out / "frames.csv", result.frames())
    dump_json(a.out / "summary.json", result.summary())


def cmd_synth(a) -> None:
    a.out.mkdir(parents=True, exist_ok=True)
    for k, im in enumerate(textured_corpus(a.seed, a.count, a.size, a.size)):
        save_image(a.out / f"frame_{k:04d}.pgm", im)


COMMANDS = {
    "extract": cmd_extract,
    "degrade": cmd_degrade,
    "match": cmd_match,
    "encode": cmd_encode,
    "decode": cmd_decode,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
}


def _fail(exc: Exception, code: int) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail(exc, 2)
    except (VcmError, OSError) as exc:
        return _fail(exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
