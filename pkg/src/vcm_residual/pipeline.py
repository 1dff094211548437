"""End-to-end encoder-side processing of (original, decoded) frame pairs and QP sweeps."""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .analysis import FitResult, FrameResult, RunStats, fit_l_vs_qp, frame_result, reference_law_check, spearman_rho, summarize_run
from .bitstream import serialize_frame
from .correspondence import MatchReport, match_sets
from .degrade import SequenceSource, SourceKind
from .residual import CodecConfig, ResidualFrame, encode_residual
from .sift import Image, KeypointSet, SiftParams, extract_keypoints


@dataclass(frozen=True)
class PairResult:
    orig: KeypointSet
    dec: KeypointSet
    report: MatchReport
    residual: ResidualFrame
    frame: FrameResult


def analyze_keypoints(
    orig: KeypointSet,
    dec: KeypointSet,
    codec: CodecConfig,
    qp: Optional[int] = None,
    coding_type: Optional[str] = None,
) -> PairResult:
    residual = encode_residual(orig, dec, codec)
    report = match_sets(orig, dec, codec.match_config)
    fr = frame_result(report, residual, qp, len(serialize_frame(residual)), coding_type)
    return PairResult(orig, dec, report, residual, fr)


def _extract(args) -> KeypointSet:
    image, params, frame_id = args
    return extract_keypoints(image, params, frame_id)


def extract_many(images: Sequence[Image], params: SiftParams, frame_ids: Sequence[int], jobs: int = 1) -> list[KeypointSet]:
    """Extract every frame; results are identical for any ``jobs``."""
    tasks = [(im, params, fid) for im, fid in zip(images, frame_ids)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_extract, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    return [_extract(t) for t in tasks]


@dataclass(frozen=True)
class SweepResult:
    runs: tuple[RunStats, ...]
    fit: Optional[FitResult]
    spearman: Optional[float]
    reference: Optional[dict]

    @property
    def points(self) -> list[tuple[int, float]]:
        return [(r.qp, r.mean_L) for r in self.runs]

    def frames(self) -> list[FrameResult]:
        return [f for r in self.runs for f in r.frames]

    def summary(self) -> dict:
        out = {"runs": [r.summary() for r in self.runs], "points": self.points}
        if self.fit is not None:
            out["fit"] = {
                "intercept": self.fit.intercept,
                "slope": self.fit.slope,
                "max_abs_error": self.fit.max_abs_error,
                "qp_range": list(self.fit.qp_range),
                "r_squared": self.fit.r_squared,
                "n_points": self.fit.n_points,
            }
            out["spearman_rho"] = self.spearman
        if self.reference is not None:
            out["reference_check"] = self.reference
        return out


def run_sweep(
    originals: Sequence[Image],
    sources: Sequence[SequenceSource],
    sift_params: SiftParams = SiftParams(),
    codec: CodecConfig = CodecConfig(),
    frame_ids: Optional[Sequence[int]] = None,
    jobs: int = 1,
) -> SweepResult:
    if frame_ids is None:
        frame_ids = list(range(len(originals)))
    orig_sets = extract_many(originals, sift_params, frame_ids, jobs)
    runs = []
    for src in sources:
        decoded, tags = src.decoded(list(originals))
        dec_sets = extract_many(decoded, sift_params, frame_ids, jobs)
        frames = []
        for k, (o, d) in enumerate(zip(orig_sets, dec_sets)):
            tag = tags[k] if tags else None
            frames.append(analyze_keypoints(o, d, codec, src.qp, tag).frame)
        runs.append(summarize_run(frames))

    fit = rho = reference = None
    points = [(r.qp, r.mean_L) for r in runs]
    if len({q for q, _ in points}) >= 2:
        fit = fit_l_vs_qp(points)
        rho = spearman_rho(points)
        if any(s.kind is SourceKind.EXTERNAL for s in sources):
            reference = reference_law_check(points, fit)
    return SweepResult(tuple(runs), fit, rho, reference)
