"""
Per-frame and per-QP statistics of keypoint losses and side-information load,
plus the least-squares line of side-information percentage against QP.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.stats import spearmanr

from .correspondence import Category, MatchReport, unchanged_param_histogram
from .errors import DegenerateInput, EmptyOriginalSet, EmptyRun, InvalidParams, MixedQp
from .residual import N_PARAMS, ResidualFrame

CSV_COLUMNS = (
    "frame_id", "qp", "n_orig", "n_dec", "same", "moved", "missed", "new",
    "hist0", "hist1", "hist2", "hist3", "hist4", "hist5", "L", "bytes",
)

# reference law L = 24 + 1.4 * QP fitted on HEVC/VVC runs, valid for QP 17..47
REFERENCE_INTERCEPT = 24.0
REFERENCE_SLOPE = 1.4
REFERENCE_BAND = 5.0
REFERENCE_QP_RANGE = (17, 47)


@dataclass(frozen=True)
class FrameResult:
    frame_id: int
    qp: Optional[int]
    n_orig: int
    n_dec: int
    same: int
    moved: int
    missed: int
    new: int
    hist_same: tuple[int, ...]
    hist_moved: tuple[int, ...]
    transmitted_params: int
    L: float
    residual_bytes: int
    coding_type: Optional[str] = None

    def __post_init__(self):
        if self.same + self.moved + self.missed != self.n_orig:
            raise InvalidParams(f"frame {self.frame_id}: same+moved+missed != n_orig")
        if self.same + self.moved + self.new != self.n_dec:
            raise InvalidParams(f"frame {self.frame_id}: same+moved+new != n_dec")
        if not 0.0 <= self.L <= 100.0:
            raise InvalidParams(f"frame {self.frame_id}: L={self.L} outside [0, 100]")

    def csv_row(self) -> list:
        return [
            self.frame_id, self.qp, self.n_orig, self.n_dec,
            self.same, self.moved, self.missed, self.new,
            *self.hist_same, repr(self.L), self.residual_bytes,
        ]


def frame_result(
    report: MatchReport,
    residual: ResidualFrame,
    qp: Optional[int],
    residual_bytes: int,
    coding_type: Optional[str] = None,
) -> FrameResult:
    counts = report.counts()
    sent = residual.transmitted_params
    L = 100.0 * sent / (N_PARAMS * report.n_orig) if report.n_orig else 0.0
    return FrameResult(
        frame_id=residual.frame_id,
        qp=qp,
        n_orig=report.n_orig,
        n_dec=report.n_dec,
        same=counts[Category.SAME],
        moved=counts[Category.MOVED],
        missed=counts[Category.MISSED],
        new=counts[Category.NEW],
        hist_same=tuple(unchanged_param_histogram(report, Category.SAME)),
        hist_moved=tuple(unchanged_param_histogram(report, Category.MOVED)),
        transmitted_params=sent,
        L=L,
        residual_bytes=residual_bytes,
        coding_type=coding_type,
    )


def loss_count(frame: FrameResult) -> int:
    """Original keypoints that vanished or changed location."""
    return frame.missed + frame.moved


@dataclass(frozen=True)
class RunStats:
    qp: Optional[int]
    frames: tuple[FrameResult, ...]
    min_dec: int
    avg_dec: float
    max_dec: int
    mean_L: float  # pooled over all original keypoints of the run
    mean_frame_L: float  # unweighted mean of the per-frame values
    params_per_keypoint: float

    def summary(self) -> dict:
        out = asdict(self)
        del out["frames"]
        out["n_frames"] = len(self.frames)
        out["n_orig_total"] = sum(f.n_orig for f in self.frames)
        out["losses"] = sum(loss_count(f) for f in self.frames)
        by_type = {}
        for f in self.frames:
            if f.coding_type is not None:
                by_type.setdefault(f.coding_type, []).append(loss_count(f))
        if by_type:
            out["mean_loss_by_coding_type"] = {t: sum(v) / len(v) for t, v in sorted(by_type.items())}
        return out


def summarize_run(frames: Sequence[FrameResult]) -> RunStats:
    frames = tuple(frames)
    if not frames:
        raise EmptyRun("no frames to summarize")
    qps = {f.qp for f in frames}
    if len(qps) != 1:
        raise MixedQp(f"frames span several qp values: {sorted(qps)}")
    n_dec = [f.n_dec for f in frames]
    total_orig = sum(f.n_orig for f in frames)
    total_sent = sum(f.transmitted_params for f in frames)
    per_kp = total_sent / total_orig if total_orig else 0.0
    return RunStats(
        qp=frames[0].qp,
        frames=frames,
        min_dec=min(n_dec),
        avg_dec=sum(n_dec) / len(n_dec),
        max_dec=max(n_dec),
        mean_L=100.0 * per_kp / N_PARAMS,
        mean_frame_L=sum(f.L for f in frames) / len(frames),
        params_per_keypoint=per_kp,
    )


def avg_transmitted_params_per_keypoint(stats: RunStats) -> float:
    total = sum(f.n_orig for f in stats.frames)
    if total == 0:
        raise EmptyOriginalSet("run has no original keypoints")
    return sum(f.transmitted_params for f in stats.frames) / total


@dataclass(frozen=True)
class FitResult:
    intercept: float
    slope: float
    max_abs_error: float
    qp_range: tuple[int, int]
    r_squared: float
    n_points: int


def fit_l_vs_qp(points: Iterable[tuple[float, float]]) -> FitResult:
    """Ordinary least-squares line through (qp, mean L) points."""
    pts = [(float(q), float(v)) for q, v in points]
    qs = np.array([p[0] for p in pts])
    ls = np.array([p[1] for p in pts])
    if len(pts) < 2 or np.all(qs == qs[0]):
        raise DegenerateInput("need at least two distinct qp values")
    design = np.column_stack([np.ones_like(qs), qs])
    (intercept, slope), *_ = np.linalg.lstsq(design, ls, rcond=None)
    resid = ls - (intercept + slope * qs)
    ss_tot = float(np.sum((ls - ls.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(
        intercept=float(intercept),
        slope=float(slope),
        max_abs_error=float(np.max(np.abs(resid))),
        qp_range=(int(qs.min()), int(qs.max())),
        r_squared=r2,
        n_points=len(pts),
    )


def spearman_rho(points: Sequence[tuple[float, float]]) -> float:
    rho = spearmanr([p[0] for p in points], [p[1] for p in points]).statistic
    return float(rho) if not math.isnan(rho) else 0.0


def is_non_decreasing(values: Sequence[float]) -> bool:
    return all(b >= a for a, b in zip(values, values[1:]))


def reference_law_check(points: Sequence[tuple[float, float]], fit: FitResult) -> dict:
    """Compare measured points and fit against L = 24 + 1.4 * QP and its +/-5 band."""
    lo, hi = REFERENCE_QP_RANGE
    rows = []
    for q, v in points:
        predicted = REFERENCE_INTERCEPT + REFERENCE_SLOPE * q
        rows.append({
            "qp": q,
            "L": v,
            "reference_L": predicted,
            "deviation": v - predicted,
            "in_range": lo <= q <= hi,
            "within_band": abs(v - predicted) <= REFERENCE_BAND,
        })
    in_range = [r for r in rows if r["in_range"]]
    return {
        "reference": {"intercept": REFERENCE_INTERCEPT, "slope": REFERENCE_SLOPE, "band": REFERENCE_BAND},
        "intercept_within_band": abs(fit.intercept - REFERENCE_INTERCEPT) <= REFERENCE_BAND,
        "points_within_band": sum(r["within_band"] for r in in_range),
        "points_in_range": len(in_range),
        "points": rows,
    }


def write_frame_csv(path, frames: Iterable[FrameResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for f in frames:
            w.writerow(f.csv_row())
