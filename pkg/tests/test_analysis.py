import csv

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vcm_residual.analysis import (
    CSV_COLUMNS,
    FrameResult,
    avg_transmitted_params_per_keypoint,
    fit_l_vs_qp,
    frame_result,
    is_non_decreasing,
    loss_count,
    reference_law_check,
    spearman_rho,
    summarize_run,
    write_frame_csv,
)
from vcm_residual.correspondence import Category, match_sets
from vcm_residual.errors import DegenerateInput, EmptyRun, InvalidParams, MixedQp
from vcm_residual.pipeline import analyze_keypoints
from vcm_residual.residual import CodecConfig, encode_residual
from vcm_residual.sift import KeypointSet

from conftest import degraded_pairs, keypoint_sets, kp
from oracles import least_squares_line

SWEEP = (17, 22, 27, 32, 37, 42, 47)


def fr(frame_id=0, qp=30, n_dec=10, same=None, moved=0, missed=0, sent=0, n_orig=None):
    same = n_dec - moved if same is None else same
    n_orig = same + moved + missed if n_orig is None else n_orig
    new = n_dec - same - moved
    L = 100.0 * sent / (5 * n_orig) if n_orig else 0.0
    return FrameResult(frame_id, qp, n_orig, n_dec, same, moved, missed, new,
                       (0,) * 6, (0,) * 6, sent, L, 0)


def random_frames(rng, count, qp=30):
    out = []
    for i in range(count):
        same, moved, missed, new = (int(v) for v in rng.integers(0, 40, 4))
        n_orig = same + moved + missed
        sent = int(rng.integers(0, 5 * n_orig + 1)) if n_orig else 0
        out.append(fr(i, qp, n_dec=same + moved + new, same=same, moved=moved, missed=missed, sent=sent))
    return out


def test_single_frame_summary():
    s = summarize_run([fr(n_dec=42)])
    assert (s.min_dec, s.avg_dec, s.max_dec) == (42, 42.0, 42)


def test_two_frame_summary():
    s = summarize_run([fr(0, n_dec=100), fr(1, n_dec=200)])
    assert (s.min_dec, s.avg_dec, s.max_dec) == (100, 150.0, 200)


def test_250_frame_aggregates_match_recount():
    frames = random_frames(np.random.default_rng(250), 250)
    s = summarize_run(frames)
    n_dec = [f.n_dec for f in frames]
    assert s.min_dec == min(n_dec) and s.max_dec == max(n_dec)
    assert s.avg_dec == pytest.approx(sum(n_dec) / 250, rel=1e-12)
    pooled = 100 * sum(f.transmitted_params for f in frames) / (5 * sum(f.n_orig for f in frames))
    assert s.mean_L == pytest.approx(pooled, rel=1e-12)
    assert s.mean_frame_L == pytest.approx(sum(f.L for f in frames) / 250, rel=1e-12)
    assert s.min_dec <= s.avg_dec <= s.max_dec


def test_summary_errors():
    with pytest.raises(EmptyRun):
        summarize_run([])
    with pytest.raises(MixedQp):
        summarize_run([fr(0, qp=17), fr(1, qp=22)])


def test_frame_result_invariants():
    with pytest.raises(InvalidParams):
        FrameResult(0, 30, 5, 5, 3, 1, 0, 1, (0,) * 6, (0,) * 6, 0, 0.0, 0)
    with pytest.raises(InvalidParams):
        FrameResult(0, 30, 1, 1, 1, 0, 0, 0, (0,) * 6, (0,) * 6, 0, 101.0, 0)


def test_loss_count_examples():
    s = KeypointSet.canonical(0, [kp(10, 10), kp(30, 30)])
    r = analyze_keypoints(s, s, CodecConfig()).frame
    assert loss_count(r) == 0
    r = analyze_keypoints(s, KeypointSet(0, ()), CodecConfig()).frame
    assert loss_count(r) == len(s)


@given(degraded_pairs())
def test_loss_count_matches_report(pair):
    report = match_sets(*pair)
    res = analyze_keypoints(*pair, CodecConfig()).frame
    recount = len(report.missed) + sum(p.category is Category.MOVED for p in report.pairs)
    assert loss_count(res) == recount


@given(degraded_pairs())
def test_histograms_sum_to_category_counts(pair):
    f = analyze_keypoints(*pair, CodecConfig()).frame
    assert sum(f.hist_same) == f.same and sum(f.hist_moved) == f.moved


def test_params_per_keypoint_extremes():
    assert avg_transmitted_params_per_keypoint(summarize_run([fr(n_dec=10, sent=0)])) == 0.0
    lost = summarize_run([fr(n_dec=0, same=0, missed=8, sent=40)])
    assert avg_transmitted_params_per_keypoint(lost) == 5.0 and lost.mean_L == 100.0


@given(st.lists(degraded_pairs(), min_size=1, max_size=6))
def test_params_per_keypoint_identity(pairs):
    frames = [analyze_keypoints(o, d, CodecConfig(), qp=30).frame for o, d in pairs]
    if sum(f.n_orig for f in frames) == 0:
        return
    s = summarize_run(frames)
    assert abs(avg_transmitted_params_per_keypoint(s) - 5 * s.mean_L / 100) <= 1e-9


def test_frame_result_uses_residual_params():
    orig = KeypointSet.canonical(0, [kp(10, 10), kp(30, 30)])
    dec = KeypointSet.canonical(0, [kp(12, 10)])
    res = encode_residual(orig, dec)
    f = frame_result(match_sets(orig, dec), res, 30, 0)
    assert f.transmitted_params == 5 + 2
    assert f.L == pytest.approx(70.0)


def test_fit_exact_reference_line():
    f = fit_l_vs_qp([(q, 24 + 1.4 * q) for q in SWEEP])
    assert f.intercept == pytest.approx(24, abs=1e-9)
    assert f.slope == pytest.approx(1.4, abs=1e-12)
    assert f.max_abs_error == pytest.approx(0, abs=1e-9)
    assert f.qp_range == (17, 47)


def test_fit_two_points():
    f = fit_l_vs_qp([(0, 0), (10, 10)])
    assert f.intercept == pytest.approx(0, abs=1e-12) and f.slope == pytest.approx(1)


@given(st.lists(st.tuples(st.integers(0, 51), st.floats(0, 100)), min_size=2, max_size=20))
def test_fit_matches_normal_equations(points):
    if len({q for q, _ in points}) < 2:
        with pytest.raises(DegenerateInput):
            fit_l_vs_qp(points)
        return
    f = fit_l_vs_qp(points)
    a, b = least_squares_line([float(q) for q, _ in points], [v for _, v in points])
    assert f.intercept == pytest.approx(a, abs=1e-9)
    assert f.slope == pytest.approx(b, abs=1e-9)
    resid = [v - (f.intercept + f.slope * q) for q, v in points]
    assert abs(sum(resid)) <= 1e-6
    assert abs(sum(r * q for r, q in zip(resid, (q for q, _ in points)))) <= 1e-6
    assert f.max_abs_error == pytest.approx(max(abs(r) for r in resid), abs=1e-9)


def test_fit_degenerate():
    with pytest.raises(DegenerateInput):
        fit_l_vs_qp([(30, 1.0), (30, 2.0)])
    with pytest.raises(DegenerateInput):
        fit_l_vs_qp([(30, 1.0)])


def test_monotone_helpers():
    pts = [(q, float(i)) for i, q in enumerate(SWEEP)]
    assert spearman_rho(pts) == pytest.approx(1.0)
    assert is_non_decreasing([1, 1, 2]) and not is_non_decreasing([2, 1])


def test_reference_check():
    pts = [(q, 24 + 1.4 * q + (6 if q == 47 else 0)) for q in SWEEP] + [(51, 0.0)]
    check = reference_law_check(pts, fit_l_vs_qp(pts))
    assert check["points_in_range"] == 7 and check["points_within_band"] == 6


def test_csv_columns_and_rows(tmp_path):
    frames = random_frames(np.random.default_rng(3), 4)
    p = tmp_path / "f.csv"
    write_frame_csv(p, frames)
    rows = list(csv.reader(p.open()))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert CSV_COLUMNS[:8] == ("frame_id", "qp", "n_orig", "n_dec", "same", "moved", "missed", "new")
    assert len(rows) == 5
    for row, f in zip(rows[1:], frames):
        assert int(row[0]) == f.frame_id and float(row[14]) == f.L
