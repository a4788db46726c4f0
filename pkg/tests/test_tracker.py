import math

import numpy as np
import pytest

from tetrastaff.search import StaffHypothesis, search_staff
from tetrastaff.spline import interp_spline
from tetrastaff.synth import Baseline, Gap, SynthSpec, generate_page
from tetrastaff.tracker import (DETECTED, EXTRAPOLATED, LEFT_TO_RIGHT, RIGHT_TO_LEFT, ColumnView, TrackedStaff,
                                TrackerParams, TrackingInvariantError, detect_line, find_seed, merge_tracks,
                                reconstruct_binary, reconstruct_page, remove_staff, removal_rows, track_direction,
                                vertical_run)

from conftest import staff_page

PARAMS = TrackerParams()


def _hyp(top, spacing=60):
    return StaffHypothesis(tuple(top + i * spacing for i in range(4)), (0, 0))


def _check_bookkeeping(staff):
    for m in range(staff.status.shape[1]):
        s = staff.status[:, m]
        n_det = int(np.count_nonzero(s == DETECTED))
        if n_det == 0:
            assert np.all(s == EXTRAPOLATED), m
        else:
            assert np.all((s == DETECTED) | (s == n_det)), m


def test_param_lengths():
    assert PARAMS.tile_width(60) == 40
    assert PARAMS.slope_window(60) == 30
    assert PARAMS.search_halfwidth(60) == 15
    assert PARAMS.removal_margin(60) == 30
    with pytest.raises(ValueError):
        TrackerParams(seed_tile_height=2)


def test_vertical_run_bounds():
    col = bytes([0, 1, 1, 1, 0, 1])
    assert vertical_run(col, 2) == (1, 4)
    assert vertical_run(col, 5) == (5, 6)


def test_detect_line_prefers_closest_run():
    col = bytes([0] * 10 + [1] * 4 + [0] + [1] * 4 + [0] * 10)
    center, length = detect_line(col, 14.0, 5)
    assert length == 4 and center in (11.5, 16.5)
    assert detect_line(col, 2.0, 5) is None
    # a run whose center is farther than the half-width is rejected
    tall = bytes([1] * 40)
    assert detect_line(tall, 1.0, 5) is None


def test_seed_on_clean_staff():
    page = staff_page(500, 300, [100])
    col, rows, lengths = find_seed(page, _hyp(100))
    assert col == 40 // 2
    assert rows == tuple(99.5 + 60 * i for i in range(4))
    assert lengths == (10,) * 4


def test_seed_past_left_gap():
    page = staff_page(500, 300, [100])
    page[:, 0:70] = False
    page[:, 90:95] = False  # a second gap that breaks tiles starting before column 95
    col, _, _ = find_seed(page, _hyp(100))
    assert col == 95 + 20


def test_seed_right_pass_mirrors():
    page = staff_page(500, 300, [100])
    col, _, _ = find_seed(page, _hyp(100), RIGHT_TO_LEFT)
    assert col == 299 - 20


def test_seed_blank_page():
    assert find_seed(np.zeros((500, 300), bool), _hyp(100)) is None


def test_straight_lines_all_detected():
    page = staff_page(500, 300, [100])
    seed = find_seed(page, _hyp(100))
    staff = track_direction(page, seed, 60.0)
    assert np.all(staff.status[:, seed[0]:] == DETECTED)
    expected = np.array([99.5 + 60 * i for i in range(4)])[:, None]
    assert np.all(np.abs(staff.lines - expected) <= 0.5)
    _check_bookkeeping(staff)


def test_occluded_line_is_estimated_from_three():
    page = staff_page(500, 300, [100])
    page[155:165, 150:180] = False  # line 1 occupies rows 155..164
    seed = find_seed(page, _hyp(100))
    staff = track_direction(page, seed, 60.0)
    assert np.all(staff.status[1, 150:180] == 3)
    assert np.all(staff.lines[1, 150:180] == 159.5)
    assert np.all(staff.status[[0, 2, 3], 150:180] == DETECTED)
    _check_bookkeeping(staff)


def _sloped_page(cols, gap):
    """Lines whose run center rises by exactly 0.5 px per column."""
    page = np.zeros((400, cols), bool)
    for k in range(cols):
        if gap[0] <= k < gap[1]:
            continue
        for i in range(4):
            top = 100 + 60 * i + k // 2
            bottom = 110 + 60 * i + (k + 1) // 2
            page[top:bottom, k] = True
    return page


def test_all_lines_gapped_follow_decaying_slope():
    page = _sloped_page(240, (200, 240))
    seed = (0, tuple(104.5 + 60 * i for i in range(4)), (10,) * 4)
    staff = track_direction(page, seed, 60.0)
    S = PARAMS.slope_window(60)
    assert S == 30
    assert np.all(staff.status[:, 1:200] == DETECTED)
    assert np.allclose(np.diff(staff.lines[:, :200], axis=1), 0.5)
    steps = np.diff(staff.lines[:, 199:240], axis=1)
    for j in range(1, 41):
        expected = 0.5 * (S + 1 - j) / S if j <= S else 0.0
        assert np.allclose(steps[:, j - 1], expected), j
    assert np.all(staff.status[:, 200:240] == EXTRAPOLATED)
    _check_bookkeeping(staff)


def test_short_history_counts_missing_as_flat():
    # gap right after a 4-column sloped run: only 4 of 30 window entries exist
    page = _sloped_page(60, (5, 60))
    seed = (0, tuple(104.5 + 60 * i for i in range(4)), (10,) * 4)
    staff = track_direction(page, seed, 60.0)
    step = staff.lines[0, 5] - staff.lines[0, 4]
    assert step == pytest.approx(4 * 0.5 / 30)


def test_backfill_behind_seed():
    page = staff_page(500, 300, [100])
    page[:, :50] = False
    seed = find_seed(page, _hyp(100))
    staff = track_direction(page, seed, 60.0)
    assert staff.col_range == (0, 299)
    assert np.all(staff.lines[:, : seed[0]] == np.array(seed[1])[:, None])
    assert np.all(staff.status[:, : seed[0]] == EXTRAPOLATED)


def test_line_order_violation_raises():
    page = np.zeros((300, 50), bool)
    page[100:110, :] = True
    seed = (0, (104.5, 104.6, 200.0, 260.0), (10,) * 4)
    with pytest.raises(TrackingInvariantError):
        track_direction(page, seed, 60.0)


def test_left_and_right_passes_agree_on_clean_page():
    spec = SynthSpec(rows=900, cols=700, n_staves=2, margin=150)
    page, _ = generate_page(spec)
    hyp, _ = search_staff(page)
    a = track_direction(page, find_seed(page, hyp, LEFT_TO_RIGHT), hyp.mean_sep, direction=LEFT_TO_RIGHT)
    b = track_direction(page, find_seed(page, hyp, RIGHT_TO_LEFT), hyp.mean_sep, direction=RIGHT_TO_LEFT)
    assert np.all(np.abs(a.lines - b.lines) <= 1)


def test_passes_agree_where_both_detect():
    spec = SynthSpec(rows=900, cols=700, n_staves=2, margin=150, baseline=Baseline("sinusoid", amplitude=8, period=900))
    page, _ = generate_page(spec)
    hyp, _ = search_staff(page)
    a = track_direction(page, find_seed(page, hyp, LEFT_TO_RIGHT), hyp.mean_sep, direction=LEFT_TO_RIGHT)
    b = track_direction(page, find_seed(page, hyp, RIGHT_TO_LEFT), hyp.mean_sep, direction=RIGHT_TO_LEFT)
    both = (a.status == DETECTED) & (b.status == DETECTED)
    assert both.any()
    assert np.all(np.abs(a.lines - b.lines)[both] <= 1)


def _staff(lines, status, direction=LEFT_TO_RIGHT):
    lines = np.asarray(lines, float)
    return TrackedStaff((0, lines.shape[1] - 1), lines, np.asarray(status, np.int8), 60.0, [10], direction)


def test_merge_identical_is_identity():
    lines = np.arange(4)[:, None] * 60.0 + np.zeros((4, 200))
    status = np.full((4, 200), DETECTED)
    status[:, 50:60] = EXTRAPOLATED
    a = _staff(lines, status)
    out = merge_tracks(a, _staff(lines, status, RIGHT_TO_LEFT))
    assert np.array_equal(out.lines, a.lines) and np.array_equal(out.status, a.status)


def test_merge_takes_detected_over_extrapolated():
    lines = np.arange(4)[:, None] * 60.0 + np.zeros((4, 200))
    sp = np.full((4, 200), DETECTED)
    sp[2, 140] = EXTRAPOLATED
    sp[1, 150] = 1
    sp[3, 160] = 2
    principal = _staff(lines, sp)
    other_lines = lines + 0.25
    so = np.full((4, 200), DETECTED)
    so[0, 0:10] = EXTRAPOLATED  # fewer detections, so this pass is secondary
    secondary = _staff(other_lines, so, RIGHT_TO_LEFT)
    out = merge_tracks(principal, secondary)
    assert out.lines[2, 140] == 120.25 and out.status[2, 140] == DETECTED
    assert out.lines[1, 150] == 60.25
    assert out.lines[3, 160] == 180.0 and out.status[3, 160] == 2
    assert out.n_detected >= principal.n_detected
    assert out.direction == LEFT_TO_RIGHT


def test_merge_weak_secondary_is_ignored():
    lines = np.zeros((4, 10)) + np.arange(4)[:, None]
    a = _staff(lines, np.full((4, 10), EXTRAPOLATED))
    status_b = np.full((4, 10), EXTRAPOLATED)
    status_b[0, 3] = 1
    b = _staff(lines + 0.5, status_b, RIGHT_TO_LEFT)
    out = merge_tracks(a, b)
    # b has no detections either, so a stays principal and E1 cannot replace X
    assert np.array_equal(out.lines, a.lines)


def test_merge_tie_goes_to_first_pass():
    lines = np.zeros((4, 5)) + np.arange(4)[:, None]
    a = _staff(lines, np.full((4, 5), DETECTED), RIGHT_TO_LEFT)
    b = _staff(lines + 0.5, np.full((4, 5), DETECTED), LEFT_TO_RIGHT)
    assert merge_tracks(a, b).direction == RIGHT_TO_LEFT  # reconstruct passes the left-to-right pass first


def test_merge_rejects_mismatched_ranges():
    a = _staff(np.zeros((4, 5)) + np.arange(4)[:, None], np.zeros((4, 5)))
    b = _staff(np.zeros((4, 6)) + np.arange(4)[:, None], np.zeros((4, 6)))
    with pytest.raises(ValueError):
        merge_tracks(a, b)


def test_removing_top_staff_exposes_bottom():
    page = staff_page(1000, 400, [100, 500])
    hyp, _ = search_staff(page)
    assert hyp.peak_rows[0] < 300
    staff = track_direction(page, find_seed(page, hyp), hyp.mean_sep)
    cleared = remove_staff(page, staff)
    hyp2, _ = search_staff(cleared)
    assert hyp2.peak_rows[0] > 400
    assert np.array_equal(remove_staff(cleared, staff), cleared)
    assert np.array_equal(cleared[400:], page[400:])


def test_removal_clipped_at_page_top():
    page = staff_page(400, 200, [8])
    hyp = _hyp(7)
    staff = track_direction(page, find_seed(page, hyp), 60.0)
    r0, r1 = removal_rows(staff.lines[0].min(), staff.lines[3].max(), 60.0, PARAMS, 400)
    assert r0 == 0 and r1 == math.ceil(staff.lines[3].max()) + 31
    assert not remove_staff(page, staff).any()


def test_column_view_clear():
    img = np.ones((6, 3), bool)
    view = ColumnView(img)
    view.clear_rows(2, 4)
    assert view.column(1) == bytes([1, 1, 0, 0, 1, 1])


def test_reconstruct_blank_page():
    assert reconstruct_page(np.zeros((600, 400), np.uint8)) == []


def test_reconstruct_four_staff_page():
    spec = SynthSpec(rows=1400, cols=900, n_staves=4, margin=120, baseline=Baseline("slope", slope=0.01))
    page, gt = generate_page(spec)
    staves = reconstruct_page(np.where(page, 255, 0).astype(np.uint8))
    assert len(staves) == 4
    for staff, gt_staff in zip(sorted(staves, key=lambda s: s.lines[0, 0]), gt):
        assert staff.col_range == (0, 899)
        assert staff.thickness == 10
        for i in range(4):
            truth = interp_spline(gt_staff[i], (0, 899))
            assert np.mean(np.abs(staff.lines[i] - truth) <= 1) >= 0.99


def test_reconstruct_with_gaps_interpolates():
    spec = SynthSpec(rows=900, cols=900, n_staves=2, margin=150,
                     gaps=(Gap(0, (1,), 300, 420), Gap(1, (0, 1, 2, 3), 500, 540)))
    page, gt = generate_page(spec)
    staves = reconstruct_page(np.where(page, 255, 0).astype(np.uint8))
    assert len(staves) == 2
    s0 = staves[0]
    assert np.all(s0.status[1, 300:420] == 3)
    truth = interp_spline(gt[0][1], (0, 899))
    assert np.all(np.abs(s0.lines[1] - truth) <= 1)
    assert np.all(staves[1].status[:, 510:530] != DETECTED)


def test_unseedable_hypothesis_is_discarded():
    # dashed lines: projections look like a staff but no 40-column tile is ever filled
    page = staff_page(700, 640, [200])
    for c in range(0, 640, 30):
        page[:, c + 25 : c + 30] = False
    assert search_staff(page) is not None
    assert reconstruct_binary(page) == []


def test_stacked_staves_found_top_to_bottom():
    tops = [100, 400, 700, 1000]
    page = staff_page(1400, 500, tops)
    staves = reconstruct_binary(page)
    assert [round(s.lines[0].mean() + 0.5) for s in staves] == tops


def test_detected_pixels_lie_on_foreground():
    spec = SynthSpec(rows=900, cols=700, n_staves=2, margin=150, baseline=Baseline("sinusoid", amplitude=10, period=800))
    page, _ = generate_page(spec)
    hyp, _ = search_staff(page)
    staff = track_direction(page, find_seed(page, hyp), hyp.mean_sep)
    rr, cc = np.nonzero(staff.status == DETECTED)
    rows = np.floor(staff.lines[rr, cc] + 0.5).astype(int)
    assert page[rows, cc].all()
    _check_bookkeeping(staff)
