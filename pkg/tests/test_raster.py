import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from tetrastaff.raster import (RasterFormatError, load_gray, render_overlay, save_binary_png, staff_mask,
                               threshold)
from tetrastaff.search import y_projection
from tetrastaff.tracker import ReconstructedStaff


def test_single_pixel_pgm(tmp_path):
    p = tmp_path / "one.pgm"
    p.write_bytes(b"P5\n1 1\n255\n\x00")
    img = load_gray(p)
    assert img.shape == (1, 1) and img.dtype == np.uint8 and img[0, 0] == 0


def test_plain_pgm_is_row_major(tmp_path):
    p = tmp_path / "plain.pgm"
    p.write_text("P2\n3 2\n255\n0 1 2\n3 4 5\n")
    img = load_gray(p)
    assert img.shape == (2, 3)
    assert img.ravel().tolist() == [0, 1, 2, 3, 4, 5]


def test_truncated_pgm_header(tmp_path):
    p = tmp_path / "bad.pgm"
    p.write_bytes(b"P5\n3")
    with pytest.raises(RasterFormatError):
        load_gray(p)


def test_unsupported_format_names_it(tmp_path):
    p = tmp_path / "x.jpg"
    Image.fromarray(np.zeros((4, 4), np.uint8)).save(p, format="JPEG")
    with pytest.raises(RasterFormatError, match="JPEG"):
        load_gray(p)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_gray(tmp_path / "nope.png")


def test_rgb_uses_rec601_luma(tmp_path):
    rgb = np.array([[[255, 0, 0], [0, 255, 0], [0, 0, 255], [200, 100, 50]]], np.uint8)
    p = tmp_path / "c.png"
    Image.fromarray(rgb).save(p)
    got = load_gray(p).astype(int)
    expected = [(299 * r + 587 * g + 114 * b) / 1000 for r, g, b in rgb[0].astype(int)]
    assert np.all(np.abs(got[0] - np.array(expected)) <= 1)


def test_save_all_false(tmp_path):
    p = tmp_path / "z.png"
    save_binary_png(np.zeros((4, 4), bool), p)
    assert np.array(Image.open(p)).ravel().tolist() == [0] * 16


def test_save_checkerboard(tmp_path):
    p = tmp_path / "cb.png"
    save_binary_png(np.array([[True, False], [False, True]]), p)
    assert np.array(Image.open(p)).ravel().tolist() == [255, 0, 0, 255]


@settings(max_examples=30, deadline=None)
@given(arrays(bool, st.tuples(st.integers(1, 12), st.integers(1, 12))))
def test_png_round_trip(tmp_path_factory, image):
    p = tmp_path_factory.mktemp("rt") / "r.png"
    save_binary_png(image, p)
    assert np.array_equal(threshold(load_gray(p)), image)


@settings(max_examples=20, deadline=None)
@given(arrays(bool, st.tuples(st.integers(1, 12), st.integers(1, 12))))
def test_pgm_round_trip(tmp_path_factory, image):
    p = tmp_path_factory.mktemp("rt") / "r.pgm"
    Image.fromarray(np.where(image, 255, 0).astype(np.uint8)).save(p)
    assert np.array_equal(threshold(load_gray(p)), image)


def _flat_staff(row, c0, c1, thickness=10, sep=60.0):
    width = c1 - c0 + 1
    lines = np.stack([np.full(width, row + i * sep, dtype=np.int64) for i in range(4)])
    return ReconstructedStaff((c0, c1), lines, thickness, sep)


def test_overlay_empty_is_identity(rng):
    base = rng.integers(0, 256, (20, 30), dtype=np.uint8)
    out = render_overlay(base, [])
    assert out.shape == (20, 30, 3)
    assert all(np.array_equal(out[:, :, k], base) for k in range(3))


def test_overlay_centering_convention():
    base = np.zeros((100, 20), np.uint8)
    staff = ReconstructedStaff((0, 9), np.array([[50] * 10, [60] * 10, [70] * 10, [80] * 10]), 3, 10.0)
    out = render_overlay(base, [staff], thickness=3)
    red = np.all(out == (255, 0, 0), axis=2)
    assert red[49:52, 0:10].all()
    assert not red[48, :].any() and not red[52, :].any()
    assert not red[:, 10:].any()
    assert red.sum() == 4 * 3 * 10


def test_overlay_pixel_count_thickness_ten():
    base = np.zeros((800, 500), np.uint8)
    staves = [_flat_staff(100, 20, 419), _flat_staff(450, 0, 499)]
    out = render_overlay(base, staves, thickness=10)
    red = np.all(out == (255, 0, 0), axis=2)
    assert red.sum() == 400 * 10 * 4 + 500 * 10 * 4
    assert np.array_equal(base, np.zeros((800, 500), np.uint8))


def test_overlay_clips_with_warning():
    base = np.zeros((50, 10), np.uint8)
    staff = ReconstructedStaff((0, 9), np.array([[1] * 10, [15] * 10, [30] * 10, [48] * 10]), 6, 15.0)
    with pytest.warns(RuntimeWarning):
        mask = staff_mask(base.shape, [staff])
    assert mask[0:4].all() and mask[45:].all()


def test_projection_of_single_row_matches_popcount(rng):
    row = rng.random((1, 57)) < 0.4
    assert y_projection(row, (0, 57))[0] == row.sum()
