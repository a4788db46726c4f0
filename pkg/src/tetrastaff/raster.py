"""Raster I/O and drawing.

Rasters are plain numpy arrays: gray images are 2-D ``uint8`` and binary
images are 2-D ``bool`` with True = foreground (staff ink). Axis 0 is the
row (vertical) index and axis 1 the column (horizontal) index everywhere
in the package.
"""

from __future__ import annotations

import warnings
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from PIL import Image, UnidentifiedImageError

HIGHLIGHT = (255, 0, 0)
SUPPORTED_FORMATS = ("PNG", "PPM")  # Pillow reports PGM files as PPM


class RasterFormatError(ValueError):
    """Raised for unreadable or unsupported image files."""


def load_gray(path) -> np.ndarray:
    """Read a PNG or PGM (P2/P5) file as an 8-bit gray raster.

    Color images are reduced with Rec.601 luma (Pillow's ``convert("L")``).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image: {path}")
    try:
        with Image.open(path) as im:
            fmt = im.format
            if fmt not in SUPPORTED_FORMATS:
                raise RasterFormatError(f"unsupported image format: {fmt}")
            if fmt == "PPM" and im.mode not in ("L", "1"):
                raise RasterFormatError(f"unsupported PNM variant (mode {im.mode}); only 8-bit PGM is read")
            if im.mode in ("I", "I;16", "I;16B", "F"):
                raise RasterFormatError(f"unsupported bit depth for {fmt} (mode {im.mode})")
            if im.mode in ("RGBA", "LA", "P", "PA"):
                im = im.convert("RGB")
            if im.mode != "L":
                im = im.convert("L")
            im.load()
            pixels = np.array(im, dtype=np.uint8)
    except RasterFormatError:
        raise
    except (UnidentifiedImageError, SyntaxError, ValueError) as exc:
        raise RasterFormatError(f"cannot decode {path.name}: {exc}") from exc
    except OSError as exc:
        # truncated data surfaces as OSError from Pillow's decoders
        raise RasterFormatError(f"cannot decode {path.name}: {exc}") from exc
    if pixels.ndim != 2 or pixels.size == 0:
        raise RasterFormatError(f"{path.name}: empty or malformed raster")
    return pixels


def threshold(gray: np.ndarray, level: int = 128) -> np.ndarray:
    return np.asarray(gray) >= level


def save_binary_png(image: np.ndarray, path) -> None:
    """Write a binary raster as an 8-bit gray PNG (foreground 255)."""
    image = np.asarray(image, dtype=bool)
    out = np.where(image, np.uint8(255), np.uint8(0))
    Image.fromarray(out, mode="L").save(Path(path), format="PNG")


def save_png(pixels: np.ndarray, path) -> None:
    pixels = np.asarray(pixels, dtype=np.uint8)
    Image.fromarray(pixels).save(Path(path), format="PNG")


def _band_rows(center: np.ndarray, thickness: int) -> np.ndarray:
    """Rows of a vertical run of ``thickness`` pixels centered on each entry.

    For even thickness the extra pixel goes above the center row, so a run
    of 3 around row 50 covers 49..51 and a run of 10 covers center-5..center+4.
    """
    offsets = np.arange(thickness) - thickness // 2
    return np.asarray(center, dtype=np.int64)[None, :] + offsets[:, None]


def draw_lines(mask: np.ndarray, cols: np.ndarray, rows: np.ndarray, thickness: int) -> int:
    """Set vertical runs in ``mask`` in place; return the number of clipped pixels."""
    band = _band_rows(rows, thickness)
    cc = np.broadcast_to(cols[None, :], band.shape)
    ok = (band >= 0) & (band < mask.shape[0]) & (cc >= 0) & (cc < mask.shape[1])
    mask[band[ok], cc[ok]] = True
    return int(band.size - ok.sum())


def staff_mask(shape: Sequence[int], staves: Iterable, thickness: Optional[int] = None) -> np.ndarray:
    """Binary image of reconstructed staves, each line drawn with its thickness."""
    mask = np.zeros(tuple(shape), dtype=bool)
    clipped = 0
    for staff in staves:
        t = thickness if thickness is not None else staff.thickness
        m0, m1 = staff.col_range
        cols = np.arange(m0, m1 + 1)
        for line in staff.lines:
            clipped += draw_lines(mask, cols, np.asarray(line), t)
    if clipped:
        warnings.warn(f"{clipped} staff pixels fell outside the raster and were clipped", RuntimeWarning)
    return mask


def render_overlay(base: np.ndarray, staves: Sequence, thickness: Optional[int] = None) -> np.ndarray:
    """Draw reconstructed staff lines over a gray image; returns an RGB array.

    ``thickness=None`` uses each staff's estimated line thickness.
    """
    base = np.asarray(base, dtype=np.uint8)
    rgb = np.repeat(base[:, :, None], 3, axis=2)
    if not staves:
        return rgb
    mask = staff_mask(base.shape, staves, thickness)
    rgb[mask] = HIGHLIGHT
    return rgb
