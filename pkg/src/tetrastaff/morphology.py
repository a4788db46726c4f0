"""Pre-processing: Otsu binarization, 8-connected area opening, disc closing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Optional

import cv2
import numpy as np
from scipy import ndimage

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def disc_radius(area: int) -> int:
    """Integer radius of the disc whose area is closest to ``area``."""
    return int(round(math.sqrt(area / math.pi)))


def disc(radius: int) -> np.ndarray:
    """Boolean disc footprint of all offsets with dx**2 + dy**2 <= radius**2."""
    r = int(radius)
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return (yy * yy + xx * xx) <= r * r


@dataclass(frozen=True)
class PreprocessParams:
    min_area: int = 500

    def __post_init__(self):
        if int(self.min_area) <= 0:
            raise ValueError(f"min_area must be positive, got {self.min_area}")

    @property
    def radius(self) -> int:
        return disc_radius(self.min_area)

    @cached_property
    def disc(self) -> np.ndarray:
        return disc(self.radius)


@dataclass
class ComponentLabeling:
    labels: np.ndarray  # 0 = background, components numbered from 1 in raster order
    areas: Dict[int, int]

    @property
    def count(self) -> int:
        return len(self.areas)


def otsu_threshold(hist) -> Optional[int]:
    """Threshold t maximizing between-class variance for classes {<= t} and {> t}.

    Compared in exact integer arithmetic so ties resolve to the lowest t
    deterministically. Returns None when no threshold splits the histogram
    into two non-empty classes (constant image).
    """
    hist = [int(h) for h in hist]
    total_n = sum(hist)
    total_s = sum(i * h for i, h in enumerate(hist))
    best_t, best_num, best_den = None, -1, 1
    n0 = s0 = 0
    for t in range(len(hist) - 1):
        n0 += hist[t]
        s0 += t * hist[t]
        n1 = total_n - n0
        if n0 == 0 or n1 == 0:
            continue
        s1 = total_s - s0
        # between-class variance is proportional to (n1*s0 - n0*s1)**2 / (n0*n1)
        num = (n1 * s0 - n0 * s1) ** 2
        den = n0 * n1
        if best_t is None or num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def _bincount_rows(values: np.ndarray, minlength: int, block: int = 256) -> np.ndarray:
    """np.bincount of a 2-D array with values < minlength, in row blocks.

    Avoids the full-page int64 copy bincount would make (250 MB at 6993x4414).
    """
    counts = np.zeros(minlength, dtype=np.int64)
    for r in range(0, values.shape[0], block):
        counts += np.bincount(values[r : r + block].ravel(), minlength=minlength)
    return counts


def otsu_binarize(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.uint8)
    t = otsu_threshold(_bincount_rows(np.atleast_2d(image), 256))
    if t is None:
        return np.zeros(image.shape, dtype=bool)
    return image > t


def label_components(image: np.ndarray) -> ComponentLabeling:
    labels, n = ndimage.label(np.asarray(image, dtype=bool), structure=EIGHT_CONNECTED)
    counts = _bincount_rows(np.atleast_2d(labels), n + 1)
    return ComponentLabeling(labels, {i: int(counts[i]) for i in range(1, n + 1)})


def area_open(image: np.ndarray, min_area: int) -> np.ndarray:
    """Keep the 8-connected components with area strictly larger than ``min_area``."""
    image = np.asarray(image, dtype=bool)
    labels, n = ndimage.label(image, structure=EIGHT_CONNECTED)
    if n == 0:
        return np.zeros_like(image)
    keep = _bincount_rows(labels, n + 1) > min_area
    keep[0] = False
    return keep[labels]


def dilate(image: np.ndarray, footprint: np.ndarray) -> np.ndarray:
    """Binary dilation; pixels outside the raster count as background."""
    out = cv2.dilate(
        np.asarray(image, dtype=np.uint8),
        footprint.astype(np.uint8),
        borderType=cv2.BORDER_CONSTANT,
        borderValue=0,
    )
    return out.astype(bool)


def erode(image: np.ndarray, footprint: np.ndarray) -> np.ndarray:
    """Binary erosion; pixels outside the raster count as foreground."""
    out = cv2.erode(
        np.asarray(image, dtype=np.uint8),
        footprint.astype(np.uint8),
        borderType=cv2.BORDER_CONSTANT,
        borderValue=1,
    )
    return out.astype(bool)


def close_disc(image: np.ndarray, params: PreprocessParams = PreprocessParams()) -> np.ndarray:
    image = np.asarray(image, dtype=bool)
    if not image.any():
        return np.zeros_like(image)
    footprint = params.disc
    return erode(dilate(image, footprint), footprint)


def preprocess(image: np.ndarray, params: PreprocessParams = PreprocessParams()) -> np.ndarray:
    """Gray page -> cleaned binary page ready for staff search."""
    binary = otsu_binarize(image)
    opened = area_open(binary, params.min_area)
    return close_disc(opened, params)
