"""Pixel-level primitives: masks, label maps, morphology, overlap, resampling.

Conventions used throughout the package:

* masks are 2-D ``bool`` arrays indexed ``[row, col]``;
* label maps are 2-D unsigned integer arrays, ``0`` is void / hole;
* instance maps are 2-D integer arrays, ``0`` is "no instance";
* RGB grids are ``(H, W, 3)`` ``uint8`` arrays;
* depth maps are 2-D ``float64`` arrays in meters, ``0`` means no measurement.
"""
from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np
from scipy import ndimage

VOID = 0

_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def as_mask(mask) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.shape[0] < 1 or mask.shape[1] < 1:
        raise ValueError(f"mask must be a non-empty 2-D grid, got shape {mask.shape}")
    return mask.astype(bool, copy=False)


def check_same_shape(*arrays: np.ndarray) -> None:
    shapes = {a.shape[:2] for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"dimension mismatch: {sorted(shapes)}")


@dataclass
class RgbCanvas:
    """An RGB image under construction; ``coverage`` marks written pixels."""

    pixels: np.ndarray
    coverage: np.ndarray

    @classmethod
    def blank(cls, height: int, width: int) -> "RgbCanvas":
        return cls(np.zeros((height, width, 3), np.uint8), np.zeros((height, width), bool))

    @property
    def shape(self) -> tuple[int, int]:
        return self.coverage.shape

    def paste(self, rgb: np.ndarray, mask: np.ndarray, top: int, left: int) -> None:
        h, w = mask.shape
        window = (slice(top, top + h), slice(left, left + w))
        self.pixels[window][mask] = rgb[mask]
        self.coverage[window] |= mask


def label_components(mask) -> tuple[np.ndarray, np.ndarray]:
    """4-connected labelling.

    Returns ``(labels, order)`` where ``labels`` numbers components from 1 in
    row-major order of their first pixel and ``order`` lists those numbers by
    descending area (ties keep row-major order).
    """
    mask = as_mask(mask)
    labels, count = ndimage.label(mask, structure=_FOUR_CONNECTED)
    if count == 0:
        return labels, np.zeros(0, dtype=np.int64)
    areas = np.bincount(labels.ravel(), minlength=count + 1)[1:]
    order = np.argsort(-areas, kind="stable") + 1
    return labels, order


def connected_components(mask) -> list[tuple[np.ndarray, int]]:
    """Split ``mask`` into 4-connected components, largest first."""
    labels, order = label_components(mask)
    out = []
    for lab in order:
        comp = labels == lab
        out.append((comp, int(comp.sum())))
    return out


def _square(radius: int) -> np.ndarray:
    return np.ones((2 * radius + 1, 2 * radius + 1), np.uint8)


def dilate(mask, radius: int) -> np.ndarray:
    """Dilation with a ``(2r+1) x (2r+1)`` square; pixels outside the grid are ignored."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    mask = as_mask(mask)
    if radius == 0:
        return mask.copy()
    return cv2.dilate(np.ascontiguousarray(mask, dtype=np.uint8), _square(radius)).astype(bool)


def erode(mask, radius: int) -> np.ndarray:
    """Erosion with a square; the outside of the grid counts as foreground."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    mask = as_mask(mask)
    if radius == 0:
        return mask.copy()
    return cv2.erode(np.ascontiguousarray(mask, dtype=np.uint8), _square(radius)).astype(bool)


def inner_boundary(mask) -> np.ndarray:
    """Mask pixels removed by a radius-1 erosion (the one-pixel inner ring)."""
    mask = as_mask(mask)
    return mask & ~erode(mask, 1)


def mask_iou(a, b) -> float:
    a = as_mask(a)
    b = as_mask(b)
    check_same_shape(a, b)
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def bounding_box(mask) -> tuple[int, int, int, int] | None:
    """Tight bounding box ``(top, left, height, width)``, ``None`` for an empty mask."""
    mask = as_mask(mask)
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    top, left = int(rows[0]), int(cols[0])
    return top, left, int(rows[-1]) - top + 1, int(cols[-1]) - left + 1


def crop_to_box(mask) -> tuple[np.ndarray, tuple[int, int, int, int]]:
    box = bounding_box(mask)
    if box is None:
        raise ValueError("cannot crop an empty mask")
    top, left, h, w = box
    return mask[top:top + h, left:left + w], box


def _center_indices(src: int, dst: int) -> np.ndarray:
    # floor((i + 0.5) * src / dst), computed exactly in integers
    return ((2 * np.arange(dst) + 1) * src) // (2 * dst)


def resample_mask(mask, width: int, height: int) -> np.ndarray:
    """Nearest-neighbour resampling with pixel-centre alignment."""
    if width < 1 or height < 1:
        raise ValueError("target size must be positive")
    mask = as_mask(mask)
    h, w = mask.shape
    if (h, w) == (height, width):
        return mask.copy()
    return mask[np.ix_(_center_indices(h, height), _center_indices(w, width))]


def resample_rgb(patch: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resampling of an 8-bit RGB grid."""
    if width < 1 or height < 1:
        raise ValueError("target size must be positive")
    patch = np.asarray(patch)
    if patch.shape[:2] == (height, width):
        return np.array(patch, dtype=np.uint8)
    return cv2.resize(np.ascontiguousarray(patch), (width, height), interpolation=cv2.INTER_LINEAR)


def flip_horizontal(grid: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(grid)[:, ::-1])


def flip_vertical(grid: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(grid)[::-1])


def instance_edges(instances: np.ndarray, thickness: int = 2) -> np.ndarray:
    """Pixels where a 4-neighbour carries a different non-zero id, thickened.

    Id 0 never produces or triggers an edge. The seed set is dilated with
    radius ``thickness - 1``.
    """
    if thickness < 1:
        raise ValueError("thickness must be >= 1")
    ids = np.asarray(instances)
    seeds = np.zeros(ids.shape, bool)

    diff = (ids[:, :-1] != ids[:, 1:]) & (ids[:, :-1] != 0) & (ids[:, 1:] != 0)
    seeds[:, :-1] |= diff
    seeds[:, 1:] |= diff

    diff = (ids[:-1, :] != ids[1:, :]) & (ids[:-1, :] != 0) & (ids[1:, :] != 0)
    seeds[:-1, :] |= diff
    seeds[1:, :] |= diff

    return dilate(seeds, thickness - 1)
