"""Class-consistent validity masks and sparse depth sampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import check_same_shape

DEFAULT_P_SAMPLE = 0.1

_M64 = (1 << 64) - 1


@dataclass
class SparseDepthPair:
    depth: np.ndarray
    mask: np.ndarray


def validity_mask(aligned: np.ndarray, guide: np.ndarray, guide_depth: np.ndarray) -> np.ndarray:
    """Pixels that kept their guide class, are not void, and have a depth measurement."""
    aligned, guide, guide_depth = map(np.asarray, (aligned, guide, guide_depth))
    check_same_shape(aligned, guide, guide_depth)
    return (aligned == guide) & (guide != 0) & (guide_depth > 0)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    x = x + np.uint64(0x9E3779B97F4A7C15)
    x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def pixel_uniforms(seed: int, shape: tuple[int, int]) -> np.ndarray:
    """53-bit integers drawn per pixel from a hash of ``(seed, row, col)``.

    Each value depends only on its own coordinates, so any tiling or
    iteration order gives the same draws.
    """
    h, w = shape
    rows = np.arange(h, dtype=np.uint64)[:, None]
    cols = np.arange(w, dtype=np.uint64)[None, :]
    key = _splitmix64(np.full((1, 1), seed & _M64, dtype=np.uint64))
    counter = (rows << np.uint64(32)) | cols
    return _splitmix64(_splitmix64(counter ^ key)) >> np.uint64(11)


def sparsify(depth: np.ndarray, valid: np.ndarray, p_sample: float = DEFAULT_P_SAMPLE, seed: int = 0) -> SparseDepthPair:
    """Keep each valid pixel independently with probability ``p_sample``."""
    if not 0.0 <= p_sample <= 1.0:
        raise ValueError(f"p_sample must lie in [0, 1], got {p_sample}")
    depth = np.asarray(depth, dtype=np.float64)
    valid = np.asarray(valid, dtype=bool)
    check_same_shape(depth, valid)
    threshold = np.uint64(round(p_sample * (1 << 53)))
    keep = valid & (depth > 0) & (pixel_uniforms(seed, depth.shape) < threshold)
    return SparseDepthPair(np.where(keep, depth, 0.0), keep)


def aligned_sparse_depth(aligned, guide, guide_depth, p_sample: float = DEFAULT_P_SAMPLE, seed: int = 0) -> SparseDepthPair:
    return sparsify(guide_depth, validity_mask(aligned, guide, guide_depth), p_sample, seed)
