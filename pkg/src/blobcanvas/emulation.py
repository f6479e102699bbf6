"""Emulated canvases for in-painter training, built from real annotated samples.

Every random draw comes from ``Generator.integers`` seeded by
``(seed, stream)`` and all geometry is integer, so outputs do not depend on
platform floating point.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass

import numpy as np

from .dataset import SceneAnnotation, segment_ids
from .depth import SparseDepthPair, sparsify
from .raster import RgbCanvas, dilate, instance_edges, label_components

CITYSCAPES_BASELINE = 0.209313  # meters
CITYSCAPES_FOCAL = 2262.52  # pixels

# Angle resolution: tenths of a degree; trig table in 16.16 fixed point.
_ANGLE_STEPS = 3600
_COS = [round(math.cos(2 * math.pi * a / _ANGLE_STEPS) * 65536) for a in range(_ANGLE_STEPS)]
_SIN = [round(math.sin(2 * math.pi * a / _ANGLE_STEPS) * 65536) for a in range(_ANGLE_STEPS)]


class MissingChannelError(ValueError):
    pass


@dataclass(frozen=True)
class Camera:
    baseline: float = CITYSCAPES_BASELINE
    focal: float = CITYSCAPES_FOCAL
    min_disparity: float = 0.0


@dataclass(frozen=True)
class EmulationParams:
    polygon_count_range: tuple[int, int] = (2, 8)
    vertex_count_range: tuple[int, int] = (3, 10)
    polygon_radius_range: tuple[int, int] = (10, 60)
    dilation_kernel_range: tuple[int, int] = (3, 9)  # odd kernel sides
    dilation_segment_fraction: float = 0.5
    p_sample: float = 0.1
    boundary_thickness: int = 2
    seed: int = 0

    def __post_init__(self):
        for name in ("polygon_count_range", "vertex_count_range", "polygon_radius_range", "dilation_kernel_range"):
            lo, hi = getattr(self, name)
            if lo > hi or lo < 0:
                raise ValueError(f"{name} must be a non-empty non-negative interval, got {(lo, hi)}")
        lo, hi = self.dilation_kernel_range
        if lo < 1 or lo % 2 == 0 or hi % 2 == 0:
            raise ValueError("dilation kernel sizes must be odd and >= 1")
        for name in ("dilation_segment_fraction", "p_sample"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.boundary_thickness < 1:
            raise ValueError("boundary_thickness must be >= 1")


@dataclass
class TrainingExample:
    masked_rgb: RgbCanvas
    holes: np.ndarray
    semantic: np.ndarray
    edges: np.ndarray
    sparse: SparseDepthPair
    target_rgb: np.ndarray
    target_depth: np.ndarray


def stream_id(key: str) -> int:
    """Stable 32-bit stream number for a sample key."""
    return zlib.crc32(key.encode("utf-8"))


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, *stream]))


def fill_polygon(vertices, shape: tuple[int, int]) -> np.ndarray:
    """Rasterise a closed polygon with integer vertices ``(x, y)``.

    A pixel centre belongs to the polygon if it lies on an edge or has an odd
    crossing number. All arithmetic is exact integer arithmetic.
    """
    height, width = shape
    out = np.zeros(shape, bool)
    pts = [(int(x), int(y)) for x, y in vertices]
    if not pts:
        return out
    xs_all = [p[0] for p in pts]
    ys_all = [p[1] for p in pts]
    x0, x1 = max(min(xs_all), 0), min(max(xs_all), width - 1)
    y0, y1 = max(min(ys_all), 0), min(max(ys_all), height - 1)
    if x0 > x1 or y0 > y1:
        return out
    ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1].astype(np.int64)
    inside = np.zeros(xs.shape, bool)
    edge = np.zeros(xs.shape, bool)
    for (ax, ay), (bx, by) in zip(pts, pts[1:] + pts[:1]):
        dx, dy = bx - ax, by - ay
        cross = dx * (ys - ay) - dy * (xs - ax)
        edge |= (cross == 0) & (xs >= min(ax, bx)) & (xs <= max(ax, bx)) & (ys >= min(ay, by)) & (ys <= max(ay, by))
        if ay == by:
            continue
        straddles = (ay > ys) != (by > ys)
        # x < ax + (y - ay) * dx / dy, multiplied through by dy
        left_of = (cross > 0) if dy > 0 else (cross < 0)
        inside ^= straddles & left_of
    out[y0:y1 + 1, x0:x1 + 1] = inside | edge
    return out


def polygon_vertices(rng: np.random.Generator, params: EmulationParams, shape: tuple[int, int]) -> list[tuple[int, int]]:
    """Star-shaped polygon: sorted angles, radius jittered in ``[R/2, R]`` around a random centre."""
    height, width = shape
    v = int(rng.integers(params.vertex_count_range[0], params.vertex_count_range[1] + 1))
    cx = int(rng.integers(0, width))
    cy = int(rng.integers(0, height))
    radius = int(rng.integers(params.polygon_radius_range[0], params.polygon_radius_range[1] + 1))
    angles = sorted(int(a) for a in rng.integers(0, _ANGLE_STEPS, size=v))
    radii = [int(r) for r in rng.integers(radius // 2, radius + 1, size=v)]
    return [
        (cx + ((r * _COS[a] + 32768) >> 16), cy + ((r * _SIN[a] + 32768) >> 16))
        for a, r in zip(angles, radii)
    ]


def random_polygons(params: EmulationParams, shape: tuple[int, int], stream: int = 0) -> np.ndarray:
    rng = _rng(params.seed, stream, 0)
    out = np.zeros(shape, bool)
    k = int(rng.integers(params.polygon_count_range[0], params.polygon_count_range[1] + 1))
    for _ in range(k):
        out |= fill_polygon(polygon_vertices(rng, params, shape), shape)
    return out


def dilate_sections(holes: np.ndarray, params: EmulationParams, stream: int = 0) -> np.ndarray:
    """Dilate a random subset of the connected components of ``holes``.

    Each component is picked with probability ``dilation_segment_fraction``
    and grown with its own odd square kernel.
    """
    rng = _rng(params.seed, stream, 1)
    labels, _ = label_components(holes)
    out = holes.copy()
    lo, hi = params.dilation_kernel_range
    threshold = round(params.dilation_segment_fraction * 1_000_000)
    for lab in range(1, int(labels.max()) + 1):
        pick = int(rng.integers(0, 1_000_000)) < threshold
        kernel = lo + 2 * int(rng.integers(0, (hi - lo) // 2 + 1))
        if pick and kernel > 1:
            out |= dilate(labels == lab, kernel // 2)
    return out


def disparity_to_depth(raw: np.ndarray, baseline: float = CITYSCAPES_BASELINE, focal: float = CITYSCAPES_FOCAL,
                       min_disparity: float = 0.0) -> np.ndarray:
    """Depth in meters from a 16-bit disparity PNG (``d = (p - 1) / 256``); 0 where invalid."""
    if baseline <= 0 or focal <= 0:
        raise ValueError("baseline and focal length must be positive")
    raw = np.asarray(raw).astype(np.float64)
    disparity = (raw - 1.0) / 256.0
    valid = (raw > 0) & (disparity > min_disparity) & (disparity > 0)
    depth = np.zeros(raw.shape)
    depth[valid] = baseline * focal / disparity[valid]
    return depth


def make_training_example(sample: SceneAnnotation, params: EmulationParams, camera: Camera = Camera(),
                          stream: int | None = None) -> TrainingExample:
    """Erode a real sample into a canvas-like input with its untouched targets."""
    for name in ("rgb", "labels", "instances"):
        if getattr(sample, name) is None:
            raise MissingChannelError(f"{sample.key}: missing {name}")
    stream = stream_id(sample.key) if stream is None else stream
    shape = sample.labels.shape
    seg = segment_ids(sample.labels, sample.instances)
    edges = instance_edges(seg, params.boundary_thickness)
    holes = edges | random_polygons(params, shape, stream)
    holes = dilate_sections(holes, params, stream)

    pixels = sample.rgb.copy()
    pixels[holes] = 0
    masked = RgbCanvas(pixels, ~holes)

    if sample.disparity is not None:
        depth = disparity_to_depth(sample.disparity, camera.baseline, camera.focal, camera.min_disparity)
    else:
        depth = np.zeros(shape)
    depth_seed = int(np.random.SeedSequence([params.seed & 0xFFFFFFFFFFFFFFFF, stream, 2]).generate_state(1, np.uint64)[0])
    sparse = sparsify(depth, depth > 0, params.p_sample, depth_seed)
    return TrainingExample(masked, holes, sample.labels.copy(), edges, sparse, sample.rgb.copy(), depth)
