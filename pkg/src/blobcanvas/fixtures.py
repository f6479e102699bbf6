"""Synthetic "toy city" scenes: labels, instances, RGB and analytic depth.

Scenes use the Cityscapes class table with dense ids (no remapping) and the
Cityscapes instance convention ``class * 1000 + k``.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from . import io
from .classes import cityscapes_classes
from .config import PipelineConfig
from .dataset import INSTANCE_OFFSET, SceneAnnotation
from .emulation import CITYSCAPES_BASELINE, CITYSCAPES_FOCAL

ROAD, SIDEWALK, BUILDING, POLE, VEGETATION, SKY, PERSON, CAR = 1, 2, 3, 6, 9, 11, 12, 14

_BASE_COLOURS = {
    ROAD: (90, 90, 95), SIDEWALK: (170, 150, 150), BUILDING: (120, 100, 80), POLE: (60, 60, 60),
    VEGETATION: (60, 130, 50), SKY: (120, 170, 230), PERSON: (200, 60, 60), CAR: (30, 60, 160),
}

CAMERA_HEIGHT = 1.2  # meters, for the analytic ground-plane depth
MAX_DEPTH = 200.0


def _ellipse(shape, cy, cx, ry, rx):
    yy, xx = np.ogrid[:shape[0], :shape[1]]
    return ((yy - cy) / max(ry, 0.5)) ** 2 + ((xx - cx) / max(rx, 0.5)) ** 2 <= 1.0


def toy_scene(seed: int, shape: tuple[int, int] = (256, 512), key: str | None = None,
              focal: float = CITYSCAPES_FOCAL) -> tuple[SceneAnnotation, np.ndarray]:
    """One random street scene and its dense depth in meters (0 for sky)."""
    rng = np.random.default_rng(seed)
    h, w = shape
    labels = np.zeros(shape, np.uint8)
    inst = np.zeros(shape, np.int32)
    depth = np.zeros(shape)
    colour = np.zeros((h, w, 3), np.float64)
    rows = np.arange(h)[:, None]

    horizon = int(h * rng.uniform(0.38, 0.5))
    labels[:horizon] = SKY
    ground = np.broadcast_to(rows >= horizon, shape)
    below = np.maximum(rows - horizon + 1, 1).astype(np.float64)
    plane = np.broadcast_to(np.minimum(focal * CAMERA_HEIGHT / below * (w / 2048.0), MAX_DEPTH), shape)

    # road wedge with sidewalks either side
    half_top = w * rng.uniform(0.04, 0.1)
    half_bottom = w * rng.uniform(0.45, 0.6)
    centre = w / 2 + rng.uniform(-0.1, 0.1) * w
    t = (rows - horizon) / max(h - horizon, 1)
    half = half_top + (half_bottom - half_top) * t
    cols = np.arange(w)[None, :]
    road = ground & (np.abs(cols - centre) <= half)
    walk = ground & ~road & (np.abs(cols - centre) <= half * 1.6 + 8)
    labels[road] = ROAD
    labels[walk] = SIDEWALK
    labels[ground & ~road & ~walk] = SIDEWALK
    depth[ground] = plane[ground]

    def paint(region, cls, d, tint=0.0):
        base = np.array(_BASE_COLOURS[cls], np.float64) * (1.0 + tint)
        colour[region] = base
        labels[region] = cls
        depth[region] = d

    # buildings along the horizon, left and right of the road
    x = 0
    while x < w:
        bw = int(rng.integers(w // 12, w // 5))
        top = int(rng.integers(max(horizon // 5, 1), max(horizon - 10, 2)))
        base = horizon + int(rng.integers(2, 12))
        region = np.zeros(shape, bool)
        region[top:base, x:min(x + bw, w)] = True
        region &= labels != ROAD
        paint(region, BUILDING, float(plane[min(base, h - 1), 0]), rng.uniform(-0.2, 0.2))
        x += bw + int(rng.integers(0, w // 20))

    # trees
    for _ in range(int(rng.integers(1, 4))):
        cx = int(rng.integers(0, w))
        cy = horizon + int(rng.integers(-horizon // 3, 4))
        r = int(rng.integers(12, 30))
        region = _ellipse(shape, cy, cx, r * 1.2, r) & (labels != ROAD)
        paint(region, VEGETATION, float(plane[min(max(cy + r, horizon + 1), h - 1), 0]), rng.uniform(-0.2, 0.2))

    # poles
    for _ in range(int(rng.integers(1, 3))):
        cx = int(rng.integers(0, w - 4))
        base = int(rng.integers(horizon + 10, h))
        top = max(base - int(rng.integers(50, 110)), 0)
        region = np.zeros(shape, bool)
        region[top:base, cx:cx + int(rng.integers(3, 6))] = True
        paint(region, POLE, float(plane[base - 1, 0]))

    # cars on the road, far ones first so near ones occlude them
    cars = []
    for _ in range(int(rng.integers(1, 5))):
        base = int(rng.integers(horizon + 20, h))
        scale = (base - horizon) / max(h - horizon, 1)
        cw = max(int(w * 0.28 * scale * rng.uniform(0.8, 1.2)), 12)
        ch = max(int(cw * rng.uniform(0.45, 0.6)), 6)
        span = max(int(half_bottom * scale), 1)
        cx = int(centre + rng.integers(-span, span + 1) - cw // 2)
        cars.append((base, cx, cw, ch))
    for k, (base, cx, cw, ch) in enumerate(sorted(cars), start=1):
        region = np.zeros(shape, bool)
        body_top = max(base - ch // 2, 0)
        region[body_top:base, max(cx, 0):max(min(cx + cw, w), 0)] = True
        cab_l = cx + cw // 5 + int(rng.integers(-cw // 10, cw // 10 + 1))
        region[max(base - ch, 0):body_top, max(cab_l, 0):max(min(cab_l + cw // 2, w), 0)] = True
        paint(region, CAR, float(plane[base - 1, 0]), rng.uniform(-0.4, 0.4))
        inst[region] = CAR * INSTANCE_OFFSET + k

    # pedestrians on the sidewalks
    for k in range(1, int(rng.integers(0, 4)) + 1):
        base = int(rng.integers(horizon + 15, h))
        scale = (base - horizon) / max(h - horizon, 1)
        ph = max(int(h * 0.45 * scale), 8)
        side = -1 if rng.random() < 0.5 else 1
        cx = int(np.clip(centre + side * (half_top + (half_bottom - half_top) * scale) * 1.2, 3, w - 4))
        region = _ellipse(shape, base - ph * 0.4, cx, ph * 0.4, max(ph * 0.12, 1.5))
        region |= _ellipse(shape, base - ph * 0.88, cx, ph * 0.1, ph * 0.08)
        paint(region, PERSON, float(plane[base - 1, 0]), rng.uniform(-0.3, 0.3))
        inst[region] = PERSON * INSTANCE_OFFSET + k

    # backgrounds that were never painted explicitly
    for cls in (SKY, ROAD, SIDEWALK):
        m = (labels == cls) & (colour.sum(axis=2) == 0)
        colour[m] = _BASE_COLOURS[cls]
    shade = 0.85 + 0.3 * (np.arange(h)[:, None, None] / h)
    noise = rng.integers(-6, 7, size=(h, w, 3))
    rgb = np.clip(colour * shade + noise, 0, 255).astype(np.uint8)

    key = key if key is not None else f"toy_{seed:06d}"
    return SceneAnnotation(key, rgb, labels, inst), depth


def depth_to_disparity(depth: np.ndarray, baseline: float = CITYSCAPES_BASELINE, focal: float = CITYSCAPES_FOCAL) -> np.ndarray:
    """Inverse of the disparity PNG convention, rounded; 0 where depth is 0."""
    out = np.zeros(depth.shape, np.uint16)
    valid = depth > 0
    p = np.rint(baseline * focal / depth[valid] * 256.0) + 1
    out[valid] = np.clip(p, 2, 65535).astype(np.uint16)
    return out


def fixture_config(root: Path) -> PipelineConfig:
    return PipelineConfig(classes=cityscapes_classes(remap=False), dataset="toycity", dataset_root=str(root))


def write_fixture_dataset(root, count: int = 4, seed: int = 0, shape: tuple[int, int] = (256, 512)) -> PipelineConfig:
    """Write ``count`` toy scenes in the default directory layout plus ``config.txt``."""
    root = Path(root)
    cfg = fixture_config(root)
    for i in range(count):
        scene, depth = toy_scene(seed * 100_003 + i, shape, key=f"toy_{i:04d}")
        raw_inst = np.where(scene.instances > 0, scene.instances, scene.labels).astype(np.uint16)
        io.write_rgb(root / "rgb" / f"{scene.key}.png", scene.rgb)
        io.write_labels(root / "labelIds" / f"{scene.key}.png", scene.labels)
        io.write_instances(root / "instanceIds" / f"{scene.key}.png", raw_inst)
        io.write_raw16(root / "disparity" / f"{scene.key}.png", depth_to_disparity(depth, cfg.baseline, cfg.focal))
    (root / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    return cfg
