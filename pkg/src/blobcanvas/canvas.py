"""Canvas composition: paste retrieved blobs along a guiding layout.

Produces the RGB canvas, the aligned semantic canvas, the hole-and-boundary
map and the edge map for one guiding layout.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

import cv2
import numpy as np

from .blobdb import BlobDatabase, segments
from .classes import ClassTable
from .raster import RgbCanvas, check_same_shape, dilate, erode, instance_edges, resample_mask, resample_rgb
from .shape import RetrievalError

log = logging.getLogger(__name__)

DEFAULT_BOUNDARY_THICKNESS = 2
DEFAULT_EDGE_THICKNESS = 2


class CanvasError(Exception):
    pass


class IrreparableCanvasError(CanvasError):
    pass


@dataclass
class PasteItem:
    footprint: np.ndarray  # cropped to box
    cls: int
    box: tuple[int, int, int, int]  # top, left, height, width
    source: str = ""
    blob_id: int | None = None
    flipped: bool | None = None
    iou: float | None = None
    skipped: str | None = None

    @property
    def area(self) -> int:
        return int(self.footprint.sum())

    def describe(self) -> str:
        top, left, h, w = self.box
        head = f"class={self.cls} box={top},{left},{h},{w} area={self.area} source={self.source}"
        if self.skipped:
            return f"{head} skipped={self.skipped}"
        if self.blob_id is None:
            return f"{head} pending"
        return f"{head} blob={self.blob_id} flipped={int(bool(self.flipped))} iou={self.iou!r}"


@dataclass
class CompositionPlan:
    shape: tuple[int, int]
    items: list[PasteItem] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.items)

    def to_text(self) -> str:
        return "".join(f"{i} {item.describe()}\n" for i, item in enumerate(self.items))


@dataclass
class CanvasBundle:
    rgb: RgbCanvas
    semantic: np.ndarray
    holes_boundaries: np.ndarray
    edges: np.ndarray
    plan: CompositionPlan
    instances: np.ndarray  # 1-based paste item index per written pixel, 0 for holes
    pasted: list[tuple[np.ndarray, tuple[int, int, int, int]]] = field(default_factory=list, repr=False)
    semantic_raw: np.ndarray | None = None  # before hole repair

    @property
    def shape(self) -> tuple[int, int]:
        return self.semantic.shape


def plan_composition(labels: np.ndarray, instances: np.ndarray | None, classes: ClassTable) -> CompositionPlan:
    """One paste item per guide footprint, background tier first, then static, then dynamic.

    Within a tier larger footprints go first.
    """
    labels = np.asarray(labels)
    segs = segments(labels, instances)
    order = sorted(range(len(segs)), key=lambda i: (classes.rank(segs[i].cls), -segs[i].area, i))
    items = [PasteItem(segs[i].mask, segs[i].cls, segs[i].box, segs[i].source) for i in order]
    return CompositionPlan(labels.shape, items)


def compose(plan: CompositionPlan, db: BlobDatabase, shape: tuple[int, int] | None = None,
            boundary_thickness: int = DEFAULT_BOUNDARY_THICKNESS,
            edge_thickness: int = DEFAULT_EDGE_THICKNESS) -> CanvasBundle:
    """Paste one retrieved blob per plan item, later items overwriting earlier ones.

    Items whose class has no blobs are logged and left as holes. The returned
    semantic canvas is not yet repaired.
    """
    height, width = shape or plan.shape
    rgb = RgbCanvas.blank(height, width)
    semantic = np.zeros((height, width), np.uint8)
    owner = np.zeros((height, width), np.int32)
    pasted = []
    for n, item in enumerate(plan.items):
        top, left, h, w = item.box
        if top < 0 or left < 0 or top + h > height or left + w > width:
            raise CanvasError(f"plan item {n} ({item.describe()}) overflows a {height}x{width} canvas")
        try:
            hit = db.retrieve(item.footprint, item.cls)
        except RetrievalError as exc:
            item.skipped = type(exc).__name__
            log.info("item %d: class %d not retrievable (%s), left as hole", n, item.cls, exc)
            continue
        item.blob_id, item.flipped, item.iou = hit.record.id, hit.flipped, hit.iou
        blob_rgb, blob_mask = hit.oriented()
        mask = resample_mask(blob_mask, w, h)
        patch = resample_rgb(blob_rgb, w, h)
        rgb.paste(patch, mask, top, left)
        window = (slice(top, top + h), slice(left, left + w))
        semantic[window][mask] = item.cls
        owner[window][mask] = n + 1
        pasted.append((mask, item.box))

    bundle = CanvasBundle(
        rgb=rgb,
        semantic=semantic,
        holes_boundaries=np.zeros((height, width), bool),
        edges=instance_edges(owner, edge_thickness),
        plan=plan,
        instances=owner,
        pasted=pasted,
        semantic_raw=semantic.copy(),
    )
    bundle.holes_boundaries = hole_boundary_map(bundle, boundary_thickness)
    return bundle


def paste_boundary(mask: np.ndarray, box: tuple[int, int, int, int], shape: tuple[int, int]) -> np.ndarray:
    """Inner one-pixel ring of a pasted mask in canvas coordinates.

    The canvas border does not count as a boundary.
    """
    height, width = shape
    top, left, h, w = box
    y0, x0 = max(top - 1, 0), max(left - 1, 0)
    y1, x1 = min(top + h + 1, height), min(left + w + 1, width)
    local = np.zeros((y1 - y0, x1 - x0), bool)
    local[top - y0:top - y0 + h, left - x0:left - x0 + w] = mask
    out = np.zeros(shape, bool)
    out[y0:y1, x0:x1] = local & ~erode(local, 1)
    return out


def hole_boundary_map(bundle: CanvasBundle, boundary_thickness: int = DEFAULT_BOUNDARY_THICKNESS) -> np.ndarray:
    """Unwritten pixels plus the boundaries of every pasted blob, thickened."""
    if boundary_thickness < 1:
        raise ValueError("boundary_thickness must be >= 1")
    shape = bundle.rgb.shape
    rings = np.zeros(shape, bool)
    for mask, box in bundle.pasted:
        rings |= paste_boundary(mask, box, shape)
    return ~bundle.rgb.coverage | dilate(rings, boundary_thickness - 1)


def repair_holes(aligned: np.ndarray, guide: np.ndarray, static_classes: Iterable[int]) -> np.ndarray:
    """Fill every void pixel of ``aligned``; other pixels are never changed.

    Holes over a static guide class take that class. Remaining holes are
    filled by growing all static regions of a working copy one pixel per
    round (3x3 square) through every non-static pixel, the lowest class id
    winning within a round, until the holes are covered.
    """
    aligned = np.asarray(aligned)
    guide = np.asarray(guide)
    check_same_shape(aligned, guide)
    static = np.array(sorted(set(int(c) for c in static_classes)), dtype=np.int64)
    out = aligned.copy()
    holes = aligned == 0
    if not holes.any():
        return out

    direct = holes & np.isin(guide, static)
    out[direct] = guide[direct]
    remaining = holes & ~direct
    if not remaining.any():
        return out

    grown = np.isin(out, static)
    if not grown.any():
        raise IrreparableCanvasError("holes remain and the canvas holds no static class to grow")
    unset = np.iinfo(np.uint16).max
    work = np.full(out.shape, unset, np.uint16)
    work[grown] = out[grown]
    kernel = np.ones((3, 3), np.uint8)
    todo = remaining.copy()
    while todo.any():
        nearest = cv2.erode(work, kernel)  # min over the 3x3 neighbourhood
        fresh = ~grown & (nearest != unset)
        work[fresh] = nearest[fresh]
        grown |= fresh
        todo &= ~fresh
    out[remaining] = work[remaining].astype(out.dtype)
    return out


def make_canvas(labels: np.ndarray, instances: np.ndarray | None, db: BlobDatabase,
                classes: ClassTable | None = None,
                boundary_thickness: int = DEFAULT_BOUNDARY_THICKNESS,
                edge_thickness: int = DEFAULT_EDGE_THICKNESS) -> CanvasBundle:
    """Plan, compose and repair a canvas for one guiding layout."""
    classes = classes or db.classes
    plan = plan_composition(labels, instances, classes)
    bundle = compose(plan, db, np.asarray(labels).shape, boundary_thickness, edge_thickness)
    bundle.semantic = repair_holes(bundle.semantic_raw, labels, classes.static_ids)
    return bundle
