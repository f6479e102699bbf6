"""Descriptor-index retrieval versus exhaustive raster-IoU scan."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .blobdb import BlobDatabase, BlobRecord
from .classes import ClassTable, cityscapes_classes
from .emulation import EmulationParams, _rng, fill_polygon, polygon_vertices
from .raster import crop_to_box, mask_iou, resample_mask
from .shape import hu_descriptor


def random_shape(rng: np.random.Generator, size: int) -> np.ndarray:
    """A random star-shaped polygon inside a ``size x size`` frame, cropped to its box."""
    params = EmulationParams(vertex_count_range=(3, 12), polygon_radius_range=(size // 4, size // 2 - 1))
    while True:
        verts = polygon_vertices(rng, params, (1, 1))  # centred at the origin
        c = size // 2
        mask = fill_polygon([(x + c, y + c) for x, y in verts], (size, size))
        if mask.sum() >= 16:
            return crop_to_box(mask)[0]


def synthetic_database(count: int, mask_size: int = 128, cls: int | Sequence[int] = 14, seed: int = 0,
                       classes: ClassTable | None = None, min_area: int = 16) -> BlobDatabase:
    """``count`` flat-coloured polygon blobs, cycling through ``cls`` when it is a sequence."""
    classes = classes or cityscapes_classes()
    cycle = [cls] if isinstance(cls, int) else list(cls)
    db = BlobDatabase(classes, min_blob_area=min_area, dataset=f"synthetic-{seed}")
    rng = _rng(seed, 7)
    for i in range(count):
        mask = random_shape(rng, mask_size)
        colour = rng.integers(0, 256, size=3).astype(np.uint8)
        rgb = np.broadcast_to(colour, mask.shape + (3,))
        db.add(BlobRecord(None, cycle[i % len(cycle)], rgb, mask, hu_descriptor(mask), ("synthetic", f"n{i}"), int(mask.sum())))
    return db


def iou_scan(db: BlobDatabase, footprint: np.ndarray, cls: int) -> tuple[int, float]:
    """Top-1 by resampling every blob of the class to the footprint box and computing IoU."""
    target, _ = crop_to_box(np.asarray(footprint, dtype=bool))
    h, w = target.shape
    ids, _ = db.index.partition(cls)
    best_id, best = -1, -1.0
    for blob_id in ids:
        iou = mask_iou(resample_mask(db.get(int(blob_id)).mask, w, h), target)
        if iou > best:
            best_id, best = int(blob_id), iou
    return best_id, best


def descriptor_top1(db: BlobDatabase, footprint: np.ndarray, cls: int) -> int:
    target, _ = crop_to_box(np.asarray(footprint, dtype=bool))
    return db.index.nearest(hu_descriptor(target), cls, 1)[0][0]


@dataclass
class BenchReport:
    queries: int = 0
    repetitions: int = 0
    descriptor_seconds: list[float] = field(default_factory=list)
    scan_seconds: list[float] = field(default_factory=list)
    same_top1: int = 0
    descriptor_iou: list[float] = field(default_factory=list)
    scan_iou: list[float] = field(default_factory=list)

    @staticmethod
    def _stat(values, q):
        return float(np.percentile(values, q)) if values else float("nan")

    @property
    def descriptor_median(self) -> float:
        return self._stat(self.descriptor_seconds, 50)

    @property
    def scan_median(self) -> float:
        return self._stat(self.scan_seconds, 50)

    @property
    def speedup(self) -> float:
        if not self.descriptor_seconds:
            return float("nan")
        return self.scan_median / self.descriptor_median

    def to_text(self) -> str:
        lines = [
            f"queries {self.queries}",
            f"repetitions {self.repetitions}",
            f"descriptor_median_s {self.descriptor_median:.6g}",
            f"descriptor_p99_s {self._stat(self.descriptor_seconds, 99):.6g}",
            f"scan_median_s {self.scan_median:.6g}",
            f"scan_p99_s {self._stat(self.scan_seconds, 99):.6g}",
            f"speedup_median {self.speedup:.6g}",
        ]
        if self.descriptor_iou:
            mean_d = float(np.mean(self.descriptor_iou))
            mean_s = float(np.mean(self.scan_iou))
            lines += [
                f"top1_agreement {self.same_top1 / len(self.descriptor_iou):.6g}",
                f"descriptor_top1_mean_iou {mean_d:.6g}",
                f"scan_top1_mean_iou {mean_s:.6g}",
                f"iou_ratio {mean_d / mean_s if mean_s else float('nan'):.6g}",
            ]
        return "\n".join(lines) + "\n"


def bench_retrieval(db: BlobDatabase, queries: list[tuple[np.ndarray, int]], repetitions: int = 1,
                    scan_repetitions: int | None = None) -> BenchReport:
    """Time both strategies on every query; ``repetitions == 0`` gives an empty report."""
    report = BenchReport(len(queries), repetitions)
    if repetitions <= 0 or not queries:
        return report
    scan_repetitions = repetitions if scan_repetitions is None else scan_repetitions
    clock = time.perf_counter
    for mask, cls in queries:
        for _ in range(repetitions):
            t0 = clock()
            d_id = descriptor_top1(db, mask, cls)
            report.descriptor_seconds.append(clock() - t0)
        for _ in range(max(scan_repetitions, 1)):
            t0 = clock()
            s_id, s_iou = iou_scan(db, mask, cls)
            report.scan_seconds.append(clock() - t0)
        target, _ = crop_to_box(np.asarray(mask, dtype=bool))
        h, w = target.shape
        report.descriptor_iou.append(mask_iou(resample_mask(db.get(d_id).mask, w, h), target))
        report.scan_iou.append(s_iou)
        report.same_top1 += int(d_id == s_id)
    return report
