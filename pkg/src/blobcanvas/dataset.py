"""Dataset ingestion: Cityscapes-style directory trees of RGB, labels, instances and disparity."""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .classes import ClassTable

# Instance PNGs encode class * 1000 + k for instance-labelled pixels.
INSTANCE_OFFSET = 1000

DEFAULT_PATTERNS = {
    "rgb": "rgb/*.png",
    "labels": "labelIds/*.png",
    "instances": "instanceIds/*.png",
    "disparity": "disparity/*.png",
}


class DatasetError(Exception):
    pass


@dataclass
class SceneAnnotation:
    key: str
    rgb: np.ndarray | None
    labels: np.ndarray | None
    instances: np.ndarray | None
    disparity: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        for grid in (self.labels, self.rgb, self.instances):
            if grid is not None:
                return grid.shape[:2]
        raise DatasetError(f"{self.key}: sample has no raster channels")


def segment_ids(labels: np.ndarray, instances: np.ndarray | None) -> np.ndarray:
    """Per-pixel segment ids: the instance id where present, else the class id.

    Class ids are below :data:`INSTANCE_OFFSET` and instance ids at or above
    it, so the two never collide. Void stays 0.
    """
    labels = np.asarray(labels).astype(np.int64)
    if instances is None:
        return labels
    inst = np.asarray(instances).astype(np.int64)
    return np.where((inst > 0) & (labels > 0), inst, labels)


def normalise_instances(raw: np.ndarray) -> np.ndarray:
    """Drop stuff-class codes (< 1000) from a raw instance PNG."""
    raw = np.asarray(raw).astype(np.int32)
    return np.where(raw >= INSTANCE_OFFSET, raw, 0)


def _pattern_regex(pattern: str) -> re.Pattern:
    parts = [re.escape(p) for p in pattern.split("*")]
    return re.compile("^" + "([^/]*)".join(parts) + "$")


def _index(root: Path, pattern: str) -> dict[str, Path]:
    regex = _pattern_regex(pattern)
    out = {}
    for path in sorted(root.glob(pattern)):
        rel = path.relative_to(root).as_posix()
        m = regex.match(rel)
        if m is None:
            continue
        key = "/".join(m.groups()) if m.groups() else rel
        out[key] = path
    return out


@dataclass
class SampleFiles:
    key: str
    rgb: Path | None
    labels: Path | None
    instances: Path | None
    disparity: Path | None


def discover(root, patterns: dict[str, str] | None = None, require=("rgb", "labels")) -> list[SampleFiles]:
    """Match files across channel directories by the text captured by ``*``.

    Only keys present for every channel in ``require`` are returned, sorted.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} does not exist")
    patterns = {**DEFAULT_PATTERNS, **(patterns or {})}
    found = {name: _index(root, pat) for name, pat in patterns.items()}
    keys = set(found[require[0]])
    for name in require[1:]:
        keys &= set(found[name])
    if not keys:
        raise DatasetError(f"no samples under {root} matching {[patterns[r] for r in require]}")
    return [
        SampleFiles(k, *(found[c].get(k) for c in ("rgb", "labels", "instances", "disparity")))
        for k in sorted(keys)
    ]


def load_sample(files: SampleFiles, classes: ClassTable | None = None) -> SceneAnnotation:
    rgb = io.read_rgb(files.rgb) if files.rgb else None
    labels = io.read_labels(files.labels) if files.labels else None
    if labels is not None and classes is not None:
        lut = classes.remap_lut()
        if lut is not None:
            labels = lut[labels]
    instances = normalise_instances(io.read_instances(files.instances)) if files.instances else None
    disparity = io.read_raw16(files.disparity) if files.disparity else None
    sample = SceneAnnotation(files.key, rgb, labels, instances, disparity)
    shapes = {g.shape[:2] for g in (rgb, labels, instances, disparity) if g is not None}
    if len(shapes) > 1:
        raise DatasetError(f"{files.key}: channel dimensions differ: {sorted(shapes)}")
    return sample
