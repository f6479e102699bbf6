"""Per-class object blob database: extraction, persistence and retrieval."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator
from urllib.parse import quote, unquote

import numpy as np
from scipy import ndimage

from . import io
from .classes import ClassTable
from .dataset import SceneAnnotation
from .raster import crop_to_box, flip_horizontal, flip_vertical, label_components, mask_iou, resample_mask
from .shape import DescriptorIndex, EmptyClassError, ShapeDescriptor, UnknownClassError, hu_descriptor

FORMAT_VERSION = 1
INDEX_FILE = "index.txt"
DEFAULT_MIN_AREA = 1000


class DatabaseError(Exception):
    pass


class MissingIndexError(DatabaseError):
    pass


class CorruptIndexError(DatabaseError):
    pass


class MissingPatchError(DatabaseError):
    pass


class VersionMismatchError(DatabaseError):
    pass


@dataclass
class Segment:
    """One footprint of a label/instance layout, cropped to its tight box."""

    cls: int
    mask: np.ndarray
    box: tuple[int, int, int, int]  # top, left, height, width
    area: int
    source: str  # "i<instance id>" or "c<class>.<component rank>"


def segments(labels: np.ndarray, instances: np.ndarray | None = None, classes: Iterable[int] | None = None) -> list[Segment]:
    """Decompose a layout into per-instance and per-component footprints.

    Instance ids define a footprint even when occlusion splits them into
    several parts. Labelled pixels without an instance id are split per class
    into 4-connected components. Output order: instances by ascending id,
    then classes ascending, components largest first.
    """
    labels = np.asarray(labels)
    keep = None if classes is None else np.isin(labels, list(classes))
    labelled = labels > 0 if keep is None else (labels > 0) & keep
    if instances is None:
        has_inst = np.zeros(labels.shape, bool)
    else:
        has_inst = (np.asarray(instances) > 0) & labelled

    out = []
    if has_inst.any():
        inst = np.asarray(instances)
        ids = np.unique(inst[has_inst])
        compact = np.zeros(labels.shape, np.int32)
        compact[has_inst] = np.searchsorted(ids, inst[has_inst]) + 1
        for n, sl in enumerate(ndimage.find_objects(compact), start=1):
            region = compact[sl] == n
            cls = int(np.bincount(labels[sl][region]).argmax())
            mask, (top, left, h, w) = crop_to_box(region & (labels[sl] == cls))
            box = (top + sl[0].start, left + sl[1].start, h, w)
            out.append(Segment(cls, mask, box, int(mask.sum()), f"i{int(ids[n - 1])}"))

    rest = np.where(labelled & ~has_inst, labels, 0)
    for cls in np.unique(rest):
        if cls == 0:
            continue
        comp, order = label_components(rest == cls)
        slices = ndimage.find_objects(comp)
        for rank, lab in enumerate(order):
            sl = slices[lab - 1]
            mask = comp[sl] == lab
            box = (sl[0].start, sl[1].start, mask.shape[0], mask.shape[1])
            out.append(Segment(int(cls), mask, box, int(mask.sum()), f"c{int(cls)}.{rank}"))
    return out


@dataclass
class BlobRecord:
    id: int | None
    cls: int
    rgb: np.ndarray
    mask: np.ndarray
    descriptor: ShapeDescriptor
    source: tuple[str, str]  # (image key, segment tag)
    area: int

    def __post_init__(self):
        if self.rgb.shape[:2] != self.mask.shape:
            raise ValueError("blob rgb and mask dimensions differ")

    def same_content(self, other: "BlobRecord") -> bool:
        return (
            self.id == other.id
            and self.cls == other.cls
            and self.area == other.area
            and self.source == other.source
            and self.descriptor.h == other.descriptor.h
            and self.mask.shape == other.mask.shape
            and np.array_equal(self.mask, other.mask)
            and np.array_equal(self.rgb, other.rgb)
        )


def extract_blobs(sample: SceneAnnotation, min_area: int = DEFAULT_MIN_AREA, classes: Iterable[int] | None = None) -> list[BlobRecord]:
    """Blob records of one annotated image; ids are left unassigned.

    RGB patches keep only the pixels under the blob mask, the rest is zero.
    """
    if sample.rgb is None or sample.labels is None:
        raise ValueError(f"{sample.key}: extraction needs rgb and labels")
    if sample.rgb.shape[:2] != sample.labels.shape:
        raise ValueError(
            f"{sample.key}: rgb {sample.rgb.shape[:2]} and labels {sample.labels.shape} differ in size"
        )
    records = []
    for seg in segments(sample.labels, sample.instances, classes):
        if seg.area < min_area:
            continue
        top, left, h, w = seg.box
        rgb = sample.rgb[top:top + h, left:left + w] * seg.mask[..., None]
        records.append(
            BlobRecord(None, seg.cls, rgb.astype(np.uint8), seg.mask, hu_descriptor(seg.mask), (sample.key, seg.source), seg.area)
        )
    return records


@dataclass
class Retrieval:
    record: BlobRecord
    flipped: bool
    iou: float
    distance: float
    vflipped: bool = False

    def oriented(self) -> tuple[np.ndarray, np.ndarray]:
        """The record's (rgb, mask) in the chosen orientation."""
        rgb, mask = self.record.rgb, self.record.mask
        if self.flipped:
            rgb, mask = flip_horizontal(rgb), flip_horizontal(mask)
        if self.vflipped:
            rgb, mask = flip_vertical(rgb), flip_vertical(mask)
        return rgb, mask


@dataclass(frozen=True)
class _Entry:
    cls: int
    area: int
    source: tuple[str, str]
    descriptor: ShapeDescriptor


class BlobDatabase:
    """Blob records plus a descriptor index, optionally backed by a directory.

    Databases opened with :meth:`load` read patch PNGs on first access.
    """

    def __init__(self, classes: ClassTable, min_blob_area: int = DEFAULT_MIN_AREA, dataset: str = ""):
        self.classes = classes
        self.min_blob_area = min_blob_area
        self.dataset = dataset
        self.index = DescriptorIndex(classes.ids)
        self._entries: dict[int, _Entry] = {}
        self._records: dict[int, BlobRecord] = {}
        self._root: Path | None = None
        self._next_id = 0

    def __len__(self) -> int:
        return len(self._entries)

    def ids(self) -> list[int]:
        return sorted(self._entries)

    def add(self, record: BlobRecord) -> BlobRecord:
        """Insert a record, assigning the next free id when it has none."""
        if record.id is None:
            record = dataclasses.replace(record, id=self._next_id)
        if record.id in self._entries:
            raise ValueError(f"duplicate blob id {record.id}")
        if record.cls not in self.classes:
            raise UnknownClassError(f"class {record.cls} is not in the class table")
        if record.area < self.min_blob_area:
            raise ValueError(f"blob area {record.area} below minimum {self.min_blob_area}")
        self._entries[record.id] = _Entry(record.cls, record.area, record.source, record.descriptor)
        self._records[record.id] = record
        self._next_id = max(self._next_id, record.id + 1)
        self.index.add(record.cls, record.id, record.descriptor)
        return record

    def extend(self, records: Iterable[BlobRecord]) -> None:
        for r in records:
            self.add(r)

    def area(self, blob_id: int) -> int:
        return self._entries[blob_id].area

    def get(self, blob_id: int) -> BlobRecord:
        rec = self._records.get(blob_id)
        if rec is None:
            entry = self._entries[blob_id]
            rgb = io.read_rgb(self._patch_path(blob_id, "rgb"))
            mask = io.read_mask(self._patch_path(blob_id, "mask"))
            rec = BlobRecord(blob_id, entry.cls, rgb, mask, entry.descriptor, entry.source, entry.area)
            self._records[blob_id] = rec
        return rec

    def records(self) -> Iterator[BlobRecord]:
        for i in self.ids():
            yield self.get(i)

    # retrieval

    def candidate(self, descriptor: ShapeDescriptor, cls: int) -> tuple[int, float]:
        """Closest blob by descriptor; exact ties prefer larger area, then smaller id."""
        ids, dist = self.index.distances(descriptor, cls)
        best = dist.min()
        tied = ids[dist == best]
        if tied.size > 1:
            areas = np.array([self._entries[int(i)].area for i in tied])
            tied = tied[areas == areas.max()]
        return int(tied.min()), float(best)

    def retrieve(self, footprint: np.ndarray, cls: int, vertical: bool = False) -> Retrieval:
        """Best blob for a footprint and the orientation that overlaps it most.

        The blob mask is resampled to the footprint's tight box and compared
        as-is and mirrored left-right (and top-bottom if ``vertical``); equal
        IoUs keep the unflipped orientation.
        """
        target, _ = crop_to_box(np.asarray(footprint, dtype=bool))
        blob_id, dist = self.candidate(hu_descriptor(target), cls)
        rec = self.get(blob_id)
        h, w = target.shape
        resized = resample_mask(rec.mask, w, h)
        options = [(False, False), (True, False)]
        if vertical:
            options += [(False, True), (True, True)]
        best = None
        for hflip, vflip in options:
            m = flip_horizontal(resized) if hflip else resized
            m = flip_vertical(m) if vflip else m
            iou = mask_iou(m, target)
            if best is None or iou > best[0]:
                best = (iou, hflip, vflip)
        return Retrieval(rec, best[1], best[0], dist, best[2])

    # persistence

    def _patch_path(self, blob_id: int, kind: str) -> Path:
        if self._root is None:
            raise MissingPatchError(f"blob {blob_id} has no pixel data")
        return self._root / _patch_name(blob_id, kind)

    def save(self, path) -> None:
        root = Path(path)
        root.mkdir(parents=True, exist_ok=True)
        lines = [
            "# blobcanvas blob database",
            f"format = {FORMAT_VERSION}",
            f"min_blob_area = {self.min_blob_area}",
            f"dataset = {quote(self.dataset)}",
            *self.classes.to_lines(),
            f"records = {len(self)}",
        ]
        for rec in self.records():
            if not rec.source[0] or not rec.source[1]:
                raise ValueError(f"blob {rec.id}: empty source field")
            io.write_rgb(root / _patch_name(rec.id, "rgb"), rec.rgb)
            io.write_mask(root / _patch_name(rec.id, "mask"), rec.mask)
            fields = [
                str(rec.id), str(rec.cls), str(rec.area), quote(rec.source[0]), quote(rec.source[1]),
                *(repr(v) for v in rec.descriptor.h),
                _patch_name(rec.id, "rgb"), _patch_name(rec.id, "mask"),
            ]
            lines.append(" ".join(fields))
        (root / INDEX_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "BlobDatabase":
        root = Path(path)
        index_path = root / INDEX_FILE
        if not index_path.is_file():
            raise MissingIndexError(f"no {INDEX_FILE} in {root}")
        lines = [ln for ln in index_path.read_text(encoding="utf-8").splitlines() if ln and not ln.startswith("#")]
        header: dict[str, str] = {}
        class_entries = []
        pos = 0
        try:
            while pos < len(lines):
                key, sep, value = lines[pos].partition("=")
                if not sep:
                    raise CorruptIndexError(f"line {pos + 1}: expected 'key = value', got {lines[pos]!r}")
                key, value = key.strip(), value.strip()
                pos += 1
                if key.startswith("class."):
                    class_entries.append(ClassTable.parse_entry(int(key[6:]), value))
                else:
                    header[key] = value
                if key == "records":
                    break
            if "format" not in header:
                raise CorruptIndexError("index has no format field")
            if header["format"] != str(FORMAT_VERSION):
                raise VersionMismatchError(f"database format {header['format']}, expected {FORMAT_VERSION}")
            if "records" not in header:
                raise CorruptIndexError("index has no records field")
            db = cls(ClassTable(class_entries), int(header.get("min_blob_area", DEFAULT_MIN_AREA)), unquote(header.get("dataset", "")))
            count = int(header["records"])
            body = lines[pos:]
            if len(body) != count:
                raise CorruptIndexError(f"index declares {count} records but lists {len(body)}")
            db._root = root
            for ln in body:
                f = ln.split()
                if len(f) != 14:
                    raise CorruptIndexError(f"malformed record line: {ln!r}")
                blob_id, c, area = int(f[0]), int(f[1]), int(f[2])
                if f[12] != _patch_name(blob_id, "rgb") or f[13] != _patch_name(blob_id, "mask"):
                    raise CorruptIndexError(f"blob {blob_id}: unexpected patch names {f[12:]}")
                for name in f[12:]:
                    if not (root / name).is_file():
                        raise MissingPatchError(f"blob {blob_id}: missing {name}")
                if blob_id in db._entries:
                    raise CorruptIndexError(f"duplicate blob id {blob_id}")
                if c not in db.classes:
                    raise CorruptIndexError(f"blob {blob_id}: class {c} not in class table")
                desc = ShapeDescriptor(tuple(float(v) for v in f[5:12]))
                db._entries[blob_id] = _Entry(c, area, (unquote(f[3]), unquote(f[4])), desc)
                db._next_id = max(db._next_id, blob_id + 1)
                db.index.add(c, blob_id, desc)
        except DatabaseError:
            raise
        except ValueError as exc:
            raise CorruptIndexError(f"{index_path}: {exc}") from exc
        return db


def _patch_name(blob_id: int, kind: str) -> str:
    return f"patches/{blob_id:07d}_{kind}.png"


__all__ = [
    "BlobDatabase", "BlobRecord", "CorruptIndexError", "DatabaseError", "EmptyClassError",
    "MissingIndexError", "MissingPatchError", "Retrieval", "Segment", "UnknownClassError",
    "VersionMismatchError", "extract_blobs", "segments",
]
