"""Class tables: names, static/dynamic split and paste-order tiers."""
from __future__ import annotations

from dataclasses import dataclass
from urllib.parse import quote, unquote

import numpy as np

# Paste order: background first, then other static classes, then dynamic ones.
TIERS = ("background", "static", "dynamic")


@dataclass(frozen=True)
class ClassInfo:
    id: int
    name: str
    tier: str
    source_id: int | None = None  # raw label value in the source dataset, if remapped

    @property
    def is_static(self) -> bool:
        return self.tier != "dynamic"

    @property
    def rank(self) -> int:
        return TIERS.index(self.tier)


class ClassTable:
    def __init__(self, classes):
        classes = sorted(classes, key=lambda c: c.id)
        ids = [c.id for c in classes]
        if ids != list(range(1, len(ids) + 1)):
            raise ValueError(f"class ids must be dense in [1, L], got {ids}")
        for c in classes:
            if c.tier not in TIERS:
                raise ValueError(f"class {c.id}: unknown tier {c.tier!r}")
        self.classes = tuple(classes)
        self._by_id = {c.id: c for c in classes}

    def __len__(self) -> int:
        return len(self.classes)

    def __iter__(self):
        return iter(self.classes)

    def __contains__(self, cls) -> bool:
        return cls in self._by_id

    def __getitem__(self, cls: int) -> ClassInfo:
        return self._by_id[cls]

    def __eq__(self, other) -> bool:
        return isinstance(other, ClassTable) and self.classes == other.classes

    @property
    def ids(self) -> list[int]:
        return [c.id for c in self.classes]

    @property
    def static_ids(self) -> frozenset[int]:
        return frozenset(c.id for c in self.classes if c.is_static)

    @property
    def dynamic_ids(self) -> frozenset[int]:
        return frozenset(c.id for c in self.classes if not c.is_static)

    def rank(self, cls: int) -> int:
        """Paste tier of a class; unknown classes are treated as plain static."""
        info = self._by_id.get(cls)
        return info.rank if info is not None else TIERS.index("static")

    def by_name(self, name: str) -> ClassInfo:
        for c in self.classes:
            if c.name == name:
                return c
        raise KeyError(name)

    def remap_lut(self) -> np.ndarray | None:
        """Lookup table from raw source labels to class ids (unlisted -> void)."""
        if all(c.source_id is None for c in self.classes):
            return None
        lut = np.zeros(256, np.uint8)
        for c in self.classes:
            if c.source_id is not None:
                lut[c.source_id] = c.id
        return lut

    def to_lines(self) -> list[str]:
        out = []
        for c in self.classes:
            value = f"{quote(c.name)} {c.tier}"
            if c.source_id is not None:
                value += f" {c.source_id}"
            out.append(f"class.{c.id} = {value}")
        return out

    @classmethod
    def parse_entry(cls, cid: int, value: str) -> ClassInfo:
        parts = value.split()
        if len(parts) not in (2, 3):
            raise ValueError(f"class.{cid}: expected '<name> <tier> [source_id]', got {value!r}")
        source = int(parts[2]) if len(parts) == 3 else None
        return ClassInfo(cid, unquote(parts[0]), parts[1], source)


# Cityscapes evaluation classes; ids are trainId + 1, source ids are labelIds.
_CITYSCAPES = [
    ("road", "background", 7),
    ("sidewalk", "background", 8),
    ("building", "background", 11),
    ("wall", "static", 12),
    ("fence", "static", 13),
    ("pole", "static", 17),
    ("traffic light", "static", 19),
    ("traffic sign", "static", 20),
    ("vegetation", "static", 21),
    ("terrain", "static", 22),
    ("sky", "background", 23),
    ("person", "dynamic", 24),
    ("rider", "dynamic", 25),
    ("car", "dynamic", 26),
    ("truck", "dynamic", 27),
    ("bus", "dynamic", 28),
    ("train", "dynamic", 31),
    ("motorcycle", "dynamic", 32),
    ("bicycle", "dynamic", 33),
]


def cityscapes_classes(remap: bool = True) -> ClassTable:
    return ClassTable(
        ClassInfo(i, name, tier, source if remap else None)
        for i, (name, tier, source) in enumerate(_CITYSCAPES, start=1)
    )
