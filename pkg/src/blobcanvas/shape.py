"""Hu-moment shape descriptors and a class-partitioned nearest-neighbour index."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .raster import as_mask, crop_to_box

LOG_EPS = 1e-30

# Largest side for which every raw moment up to order 3 fits in int64.
_INT64_SAFE_SIDE = 4096


class RetrievalError(LookupError):
    pass


class UnknownClassError(RetrievalError):
    """The class id is not part of the index's class table."""


class EmptyClassError(RetrievalError):
    """The class is known but has no stored descriptors."""


def _log_component(value: float) -> float:
    return -math.copysign(1.0, value) * math.log10(max(abs(value), LOG_EPS)) if value != 0 else 0.0


@dataclass(frozen=True)
class ShapeDescriptor:
    """Seven Hu invariants plus their signed-log form used for distances.

    The seventh invariant changes sign under reflection; its log form uses
    the magnitude so that a shape and its mirror image share a descriptor.
    """

    h: tuple[float, ...]
    log_form: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        h = tuple(float(v) for v in self.h)
        if len(h) != 7:
            raise ValueError("a Hu descriptor has exactly 7 components")
        if not all(math.isfinite(v) for v in h):
            raise ValueError(f"non-finite Hu invariants: {h}")
        object.__setattr__(self, "h", h)
        logs = [_log_component(v) for v in h[:6]] + [_log_component(abs(h[6]))]
        arr = np.array(logs, dtype=np.float64)
        arr.flags.writeable = False
        object.__setattr__(self, "log_form", arr)


def raw_moments(mask: np.ndarray) -> dict[tuple[int, int], int]:
    """Exact raw moments ``M_pq`` (p: column power, q: row power) for p + q <= 3."""
    h, w = mask.shape
    dtype = np.int64 if max(h, w) <= _INT64_SAFE_SIDE else object
    m = mask.astype(dtype)
    xs = np.arange(w, dtype=dtype)
    ys = np.arange(h, dtype=dtype)
    col = [m @ xs**p for p in range(4)]  # per-row sums of x^p
    out = {}
    for p in range(4):
        for q in range(4 - p):
            out[p, q] = int(np.dot(col[p], ys**q))
    return out


def hu_invariants(mask) -> tuple[float, ...]:
    """The seven Hu invariants of a non-empty binary mask.

    Central moments are formed in exact integer arithmetic, and each Hu
    polynomial is a ratio of integers, so the result is the correctly
    rounded value of the exact invariant.
    """
    mask = as_mask(mask)
    if not mask.any():
        raise ValueError("Hu moments of an empty mask are undefined")
    mask, _ = crop_to_box(mask)
    M = raw_moments(mask)
    n = M[0, 0]
    a, b = M[1, 0], M[0, 1]

    # n * mu_pq for second order, n^2 * mu_pq for third order
    s20 = n * M[2, 0] - a * a
    s02 = n * M[0, 2] - b * b
    s11 = n * M[1, 1] - a * b
    t30 = n * n * M[3, 0] - 3 * n * a * M[2, 0] + 2 * a**3
    t03 = n * n * M[0, 3] - 3 * n * b * M[0, 2] + 2 * b**3
    t21 = n * n * M[2, 1] - 2 * n * a * M[1, 1] - n * b * M[2, 0] + 2 * a * a * b
    t12 = n * n * M[1, 2] - 2 * n * b * M[1, 1] - n * a * M[0, 2] + 2 * a * b * b

    # eta_2x = s / n^3, eta_3x = t / n^4.5
    p = t30 - 3 * t12
    q = 3 * t21 - t03
    r = t30 + t12
    s = t21 + t03
    d2 = s20 - s02
    h1 = (s20 + s02) / n**3
    h2 = (d2 * d2 + 4 * s11 * s11) / n**6
    h3 = (p * p + q * q) / n**9
    h4 = (r * r + s * s) / n**9
    h5 = (p * r * (r * r - 3 * s * s) + q * s * (3 * r * r - s * s)) / n**18
    h6 = (d2 * (r * r - s * s) + 4 * s11 * r * s) / n**12
    h7 = (q * r * (r * r - 3 * s * s) - p * s * (3 * r * r - s * s)) / n**18
    return (h1, h2, h3, h4, h5, h6, h7)


def hu_descriptor(mask) -> ShapeDescriptor:
    return ShapeDescriptor(hu_invariants(mask))


def descriptor_distance(a: ShapeDescriptor, b: ShapeDescriptor) -> float:
    """L2 distance between signed-log Hu vectors."""
    diff = a.log_form - b.log_form
    return float(np.sqrt(np.dot(diff, diff)))


class DescriptorIndex:
    """Exact nearest-neighbour lookup over descriptors, partitioned by class.

    Build with :meth:`add` then query; the per-class arrays are materialised
    lazily on the first query after a modification.
    """

    def __init__(self, classes: Iterable[int]):
        self.classes = frozenset(int(c) for c in classes)
        self._pending: dict[int, list[tuple[int, np.ndarray]]] = {c: [] for c in self.classes}
        self._ids: dict[int, np.ndarray] = {}
        self._logs: dict[int, np.ndarray] = {}
        self._dirty = True

    def add(self, cls: int, blob_id: int, descriptor: ShapeDescriptor) -> None:
        if cls not in self.classes:
            raise UnknownClassError(f"class {cls} is not in the class table")
        self._pending[cls].append((int(blob_id), descriptor.log_form))
        self._dirty = True

    def __len__(self) -> int:
        return sum(len(v) for v in self._pending.values())

    def size(self, cls: int) -> int:
        return len(self._pending.get(cls, ()))

    def _freeze(self) -> None:
        if not self._dirty:
            return
        for cls, entries in self._pending.items():
            entries.sort(key=lambda e: e[0])
            ids = np.array([e[0] for e in entries], dtype=np.int64)
            logs = np.array([e[1] for e in entries], dtype=np.float64).reshape(-1, 7)
            self._ids[cls] = ids
            self._logs[cls] = logs
        self._dirty = False

    def partition(self, cls: int) -> tuple[np.ndarray, np.ndarray]:
        """``(ids, log_forms)`` of one class, sorted by id."""
        if cls not in self.classes:
            raise UnknownClassError(f"class {cls} is not in the class table")
        self._freeze()
        ids = self._ids[cls]
        if ids.size == 0:
            raise EmptyClassError(f"class {cls} has no blobs")
        return ids, self._logs[cls]

    def distances(self, query: ShapeDescriptor, cls: int) -> tuple[np.ndarray, np.ndarray]:
        ids, logs = self.partition(cls)
        diff = logs - query.log_form
        return ids, np.sqrt(np.einsum("ij,ij->i", diff, diff))

    def nearest(self, query: ShapeDescriptor, cls: int, k: int = 1) -> list[tuple[int, float]]:
        """The ``k`` closest entries of ``cls``; ties go to the smaller blob id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        ids, dist = self.distances(query, cls)
        if k < ids.size:
            kth = np.partition(dist, k - 1)[k - 1]
            keep = np.flatnonzero(dist <= kth)
            ids, dist = ids[keep], dist[keep]
        order = np.lexsort((ids, dist))[:k]
        return [(int(ids[i]), float(dist[i])) for i in order]
