"""Independent reference implementations used as test oracles.

These are deliberately naive: pixel loops, exact rationals and high precision
floats, so they share no code path with the package.
"""
from __future__ import annotations

import math
from collections import deque
from fractions import Fraction

import mpmath
import numpy as np

mpmath.mp.dps = 60


def hu_reference(mask) -> list[float]:
    """Hu invariants from exact central moments and 60-digit normalisation."""
    ys, xs = np.nonzero(np.asarray(mask, dtype=bool))
    pts = list(zip(xs.tolist(), ys.tolist()))
    n = len(pts)
    cx = Fraction(sum(x for x, _ in pts), n)
    cy = Fraction(sum(y for _, y in pts), n)

    def mu(p, q):
        return sum((x - cx) ** p * (y - cy) ** q for x, y in pts)

    def eta(p, q):
        m = mu(p, q)
        return mpmath.mpf(m.numerator) / m.denominator / mpmath.mpf(n) ** (1 + mpmath.mpf(p + q) / 2)

    n20, n02, n11 = eta(2, 0), eta(0, 2), eta(1, 1)
    n30, n03, n21, n12 = eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2)
    h1 = n20 + n02
    h2 = (n20 - n02) ** 2 + 4 * n11 ** 2
    h3 = (n30 - 3 * n12) ** 2 + (3 * n21 - n03) ** 2
    h4 = (n30 + n12) ** 2 + (n21 + n03) ** 2
    h5 = ((n30 - 3 * n12) * (n30 + n12) * ((n30 + n12) ** 2 - 3 * (n21 + n03) ** 2)
          + (3 * n21 - n03) * (n21 + n03) * (3 * (n30 + n12) ** 2 - (n21 + n03) ** 2))
    h6 = ((n20 - n02) * ((n30 + n12) ** 2 - (n21 + n03) ** 2)
          + 4 * n11 * (n30 + n12) * (n21 + n03))
    h7 = ((3 * n21 - n03) * (n30 + n12) * ((n30 + n12) ** 2 - 3 * (n21 + n03) ** 2)
          - (n30 - 3 * n12) * (n21 + n03) * (3 * (n30 + n12) ** 2 - (n21 + n03) ** 2))
    # below 1e-50 is cancellation residue of the 60-digit normalisation
    return [0.0 if abs(v) < mpmath.mpf("1e-50") else float(v) for v in (h1, h2, h3, h4, h5, h6, h7)]


def log_reference(h: list[float]) -> list[float]:
    out = []
    for i, v in enumerate(h):
        v = abs(v) if i == 6 else v
        out.append(0.0 if v == 0 else -math.copysign(1, v) * math.log10(max(abs(v), 1e-30)))
    return out


def components_bfs(mask) -> list[set[tuple[int, int]]]:
    """4-connected components by breadth-first search."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    seen = np.zeros_like(mask)
    comps = []
    for r in range(h):
        for c in range(w):
            if mask[r, c] and not seen[r, c]:
                comp, queue = set(), deque([(r, c)])
                seen[r, c] = True
                while queue:
                    y, x = queue.popleft()
                    comp.add((y, x))
                    for dy, dx in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                        ny, nx = y + dy, x + dx
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                            seen[ny, nx] = True
                            queue.append((ny, nx))
                comps.append(comp)
    return comps


def dilate_stamp(mask, radius: int):
    """Stamp a (2r+1)-square at every true pixel."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    out = np.zeros_like(mask)
    for y, x in zip(*np.nonzero(mask)):
        out[max(y - radius, 0):y + radius + 1, max(x - radius, 0):x + radius + 1] = True
    return out


def iou_count(a, b) -> float:
    inter = union = 0
    for x, y in zip(np.ravel(a), np.ravel(b)):
        inter += bool(x) and bool(y)
        union += bool(x) or bool(y)
    return inter / union if union else 0.0


def triangle_raster(tri, shape):
    """Closed triangle by edge functions on pixel centres (integer vertices)."""
    (ax, ay), (bx, by), (cx, cy) = tri
    out = np.zeros(shape, bool)
    area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    for y in range(shape[0]):
        for x in range(shape[1]):
            e = [
                (bx - ax) * (y - ay) - (by - ay) * (x - ax),
                (cx - bx) * (y - by) - (cy - by) * (x - bx),
                (ax - cx) * (y - cy) - (ay - cy) * (x - cx),
            ]
            if area == 0:
                # degenerate: the pixel must lie on one of the segments
                inside = any(
                    ei == 0 and min(px, qx) <= x <= max(px, qx) and min(py, qy) <= y <= max(py, qy)
                    for ei, (px, py), (qx, qy) in zip(e, tri, tri[1:] + tri[:1])
                )
            else:
                inside = all(v >= 0 for v in e) or all(v <= 0 for v in e)
            out[y, x] = inside
    return out


def nearest_scan(entries, query_log, k):
    """entries: list of (id, log_form); sort by (distance, id)."""
    scored = []
    for blob_id, log in entries:
        d = math.sqrt(sum((float(a) - float(b)) ** 2 for a, b in zip(log, query_log)))
        scored.append((d, blob_id))
    scored.sort()
    return [i for _, i in scored[:k]]


def losses_loop(d_real, d_fake, labels, num_classes):
    """Triple-loop evaluation of the discriminator and generator objectives."""
    h, w = labels.shape
    counts = [0] * (num_classes + 1)
    for i in range(h):
        for j in range(w):
            counts[labels[i, j]] += 1
    alpha = [h * w / counts[c] if counts[c] else 0.0 for c in range(num_classes + 1)]
    ld = lg = 0.0
    for i in range(h):
        for j in range(w):
            for c in range(1, num_classes + 1):
                t = 1.0 if labels[i, j] == c else 0.0
                if t:
                    ld -= alpha[c] * math.log(max(d_real[i, j, c - 1], 1e-12))
                    lg -= alpha[c] * math.log(max(d_fake[i, j, c - 1], 1e-12))
            ld -= math.log(max(d_fake[i, j, num_classes], 1e-12))
    return ld, lg


def miou_sets(pred, gt, num_classes):
    """mIoU from explicit pixel-coordinate sets, void ground truth dropped."""
    coords = [(i, j) for i in range(gt.shape[0]) for j in range(gt.shape[1]) if gt[i, j] != 0]
    ious = {}
    for c in range(1, num_classes + 1):
        g = {p for p in coords if gt[p] == c}
        q = {p for p in coords if pred[p] == c}
        if g | q:
            ious[c] = Fraction(len(g & q), len(g | q))
    return ious
