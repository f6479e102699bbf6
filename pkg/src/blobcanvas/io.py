"""PNG readers and writers for the raster types.

Label maps are 8-bit single channel, instance maps and disparity 16-bit,
binary masks 8-bit {0, 255}, depth 16-bit fixed point.
"""
from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

DEFAULT_DEPTH_SCALE = 1.0 / 256.0  # meters per PNG unit

_PNG_PARAMS = [cv2.IMWRITE_PNG_COMPRESSION, 3]


def _read(path, flags=cv2.IMREAD_UNCHANGED) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    img = cv2.imread(str(path), flags)
    if img is None:
        raise ValueError(f"could not decode image {path}")
    return img


def _write(path, img: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), np.ascontiguousarray(img), _PNG_PARAMS):
        raise OSError(f"could not write {path}")


def read_rgb(path) -> np.ndarray:
    img = _read(path, cv2.IMREAD_COLOR)
    return cv2.cvtColor(img, cv2.COLOR_BGR2RGB)


def write_rgb(path, rgb: np.ndarray) -> None:
    _write(path, cv2.cvtColor(np.ascontiguousarray(rgb, dtype=np.uint8), cv2.COLOR_RGB2BGR))


def read_gray(path) -> np.ndarray:
    img = _read(path)
    if img.ndim != 2:
        raise ValueError(f"{path}: expected a single-channel PNG, got shape {img.shape}")
    return img


def read_labels(path) -> np.ndarray:
    return read_gray(path)


def write_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    if labels.size and labels.max() > 255:
        raise ValueError("label ids above 255 do not fit an 8-bit PNG")
    _write(path, labels.astype(np.uint8))


def read_instances(path) -> np.ndarray:
    return read_gray(path).astype(np.int32)


def write_instances(path, instances: np.ndarray) -> None:
    instances = np.asarray(instances)
    if instances.size and (instances.min() < 0 or instances.max() > 65535):
        raise ValueError("instance ids must fit an unsigned 16-bit PNG")
    _write(path, instances.astype(np.uint16))


def read_mask(path) -> np.ndarray:
    return read_gray(path) > 127


def write_mask(path, mask: np.ndarray) -> None:
    _write(path, np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8))


def depth_to_png(depth: np.ndarray, scale: float = DEFAULT_DEPTH_SCALE) -> np.ndarray:
    """Fixed-point encoding; values beyond the 16-bit range saturate.

    Positive depths never round down to the 0 ("no measurement") code.
    """
    depth = np.asarray(depth, dtype=np.float64)
    units = np.rint(depth / scale)
    units = np.where(depth > 0, np.maximum(units, 1), 0)
    return np.clip(units, 0, 65535).astype(np.uint16)


def png_to_depth(raw: np.ndarray, scale: float = DEFAULT_DEPTH_SCALE) -> np.ndarray:
    return np.asarray(raw, dtype=np.float64) * scale


def read_depth(path, scale: float = DEFAULT_DEPTH_SCALE) -> np.ndarray:
    return png_to_depth(read_gray(path), scale)


def write_depth(path, depth: np.ndarray, scale: float = DEFAULT_DEPTH_SCALE) -> None:
    _write(path, depth_to_png(depth, scale))


def read_raw16(path) -> np.ndarray:
    raw = read_gray(path)
    if raw.dtype != np.uint16:
        raw = raw.astype(np.uint16)
    return raw


def write_raw16(path, raw: np.ndarray) -> None:
    _write(path, np.asarray(raw).astype(np.uint16))
