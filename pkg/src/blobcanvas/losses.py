"""Numeric evaluation of the in-painting objective over given prediction volumes.

Prediction volumes are ``(H, W, L + 1)`` arrays of per-pixel class
probabilities whose last channel is the "fake" class. Targets are one-hot
``(H, W, L)`` arrays; void pixels have no active channel. Sums go through
``numpy.sum`` on contiguous data, i.e. pairwise summation in a fixed order.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

LOG_CLAMP = 1e-12
DEFAULT_DEPTH_WEIGHT = 100.0  # weight of the depth term in the total loss

_HEADER = "PVOL"


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """Class ids 1..L become channels 0..L-1; void pixels stay all-zero."""
    labels = np.asarray(labels)
    if labels.size and labels.max() > num_classes:
        raise ValueError(f"label {labels.max()} exceeds class count {num_classes}")
    eye = np.vstack([np.zeros((1, num_classes)), np.eye(num_classes)])
    return eye[labels]


def check_volume(probs: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 3:
        raise ValueError(f"prediction volume must be (H, W, C), got {probs.shape}")
    if (probs < 0).any():
        raise ValueError("prediction volume has negative probabilities")
    if not np.allclose(probs.sum(axis=2), 1.0, rtol=0, atol=tol):
        raise ValueError("prediction volume channels do not sum to 1")
    return probs


def _check_pair(probs: np.ndarray, target: np.ndarray) -> None:
    if probs.shape[:2] != target.shape[:2]:
        raise ValueError(f"dimension mismatch: {probs.shape[:2]} vs {target.shape[:2]}")
    if probs.shape[2] != target.shape[2] + 1:
        raise ValueError(f"volume has {probs.shape[2]} channels, expected {target.shape[2] + 1}")


def class_weights(target: np.ndarray) -> np.ndarray:
    """``H*W / count_c`` per class present in the target, 0 for absent classes."""
    target = np.asarray(target)
    counts = target.reshape(-1, target.shape[2]).sum(axis=0)
    pixels = target.shape[0] * target.shape[1]
    alpha = np.zeros(target.shape[2])
    present = counts > 0
    alpha[present] = pixels / counts[present]
    return alpha


def _weighted_nll(probs: np.ndarray, target: np.ndarray) -> float:
    alpha = class_weights(target)
    logs = np.log(np.maximum(probs[..., :-1], LOG_CLAMP))
    return float(-np.sum(alpha * np.sum((target * logs).reshape(-1, target.shape[2]), axis=0)))


def discriminator_loss(d_real: np.ndarray, d_fake: np.ndarray, target: np.ndarray) -> float:
    """Class-weighted cross-entropy on real images plus the fake-channel term on canvases."""
    d_real, d_fake = check_volume(d_real), check_volume(d_fake)
    target = np.asarray(target, dtype=np.float64)
    _check_pair(d_real, target)
    _check_pair(d_fake, target)
    fake = -np.sum(np.log(np.maximum(d_fake[..., -1], LOG_CLAMP)))
    return _weighted_nll(d_real, target) + float(fake)


def generator_loss(d_fake: np.ndarray, target: np.ndarray) -> float:
    d_fake = check_volume(d_fake)
    target = np.asarray(target, dtype=np.float64)
    _check_pair(d_fake, target)
    return _weighted_nll(d_fake, target)


def depth_mse(pred: np.ndarray, gt: np.ndarray, valid: np.ndarray | None = None) -> float:
    """Mean squared depth error over ``valid`` pixels (all pixels by default)."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"dimension mismatch: {pred.shape} vs {gt.shape}")
    if valid is None:
        valid = np.ones(pred.shape, bool)
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != pred.shape:
        raise ValueError(f"dimension mismatch: mask {valid.shape} vs {pred.shape}")
    n = np.count_nonzero(valid)
    if n == 0:
        raise ValueError("empty validity mask")
    err = pred[valid] - gt[valid]
    return float(np.sum(err * err) / n)


def total_loss(l_d: float, l_g: float, l_depth: float, depth_weight: float = DEFAULT_DEPTH_WEIGHT) -> float:
    if depth_weight < 0:
        raise ValueError("depth weight must be non-negative")
    return l_d + l_g + depth_weight * l_depth


def save_volume(path, probs: np.ndarray) -> None:
    """Text header line ``PVOL 1 <H> <W> <C> <f8>`` followed by raw little-endian float64."""
    probs = np.asarray(probs, dtype="<f8")
    h, w, c = probs.shape
    with open(path, "wb") as fh:
        fh.write(f"{_HEADER} 1 {h} {w} {c} <f8\n".encode("ascii"))
        fh.write(np.ascontiguousarray(probs).tobytes())


def load_volume(path) -> np.ndarray:
    data = Path(path).read_bytes()
    head, sep, body = data.partition(b"\n")
    parts = head.decode("ascii", errors="replace").split()
    if not sep or len(parts) != 6 or parts[0] != _HEADER or parts[1] != "1" or parts[5] != "<f8":
        raise ValueError(f"{path}: not a prediction volume file")
    h, w, c = (int(v) for v in parts[2:5])
    if len(body) != h * w * c * 8:
        raise ValueError(f"{path}: payload size does not match header")
    return np.frombuffer(body, dtype="<f8").reshape(h, w, c).copy()
