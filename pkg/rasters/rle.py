import numpy as np

from .models import MaskRLE, RunLengthError, DimensionMismatchError


def encode_rle(bitmask):
    bitmask = np.asarray(bitmask, dtype=bool)
    if bitmask.ndim != 2 or bitmask.size == 0:
        raise ValueError("mask must be a non-empty 2-D array")
    height, width = bitmask.shape
    flat = bitmask.ravel()
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs = [0] + runs
    return MaskRLE(width=width, height=height, runs=tuple(runs))


def decode_rle(mask):
    runs = np.asarray(mask.runs, dtype=np.int64)
    if mask.width <= 0 or mask.height <= 0:
        raise RunLengthError("mask dimensions must be positive")
    if np.any(runs < 0):
        raise RunLengthError("run lengths must be non-negative")
    if int(runs.sum()) != mask.width * mask.height:
        raise RunLengthError(
            f"runs sum to {int(runs.sum())}, expected {mask.width * mask.height}"
        )
    values = (np.arange(runs.size) % 2).astype(bool)
    return np.repeat(values, runs).reshape(mask.height, mask.width)


def mask_area(mask):
    return mask.area


def _check_same_shape(m1, m2):
    if m1.shape != m2.shape:
        raise DimensionMismatchError(f"mask shapes differ: {m1.shape} vs {m2.shape}")


def mask_iou(m1, m2):
    _check_same_shape(m1, m2)
    a, b = m1.bitmask, m2.bitmask
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def mask_intersection(m1, m2):
    _check_same_shape(m1, m2)
    return encode_rle(m1.bitmask & m2.bitmask)


def mask_union(m1, m2):
    _check_same_shape(m1, m2)
    return encode_rle(m1.bitmask | m2.bitmask)


def bitmask_iou(a, b):
    """IoU of two boolean arrays; 0 when both are empty."""
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union
