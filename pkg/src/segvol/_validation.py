"""Input checks shared by the estimators and the functional API."""

import numpy as np


def check_rgb_image(img):
    """Return ``img`` as a C-contiguous ``(H, W, 3)`` uint8 array.

    Float images in [0, 1] are accepted and scaled; anything else must
    already be 8-bit.
    """
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must have at least one pixel")
    if arr.dtype == np.uint8:
        return np.ascontiguousarray(arr)
    if np.issubdtype(arr.dtype, np.floating):
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("float RGB images must lie in [0, 1]")
        return np.ascontiguousarray(np.round(arr * 255.0).astype(np.uint8))
    if np.issubdtype(arr.dtype, np.integer):
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("integer RGB images must lie in [0, 255]")
        return np.ascontiguousarray(arr.astype(np.uint8))
    raise ValueError(f"unsupported image dtype {arr.dtype}")


def check_planes(planes):
    arr = np.asarray(planes, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) planes, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("planes must have at least one pixel")
    if not np.all(np.isfinite(arr)):
        raise ValueError("planes contain non-finite values")
    return np.ascontiguousarray(arr)


def check_raster(values, name="raster"):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_label_map(labels):
    """Validate a label raster; ids must be non-negative integers."""
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise ValueError(f"label map must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("label map is empty")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(np.mod(arr, 1) == 0):
            raise ValueError("label map must hold integer ids")
    arr = arr.astype(np.int64, copy=False)
    if arr.min() < 0:
        raise ValueError("label ids must be non-negative")
    return arr


def check_same_shape(*arrays):
    shapes = {np.shape(a)[:2] for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"dimension mismatch: {sorted(shapes)}")


def check_binary(bits, name="edge map"):
    arr = np.asarray(bits)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError(f"{name} must be binary")
    return arr.astype(np.uint8, copy=False)
