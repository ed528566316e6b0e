"""Raster file input/output (PNG, binary PPM/PGM, JPEG through Pillow)."""

import hashlib
from pathlib import Path

import numpy as np
from PIL import Image

from ._validation import check_label_map


def read_image(path):
    """Read an image file as an ``(H, W, 3)`` uint8 RGB array."""
    with Image.open(path) as im:
        if im.mode in ("I;16", "I", "F"):
            raise ValueError(f"{path}: expected an 8-bit colour or grayscale image")
        return np.array(im.convert("RGB"))


def write_rgb(path, img):
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="RGB").save(path)


def read_grayscale(path):
    """Return ``(values, max_value)``; ``max_value`` is the dtype's full scale."""
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I;16L"):
            return np.array(im).astype(np.int64), 65535
        if im.mode == "I":
            arr = np.array(im).astype(np.int64)
            return arr, 65535
        if im.mode == "1":
            return np.array(im).astype(np.int64), 1
        return np.array(im.convert("L")).astype(np.int64), 255


def write_label_png(path, labels):
    """Store a label map as 16-bit grayscale PNG."""
    labels = check_label_map(labels)
    if labels.max() > 65535:
        raise ValueError(f"{labels.max() + 1} labels do not fit a 16-bit PNG")
    Image.fromarray(labels.astype(np.uint16)).save(path)


def read_label_png(path):
    values, _ = read_grayscale(path)
    return values


def write_gray16(path, values01):
    """Quantise a [0, 1] raster to 16 bits and store it as PNG."""
    q = np.round(np.clip(values01, 0.0, 1.0) * 65535.0).astype(np.uint16)
    Image.fromarray(q).save(path)


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def array_digest(arr):
    arr = np.ascontiguousarray(arr)
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(arr.tobytes())
    return h.hexdigest()


def ensure_dir(path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
