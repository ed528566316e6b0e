"""Binary edge maps: segment boundaries and the reference edge detector."""

import numpy as np
from scipy import ndimage

from ._validation import check_label_map, check_planes
from .io import read_grayscale


def segment_boundaries(labels):
    """1 where any 4-neighbour carries a different label, else 0."""
    labels = check_label_map(labels)
    out = np.zeros(labels.shape, dtype=np.uint8)
    dh = labels[:, 1:] != labels[:, :-1]
    dv = labels[1:, :] != labels[:-1, :]
    out[:, 1:] |= dh
    out[:, :-1] |= dh
    out[1:, :] |= dv
    out[:-1, :] |= dv
    return out


def _nms(mag, gx, gy):
    """Thin gradient ridges along the quantised gradient direction.

    A pixel survives when it is strictly above its backward neighbour and
    not below its forward one, so plateaus two pixels wide keep one pixel.
    """
    h, w = mag.shape
    angle = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    sector = np.round(angle / 45.0).astype(int) % 4
    # (drow, dcol) of the forward neighbour per sector: 0, 45, 90, 135 degrees
    steps = ((0, 1), (1, 1), (1, 0), (1, -1))
    pad = np.pad(mag, 1, mode="constant")
    keep = np.zeros((h, w), dtype=bool)
    for s, (dr, dc) in enumerate(steps):
        fwd = pad[1 + dr:1 + dr + h, 1 + dc:1 + dc + w]
        bwd = pad[1 - dr:1 - dr + h, 1 - dc:1 - dc + w]
        keep |= (sector == s) & (mag > bwd) & (mag >= fwd)
    return np.where(keep, mag, 0.0)


def detect_edges(planes, high_percentile=90.0, low_ratio=0.4):
    """Gradient + non-maximum suppression + hysteresis edge map.

    Per-channel Sobel gradients; each pixel uses the channel with the largest
    magnitude. The high threshold is ``high_percentile`` of the non-zero
    suppressed magnitudes and the low threshold ``low_ratio`` times that.
    """
    planes = check_planes(planes)
    if not 0 < high_percentile <= 100:
        raise ValueError("high_percentile must lie in (0, 100]")
    gx = np.stack([ndimage.sobel(planes[..., k], axis=1, mode="nearest") for k in range(3)])
    gy = np.stack([ndimage.sobel(planes[..., k], axis=0, mode="nearest") for k in range(3)])
    mags = np.hypot(gx, gy)
    best = np.argmax(mags, axis=0)[None]
    mag = np.take_along_axis(mags, best, 0)[0]
    gx = np.take_along_axis(gx, best, 0)[0]
    gy = np.take_along_axis(gy, best, 0)[0]

    thin = _nms(mag, gx, gy)
    nz = thin[thin > 0]
    if nz.size == 0:
        return np.zeros(mag.shape, dtype=np.uint8)
    high = np.percentile(nz, high_percentile)
    low = low_ratio * high
    weak = thin >= low
    strong = thin >= high
    comp, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=bool))
    if n == 0:
        return np.zeros(mag.shape, dtype=np.uint8)
    has_strong = np.zeros(n + 1, dtype=bool)
    has_strong[comp[strong]] = True
    has_strong[0] = False
    return has_strong[comp].astype(np.uint8)


def binarize(values, threshold, max_value):
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    return (np.asarray(values) >= threshold * max_value).astype(np.uint8)


def load_edge_map(path, threshold=0.5, shape=None):
    """Read a grayscale edge-strength raster and binarise it.

    Pixels at or above ``threshold`` times the format's full scale become 1.
    """
    try:
        values, max_value = read_grayscale(path)
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot read edge map {path}: {exc}") from exc
    if shape is not None and values.shape != tuple(shape):
        raise ValueError(f"edge map {path} is {values.shape}, image is {tuple(shape)}")
    return binarize(values, threshold, max_value)
