"""Per-(hypothesis, pixel) data term for hypothesis selection.

Cost volumes are float arrays shaped ``(K, H, W)``; slice ``i`` belongs to
hypothesis ``i`` of the segmentation volume (0-based).
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._validation import check_binary, check_label_map, check_planes, check_same_shape
from .edges import segment_boundaries

PENALTY_MODES = ("direct", "paper_literal")


def edge_cost(labels, e_s, e_r):
    """Boundary/reference-edge disagreement, one value per segment.

    For segment j: ``sum |E_S - E_R| / max(1, sum E_R)`` over its pixels,
    broadcast back to every pixel of the segment.
    """
    labels = check_label_map(labels)
    e_s = check_binary(e_s, "E_S")
    e_r = check_binary(e_r, "E_R")
    check_same_shape(labels, e_s, e_r)
    flat = labels.ravel()
    n = int(flat.max()) + 1
    xor = np.bincount(flat, weights=(e_s != e_r).ravel(), minlength=n)
    ref = np.bincount(flat, weights=e_r.ravel().astype(np.float64), minlength=n)
    per_segment = xor / np.maximum(1.0, ref)
    return per_segment[labels]


@dataclass
class SegmentMeanTable:
    """Mean of each plane per segment, for every hypothesis."""

    means: list  # means[i] has shape (m_i, 3)
    labels: list

    def __len__(self):
        return len(self.means)

    def pixel_means(self, i):
        """``(H, W, 3)`` raster of the mean colour of each pixel's segment in hypothesis ``i``."""
        return self.means[i][self.labels[i]]


def segment_means(volume, planes):
    planes = check_planes(planes)
    labels = [check_label_map(lm) for lm in volume]
    check_same_shape(planes, *labels)
    means = []
    flat_planes = planes.reshape(-1, 3)
    for lm in labels:
        flat = lm.ravel()
        n = int(flat.max()) + 1
        counts = np.bincount(flat, minlength=n).astype(np.float64)
        sums = np.stack([np.bincount(flat, weights=flat_planes[:, k], minlength=n)
                         for k in range(3)], axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            means.append(sums / counts[:, None])
    return SegmentMeanTable(means, labels)


def stability_cost(table, i):
    """Sum over planes of ``|2 mu_i - mu_{i-1} - mu_{i+1}|`` at every pixel.

    Neighbours past either end of the volume repeat the end slice.
    """
    k = len(table)
    if not 0 <= i < k:
        raise IndexError(f"hypothesis index {i} outside 0..{k - 1}")
    mu = table.pixel_means(i)
    prev = table.pixel_means(max(i - 1, 0))
    nxt = table.pixel_means(min(i + 1, k - 1))
    return np.abs(2.0 * mu - prev - nxt).sum(axis=2)


def edge_cost_volume(volume, e_r):
    return np.stack([edge_cost(lm, segment_boundaries(lm), e_r) for lm in volume])


def stability_cost_volume(volume, planes):
    table = segment_means(volume, planes)
    return np.stack([stability_cost(table, i) for i in range(len(table))])


def _minmax(v):
    lo, hi = v.min(), v.max()
    if hi <= lo:
        return np.zeros_like(v, dtype=np.float64)
    return (v - lo) / (hi - lo)


def penalize_normalize(raw, mode="direct"):
    """Turn a raw cost volume into a [0, 1] penalty volume.

    ``direct`` min-max normalises the raw cost over the whole volume.
    ``paper_literal`` first replaces the cost by ``max(raw) - raw``.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise ValueError("cost volume contains non-finite values")
    if mode == "direct":
        return _minmax(raw)
    if mode == "paper_literal":
        return _minmax(raw.max() - raw)
    raise ValueError(f"penalty mode must be one of {PENALTY_MODES}")


@dataclass(frozen=True)
class CostWeights:
    omega_c: float
    omega_e: float
    h_c: float
    h_e: float


def normalized_entropy(values, bins=64):
    """Histogram entropy over [0, 1], divided by log(number of occupied bins).

    Returns 0 when fewer than two bins are occupied.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    v = np.asarray(values, dtype=np.float64).ravel()
    idx = np.minimum((np.clip(v, 0.0, 1.0) * bins).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    counts = counts[counts > 0]
    if counts.size < 2:
        return 0.0
    p = counts / v.size
    return float(-(p * np.log(p)).sum() / np.log(counts.size))


def entropy_weights(psi_c, psi_e, bins=64):
    """Confidence weights for the stability and edge penalties.

    Note the cross assignment: the edge weight is driven by the stability
    entropy and vice versa.
    """
    h_c = normalized_entropy(psi_c, bins)
    h_e = normalized_entropy(psi_e, bins)
    denom = (1.0 - h_e) + (1.0 - h_c)
    if denom <= 0.0:
        return CostWeights(0.5, 0.5, h_c, h_e)
    omega_e = (1.0 - h_c) / denom
    return CostWeights(1.0 - omega_e, omega_e, h_c, h_e)


def data_term(psi_c, psi_e, weights, median_size=5):
    """Weighted penalty sum, median-filtered slice by slice (edge-replicated)."""
    psi_c = np.asarray(psi_c, dtype=np.float64)
    psi_e = np.asarray(psi_e, dtype=np.float64)
    if psi_c.shape != psi_e.shape:
        raise ValueError("penalty volumes differ in shape")
    combined = weights.omega_c * psi_c + weights.omega_e * psi_e
    if median_size <= 1:
        return combined
    return ndimage.median_filter(combined, size=(1, median_size, median_size), mode="nearest")
