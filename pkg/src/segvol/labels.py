"""Label-map utilities: contiguous relabeling and connected components.

A label map is a 2-D integer array whose ids run 0..n-1 with every id used.
"""

import numba
import numpy as np

from ._validation import check_label_map


@numba.njit(cache=True, nogil=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True, nogil=True)
def _union(parent, rank, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return ra
    if rank[ra] < rank[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    if rank[ra] == rank[rb]:
        rank[ra] += 1
    return ra


@numba.njit(cache=True, nogil=True)
def _roots_to_labels(parent):
    # ids assigned in raster order of first appearance
    n = parent.shape[0]
    out = np.empty(n, dtype=np.int64)
    remap = np.full(n, -1, dtype=np.int64)
    nxt = 0
    for i in range(n):
        r = _find(parent, i)
        if remap[r] < 0:
            remap[r] = nxt
            nxt += 1
        out[i] = remap[r]
    return out, nxt


@numba.njit(cache=True, nogil=True)
def _equal_value_components(values):
    h, w = values.shape
    n = h * w
    parent = np.arange(n)
    rank = np.zeros(n, dtype=np.int32)
    for r in range(h):
        for c in range(w):
            p = r * w + c
            if c + 1 < w and values[r, c] == values[r, c + 1]:
                _union(parent, rank, p, p + 1)
            if r + 1 < h and values[r, c] == values[r + 1, c]:
                _union(parent, rank, p, p + w)
    return _roots_to_labels(parent)


def relabel_sequential(labels):
    """Map ids to 0..n-1 in raster order of first appearance."""
    labels = check_label_map(labels)
    flat = labels.ravel()
    uniq, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse].reshape(labels.shape)


def connected_components(labels):
    """Split every id into its 4-connected pieces and relabel contiguously."""
    labels = check_label_map(labels)
    flat, _ = _equal_value_components(np.ascontiguousarray(labels))
    return flat.reshape(labels.shape)


def segment_count(labels):
    return int(np.unique(labels).size)


def is_partition(labels):
    """True when ids are exactly 0..n-1, each used at least once."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return False
    uniq = np.unique(labels)
    return bool(uniq[0] == 0 and uniq[-1] == uniq.size - 1)


def is_four_connected(labels):
    labels = np.asarray(labels)
    return segment_count(connected_components(labels)) == segment_count(labels)
