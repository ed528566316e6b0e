"""Absorb undersized segments into their most similar neighbour."""

import heapq
from dataclasses import dataclass

import numpy as np

from ._validation import check_label_map, check_planes, check_same_shape
from .labels import relabel_sequential


@dataclass(frozen=True)
class PostprocConfig:
    min_size: int = 100

    def __post_init__(self):
        if self.min_size < 1:
            raise ValueError("min_size must be >= 1")


def adjacency_pairs(labels):
    """Unique unordered pairs ``(a, b)``, ``a < b``, of 4-adjacent labels."""
    pairs = []
    for x, y in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        m = x != y
        pairs.append(np.stack([np.minimum(x[m], y[m]), np.maximum(x[m], y[m])], axis=1))
    pairs = np.concatenate(pairs)
    if pairs.size == 0:
        return pairs.reshape(0, 2)
    return np.unique(pairs, axis=0)


def merge_small_segments(labels, planes, cfg=PostprocConfig()):
    """Merge segments below ``cfg.min_size`` pixels until none remain.

    The smallest segment (lowest id on ties) is merged first, into the
    adjacent segment with the nearest mean colour (lowest id on ties).
    Areas and means are updated after every merge.
    """
    labels = relabel_sequential(check_label_map(labels))
    planes = check_planes(planes)
    check_same_shape(labels, planes)
    flat = labels.ravel()
    n = int(flat.max()) + 1
    area = np.bincount(flat, minlength=n).astype(np.int64)
    sums = np.stack([np.bincount(flat, weights=planes[..., k].ravel(), minlength=n)
                     for k in range(3)], axis=1)
    if n == 1 or area.min() >= cfg.min_size:
        return labels

    neighbours = [set() for _ in range(n)]
    for a, b in adjacency_pairs(labels):
        neighbours[a].add(int(b))
        neighbours[b].add(int(a))

    owner = np.arange(n)
    alive = n
    heap = [(int(area[j]), j) for j in range(n) if area[j] < cfg.min_size]
    heapq.heapify(heap)
    while heap and alive > 1:
        size, j = heapq.heappop(heap)
        if owner[j] != j or size != area[j]:
            continue  # stale entry
        if not neighbours[j]:
            continue
        mean_j = sums[j] / area[j]
        best, best_dist = -1, np.inf
        for q in sorted(neighbours[j]):
            dist = float(np.sqrt(((sums[q] / area[q] - mean_j) ** 2).sum()))
            if dist < best_dist:
                best, best_dist = q, dist
        # j disappears into best
        owner[j] = best
        area[best] += area[j]
        sums[best] += sums[j]
        area[j] = 0
        for q in neighbours[j]:
            neighbours[q].discard(j)
            if q != best:
                neighbours[q].add(best)
                neighbours[best].add(q)
        neighbours[j] = set()
        alive -= 1
        if area[best] < cfg.min_size:
            heapq.heappush(heap, (int(area[best]), best))

    # resolve chains of absorptions
    for j in range(n):
        r = j
        while owner[r] != r:
            r = owner[r]
        owner[j] = r
    return relabel_sequential(owner[labels])
