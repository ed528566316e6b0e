"""Segmentation kernels and the parameter-swept hypothesis volume.

Two kernels are provided: Felzenszwalb-Huttenlocher graph merging (``"fh"``,
swept over the merge threshold kappa) and joint spatial-range mean shift
(``"ms"``, swept over the range bandwidth).
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from ._validation import check_planes
from .io import ensure_dir, read_label_png, write_label_png
from .labels import _find, _roots_to_labels, _union

KERNELS = ("fh", "ms")

# origin-relative offsets, in tie-break order
_FH_OFFSETS = {
    4: ((0, 1), (1, 0)),
    8: ((0, 1), (1, 0), (1, 1), (1, -1)),
}

DEFAULT_SCHEDULES = {
    "fh": (100.0, 6000.0),
    "ms": (4.0, 32.0),
}
DEFAULT_K = 20
DEFAULT_MS_SPATIAL = 8.0


@dataclass(frozen=True)
class HypothesisParams:
    kernel: str
    value: float
    index: int

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if not self.value > 0:
            raise ValueError("kernel parameter must be > 0")


@dataclass
class SegmentationVolume:
    """Ordered hypotheses, finest (index 0) to coarsest."""

    params: list
    labels: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.params) != len(self.labels):
            raise ValueError("params and labels differ in length")
        if not self.labels:
            raise ValueError("a volume needs at least one hypothesis")
        shapes = {lm.shape for lm in self.labels}
        if len(shapes) != 1:
            raise ValueError(f"hypotheses disagree on lattice size: {shapes}")

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        return self.labels[i]

    def __iter__(self):
        return iter(self.labels)

    @property
    def shape(self):
        return self.labels[0].shape

    @property
    def segment_counts(self):
        return [int(lm.max()) + 1 for lm in self.labels]

    def stack(self):
        return np.stack(self.labels)


# ---------------------------------------------------------------- FH kernel


def grid_edges(planes, connectivity=8):
    """Grid edges sorted by weight; ties keep (row, col, direction) order.

    Returns ``(a, b, w)``: endpoint flat indices and Euclidean colour distance.
    """
    planes = check_planes(planes)
    if connectivity not in _FH_OFFSETS:
        raise ValueError("connectivity must be 4 or 8")
    h, w, _ = planes.shape
    idx = np.arange(h * w).reshape(h, w)
    offsets = _FH_OFFSETS[connectivity]
    nd = len(offsets)
    src = np.full((h, w, nd), -1, dtype=np.int64)
    dst = np.full((h, w, nd), -1, dtype=np.int64)
    wt = np.zeros((h, w, nd))
    for d, (dr, dc) in enumerate(offsets):
        r0, r1 = 0, h - dr
        c0, c1 = max(0, -dc), w - max(0, dc)
        if r1 <= r0 or c1 <= c0:
            continue
        p = planes[r0:r1, c0:c1]
        q = planes[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
        diff = p - q
        sq = diff[..., 0] * diff[..., 0] + diff[..., 1] * diff[..., 1] + diff[..., 2] * diff[..., 2]
        wt[r0:r1, c0:c1, d] = np.sqrt(sq)
        src[r0:r1, c0:c1, d] = idx[r0:r1, c0:c1]
        dst[r0:r1, c0:c1, d] = idx[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
    valid = src.ravel() >= 0
    a, b, wt = src.ravel()[valid], dst.ravel()[valid], wt.ravel()[valid]
    order = np.argsort(wt, kind="stable")
    return a[order], b[order], wt[order]


@numba.njit(cache=True, nogil=True)
def _fh_merge(n, a, b, w, kappa):
    parent = np.arange(n)
    rank = np.zeros(n, dtype=np.int32)
    size = np.ones(n, dtype=np.int64)
    thresh = np.full(n, kappa)
    for e in range(a.shape[0]):
        ra = _find(parent, a[e])
        rb = _find(parent, b[e])
        if ra == rb:
            continue
        if w[e] <= thresh[ra] and w[e] <= thresh[rb]:
            root = _union(parent, rank, ra, rb)
            size[root] = size[ra] + size[rb]
            # edges arrive in ascending order, so w[e] is the new internal max
            thresh[root] = w[e] + kappa / size[root]
    return _roots_to_labels(parent)


def fh_segment(planes, kappa, connectivity=8, edges=None):
    """Graph-based segmentation with merge threshold ``kappa``.

    No minimum-size post-merge is applied. ``edges`` may carry a precomputed
    :func:`grid_edges` result for the same planes.
    """
    if not kappa > 0:
        raise ValueError("kappa must be > 0")
    planes = check_planes(planes)
    h, w, _ = planes.shape
    if edges is None:
        edges = grid_edges(planes, connectivity)
    a, b, wt = edges
    flat, _ = _fh_merge(h * w, a, b, wt, float(kappa))
    return flat.reshape(h, w)


# ---------------------------------------------------------------- MS kernel


@numba.njit(cache=True, nogil=True)
def _ms_modes(planes, hs, hr, max_iter, tol):
    h, w, nc = planes.shape
    modes = np.empty((h, w, 5))
    hs2 = hs * hs
    hr2 = hr * hr
    tol2 = tol * tol
    for r in range(h):
        for c in range(w):
            y = float(r)
            x = float(c)
            v0 = planes[r, c, 0]
            v1 = planes[r, c, 1]
            v2 = planes[r, c, 2]
            for _ in range(max_iter):
                r0 = max(0, int(math.ceil(y - hs)))
                r1 = min(h - 1, int(math.floor(y + hs)))
                c0 = max(0, int(math.ceil(x - hs)))
                c1 = min(w - 1, int(math.floor(x + hs)))
                n = 0
                sy = 0.0
                sx = 0.0
                s0 = 0.0
                s1 = 0.0
                s2 = 0.0
                for qr in range(r0, r1 + 1):
                    for qc in range(c0, c1 + 1):
                        ds = (qr - y) * (qr - y) + (qc - x) * (qc - x)
                        if ds > hs2:
                            continue
                        d0 = planes[qr, qc, 0] - v0
                        d1 = planes[qr, qc, 1] - v1
                        d2 = planes[qr, qc, 2] - v2
                        if d0 * d0 + d1 * d1 + d2 * d2 > hr2:
                            continue
                        n += 1
                        sy += qr
                        sx += qc
                        s0 += planes[qr, qc, 0]
                        s1 += planes[qr, qc, 1]
                        s2 += planes[qr, qc, 2]
                if n == 0:
                    break
                ny = sy / n
                nx = sx / n
                n0 = s0 / n
                n1 = s1 / n
                n2 = s2 / n
                shift = ((ny - y) * (ny - y) + (nx - x) * (nx - x) + (n0 - v0) * (n0 - v0)
                         + (n1 - v1) * (n1 - v1) + (n2 - v2) * (n2 - v2))
                y, x, v0, v1, v2 = ny, nx, n0, n1, n2
                if shift < tol2:
                    break
            modes[r, c, 0] = y
            modes[r, c, 1] = x
            modes[r, c, 2] = v0
            modes[r, c, 3] = v1
            modes[r, c, 4] = v2
    return modes


@numba.njit(cache=True, nogil=True)
def _group_modes(modes, hs, hr):
    h, w, _ = modes.shape
    n = h * w
    parent = np.arange(n)
    rank = np.zeros(n, dtype=np.int32)
    hs2 = hs * hs
    hr2 = hr * hr
    for r in range(h):
        for c in range(w):
            for dr, dc in ((0, 1), (1, 0)):
                qr = r + dr
                qc = c + dc
                if qr >= h or qc >= w:
                    continue
                ds = 0.0
                for k in range(2):
                    d = modes[r, c, k] - modes[qr, qc, k]
                    ds += d * d
                dg = 0.0
                for k in range(2, 5):
                    d = modes[r, c, k] - modes[qr, qc, k]
                    dg += d * d
                if ds < hs2 and dg < hr2:
                    _union(parent, rank, r * w + c, qr * w + qc)
    return _roots_to_labels(parent)


def ms_filter(planes, h_s, h_r, max_iter=50, tol=0.01):
    """Converged joint (row, col, c0, c1, c2) mode of every pixel."""
    planes = check_planes(planes)
    return _ms_modes(planes, float(h_s), float(h_r), int(max_iter), float(tol))


def ms_segment(planes, h_s, h_r, max_iter=50, tol=0.01):
    """Mean-shift filtering with flat kernels, then 4-neighbour mode grouping."""
    if not (h_s > 0 and h_r > 0):
        raise ValueError("bandwidths must be > 0")
    modes = ms_filter(planes, h_s, h_r, max_iter, tol)
    flat, _ = _group_modes(modes, float(h_s), float(h_r))
    return flat.reshape(modes.shape[:2])


# ---------------------------------------------------------------- schedule


def param_schedule(kernel, v_min, v_max, k):
    """Geometric sweep of ``k`` values from ``v_min`` to ``v_max`` (ascending)."""
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}")
    if k < 3:
        raise ValueError("a schedule needs at least 3 hypotheses")
    if not 0 < v_min < v_max:
        raise ValueError("need 0 < v_min < v_max")
    ratio = v_max / v_min
    values = [v_min * ratio ** (i / (k - 1)) for i in range(k)]
    values[0], values[-1] = float(v_min), float(v_max)
    return [HypothesisParams(kernel, float(v), i) for i, v in enumerate(values)]


def default_schedule(kernel, k=DEFAULT_K, v_min=None, v_max=None):
    lo, hi = DEFAULT_SCHEDULES[kernel]
    return param_schedule(kernel, lo if v_min is None else v_min,
                          hi if v_max is None else v_max, k)


def generate_volume(planes, schedule, connectivity=8, ms_spatial=DEFAULT_MS_SPATIAL,
                    n_jobs=1):
    """Run the kernel once per schedule entry.

    Hypotheses are independent, so ``n_jobs > 1`` evaluates them on a thread
    pool; the compiled kernels release the GIL. Output order follows the
    schedule regardless of ``n_jobs``.
    """
    planes = check_planes(planes)
    if not schedule:
        raise ValueError("empty schedule")
    values = [p.value for p in schedule]
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("schedule must be strictly ascending")
    kernels = {p.kernel for p in schedule}
    if len(kernels) != 1:
        raise ValueError("schedule mixes kernels")
    kernel = kernels.pop()

    if kernel == "fh":
        edges = grid_edges(planes, connectivity)

        def run(p):
            return fh_segment(planes, p.value, edges=edges)
    else:
        def run(p):
            return ms_segment(planes, ms_spatial, p.value)

    if n_jobs == 1:
        labels = [run(p) for p in schedule]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            labels = list(pool.map(run, schedule))
    meta = {"kernel": kernel}
    if kernel == "fh":
        meta["connectivity"] = connectivity
    else:
        meta["spatial_bandwidth"] = ms_spatial
    return SegmentationVolume(list(schedule), labels, meta)


# ---------------------------------------------------------------- on-disk cache


def save_volume(volume, directory, image_hash=""):
    """One 16-bit label PNG per hypothesis plus ``manifest.json``."""
    directory = ensure_dir(directory)
    entries = []
    for p, lm in zip(volume.params, volume.labels):
        name = f"hypothesis_{p.index:03d}.png"
        write_label_png(directory / name, lm)
        entries.append({"index": p.index, "kernel": p.kernel, "value": p.value, "file": name})
    manifest = {"image_sha256": image_hash, "meta": volume.meta, "hypotheses": entries}
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return directory / "manifest.json"


def load_volume(directory, image_hash=None):
    """Load a cached volume; returns ``None`` when the image hash does not match."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if image_hash is not None and manifest.get("image_sha256") != image_hash:
        return None
    params, labels = [], []
    for e in manifest["hypotheses"]:
        params.append(HypothesisParams(e["kernel"], e["value"], e["index"]))
        labels.append(read_label_png(directory / e["file"]))
    return SegmentationVolume(params, labels, manifest.get("meta", {}))
