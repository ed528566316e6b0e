"""Segmentation benchmark measures against multiple human annotations.

All four measures take a machine label map and a list of ground-truth label
maps and return the mean over annotations.
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ._validation import check_label_map
from .edges import segment_boundaries
from .labels import relabel_sequential


def _as_gt_list(gts):
    if isinstance(gts, np.ndarray) and gts.ndim == 2:
        gts = [gts]
    gts = [check_label_map(g) for g in gts]
    if not gts:
        raise ValueError("at least one ground-truth annotation is required")
    return gts


def _check_pair(s, g):
    if s.shape != g.shape:
        raise ValueError(f"dimension mismatch: segmentation {s.shape} vs ground truth {g.shape}")


def contingency(s, g):
    """Sparse joint label histogram of two aligned label maps.

    Returns ``(si, gj, counts, size_s, size_g)``: the non-empty cells of the
    table and its row and column sums.
    """
    s = relabel_sequential(s).ravel()
    g = relabel_sequential(g).ravel()
    ng = int(g.max()) + 1
    keys, counts = np.unique(s * ng + g, return_counts=True)
    si, gj = keys // ng, keys % ng
    size_s = np.bincount(s)
    size_g = np.bincount(g)
    return si, gj, counts.astype(np.int64), size_s, size_g


def _pairs(counts):
    counts = np.asarray(counts, dtype=np.int64)
    return int((counts * (counts - 1) // 2).sum())


def rand_index(s, g):
    s, g = check_label_map(s), check_label_map(g)
    _check_pair(s, g)
    n = s.size
    if n < 2:
        return 1.0
    _, _, counts, size_s, size_g = contingency(s, g)
    # integer pair counts; only the final division is inexact
    total = n * (n - 1) // 2
    agree = total - _pairs(size_s) - _pairs(size_g) + 2 * _pairs(counts)
    return agree / total


def variation_of_information(s, g, base=math.e):
    """``H(S|G) + H(G|S)``, equal to ``H(S) + H(G) - 2 I(S; G)``."""
    s, g = check_label_map(s), check_label_map(g)
    _check_pair(s, g)
    si, gj, counts, size_s, size_g = contingency(s, g)
    n = float(s.size)
    pj = counts / n
    h_s_given_g = -(pj * np.log(counts / size_g[gj])).sum()
    h_g_given_s = -(pj * np.log(counts / size_s[si])).sum()
    voi = (h_s_given_g + h_g_given_s) / math.log(base)
    return max(0.0, float(voi))


def segmentation_covering(s, g):
    """Area-weighted best IoU of each ground-truth region by a machine region."""
    s, g = check_label_map(s), check_label_map(g)
    _check_pair(s, g)
    si, gj, counts, size_s, size_g = contingency(s, g)
    iou = counts / (size_s[si] + size_g[gj] - counts)
    best = np.zeros(size_g.size)
    np.maximum.at(best, gj, iou)
    return float((size_g * best).sum() / s.size)


def _directed_boundary_distance(a, dist_to_b):
    return float(dist_to_b[a.astype(bool)].mean())


def boundary_displacement(s, g):
    """Symmetric mean distance between the two boundary pixel sets."""
    s, g = check_label_map(s), check_label_map(g)
    _check_pair(s, g)
    bs = segment_boundaries(s).astype(bool)
    bg = segment_boundaries(g).astype(bool)
    if not bs.any() and not bg.any():
        return 0.0
    if not bs.any() or not bg.any():
        # one side has no boundary: the non-empty side pays the diagonal
        return math.hypot(*s.shape) / 2.0
    d_to_g = ndimage.distance_transform_edt(~bg)
    d_to_s = ndimage.distance_transform_edt(~bs)
    return (_directed_boundary_distance(bs, d_to_g) + _directed_boundary_distance(bg, d_to_s)) / 2.0


def _mean_over(fn, s, gts, **kw):
    s = check_label_map(s)
    gts = _as_gt_list(gts)
    return float(np.mean([fn(s, g, **kw) for g in gts]))


def pri(s, gts):
    """Probabilistic Rand index: Rand index averaged over annotations."""
    return _mean_over(rand_index, s, gts)


def voi(s, gts, base=math.e):
    return _mean_over(variation_of_information, s, gts, base=base)


def covering(s, gts):
    return _mean_over(segmentation_covering, s, gts)


def bde(s, gts):
    return _mean_over(boundary_displacement, s, gts)


@dataclass
class MetricReport:
    pri: float
    bde: float
    voi: float
    cov: float
    per_annotation: list = field(default_factory=list)

    def as_dict(self):
        return {"bde": self.bde, "pri": self.pri, "voi": self.voi, "cov": self.cov}


def evaluate(s, gts, voi_base=math.e):
    """All four measures, with one breakdown dict per annotation."""
    s = check_label_map(s)
    gts = _as_gt_list(gts)
    rows = []
    for g in gts:
        rows.append({
            "bde": boundary_displacement(s, g),
            "pri": rand_index(s, g),
            "voi": variation_of_information(s, g, base=voi_base),
            "cov": segmentation_covering(s, g),
        })
    mean = {k: float(np.mean([r[k] for r in rows])) for k in rows[0]}
    return MetricReport(mean["pri"], mean["bde"], mean["voi"], mean["cov"], rows)


# ---------------------------------------------------------------- .seg files


class SegFileError(ValueError):
    """Malformed BSDS ``.seg`` file."""


class SegHeaderError(SegFileError):
    pass


class SegRangeError(SegFileError):
    pass


class SegOverlapError(SegFileError):
    pass


class SegCoverageError(SegFileError):
    pass


_INT_RE = re.compile(r"^-?\d+$")


def parse_seg_file(content):
    """Decode a BSDS ``.seg`` run-length annotation into a label map.

    Header lines before ``data`` must include ``width``, ``height`` and
    ``segments``; each data line ``s r c1 c2`` paints label ``s`` on row ``r``
    from column ``c1`` to ``c2`` inclusive.
    """
    if isinstance(content, bytes):
        content = content.decode("ascii", errors="replace")
    lines = content.splitlines()
    header = {}
    body_start = None
    for i, line in enumerate(lines):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "data":
            body_start = i + 1
            break
        if len(parts) >= 2:
            header[parts[0]] = parts[1]
    if body_start is None:
        raise SegHeaderError("missing 'data' line")
    try:
        width = int(header["width"])
        height = int(header["height"])
        segments = int(header["segments"])
    except KeyError as exc:
        raise SegHeaderError(f"missing header field {exc.args[0]!r}") from None
    except ValueError as exc:
        raise SegHeaderError(f"bad header value: {exc}") from None
    if width < 1 or height < 1 or segments < 1:
        raise SegHeaderError("width, height and segments must be positive")

    labels = np.full((height, width), -1, dtype=np.int64)
    for lineno, line in enumerate(lines[body_start:], start=body_start + 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) != 4 or not all(_INT_RE.match(p) for p in parts):
            raise SegFileError(f"line {lineno}: expected four integers, got {line!r}")
        s, r, c1, c2 = map(int, parts)
        if not (0 <= s < segments and 0 <= r < height and 0 <= c1 <= c2 < width):
            raise SegRangeError(f"line {lineno}: run {s} {r} {c1} {c2} out of range")
        run = labels[r, c1:c2 + 1]
        if (run >= 0).any():
            raise SegOverlapError(f"line {lineno}: run overlaps an earlier run")
        run[:] = s
    if (labels < 0).any():
        r, c = np.argwhere(labels < 0)[0]
        raise SegCoverageError(f"pixel ({r}, {c}) is not covered by any run")
    return relabel_sequential(labels)


def read_seg_file(path):
    with open(path, "rb") as fh:
        return parse_seg_file(fh.read())
