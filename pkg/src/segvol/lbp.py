"""Min-sum loopy belief propagation over the hypothesis-index field."""

from dataclasses import dataclass

import numba
import numpy as np

from ._validation import check_label_map
from .labels import connected_components


@dataclass(frozen=True)
class OptimizerConfig:
    lam: float = 1e-4
    max_iterations: int = 50
    convergence_tol: float = 1e-6

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError("lambda must be >= 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be > 0")


@numba.njit(cache=True, nogil=True, inline="always")
def _send(total, excl, lam, out):
    """``out[i] = min_j h[j] + lam * |i - j|`` with ``h = total - excl``,
    shifted to minimum 0. Two passes, O(K)."""
    k = total.shape[0]
    prev = total[0] - excl[0]
    out[0] = prev
    for i in range(1, k):
        prev = min(total[i] - excl[i], prev + lam)
        out[i] = prev
    lo = prev
    for i in range(k - 2, -1, -1):
        prev = min(out[i], prev + lam)
        out[i] = prev
        lo = min(lo, prev)
    change = 0.0
    for i in range(k):
        v = out[i] - lo
        change = max(change, abs(v - out[i + k]))
        out[i] = v
    return change


# incoming-message slots, named by the side a message arrives from
_UP, _DOWN, _LEFT, _RIGHT = 0, 1, 2, 3


@numba.njit(cache=True, nogil=True)
def _sweep(d, msg, new, lam):
    """One synchronous update: read ``msg``, write ``new``, return max change.

    Slots with no sender (image border) are never written and must start at 0.
    """
    hgt, wid, k = d.shape
    total = np.empty(k)
    # scratch: first half receives the message, second half holds the old one
    buf = np.empty(2 * k)
    change = 0.0
    for r in range(hgt):
        for c in range(wid):
            for i in range(k):
                total[i] = (d[r, c, i] + msg[_UP, r, c, i] + msg[_DOWN, r, c, i]
                            + msg[_LEFT, r, c, i] + msg[_RIGHT, r, c, i])
            if r + 1 < hgt:
                buf[k:] = msg[_UP, r + 1, c]
                change = max(change, _send(total, msg[_DOWN, r, c], lam, buf))
                new[_UP, r + 1, c] = buf[:k]
            if r > 0:
                buf[k:] = msg[_DOWN, r - 1, c]
                change = max(change, _send(total, msg[_UP, r, c], lam, buf))
                new[_DOWN, r - 1, c] = buf[:k]
            if c + 1 < wid:
                buf[k:] = msg[_LEFT, r, c + 1]
                change = max(change, _send(total, msg[_RIGHT, r, c], lam, buf))
                new[_LEFT, r, c + 1] = buf[:k]
            if c > 0:
                buf[k:] = msg[_RIGHT, r, c - 1]
                change = max(change, _send(total, msg[_LEFT, r, c], lam, buf))
                new[_RIGHT, r, c - 1] = buf[:k]
    return change


@numba.njit(cache=True, nogil=True)
def _decide(d, msg):
    hgt, wid, k = d.shape
    alpha = np.empty((hgt, wid), dtype=np.int64)
    for r in range(hgt):
        for c in range(wid):
            best = 0
            best_v = np.inf
            for i in range(k):
                v = (d[r, c, i] + msg[_UP, r, c, i] + msg[_DOWN, r, c, i]
                     + msg[_LEFT, r, c, i] + msg[_RIGHT, r, c, i])
                if v < best_v:
                    best_v = v
                    best = i
            alpha[r, c] = best
    return alpha


def _check_data(d):
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 3 or d.shape[0] < 1:
        raise ValueError(f"data term must be shaped (K, H, W), got {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValueError("data term contains non-finite values")
    return d


def lbp_minimize(d, cfg=OptimizerConfig(), energy_trace=None):
    """Pick one hypothesis index per pixel.

    Synchronous min-sum updates on the 4-connected grid with pairwise cost
    ``lam * |i - j|``. Stops after ``cfg.max_iterations`` sweeps or once no
    message entry moves by ``cfg.convergence_tol`` or more. Belief ties go
    to the smaller index.

    If ``energy_trace`` is a list, the energy of the labeling after every
    sweep is appended to it.
    """
    d = _check_data(d)
    k, h, w = d.shape
    lam = float(cfg.lam)
    if lam == 0.0 or k == 1 or h * w == 1:
        # messages would stay identically zero
        return np.argmin(d, axis=0)
    dt = np.ascontiguousarray(np.moveaxis(d, 0, -1))
    msg = np.zeros((4, h, w, k))
    new = np.zeros_like(msg)
    for _ in range(cfg.max_iterations):
        change = _sweep(dt, msg, new, lam)
        msg, new = new, msg
        if energy_trace is not None:
            energy_trace.append(energy(d, _decide(dt, msg), lam))
        if change < cfg.convergence_tol:
            break
    return _decide(dt, msg)


def energy(d, alpha, lam):
    """Unary cost of the chosen slices plus ``lam`` times the summed index jumps."""
    d = np.asarray(d, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.int64)
    if alpha.shape != d.shape[1:]:
        raise ValueError("index map does not match the data term")
    unary = np.take_along_axis(d, alpha[None], axis=0).sum()
    pairwise = np.abs(np.diff(alpha, axis=0)).sum() + np.abs(np.diff(alpha, axis=1)).sum()
    return float(unary + lam * pairwise)


def resolve_segmentation(alpha, volume):
    """Turn a per-pixel hypothesis choice into a partition.

    4-neighbours end up together when they chose the same hypothesis and
    share a segment in it.
    """
    alpha = check_label_map(alpha)
    labels = [check_label_map(lm) for lm in volume]
    if alpha.max() >= len(labels):
        raise ValueError("index map refers to a hypothesis outside the volume")
    if labels[0].shape != alpha.shape:
        raise ValueError("index map and volume differ in shape")
    stack = np.stack(labels)
    chosen = np.take_along_axis(stack, alpha[None], axis=0)[0]
    key = alpha * (int(stack.max()) + 1) + chosen
    return connected_components(key)
