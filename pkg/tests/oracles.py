"""Slow, direct reference implementations used as test oracles.

None of these import the code under test.
"""

import itertools
import math

import numpy as np


def canonical(labels):
    """Relabel by raster order of first appearance (partition identity)."""
    labels = np.asarray(labels)
    mapping = {}
    out = np.empty(labels.shape, dtype=np.int64)
    for idx, v in np.ndenumerate(labels):
        if v not in mapping:
            mapping[v] = len(mapping)
        out[idx] = mapping[v]
    return out


# ---------------------------------------------------------------- colour


def srgb_to_lab_scalar(r, g, b):
    def lin(u):
        u = u / 255.0
        return u / 12.92 if u <= 0.04045 else ((u + 0.055) / 1.055) ** 2.4

    rl, gl, bl = lin(r), lin(g), lin(b)
    x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl
    y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl
    z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl
    xn, yn, zn = 0.95047, 1.0, 1.08883

    def f(t):
        return t ** (1.0 / 3.0) if t > (6.0 / 29.0) ** 3 else t / (3 * (6.0 / 29.0) ** 2) + 4.0 / 29.0

    fx, fy, fz = f(x / xn), f(y / yn), f(z / zn)
    return 116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)


# ---------------------------------------------------------------- smoother


def dense_wls_row(f, guide, sigma, lam):
    """Solve (I + lam * L_w) u = f with a dense matrix."""
    n = len(f)
    A = np.eye(n)
    for j in range(n - 1):
        w = math.exp(-abs(guide[j + 1] - guide[j]) / sigma)
        A[j, j] += lam * w
        A[j + 1, j + 1] += lam * w
        A[j, j + 1] -= lam * w
        A[j + 1, j] -= lam * w
    return np.linalg.solve(A, np.asarray(f, dtype=float))


# ---------------------------------------------------------------- FH


def naive_fh(planes, kappa, connectivity=8):
    h, w, _ = planes.shape
    offsets = [(0, 1), (1, 0)] + ([(1, 1), (1, -1)] if connectivity == 8 else [])
    edges = []
    for r in range(h):
        for c in range(w):
            for d, (dr, dc) in enumerate(offsets):
                qr, qc = r + dr, c + dc
                if 0 <= qr < h and 0 <= qc < w:
                    diff = planes[r, c] - planes[qr, qc]
                    wt = math.sqrt(diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2])
                    edges.append((wt, r * w + c, d, qr * w + qc))
    edges.sort(key=lambda e: (e[0], e[1], e[2]))

    parent = list(range(h * w))
    size = [1] * (h * w)
    internal = [0.0] * (h * w)

    def find(x):
        while parent[x] != x:
            x = parent[x]
        return x

    for wt, a, _, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        if wt <= internal[ra] + kappa / size[ra] and wt <= internal[rb] + kappa / size[rb]:
            parent[rb] = ra
            size[ra] += size[rb]
            internal[ra] = max(internal[ra], internal[rb], wt)
    return canonical(np.array([find(i) for i in range(h * w)]).reshape(h, w))


# ---------------------------------------------------------------- mean shift


def naive_mean_shift(planes, hs, hr, max_iter=50, tol=0.01):
    h, w, _ = planes.shape
    pix = [(r, c) for r in range(h) for c in range(w)]
    modes = np.zeros((h, w, 5))
    for r, c in pix:
        y, x = float(r), float(c)
        v = [float(planes[r, c, k]) for k in range(3)]
        for _ in range(max_iter):
            n = 0
            acc = [0.0] * 5
            for qr, qc in pix:
                if (qr - y) * (qr - y) + (qc - x) * (qc - x) > hs * hs:
                    continue
                d = [planes[qr, qc, k] - v[k] for k in range(3)]
                if d[0] * d[0] + d[1] * d[1] + d[2] * d[2] > hr * hr:
                    continue
                n += 1
                acc[0] += qr
                acc[1] += qc
                for k in range(3):
                    acc[2 + k] += planes[qr, qc, k]
            if n == 0:
                break
            new = [a / n for a in acc]
            old = [y, x] + v
            shift = sum((a - b) * (a - b) for a, b in zip(new, old))
            y, x, v = new[0], new[1], new[2:]
            if shift < tol * tol:
                break
        modes[r, c] = [y, x] + v

    parent = list(range(h * w))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for r, c in pix:
        for qr, qc in ((r, c + 1), (r + 1, c)):
            if qr < h and qc < w:
                ds = sum((modes[r, c, k] - modes[qr, qc, k]) ** 2 for k in range(2))
                dg = sum((modes[r, c, k] - modes[qr, qc, k]) ** 2 for k in range(2, 5))
                if ds < hs * hs and dg < hr * hr:
                    a, b = find(r * w + c), find(qr * w + qc)
                    if a != b:
                        parent[b] = a
    return canonical(np.array([find(i) for i in range(h * w)]).reshape(h, w))


# ---------------------------------------------------------------- LBP


def chain_map(d, lam):
    """Exact MAP labelling of a chain. ``d`` has shape (K, N)."""
    k, n = d.shape
    cost = d[:, 0].astype(float).copy()
    back = np.zeros((n, k), dtype=int)
    for t in range(1, n):
        new = np.empty(k)
        for i in range(k):
            cands = [cost[j] + lam * abs(i - j) for j in range(k)]
            j = int(np.argmin(cands))
            back[t, i] = j
            new[i] = cands[j] + d[i, t]
        cost = new
    labels = np.empty(n, dtype=int)
    labels[-1] = int(np.argmin(cost))
    for t in range(n - 1, 0, -1):
        labels[t - 1] = back[t, labels[t]]
    return labels


def grid_energy(d, alpha, lam):
    k, h, w = d.shape
    e = 0.0
    for r in range(h):
        for c in range(w):
            e += d[alpha[r, c], r, c]
            if c + 1 < w:
                e += lam * abs(alpha[r, c] - alpha[r, c + 1])
            if r + 1 < h:
                e += lam * abs(alpha[r, c] - alpha[r + 1, c])
    return e


def exhaustive_min_energy(d, lam):
    k, h, w = d.shape
    best = math.inf
    for combo in itertools.product(range(k), repeat=h * w):
        e = grid_energy(d, np.array(combo).reshape(h, w), lam)
        best = min(best, e)
    return best


# ---------------------------------------------------------------- filters


def naive_median5(slice2d):
    h, w = slice2d.shape
    out = np.empty_like(slice2d)
    for r in range(h):
        for c in range(w):
            vals = []
            for dr in range(-2, 3):
                for dc in range(-2, 3):
                    rr = min(max(r + dr, 0), h - 1)
                    cc = min(max(c + dc, 0), w - 1)
                    vals.append(slice2d[rr, cc])
            vals.sort()
            out[r, c] = vals[12]
    return out


def naive_boundaries(labels):
    h, w = labels.shape
    out = np.zeros((h, w), dtype=np.uint8)
    for r in range(h):
        for c in range(w):
            for qr, qc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= qr < h and 0 <= qc < w and labels[qr, qc] != labels[r, c]:
                    out[r, c] = 1
    return out


# ---------------------------------------------------------------- metrics


def brute_rand_index(s, g):
    s, g = s.ravel(), g.ravel()
    n = s.size
    agree = 0
    for i in range(n):
        for j in range(i + 1, n):
            agree += (s[i] == s[j]) == (g[i] == g[j])
    return agree / (n * (n - 1) / 2)


def brute_voi(s, g):
    s, g = s.ravel(), g.ravel()
    n = s.size
    joint, ps, pg = {}, {}, {}
    for a, b in zip(s, g):
        joint[(a, b)] = joint.get((a, b), 0) + 1
        ps[a] = ps.get(a, 0) + 1
        pg[b] = pg.get(b, 0) + 1
    hs = -sum(c / n * math.log(c / n) for c in ps.values())
    hg = -sum(c / n * math.log(c / n) for c in pg.values())
    mi = sum(c / n * math.log((c / n) / ((ps[a] / n) * (pg[b] / n))) for (a, b), c in joint.items())
    return hs + hg - 2 * mi


def brute_covering(s, g):
    n = s.size
    total = 0.0
    for rg in np.unique(g):
        R = g == rg
        best = 0.0
        for rs in np.unique(s):
            S = s == rs
            best = max(best, (R & S).sum() / (R | S).sum())
        total += R.sum() * best
    return total / n


def brute_bde(s, g):
    bs = np.argwhere(naive_boundaries(s))
    bg = np.argwhere(naive_boundaries(g))
    if len(bs) == 0 and len(bg) == 0:
        return 0.0
    if len(bs) == 0 or len(bg) == 0:
        return math.hypot(*s.shape) / 2.0

    def directed(a, b):
        return float(np.mean([min(math.hypot(*(p - q)) for q in b) for p in a]))

    return (directed(bs, bg) + directed(bg, bs)) / 2.0
