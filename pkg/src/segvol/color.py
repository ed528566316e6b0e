"""Colour conversion and edge-preserving denoising of Lab planes."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_planes, check_raster, check_rgb_image

# sRGB primaries, D65 white
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_WHITE_D65 = _RGB_TO_XYZ.sum(axis=1)

_EPSILON = 216.0 / 24389.0
_KAPPA = 24389.0 / 27.0


def _srgb_decode(v):
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def _srgb_encode(v):
    v = np.clip(v, 0.0, 1.0)
    return np.where(v <= 0.0031308, 12.92 * v, 1.055 * v ** (1.0 / 2.4) - 0.055)


def rgb_to_lab(img):
    """Convert an 8-bit sRGB image to CIE Lab (D65). Returns ``(H, W, 3)`` float64."""
    rgb = check_rgb_image(img).astype(np.float64) / 255.0
    xyz = _srgb_decode(rgb) @ _RGB_TO_XYZ.T
    t = xyz / _WHITE_D65
    f = np.where(t > _EPSILON, np.cbrt(t), (_KAPPA * t + 16.0) / 116.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def lab_to_rgb(planes):
    """Inverse of :func:`rgb_to_lab`, clamped to the sRGB gamut, as uint8."""
    lab = np.asarray(planes, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    t = np.where(f ** 3 > _EPSILON, f ** 3, (116.0 * f - 16.0) / _KAPPA)
    xyz = t * _WHITE_D65
    rgb = _srgb_encode(xyz @ _XYZ_TO_RGB.T)
    return np.round(rgb * 255.0).astype(np.uint8)


@dataclass(frozen=True)
class SmootherConfig:
    """Fast global smoother settings.

    ``value_range`` selects the scale of the guide intensities the weights
    see: ``"unit"`` maps each plane to [0, 1], ``"byte"`` to [0, 255].
    """

    sigma: float = 0.01
    lam: float = 900.0
    iterations: int = 4
    attenuation: float = 4.0
    value_range: str = "unit"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be > 0")
        if not self.lam >= 0:
            raise ValueError("lambda must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.attenuation >= 1:
            raise ValueError("attenuation must be >= 1")
        if self.value_range not in ("unit", "byte"):
            raise ValueError("value_range must be 'unit' or 'byte'")


def lambda_schedule(cfg):
    """Per-iteration smoothing weights, largest first."""
    t = np.arange(1, cfg.iterations + 1)
    if cfg.attenuation == 1.0:
        # geometric schedule is singular here; split evenly instead
        return np.full(cfg.iterations, 1.5 * cfg.lam / cfg.iterations)
    a = float(cfg.attenuation)
    return cfg.lam * 1.5 * a ** (cfg.iterations - t) / (a ** cfg.iterations - 1.0)


def _solve_rows(f, weights, lam):
    """Solve ``(I + lam * L) u = f`` independently for every row of ``f``.

    ``weights[:, j]`` couples columns j and j+1. Thomas algorithm, vectorised
    across rows.
    """
    h, w = f.shape
    if w == 1 or lam == 0.0:
        return f.copy()
    off = -lam * weights
    diag = np.ones((h, w))
    diag[:, :-1] -= off
    diag[:, 1:] -= off
    cp = np.empty((h, w - 1))
    dp = np.empty((h, w))
    cp[:, 0] = off[:, 0] / diag[:, 0]
    dp[:, 0] = f[:, 0] / diag[:, 0]
    for j in range(1, w):
        denom = diag[:, j] - off[:, j - 1] * cp[:, j - 1]
        if j < w - 1:
            cp[:, j] = off[:, j] / denom
        dp[:, j] = (f[:, j] - off[:, j - 1] * dp[:, j - 1]) / denom
    u = np.empty((h, w))
    u[:, -1] = dp[:, -1]
    for j in range(w - 2, -1, -1):
        u[:, j] = dp[:, j] - cp[:, j] * u[:, j + 1]
    return u


def fgs_smooth(plane, cfg=SmootherConfig()):
    """Self-guided fast global smoother on one real plane.

    Each iteration runs a horizontal then a vertical 1-D weighted least
    squares solve. Neighbour weights are ``exp(-|g_p - g_q| / sigma)`` with
    ``g`` the input plane rescaled to ``cfg.value_range``.
    """
    plane = check_raster(plane, "plane")
    if cfg.lam == 0.0:
        return plane.copy()
    lo, hi = plane.min(), plane.max()
    scale = 1.0 if cfg.value_range == "unit" else 255.0
    if hi > lo:
        guide = (plane - lo) / (hi - lo) * scale
    else:
        guide = np.zeros_like(plane)
    w_h = np.exp(-np.abs(np.diff(guide, axis=1)) / cfg.sigma)
    w_v = np.exp(-np.abs(np.diff(guide, axis=0)) / cfg.sigma).T

    # working on the offset keeps constant planes exact
    u = plane - lo
    for lam_t in lambda_schedule(cfg):
        u = _solve_rows(u, w_h, lam_t)
        u = _solve_rows(u.T, w_v, lam_t).T
    return u + lo


def smooth_planes(planes, cfg=SmootherConfig()):
    planes = check_planes(planes)
    return np.stack([fgs_smooth(planes[..., k], cfg) for k in range(3)], axis=-1)


class LabSmoother(TransformerMixin, BaseEstimator):
    """RGB image -> denoised Lab planes.

    Stateless; ``fit`` only validates the parameters so the transformer can
    sit at the head of a pipeline.
    """

    def __init__(self, sigma=0.01, lam=900.0, iterations=4, attenuation=4.0,
                 value_range="unit", smooth=True):
        self.sigma = sigma
        self.lam = lam
        self.iterations = iterations
        self.attenuation = attenuation
        self.value_range = value_range
        self.smooth = smooth

    def _config(self):
        return SmootherConfig(self.sigma, self.lam, self.iterations,
                              self.attenuation, self.value_range)

    def fit(self, X, y=None):
        self.config_ = self._config()
        return self

    def transform(self, X):
        lab = rgb_to_lab(X)
        if not self.smooth:
            return lab
        return smooth_planes(lab, self._config())
