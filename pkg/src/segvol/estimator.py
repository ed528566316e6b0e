"""scikit-learn style front end for the fusion pipeline."""

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .pipeline import PipelineConfig, render_mean_color, run_pipeline


class HypothesisFusionSegmenter(ClusterMixin, BaseEstimator):
    """Segment an RGB image by fusing a sweep of kernel segmentations.

    A kernel (``"fh"`` or ``"ms"``) is run for ``k`` geometrically spaced
    parameter values. Every pixel then picks the hypothesis whose segment
    agrees best with the reference edges and changes least across
    neighbouring hypotheses, with a linear smoothness prior solved by min-sum
    loopy belief propagation. Segments smaller than ``min_segment_size`` are
    merged into their closest-coloured neighbour.

    ``fit`` takes a single ``(H, W, 3)`` image. After fitting, ``labels_``
    holds the final label map and ``index_map_`` the chosen hypothesis
    (0-based) per pixel.

    Attributes
    ----------
    labels_ : ndarray of shape (H, W)
    index_map_ : ndarray of shape (H, W)
    volume_ : SegmentationVolume
    weights_ : CostWeights
    timings_ : dict
    """

    def __init__(self, kernel="fh", k=20, param_min=None, param_max=None,
                 connectivity=8, ms_spatial=8.0, smooth=True, smoother_sigma=0.01,
                 smoother_lambda=900.0, smoother_iterations=4, smoother_attenuation=4.0,
                 smoother_range="unit", edge_detector="gradient", edge_map=None,
                 edge_threshold=0.5, edge_high_percentile=90.0, penalty="direct",
                 entropy_bins=64, median_size=5, lbp_lambda=1e-4, lbp_iters=50,
                 lbp_tol=1e-6, min_segment_size=100, workers=1):
        self.kernel = kernel
        self.k = k
        self.param_min = param_min
        self.param_max = param_max
        self.connectivity = connectivity
        self.ms_spatial = ms_spatial
        self.smooth = smooth
        self.smoother_sigma = smoother_sigma
        self.smoother_lambda = smoother_lambda
        self.smoother_iterations = smoother_iterations
        self.smoother_attenuation = smoother_attenuation
        self.smoother_range = smoother_range
        self.edge_detector = edge_detector
        self.edge_map = edge_map
        self.edge_threshold = edge_threshold
        self.edge_high_percentile = edge_high_percentile
        self.penalty = penalty
        self.entropy_bins = entropy_bins
        self.median_size = median_size
        self.lbp_lambda = lbp_lambda
        self.lbp_iters = lbp_iters
        self.lbp_tol = lbp_tol
        self.min_segment_size = min_segment_size
        self.workers = workers

    def to_config(self):
        return PipelineConfig.from_flat(self.get_params())

    @classmethod
    def from_config(cls, cfg):
        flat = cfg.to_flat()
        flat.pop("voi_base", None)
        return cls(**flat)

    def fit(self, X, y=None, volume=None, reference_edges=None):
        """Segment ``X``.

        ``y`` is ignored. ``volume`` (a precomputed SegmentationVolume) and
        ``reference_edges`` (a binary array) skip the matching stages.
        """
        cfg = self.to_config()
        art = run_pipeline(X, cfg, volume=volume, edge_map=reference_edges)
        self.labels_ = art.labels
        self.index_map_ = art.index_map
        self.volume_ = art.volume
        self.planes_ = art.planes
        self.weights_ = art.weights
        self.data_term_ = art.data
        self.timings_ = art.timings
        self.n_segments_ = int(art.labels.max()) + 1
        return self

    def fit_predict(self, X, y=None, **fit_params):
        return self.fit(X, y, **fit_params).labels_

    def render(self):
        """Mean-colour visualisation of the fitted segmentation."""
        check_is_fitted(self, "labels_")
        return render_mean_color(self.labels_, self.planes_)

    def score(self, X, y):
        """Mean probabilistic Rand index of the segmentation of ``X`` against ``y``.

        ``y`` is one ground-truth label map or a list of them.
        """
        from .metrics import pri

        labels = self.fit_predict(X)
        gts = [y] if isinstance(y, np.ndarray) and y.ndim == 2 else y
        return pri(labels, gts)
