"""Image segmentation by fusing a parameter sweep of segmentation hypotheses."""

from .color import LabSmoother, SmootherConfig, fgs_smooth, lab_to_rgb, rgb_to_lab, smooth_planes
from .cost import (CostWeights, SegmentMeanTable, data_term, edge_cost, entropy_weights,
                   penalize_normalize, segment_means, stability_cost)
from .edges import detect_edges, load_edge_map, segment_boundaries
from .estimator import HypothesisFusionSegmenter
from .kernels import (HypothesisParams, SegmentationVolume, fh_segment, generate_volume,
                      ms_segment, param_schedule)
from .lbp import OptimizerConfig, energy, lbp_minimize, resolve_segmentation
from .metrics import MetricReport, bde, covering, parse_seg_file, pri, voi
from .pipeline import (PipelineConfig, PipelineError, RunArtifacts, evaluate_dataset,
                       render_mean_color, run_pipeline)
from .postproc import PostprocConfig, merge_small_segments

__version__ = "0.1.0"
