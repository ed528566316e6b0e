"""End-to-end fusion pipeline and dataset evaluation."""

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import cost, edges, kernels, lbp, metrics, postproc
from ._validation import check_binary, check_label_map, check_planes, check_rgb_image
from .color import SmootherConfig, lab_to_rgb, rgb_to_lab, smooth_planes
from .lbp import OptimizerConfig
from .postproc import PostprocConfig
from .io import ensure_dir, read_image, read_label_png, write_gray16, write_label_png, write_rgb

log = logging.getLogger(__name__)

EDGE_DETECTORS = ("gradient", "file")


class PipelineError(RuntimeError):
    """A stage of :func:`run_pipeline` failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class PipelineConfig:
    smoother: SmootherConfig = SmootherConfig()
    smooth: bool = True
    kernel: str = "fh"
    k: int = kernels.DEFAULT_K
    param_min: float = None
    param_max: float = None
    connectivity: int = 8
    ms_spatial: float = kernels.DEFAULT_MS_SPATIAL
    edge_detector: str = "gradient"
    edge_map: str = None
    edge_threshold: float = 0.5
    edge_high_percentile: float = 90.0
    penalty: str = "direct"
    entropy_bins: int = 64
    median_size: int = 5
    optimizer: OptimizerConfig = OptimizerConfig()
    postproc: PostprocConfig = PostprocConfig()
    workers: int = 1
    voi_base: float = math.e

    def __post_init__(self):
        if self.kernel not in kernels.KERNELS:
            raise ValueError(f"kernel must be one of {kernels.KERNELS}")
        if self.k < 3:
            raise ValueError("k must be >= 3")
        if self.edge_detector not in EDGE_DETECTORS:
            raise ValueError(f"edge_detector must be one of {EDGE_DETECTORS}")
        if self.edge_detector == "file" and not self.edge_map:
            raise ValueError("edge_detector 'file' needs edge_map")
        if self.penalty not in cost.PENALTY_MODES:
            raise ValueError(f"penalty must be one of {cost.PENALTY_MODES}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def schedule(self):
        return kernels.default_schedule(self.kernel, self.k, self.param_min, self.param_max)

    # flat key/value view, shared by config files, the CLI and the estimator
    def to_flat(self):
        flat = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in _NESTED:
                _, mapping = _NESTED[f.name]
                for key, attr in mapping.items():
                    flat[key] = getattr(value, attr)
            else:
                flat[f.name] = value
        return flat

    @classmethod
    def from_flat(cls, flat):
        flat = dict(flat)
        if "lambda" in flat:
            flat["lbp_lambda"] = flat.pop("lambda")
        kwargs = {}
        known = set()
        for name, (factory, mapping) in _NESTED.items():
            sub = {attr: flat[key] for key, attr in mapping.items() if key in flat}
            known.update(mapping)
            kwargs[name] = factory(**{a: _coerce(factory, a, v) for a, v in sub.items()})
        for f in fields(cls):
            if f.name in _NESTED:
                continue
            known.add(f.name)
            if f.name in flat:
                kwargs[f.name] = _coerce(cls, f.name, flat[f.name])
        unknown = set(flat) - known
        if unknown:
            raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
        return cls(**kwargs)


_NESTED = {
    "smoother": (SmootherConfig, {
        "smoother_sigma": "sigma",
        "smoother_lambda": "lam",
        "smoother_iterations": "iterations",
        "smoother_attenuation": "attenuation",
        "smoother_range": "value_range",
    }),
    "optimizer": (OptimizerConfig, {
        "lbp_lambda": "lam",
        "lbp_iters": "max_iterations",
        "lbp_tol": "convergence_tol",
    }),
    "postproc": (PostprocConfig, {
        "min_segment_size": "min_size",
    }),
}

_TYPES = {
    (SmootherConfig, "sigma"): float, (SmootherConfig, "lam"): float,
    (SmootherConfig, "iterations"): int, (SmootherConfig, "attenuation"): float,
    (SmootherConfig, "value_range"): str,
    (OptimizerConfig, "lam"): float, (OptimizerConfig, "max_iterations"): int,
    (OptimizerConfig, "convergence_tol"): float,
    (PostprocConfig, "min_size"): int,
}
_FLAT_TYPES = {
    "smooth": bool, "kernel": str, "k": int, "param_min": float, "param_max": float,
    "connectivity": int, "ms_spatial": float, "edge_detector": str, "edge_map": str,
    "edge_threshold": float, "edge_high_percentile": float, "penalty": str,
    "entropy_bins": int, "median_size": int, "workers": int, "voi_base": float,
}


def _coerce(owner, name, value):
    typ = _TYPES.get((owner, name)) or _FLAT_TYPES.get(name)
    if isinstance(value, str) and value.strip().lower() in ("none", ""):
        return None
    if value is None or typ is None or isinstance(value, typ) and not (
            typ is int and isinstance(value, bool)):
        return value
    if isinstance(value, str):
        text = value.strip()
        if typ is bool:
            if text.lower() in ("1", "true", "yes", "on"):
                return True
            if text.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"{name}: cannot read {value!r} as a boolean")
        if name == "penalty":
            return text.replace("-", "_")
        return typ(text)
    return typ(value)


def read_config_file(path):
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    flat = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, value = line.split("=", 1)
        else:
            parts = line.split(None, 1)
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = parts
        flat[key.strip().replace("-", "_")] = value.strip()
    return flat


def write_config_file(path, cfg):
    lines = [f"{k} = {v}" for k, v in cfg.to_flat().items() if v is not None]
    Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class RunArtifacts:
    labels: np.ndarray
    index_map: np.ndarray
    volume: kernels.SegmentationVolume
    planes: np.ndarray
    reference_edges: np.ndarray
    weights: cost.CostWeights
    psi_c: np.ndarray
    psi_e: np.ndarray
    data: np.ndarray
    timings: dict = field(default_factory=dict)
    wall_time: float = 0.0
    energy_trace: list = field(default_factory=list)
    fused_report: metrics.MetricReport = None
    # raw hypotheses as handed to the optimiser, and after the same merger
    hypothesis_reports: list = None
    hypothesis_reports_postproc: list = None


class _Timer:
    def __init__(self):
        self.timings = {}

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        try:
            yield
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError(name, exc) from exc
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0


def preprocess(img, cfg):
    lab = rgb_to_lab(img)
    return smooth_planes(lab, cfg.smoother) if cfg.smooth else lab


def reference_edges(planes, cfg, edge_map=None):
    if edge_map is not None:
        e_r = check_binary(edge_map, "reference edge map")
        if e_r.shape != planes.shape[:2]:
            raise ValueError("reference edge map does not match the image size")
        return e_r
    if cfg.edge_detector == "file":
        return edges.load_edge_map(cfg.edge_map, cfg.edge_threshold, planes.shape[:2])
    return edges.detect_edges(planes, cfg.edge_high_percentile)


def run_pipeline(img, cfg=PipelineConfig(), gts=None, volume=None, edge_map=None,
                 trace_energy=False):
    """Pre-process, build hypotheses, fuse them, and merge small segments.

    ``volume`` and ``edge_map`` bypass the corresponding stages. When ground
    truth ``gts`` is supplied the fused result and every hypothesis (raw and
    after small-segment merging) are scored.
    """
    wall0 = time.perf_counter()
    timer = _Timer()
    with timer.stage("preprocess"):
        img = check_rgb_image(img)
        planes = preprocess(img, cfg)
    with timer.stage("hypotheses"):
        if volume is None:
            volume = kernels.generate_volume(planes, cfg.schedule(), cfg.connectivity,
                                             cfg.ms_spatial, n_jobs=cfg.workers)
        elif volume.shape != planes.shape[:2]:
            raise ValueError("supplied volume does not match the image size")
    with timer.stage("edges"):
        e_r = reference_edges(planes, cfg, edge_map)
    trace = [] if trace_energy else None
    with timer.stage("cost"):
        raw_e = cost.edge_cost_volume(volume, e_r)
        raw_c = cost.stability_cost_volume(volume, planes)
        psi_e = cost.penalize_normalize(raw_e, cfg.penalty)
        psi_c = cost.penalize_normalize(raw_c, cfg.penalty)
        weights = cost.entropy_weights(psi_c, psi_e, cfg.entropy_bins)
        data = cost.data_term(psi_c, psi_e, weights, cfg.median_size)
    with timer.stage("optimize"):
        alpha = lbp.lbp_minimize(data, cfg.optimizer, trace)
    with timer.stage("resolve"):
        fused = lbp.resolve_segmentation(alpha, volume)
    with timer.stage("postprocess"):
        final = postproc.merge_small_segments(fused, planes, cfg.postproc)

    art = RunArtifacts(final, alpha, volume, planes, e_r, weights, psi_c, psi_e, data,
                       energy_trace=trace or [])
    if gts is not None:
        with timer.stage("evaluate"):
            art.fused_report = metrics.evaluate(final, gts, cfg.voi_base)
            art.hypothesis_reports = [metrics.evaluate(lm, gts, cfg.voi_base) for lm in volume]
            art.hypothesis_reports_postproc = [
                metrics.evaluate(postproc.merge_small_segments(lm, planes, cfg.postproc),
                                 gts, cfg.voi_base)
                for lm in volume
            ]
    art.timings = timer.timings
    art.wall_time = time.perf_counter() - wall0
    return art


def render_mean_color(labels, planes):
    """Paint every segment with its mean Lab colour, returned as sRGB uint8."""
    labels = check_label_map(labels)
    planes = check_planes(planes)
    if labels.shape != planes.shape[:2]:
        raise ValueError("labels and planes differ in shape")
    flat = labels.ravel()
    counts = np.bincount(flat).astype(np.float64)
    counts[counts == 0] = 1.0
    means = np.stack([np.bincount(flat, weights=planes[..., k].ravel()) / counts
                      for k in range(3)], axis=1)
    return lab_to_rgb(means[labels])


def write_artifacts(art, out_dir, cfg, dump_costs=False, image_hash=""):
    """Write label PNG, mean-colour PNG, index map and a JSON-lines timing log."""
    out = ensure_dir(out_dir)
    write_label_png(out / "labels.png", art.labels)
    write_label_png(out / "index_map.png", art.index_map)
    write_rgb(out / "mean_color.png", render_mean_color(art.labels, art.planes))
    with open(out / "timing.jsonl", "w") as fh:
        for stage, seconds in art.timings.items():
            fh.write(json.dumps({"stage": stage, "seconds": seconds}) + "\n")
        fh.write(json.dumps({"stage": "total", "seconds": art.wall_time}) + "\n")
    summary = {
        "segments": int(art.labels.max()) + 1,
        "hypothesis_segments": art.volume.segment_counts,
        "hypothesis_params": [p.value for p in art.volume.params],
        "kernel": cfg.kernel,
        "omega_c": art.weights.omega_c,
        "omega_e": art.weights.omega_e,
        "entropy_c": art.weights.h_c,
        "entropy_e": art.weights.h_e,
        "image_sha256": image_hash,
    }
    if art.fused_report is not None:
        summary["fused"] = art.fused_report.as_dict()
        summary["hypotheses"] = [r.as_dict() for r in art.hypothesis_reports]
        summary["hypotheses_postproc"] = [r.as_dict() for r in art.hypothesis_reports_postproc]
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    if art.energy_trace:
        with open(out / "energy_trace.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "energy"])
            for i, e in enumerate(art.energy_trace, start=1):
                w.writerow([i, repr(e)])
    if dump_costs:
        dump_cost_volumes(art, out / "costs")


def dump_cost_volumes(art, directory):
    directory = ensure_dir(directory)
    manifest = {"slices": len(art.volume), "volumes": {}}
    for name, vol in (("psi_c", art.psi_c), ("psi_e", art.psi_e), ("data", art.data)):
        files = []
        for i, sl in enumerate(vol):
            fname = f"{name}_{i:03d}.png"
            write_gray16(directory / fname, sl)
            files.append(fname)
        manifest["volumes"][name] = {"files": files, "scale": "value = pixel / 65535"}
    manifest["weights"] = asdict(art.weights)
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2))


# ---------------------------------------------------------------- datasets

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png", ".ppm")
CSV_FIELDS = ["kind", "image", "method", "annotation", "bde", "pri", "voi", "cov",
              "segments", "note"]


def _stem_key(stem):
    return (0, int(stem), stem) if stem.isdigit() else (1, 0, stem)


def find_ground_truth(gt_dir, stem):
    """Annotation files for ``stem``: ``<stem>-*.seg|png`` or nested ``<stem>.seg``."""
    gt_dir = Path(gt_dir)
    found = sorted(p for p in gt_dir.glob(f"{stem}-*") if p.suffix in (".seg", ".png"))
    if not found:
        found = sorted(gt_dir.rglob(f"{stem}.seg"))
    return found


def load_ground_truth(path):
    path = Path(path)
    if path.suffix == ".seg":
        return metrics.read_seg_file(path)
    return read_label_png(path)


def _fmt(v):
    return repr(float(v))


def _evaluate_one(args):
    image_path, gt_paths, cfg = args
    img = read_image(image_path)
    gts = [load_ground_truth(p) for p in gt_paths]
    art = run_pipeline(img, cfg, gts=gts)
    return {
        "fused": art.fused_report,
        "segments": int(art.labels.max()) + 1,
        "hypotheses": art.hypothesis_reports,
        "hypotheses_pp": art.hypothesis_reports_postproc,
        "hyp_segments": art.volume.segment_counts,
        "hyp_params": [p.value for p in art.volume.params],
        "gt_names": [Path(p).name for p in gt_paths],
        "timings": art.timings,
        "wall": art.wall_time,
    }


def evaluate_dataset(image_dir, gt_dir, cfg=PipelineConfig(), out_csv=None,
                     image_ids=None, timing_log=None):
    """Score the pipeline on every image of ``image_dir`` that has ground truth.

    Rows are returned (and written to ``out_csv`` when given) in image-id
    order. ``kind`` is one of ``annotation``, ``image``, ``hypothesis``,
    ``hypothesis_postproc``, ``skipped`` or ``dataset``. Images are distributed over ``cfg.workers``
    processes; results do not depend on the worker count.
    """
    image_dir = Path(image_dir)
    images = sorted((p for p in image_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES),
                    key=lambda p: _stem_key(p.stem)) if image_dir.is_dir() else []
    if image_ids is not None:
        wanted = {str(i) for i in image_ids}
        images = [p for p in images if p.stem in wanted]

    jobs, skipped = [], []
    for p in images:
        gt_paths = find_ground_truth(gt_dir, p.stem)
        if gt_paths:
            jobs.append((p, gt_paths))
        else:
            log.warning("no ground truth for %s; skipping", p.name)
            skipped.append(p.stem)

    # per-image runs are the parallel unit; hypotheses stay serial inside
    inner = PipelineConfig.from_flat({**cfg.to_flat(), "workers": 1})
    tasks = [(p, g, inner) for p, g in jobs]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_evaluate_one, tasks))
    else:
        results = [_evaluate_one(t) for t in tasks]

    rows = []
    per_image = {}
    for (p, _), res in zip(jobs, results):
        stem = p.stem
        per_image[stem] = res
        for name, ann in zip(res["gt_names"], res["fused"].per_annotation):
            rows.append(_row("annotation", stem, "fused", name, ann, res["segments"]))
        rows.append(_row("image", stem, "fused", "mean", res["fused"].as_dict(), res["segments"]))
        for i, rep in enumerate(res["hypotheses"]):
            rows.append(_row("hypothesis", stem, f"hypothesis_{i:03d}", "mean", rep.as_dict(),
                             res["hyp_segments"][i], note=f"param={res['hyp_params'][i]!r}"))
        for i, rep in enumerate(res["hypotheses_pp"]):
            rows.append(_row("hypothesis_postproc", stem, f"hypothesis_{i:03d}_pp", "mean",
                             rep.as_dict(), "", note=f"param={res['hyp_params'][i]!r}"))
    for stem in skipped:
        rows.append({"kind": "skipped", "image": stem, "method": "", "annotation": "",
                     "bde": "", "pri": "", "voi": "", "cov": "", "segments": "",
                     "note": "missing ground truth"})
    rows.sort(key=lambda r: _stem_key(r["image"]))
    rows.extend(_dataset_rows(per_image))

    if timing_log is not None:
        with open(timing_log, "w") as fh:
            for stem, res in per_image.items():
                fh.write(json.dumps({"image": stem, "wall": res["wall"], **res["timings"]}) + "\n")
    if out_csv is not None:
        write_report(out_csv, rows)
    return rows


def _row(kind, image, method, annotation, scores, segments, note=""):
    return {"kind": kind, "image": image, "method": method, "annotation": annotation,
            **{k: _fmt(scores[k]) for k in ("bde", "pri", "voi", "cov")},
            "segments": segments, "note": note}


def _dataset_rows(per_image):
    if not per_image:
        return []
    n = len(per_image)
    rows = []
    fused = {k: np.mean([r["fused"].as_dict()[k] for r in per_image.values()])
             for k in ("bde", "pri", "voi", "cov")}
    rows.append(_row("dataset", "ALL", "fused", "mean", fused, "", note=f"images={n}"))
    n_hyp = min(len(r["hypotheses"]) for r in per_image.values())
    for key, suffix in (("hypotheses", ""), ("hypotheses_pp", "_pp")):
        for i in range(n_hyp):
            agg = {k: np.mean([r[key][i].as_dict()[k] for r in per_image.values()])
                   for k in ("bde", "pri", "voi", "cov")}
            rows.append(_row("dataset", "ALL", f"hypothesis_{i:03d}{suffix}", "mean", agg, "",
                             note=f"images={n}"))
    return rows


def write_report(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        w.writeheader()
        w.writerows(rows)


def read_report(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
