"""segvol command line: run, eval, render."""

import argparse
import logging
import sys
from pathlib import Path

from . import pipeline
from .io import array_digest, ensure_dir, read_image, read_label_png, write_rgb
from .metrics import read_seg_file
from .pipeline import PipelineConfig, PipelineError

log = logging.getLogger("segvol")

# CLI flag -> flat config key
_FLAG_KEYS = {
    "kernel": "kernel",
    "k": "k",
    "param_min": "param_min",
    "param_max": "param_max",
    "connectivity": "connectivity",
    "ms_spatial": "ms_spatial",
    "edge_detector": "edge_detector",
    "edge_map": "edge_map",
    "edge_threshold": "edge_threshold",
    "edge_high_percentile": "edge_high_percentile",
    "penalty": "penalty",
    "lam": "lbp_lambda",
    "lbp_iters": "lbp_iters",
    "lbp_tol": "lbp_tol",
    "min_segment_size": "min_segment_size",
    "workers": "workers",
    "smoother_range": "smoother_range",
    "no_smooth": "smooth",
}


def _add_pipeline_flags(p):
    p.add_argument("--config", type=Path, help="flat 'key = value' configuration file")
    p.add_argument("--kernel", choices=["fh", "ms"])
    p.add_argument("--k", type=int, help="number of hypotheses")
    p.add_argument("--param-min", type=float)
    p.add_argument("--param-max", type=float)
    p.add_argument("--connectivity", type=int, choices=[4, 8])
    p.add_argument("--ms-spatial", type=float, help="mean-shift spatial bandwidth")
    p.add_argument("--edge-detector", choices=["gradient", "file"])
    p.add_argument("--edge-map", type=str)
    p.add_argument("--edge-threshold", type=float)
    p.add_argument("--edge-high-percentile", type=float)
    p.add_argument("--penalty", choices=["direct", "paper-literal"])
    p.add_argument("--lambda", dest="lam", type=float, help="pairwise LBP weight")
    p.add_argument("--lbp-iters", type=int)
    p.add_argument("--lbp-tol", type=float)
    p.add_argument("--min-segment-size", type=int)
    p.add_argument("--smoother-range", choices=["unit", "byte"])
    p.add_argument("--no-smooth", action="store_true", default=None,
                   help="skip the denoising step")
    p.add_argument("--workers", type=int)


def build_config(args):
    flat = {}
    if getattr(args, "config", None):
        flat.update(pipeline.read_config_file(args.config))
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is None:
            continue
        if attr == "no_smooth":
            value = not value
        if attr == "penalty":
            value = value.replace("-", "_")
        flat[key] = value
    return PipelineConfig.from_flat(flat)


def _load_gts(paths):
    gts = []
    for p in paths:
        p = Path(p)
        gts.append(read_seg_file(p) if p.suffix == ".seg" else read_label_png(p))
    return gts


def cmd_run(args):
    cfg = build_config(args)
    img = read_image(args.input)
    gts = _load_gts(args.gt) if args.gt else None
    art = pipeline.run_pipeline(img, cfg, gts=gts, trace_energy=args.energy_trace)
    out = ensure_dir(args.out)
    pipeline.write_artifacts(art, out, cfg, dump_costs=args.dump_costs,
                             image_hash=array_digest(img))
    pipeline.write_config_file(out / "config.txt", cfg)
    print(f"{args.input}: {int(art.labels.max()) + 1} segments -> {out}")
    if art.fused_report is not None:
        r = art.fused_report
        print(f"BDE {r.bde:.4f}  PRI {r.pri:.4f}  VOI {r.voi:.4f}  COV {r.cov:.4f}")
    return 0


def cmd_eval(args):
    cfg = build_config(args)
    ids = args.ids.split(",") if args.ids else None
    timing = Path(args.out).with_suffix(".timing.jsonl")
    rows = pipeline.evaluate_dataset(args.images, args.gt, cfg, out_csv=args.out,
                                     image_ids=ids, timing_log=timing)
    for row in rows:
        if row["kind"] == "dataset" and row["method"] == "fused":
            print(f"fused: BDE {float(row['bde']):.4f}  PRI {float(row['pri']):.4f}  "
                  f"VOI {float(row['voi']):.4f}  COV {float(row['cov']):.4f}  ({row['note']})")
    print(f"report written to {args.out}")
    return 0


def cmd_render(args):
    labels = read_label_png(args.labels)
    img = read_image(args.image)
    planes = pipeline.preprocess(img, PipelineConfig(smooth=not args.smoothed_colors))
    if planes.shape[:2] != labels.shape:
        raise ValueError("label map and image differ in size")
    write_rgb(args.out, pipeline.render_mean_color(labels, planes))
    return 0


def make_parser():
    parser = argparse.ArgumentParser(prog="segvol", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="segment one image")
    run.add_argument("--input", required=True, type=Path)
    run.add_argument("--out", required=True, type=Path)
    run.add_argument("--gt", nargs="*", help="ground-truth .seg or label PNG files to score against")
    run.add_argument("--dump-costs", action="store_true")
    run.add_argument("--energy-trace", action="store_true",
                     help="write the per-iteration LBP energy to energy_trace.csv")
    _add_pipeline_flags(run)
    run.set_defaults(func=cmd_run)

    ev = sub.add_parser("eval", help="evaluate on an image directory with ground truth")
    ev.add_argument("--images", required=True, type=Path)
    ev.add_argument("--gt", required=True, type=Path)
    ev.add_argument("--out", required=True, type=Path)
    ev.add_argument("--ids", help="comma-separated subset of image ids")
    _add_pipeline_flags(ev)
    ev.set_defaults(func=cmd_eval)

    rd = sub.add_parser("render", help="mean-colour visualisation of a label map")
    rd.add_argument("--labels", required=True, type=Path)
    rd.add_argument("--image", required=True, type=Path)
    rd.add_argument("--out", required=True, type=Path)
    rd.add_argument("--smoothed-colors", action="store_true",
                    help="average the denoised colours instead of the raw ones")
    rd.set_defaults(func=cmd_render)
    return parser


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"segvol: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"segvol: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
