"""``lesionbench`` command line.

Exit status: 0 on success, 1 when some studies of a batch failed, 2 for
invalid arguments or unreadable / incompatible inputs.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .cohort import (
    RankingConfig,
    aggregate,
    load_manifest,
    manifest_models,
    rank_models,
    stratified_kfold,
)
from .errors import LesionBenchError, MissingMetric, UnreadableFile, UnwritablePath
from .labeling import Connectivity, label_components
from .metrics import StudyMetrics, evaluate_study
from .pipeline import (
    DEFAULT_ALPHA,
    DEFAULT_BOTTOM_SLICES,
    DEFAULT_MIN_VOXELS,
    DEFAULT_THRESHOLD,
    BottomRule,
    FusionConfig,
    PostprocessConfig,
    binarize,
    fuse_softmax,
    postprocess,
)
from .report import aggregate_text, dumps, evaluation_report, ranking_dict, ranking_text
from .volume import load_volume, save_labels, save_mask, save_probability

JOBS_ENV = "LESIONBENCH_JOBS"

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ helpers

def _weights(text: str) -> RankingConfig:
    try:
        parts = [float(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected dsc,fpv,fnv weights, got {text!r}")
    try:
        return RankingConfig(*parts)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _resolve_jobs(value: int | None) -> int:
    if value is None:
        env = os.environ.get(JOBS_ENV)
        if env:
            try:
                value = int(env)
            except ValueError:
                raise UsageError(f"{JOBS_ENV}={env!r} is not an integer") from None
        else:
            value = os.cpu_count() or 1
    if value < 1:
        raise UsageError(f"--jobs must be >= 1, got {value}")
    return value


def _pp_config(args) -> PostprocessConfig:
    if args.min_voxels < 1:
        raise UsageError(f"--min-voxels must be >= 1, got {args.min_voxels}")
    if args.bottom_slices < 0:
        raise UsageError(f"--bottom-slices must be >= 0, got {args.bottom_slices}")
    return PostprocessConfig(
        min_component_voxels=args.min_voxels,
        bottom_slices=args.bottom_slices,
        conn=Connectivity(args.connectivity),
        bottom_rule=BottomRule(args.bottom_rule),
    )


def _write_text(path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise UnwritablePath(f"{path}: {exc.strerror or exc}") from exc


# ----------------------------------------------------------------- commands

def cmd_fuse(args) -> int:
    if not 0.0 <= args.alpha <= 1.0:
        raise UsageError(f"--alpha must lie in [0, 1], got {args.alpha}")
    p3d = load_volume(args.p3d, "probability")
    p2d = load_volume(args.p2d, "probability")
    save_probability(fuse_softmax(p3d, p2d, FusionConfig(args.alpha)), args.out)
    return EXIT_OK


def cmd_binarize(args) -> int:
    if not 0.0 < args.threshold < 1.0:
        raise UsageError(f"--threshold must lie in (0, 1), got {args.threshold}")
    save_mask(binarize(load_volume(args.prob, "probability"), args.threshold), args.out)
    return EXIT_OK


def cmd_postprocess(args) -> int:
    cfg = _pp_config(args)
    out = postprocess(load_volume(args.mask, "mask"), cfg)
    save_mask(out, args.out)
    if args.export_labels:
        save_labels(label_components(out, cfg.conn).labels, out.spacing, args.export_labels)
    return EXIT_OK


def _evaluate_one(task) -> dict:
    study_id, disease, gt_path, pred_path, conn, pp = task
    row = {"study_id": study_id, "disease": disease}
    try:
        if gt_path is None:
            raise UnreadableFile("no ground-truth path in manifest")
        if pred_path is None:
            raise UnreadableFile("no prediction path in manifest for this model")
        gt = load_volume(gt_path, "mask")
        pred = load_volume(pred_path, "mask")
        if pp is not None:
            pred = postprocess(pred, pp)
        m = evaluate_study(pred, gt, conn)
    except (LesionBenchError, OSError, ValueError) as exc:
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
        return row
    row.update(status="ok", **m.to_dict())
    return row


def cmd_evaluate(args) -> int:
    records = load_manifest(args.manifest)
    models = manifest_models(records)
    model = args.model
    if model is None:
        if len(models) != 1:
            raise UsageError(f"--model is required; manifest lists {models or 'no models'}")
        model = models[0]
    elif model not in models:
        raise UsageError(f"model {model!r} not in manifest columns {models}")

    conn = Connectivity(args.connectivity)
    pp = _pp_config(args) if args.postprocess else None
    jobs = _resolve_jobs(args.jobs)
    tasks = [
        (r.study_id, r.disease.value,
         str(r.gt_path) if r.gt_path else None,
         str(r.pred_paths[model]) if model in r.pred_paths else None,
         conn, pp)
        for r in records
    ]
    if jobs == 1 or len(tasks) <= 1:
        rows = [_evaluate_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            rows = list(pool.map(_evaluate_one, tasks))

    ok = [
        (r["study_id"], StudyMetrics(r["dsc"], r["fpv_ml"], r["fnv_ml"], r["gt_positive"]))
        for r in rows if r["status"] == "ok"
    ]
    agg = aggregate(ok, records, statistic=args.statistic,
                    negative_fnv_in_total=not args.exclude_negative_fnv)
    # the worker count never changes results, so it is not echoed
    config = {
        "manifest": Path(args.manifest).name,
        "model": model,
        "connectivity": int(conn),
        "postprocess": {
            "enabled": pp is not None,
            "min_component_voxels": args.min_voxels,
            "bottom_slices": args.bottom_slices,
            "bottom_rule": args.bottom_rule,
        },
        "statistic": args.statistic,
        "negative_fnv_in_total": not args.exclude_negative_fnv,
        "volume_unit": "mL",
    }
    report = evaluation_report(model, config, rows, agg)
    if args.out:
        _write_text(args.out, dumps(report))
    sys.stdout.write(dumps(report) if args.format == "json" else aggregate_text(report))
    for r in rows:
        if r["status"] != "ok":
            print(f"lesionbench: study {r['study_id']} failed: {r['error']}", file=sys.stderr)
    return EXIT_PARTIAL if report["n_failed"] else EXIT_OK


def cmd_split(args) -> int:
    if args.k < 2:
        raise UsageError(f"--k must be >= 2, got {args.k}")
    records = load_manifest(args.manifest)
    text = stratified_kfold(records, k=args.k, seed=args.seed).to_csv()
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _report_totals(path) -> tuple[str, dict]:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise UnreadableFile(f"{path}: not valid JSON ({exc})") from exc
    model = data.get("model") or Path(path).stem
    total = (data.get("aggregate") or {}).get("total") or {}
    totals = {}
    for m in ("dsc", "fpv", "fnv"):
        cell = total.get(m)
        value = cell.get("value") if isinstance(cell, dict) else cell
        if value is None:
            raise MissingMetric(f"model {model!r} ({path}) has no total {m.upper()}")
        totals[m] = value
    return model, totals


def cmd_rank(args) -> int:
    if len(args.reports) < 2:
        raise UsageError("rank needs at least two reports")
    totals = {}
    for path in args.reports:
        model, t = _report_totals(path)
        if model in totals:
            raise UsageError(f"model {model!r} appears in more than one report")
        totals[model] = t
    ranking = rank_models(totals, args.weights)
    if args.out:
        _write_text(args.out, dumps(ranking_dict(ranking)))
    sys.stdout.write(dumps(ranking_dict(ranking)) if args.format == "json" else ranking_text(ranking))
    return EXIT_OK


# ------------------------------------------------------------------- parser

def _add_postprocess_flags(p, conn_help="voxel connectivity for components"):
    p.add_argument("--min-voxels", type=int, default=DEFAULT_MIN_VOXELS,
                   help="components smaller than this many voxels are removed")
    p.add_argument("--bottom-slices", type=int, default=DEFAULT_BOTTOM_SLICES,
                   help="height of the bottom slab whose components are removed")
    p.add_argument("--bottom-rule", choices=[r.value for r in BottomRule], default=BottomRule.CONTAINED.value,
                   help="remove components contained in, or touching, the bottom slab")
    p.add_argument("--connectivity", type=int, choices=[6, 18, 26], default=18, help=conn_help)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="lesionbench",
        description="Softmax fusion, lesion-mask clean-up, component metrics and model ranking.",
        formatter_class=fmt,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("fuse", help="weight 3D and 2D probability maps", formatter_class=fmt)
    p.add_argument("p3d", help="3D model foreground probability map")
    p.add_argument("p2d", help="2D model foreground probability map")
    p.add_argument("-o", "--out", required=True, help="fused probability map")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="weight of the 3D map")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("binarize", help="threshold a probability map", formatter_class=fmt)
    p.add_argument("prob")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD,
                   help="voxels with p >= threshold become foreground")
    p.set_defaults(func=cmd_binarize)

    p = sub.add_parser("postprocess", help="remove small and bottom-slab components", formatter_class=fmt)
    p.add_argument("mask")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--export-labels", metavar="PATH",
                   help="also write the surviving components' labels (LBV1 kind 2)")
    _add_postprocess_flags(p)
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("evaluate", help="score one model over a manifest", formatter_class=fmt)
    p.add_argument("manifest")
    p.add_argument("--model", help="prediction column to score (optional if only one)")
    p.add_argument("-o", "--out", help="write the JSON report here")
    p.add_argument("--postprocess", action="store_true",
                   help="post-process predictions before scoring")
    _add_postprocess_flags(p, conn_help="voxel connectivity for FPV/FNV and post-processing")
    p.add_argument("--statistic", choices=["mean", "median"], default="mean",
                   help="per-category summary statistic")
    p.add_argument("--exclude-negative-fnv", action="store_true",
                   help="leave negative studies out of the total FNV")
    p.add_argument("--jobs", type=int, default=None,
                   help=f"worker processes (falls back to ${JOBS_ENV}, then the CPU count)")
    p.add_argument("--format", choices=["json", "text"], default="text", help="stdout format")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("split", help="stratified k-fold assignment", formatter_class=fmt)
    p.add_argument("manifest")
    p.add_argument("--k", type=int, default=5, help="number of folds")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed")
    p.add_argument("-o", "--out", help="fold CSV (stdout if omitted)")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("rank", help="rank models from evaluation reports", formatter_class=fmt)
    p.add_argument("reports", nargs="+")
    p.add_argument("--weights", type=_weights, default="0.5,0.25,0.25", metavar="DSC,FPV,FNV",
                   help="metric weights, positive and summing to 1")
    p.add_argument("-o", "--out", help="write the JSON ranking here")
    p.add_argument("--format", choices=["json", "text"], default="text", help="stdout format")
    p.set_defaults(func=cmd_rank)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"lesionbench: error: invalid argument: {exc}", file=sys.stderr)
    except LesionBenchError as exc:
        print(f"lesionbench: error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
