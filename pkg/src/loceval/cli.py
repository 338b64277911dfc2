"""Command-line surface.

Exit codes: 0 success, 1 I/O failure (missing or corrupt files), 2
validation failure (bad values, flags, annotations, or splits), 3 internal
error. ``--jobs`` defaults to the ``WSOL_EVAL_JOBS`` environment variable.
"""
from __future__ import annotations

import argparse
import datetime
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset_io import (
    read_boxes,
    read_manifest,
    read_masks,
    validate_splits,
    write_manifest,
    write_scorepack,
)
from .engine import (
    EvalConfig,
    center_baseline_maps,
    evaluate_boxes,
    evaluate_masks,
    pack_stream_factory,
)
from .errors import (
    AnnotationError,
    InvalidSigma,
    LocevalError,
    MissingScorepack,
    PackError,
    ScoreMapError,
    SearchError,
)
from .report import load_report, metric_report, to_json_bytes, write_report
from .search import (
    HyperparameterSpace,
    SearchSettings,
    kendall_tau,
    proxy_manifest,
    run_search,
)

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_INTERNAL = 3


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("WSOL_EVAL_JOBS", "1")))
    except ValueError:
        return 1


def _parse_taus(text: str) -> tuple:
    """Returns (mode, count): '1000' -> ('grid', 1000), 'exact' -> ('exact', 0)."""
    if text == "exact":
        return "exact", 0
    try:
        n = int(text)
    except ValueError:
        raise ValueError(f"--taus must be an integer or 'exact', got {text!r}") from None
    if n < 1:
        raise ValueError(f"--taus must be >= 1, got {n}")
    return "grid", n


def _parse_deltas(text: str) -> tuple:
    try:
        deltas = tuple(float(p) for p in text.split(",") if p)
    except ValueError:
        raise ValueError(f"--deltas must be comma-separated numbers, got {text!r}") from None
    if not deltas:
        raise ValueError("--deltas must name at least one value")
    return deltas


def _eval_config(args, task: str) -> EvalConfig:
    mode, count = _parse_taus(args.taus)
    return EvalConfig(
        task=task,
        normalization=args.norm,
        tau_mode=mode,
        n_taus=count if mode == "grid" else 1000,
        deltas=_parse_deltas(args.deltas),
        order=args.order,
        pxacc_tau=args.pxacc_tau,
        per_image_ap=getattr(args, "per_image_ap", False),
        jobs=args.jobs,
    )


def _provenance(args, inputs: dict) -> dict | None:
    if not getattr(args, "stamp", False):
        return None
    return {
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "inputs": {k: str(v) for k, v in inputs.items()},
        "jobs": args.jobs,
    }


def _run_evaluation(args):
    task = args.task
    cfg = _eval_config(args, task)
    manifest = read_manifest(args.manifest)
    maps = pack_stream_factory(args.scoremaps)
    if task == "boxes":
        gt = read_boxes(args.gt, manifest)
        result = evaluate_boxes(maps, gt, manifest, cfg)
    else:
        gt = read_masks(args.gt, manifest)
        result = evaluate_masks(maps, gt, manifest, cfg)
    return cfg, result


def cmd_evaluate(args) -> int:
    cfg, result = _run_evaluation(args)
    prov = _provenance(
        args, {"scoremaps": args.scoremaps, "gt": args.gt, "manifest": args.manifest}
    )
    report = metric_report(cfg, result, provenance=prov)
    write_report(report, args.out)
    primary = report["results"]["primary"]
    print(f"{args.task}: primary score {primary:.6f} -> {args.out}")
    return EXIT_OK


def cmd_curve(args) -> int:
    cfg, result = _run_evaluation(args)
    lines = []
    if args.task == "boxes":
        curve = result.curve
        deltas = sorted(curve.per_delta)
        header = "tau," + ",".join(f"boxacc@{d:g}" for d in deltas)
        lines.append(header)
        for k, tau in enumerate(curve.taus):
            row = [str(float(tau))] + [str(float(curve.per_delta[d][k])) for d in deltas]
            lines.append(",".join(row))
    else:
        curve = result.overall_curve
        lines.append("tau,precision,recall")
        for tau, p, r in zip(curve.taus, curve.precision, curve.recall):
            lines.append(f"{float(tau)},{float(p)},{float(r)}")
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"{len(lines) - 1} rows -> {args.out}")
    return EXIT_OK


def cmd_baseline(args) -> int:
    manifest = read_manifest(args.manifest)
    count = write_scorepack(center_baseline_maps(manifest, sigma=args.sigma), args.out)
    print(f"{count} center-gaussian maps (sigma={args.sigma:g}) -> {args.out}")
    return EXIT_OK


def cmd_search(args) -> int:
    space = HyperparameterSpace.from_json(args.space)
    cfg = _eval_config(args, args.task)
    settings = SearchSettings(
        task=args.task,
        val_manifest_path=Path(args.val_manifest),
        val_gt_path=Path(args.val_gt),
        test_manifest_path=Path(args.test_manifest),
        test_gt_path=Path(args.test_gt),
        eval_config=cfg,
        n_trials=args.n_trials,
        seed=args.seed,
        jobs=args.jobs,
    )
    report = run_search(space, args.trainer, settings, args.workdir)
    prov = _provenance(args, {"space": args.space, "workdir": args.workdir})
    if prov is not None:
        report["provenance"] = prov
    write_report(report, args.out)
    print(
        f"selected trial {report['selected_trial_id']} "
        f"(test score {report['test_score']:.6f}) -> {args.out}"
    )
    return EXIT_OK


def cmd_rank_compare(args) -> int:
    dir_a, dir_b = Path(args.a), Path(args.b)
    stems_a = {p.stem: p for p in sorted(dir_a.glob("*.json"))}
    stems_b = {p.stem: p for p in sorted(dir_b.glob("*.json"))}
    common = sorted(set(stems_a) & set(stems_b))
    scores_a = [float(load_report(stems_a[s])["results"]["primary"]) for s in common]
    scores_b = [float(load_report(stems_b[s])["results"]["primary"]) for s in common]
    tau = kendall_tau(scores_a, scores_b)
    out = {"n": len(common), "kendall_tau": tau}
    payload = to_json_bytes(out).decode()
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    sys.stdout.write(payload)
    return EXIT_OK


def _annotated_ids_from_boxes(path) -> set:
    """Image ids mentioned in a box file, without manifest validation;
    split validation only needs coverage, not bounds."""
    ids = set()
    with open(path, "r", encoding="utf-8") as fh:
        next(fh, None)  # header
        for line in fh:
            line = line.rstrip("\n")
            if line:
                ids.add(line.split(",", 1)[0])
    return ids


def cmd_validate(args) -> int:
    weak = read_manifest(args.train_weaksup, "train-weaksup")
    full = read_manifest(args.train_fullsup, "train-fullsup")
    test = read_manifest(args.test_fullsup, "test-fullsup")
    annotated = None
    if args.boxes:
        annotated = _annotated_ids_from_boxes(args.boxes)
    elif args.masks_root:
        root = Path(args.masks_root)
        annotated = {
            p.stem for p in list(root.glob("*.png")) + list(root.glob("*.pgm"))
        }
    report = validate_splits(weak, full, test, annotated_ids=annotated)
    payload = to_json_bytes(report.to_dict()).decode()
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    sys.stdout.write(payload)
    if not report.ok:
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_proxy(args) -> int:
    manifest = read_manifest(args.manifest)
    subset = proxy_manifest(manifest, fraction=args.fraction, seed=args.seed)
    write_manifest(subset, args.out)
    print(f"{len(subset)} of {len(manifest)} images -> {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    try:
        import uvicorn

        from .service import create_app
    except ImportError as exc:
        raise LocevalError(
            f"the service extra is not installed ({exc}); "
            "install with: pip install 'loceval[service]'"
        ) from exc
    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def _add_metric_flags(p: argparse.ArgumentParser, with_task: bool = True) -> None:
    if with_task:
        p.add_argument("--task", choices=("boxes", "masks"), required=True)
    p.add_argument("--norm", choices=("minmax", "max", "none"), default="minmax")
    p.add_argument("--taus", default="1000", help="grid size or 'exact'")
    p.add_argument("--deltas", default="0.3,0.5,0.7")
    p.add_argument(
        "--order",
        choices=("normalize-resize", "resize-normalize"),
        default="normalize-resize",
    )
    p.add_argument("--pxacc-tau", type=float, default=0.5, dest="pxacc_tau")
    p.add_argument("--jobs", type=int, default=_default_jobs())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loceval",
        description="Score-map localization metrics and benchmark harness",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="score a scorepack against ground truth")
    p.add_argument("--scoremaps", required=True)
    p.add_argument("--gt", required=True, help="box file (boxes) or mask root (masks)")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--per-image-ap", action="store_true", dest="per_image_ap")
    p.add_argument("--stamp", action="store_true", help="add provenance block")
    _add_metric_flags(p)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("curve", help="emit the full threshold curve as CSV")
    p.add_argument("--scoremaps", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_metric_flags(p)
    p.set_defaults(fn=cmd_curve)

    p = sub.add_parser("baseline", help="write a center-gaussian scorepack")
    p.add_argument("--manifest", required=True)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_baseline)

    p = sub.add_parser("search", help="random hyperparameter search around a trainer")
    p.add_argument("--space", required=True, help="search-space JSON file")
    p.add_argument("--trainer", required=True, help="command template with {trial_dir} {hparams_file}")
    p.add_argument("--val-manifest", required=True, dest="val_manifest")
    p.add_argument("--val-gt", required=True, dest="val_gt")
    p.add_argument("--test-manifest", required=True, dest="test_manifest")
    p.add_argument("--test-gt", required=True, dest="test_gt")
    p.add_argument("--workdir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-trials", type=int, default=30, dest="n_trials")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stamp", action="store_true")
    _add_metric_flags(p)
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("rank-compare", help="Kendall tau between two report directories")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_rank_compare)

    p = sub.add_parser("validate", help="check the three-split protocol")
    p.add_argument("--train-weaksup", required=True, dest="train_weaksup")
    p.add_argument("--train-fullsup", required=True, dest="train_fullsup")
    p.add_argument("--test-fullsup", required=True, dest="test_fullsup")
    p.add_argument("--boxes", help="box annotation file to check coverage against")
    p.add_argument("--masks-root", dest="masks_root", help="mask directory to check coverage against")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("proxy", help="stratified per-category manifest subsample")
    p.add_argument("--manifest", required=True)
    p.add_argument("--fraction", type=float, default=0.10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_proxy)

    p = sub.add_parser("serve", help="run the HTTP evaluation service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (PackError, MissingScorepack, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ScoreMapError, AnnotationError, InvalidSigma, SearchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except LocevalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
