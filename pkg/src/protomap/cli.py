"""Command-line surface: segment2d, reconstruct3d, query, eval.

Exit codes: 0 success, 2 validation error, 3 format error, 4 refiner error.
All written files are bit-reproducible for a fixed seed and fixed inputs;
wall-clock timings go to stderr only.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .errors import FormatError, RefinerError, ValidationError
from .manifest import config_for_scene, load_manifest
from .pipeline import evaluate2d, evaluate3d, query, reconstruct3d, segment2d


def _add_common_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", choices=["small", "large", "spatial"], help="named parameter bundle")
    p.add_argument("--d", type=int, help="shared token grid size")
    p.add_argument("--k", type=int, help="number of prototypes")
    p.add_argument("--cr", type=int, help="reduced feature dimension")
    p.add_argument("--voxel", type=float, help="voxel size in metres")
    p.add_argument("--tau", type=float, help="similarity threshold in [0,1]")
    p.add_argument("--seed", type=int, help="clustering seed")
    p.add_argument("--depth-min", type=float, help="minimum usable depth (metres)")
    p.add_argument("--depth-max", type=float, help="maximum usable depth (metres)")
    p.add_argument("--refiner", help="external refiner command (subprocess protocol)")


def _config_overrides(args) -> dict:
    return {
        "d": args.d,
        "k": args.k,
        "c_r": args.cr,
        "v": args.voxel,
        "tau": args.tau,
        "seed": args.seed,
        "depth_min": getattr(args, "depth_min", None),
        "depth_max": getattr(args, "depth_max", None),
        "refiner": getattr(args, "refiner", None),
    }


def _select_prompts(scene, pos_names, neg_names) -> None:
    """Re-role the manifest's named prompts according to CLI selections.

    With no selection the manifest roles stand. Selected names must exist.
    """
    if pos_names is None and neg_names is None:
        return
    by_name = {p.name: p for p in scene.prompts}
    missing = [n for n in (pos_names or []) + (neg_names or []) if n not in by_name]
    if missing:
        raise ValidationError(f"prompts not defined in manifest: {missing}")
    selected = []
    for n in pos_names or []:
        by_name[n].role = "positive"
        selected.append(by_name[n])
    for n in neg_names or []:
        by_name[n].role = "negative"
        selected.append(by_name[n])
    scene.prompts = selected


def _cmd_segment2d(args) -> int:
    scene = load_manifest(args.manifest)
    _select_prompts(scene, args.prompts_pos, args.prompts_neg)
    config = config_for_scene(scene, args.preset, **_config_overrides(args))
    result = segment2d(scene, config, args.out)
    print(f"wrote {result.outputs['mask']}")
    if result.metrics is not None:
        m = result.metrics
        print(
            f"segment2d: iou={m.iou * 100:.2f} fsc={m.fsc * 100:.2f} "
            f"pre={m.pre * 100:.2f} rec={m.rec * 100:.2f}"
        )
    print(f"seconds={result.timings['total']:.3f}", file=sys.stderr)
    return 0


def _cmd_reconstruct3d(args) -> int:
    scene = load_manifest(args.manifest)
    config = config_for_scene(scene, args.preset, **_config_overrides(args))
    result = reconstruct3d(scene, config, args.out)
    for i in result.frames_skipped:
        print(f"warning: frame {i} skipped (no usable depth)", file=sys.stderr)
    print(f"wrote {result.outputs['ply']} ({result.grid.n_cells} cells)")
    print(f"seconds={result.seconds:.3f}", file=sys.stderr)
    return 0


def _cmd_query(args) -> int:
    meta = Path(args.grid)
    if meta.is_dir():
        meta = meta / "grid_meta.json"
    t0 = time.perf_counter()
    result = query(meta, args.prompts_pos or [], args.prompts_neg or [], args.tau, args.out)
    print(f"wrote {result.outputs['ply']} ({int(result.labels.sum())}/{result.labels.shape[0]} labeled)")
    print(f"seconds={time.perf_counter() - t0:.3f}", file=sys.stderr)
    return 0


def _cmd_eval(args) -> int:
    t0 = time.perf_counter()
    if args.mode == "2d":
        if not args.pred or not args.gt:
            raise ValidationError("eval 2d needs --pred and --gt mask images")
        result = evaluate2d(args.pred, args.gt, args.out)
    else:
        needed = [args.pred_points, args.pred_labels, args.gt_points, args.gt_labels]
        if any(x is None for x in needed):
            raise ValidationError(
                "eval 3d needs --pred-points, --pred-labels, --gt-points and --gt-labels"
            )
        result = evaluate3d(
            args.pred_points,
            args.pred_labels,
            args.gt_points,
            args.gt_labels,
            k=args.k if args.k is not None else 5,
            out_dir=args.out,
        )
    print(result.report_line)
    print(f"seconds={time.perf_counter() - t0:.3f}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protomap",
        description="Open-vocabulary segmentation and 3D semantic mapping from frozen-encoder tokens.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment2d", help="single-frame segmentation from a scene manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--prompts-pos", nargs="+", help="manifest prompt names to use as positives")
    p.add_argument("--prompts-neg", nargs="+", help="manifest prompt names to use as negatives")
    _add_common_config_flags(p)
    p.set_defaults(fn=_cmd_segment2d)

    p = sub.add_parser("reconstruct3d", help="multi-view voxel grid from a scene manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    _add_common_config_flags(p)
    p.set_defaults(fn=_cmd_reconstruct3d)

    p = sub.add_parser("query", help="language query against a stored voxel grid")
    p.add_argument("--grid", required=True, help="grid_meta.json or the directory holding it")
    p.add_argument("--out", required=True)
    p.add_argument("--prompts-pos", nargs="+", help="positive prompt embedding files (.otf)")
    p.add_argument("--prompts-neg", nargs="+", help="negative prompt embedding files (.otf)")
    p.add_argument("--tau", type=float, default=0.5)
    p.set_defaults(fn=_cmd_query)

    p = sub.add_parser("eval", help="score a prediction against ground truth")
    p.add_argument("--mode", choices=["2d", "3d"], required=True)
    p.add_argument("--pred", help="predicted mask PNG (2d)")
    p.add_argument("--gt", help="ground-truth mask PNG (2d)")
    p.add_argument("--pred-points", help="predicted points PLY (3d)")
    p.add_argument("--pred-labels", help="predicted labels OTF (3d)")
    p.add_argument("--gt-points", help="ground-truth points PLY (3d)")
    p.add_argument("--gt-labels", help="ground-truth labels OTF (3d)")
    p.add_argument("--k", type=int, help="neighbours for label projection (default 5)")
    p.add_argument("--out", help="optional report directory")
    p.set_defaults(fn=_cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except RefinerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
