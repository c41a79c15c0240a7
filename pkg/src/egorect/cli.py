"""Command-line surface for the rectification pipeline.

Exit codes: 0 success, 1 usage error, 2 data error (missing or malformed
files, empty inputs), 3 numerical failure (degenerate geometry).  All
output files and printed JSON are deterministic for identical arguments
and seed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import exceptions as exc
from .clustering import cluster_references, load_reference_set, save_reference_set
from .frames import DepthMap, FrameBundle, NormalMap
from .geometry import pitch_rotation, roll_rotation, rotation_between
from .metrics import depth_metrics, normal_metrics, scale_align
from .dataio import normals_from_depth, read_manifest, write_manifest, write_sample, load_sample
from .rectifier import OraclePredictor, assign_mode, rectify_predict
from .clustering import ReferenceSet
from .synthetic import (
    CameraPose,
    render_view,
    scene_from_json,
    standard_intrinsics,
    standard_scene,
    standard_tilt_suite,
)
from .warp import warp_bundle

_USAGE_EXIT = 1
_DATA_EXIT = 2
_NUMERIC_EXIT = 3

_DATA_ERRORS = (
    exc.FileMissing,
    exc.FormatError,
    exc.IntrinsicsMismatch,
    exc.IoError,
    exc.EmptySample,
    exc.EmptyInput,
    exc.SchemeMismatch,
    exc.KindMismatch,
)
_NUMERIC_ERRORS = (
    exc.AntipodalInput,
    exc.NoValidPixels,
    exc.NonPositiveValue,
    exc.DegenerateInput,
    exc.AllModesInvalid,
)


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage errors exit with code 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(_USAGE_EXIT)


def _print_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _parse_angles(text: str, parser: argparse.ArgumentParser):
    try:
        return [float(a) for a in text.split(",") if a.strip() != ""]
    except ValueError:
        parser.error(f"--angles must be a comma-separated list of numbers, got {text!r}")


def _cmd_cluster_refs(args) -> int:
    manifest = read_manifest(args.manifest)
    if not manifest.records:
        raise exc.EmptyInput(f"manifest {args.manifest} has no records")
    gravities = np.array([r.gravity for r in manifest.records])
    refs = cluster_references(gravities, args.delta, args.seed)
    save_reference_set(refs, args.out)
    _print_json({"k": len(refs), "out": str(args.out)})
    return 0


def _cmd_rectify(args) -> int:
    manifest = read_manifest(args.manifest)
    refs = load_reference_set(args.refs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mode_rows = []
    records = []
    for rec in manifest.records:
        bundle = load_sample(rec)
        assignment = assign_mode(bundle.gravity, refs)
        target = refs.directions[assignment.chosen]
        r = rotation_between(bundle.gravity, target)
        warped = warp_bundle(bundle, r)
        records.append(write_sample(warped, out_dir, rec.frame_id))
        mode_rows.append(
            {
                "frame_id": rec.frame_id,
                "chosen_mode": assignment.chosen,
                "reference": [float(x) for x in target],
            }
        )
    mode_rows.sort(key=lambda row: row["frame_id"])
    (out_dir / "modes.json").write_text(
        json.dumps(mode_rows, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_manifest(records, out_dir / "manifest.jsonl")
    _print_json({"frames": len(records), "out_dir": str(out_dir)})
    return 0


def _cmd_render(args, parser) -> int:
    angles = _parse_angles(args.angles, parser)
    if args.scene is not None:
        scene_path = Path(args.scene)
        if not scene_path.exists():
            raise exc.FileMissing(f"scene file not found: {scene_path}")
        try:
            scene = scene_from_json(scene_path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as e:
            raise exc.FormatError(f"bad scene file {scene_path}: {e}") from e
    else:
        scene = standard_scene()
    k = standard_intrinsics()
    rot = pitch_rotation if args.axis == "pitch" else roll_rotation
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for a in angles:
        bundle = render_view(scene, k, CameraPose(rot(a)))
        records.append(write_sample(bundle, out_dir, f"{args.axis}_{a:g}"))
    write_manifest(records, out_dir / "manifest.jsonl")
    _print_json({"frames": len(records), "out_dir": str(out_dir)})
    return 0


def _pair_records(gt_manifest, pred_manifest):
    pred_by_id = {r.frame_id: r for r in pred_manifest.records}
    pairs = []
    for rec in gt_manifest.records:
        if rec.frame_id not in pred_by_id:
            raise exc.FormatError(f"prediction manifest lacks frame_id {rec.frame_id!r}")
        pairs.append((rec, pred_by_id[rec.frame_id]))
    return pairs


def _cmd_eval_depth(args) -> int:
    pairs = _pair_records(read_manifest(args.gt_manifest), read_manifest(args.pred_manifest))
    if not pairs:
        raise exc.EmptyInput("no frames to evaluate")
    gt_vals, pred_vals = [], []
    for gt_rec, pred_rec in pairs:
        gt = load_sample(gt_rec).depth
        pred = load_sample(pred_rec).depth
        mask = gt.valid & pred.valid
        gt_vals.append(gt.values[mask])
        pred_vals.append(pred.values[mask])
    gt_pool = np.concatenate(gt_vals)[None, :]
    pred_pool = np.concatenate(pred_vals)[None, :]
    ones = np.ones_like(gt_pool, dtype=bool)
    gt_map = DepthMap(gt_pool, ones, d_max=math.inf)
    pred_map = DepthMap(pred_pool, ones.copy(), d_max=math.inf)
    result = {}
    if args.scale_align:
        s = scale_align(gt_map, pred_map)
        pred_map = DepthMap(pred_pool * s, ones.copy(), d_max=math.inf)
        result["scale"] = s
    result.update(depth_metrics(gt_map, pred_map).to_dict())
    _print_json(result)
    return 0


def _cmd_eval_normal(args) -> int:
    pairs = _pair_records(read_manifest(args.gt_manifest), read_manifest(args.pred_manifest))
    if not pairs:
        raise exc.EmptyInput("no frames to evaluate")
    gt_vecs, pred_vecs = [], []
    for gt_rec, pred_rec in pairs:
        gt = load_sample(gt_rec).normals
        pred = load_sample(pred_rec).normals
        mask = gt.valid & pred.valid
        gt_vecs.append(gt.vectors[mask])
        pred_vecs.append(pred.vectors[mask])
    gt_pool = np.concatenate(gt_vecs)[None, :, :]
    pred_pool = np.concatenate(pred_vecs)[None, :, :]
    ones = np.ones(gt_pool.shape[:2], dtype=bool)
    result = normal_metrics(
        NormalMap(gt_pool, ones), NormalMap(pred_pool, ones.copy())
    ).to_dict()
    _print_json(result)
    return 0


def _cmd_normals_from_depth(args) -> int:
    manifest = read_manifest(args.manifest)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for rec in manifest.records:
        bundle = load_sample(rec)
        nm = normals_from_depth(bundle.depth, bundle.intrinsics)
        redone = FrameBundle(bundle.rgb, bundle.depth, nm, bundle.gravity, bundle.intrinsics)
        records.append(write_sample(redone, out_dir, rec.frame_id))
    write_manifest(records, out_dir / "manifest.jsonl")
    _print_json({"frames": len(records), "out_dir": str(out_dir)})
    return 0


def _cmd_demo_equivariance(args, parser) -> int:
    angles = _parse_angles(args.angles, parser)
    k = standard_intrinsics()
    scene = standard_scene()
    rot = pitch_rotation if args.axis == "pitch" else roll_rotation
    upright = np.array([0.0, 1.0, 0.0])
    refs = ReferenceSet(upright[None, :])
    rows = []
    for a in angles:
        pose = CameraPose(rot(a))
        bundle = render_view(scene, k, pose)
        depth_pred = rectify_predict(
            bundle, refs, OraclePredictor(scene, pose, "depth"),
            g_hat=bundle.gravity, e_hat=upright,
        )
        normal_pred = rectify_predict(
            bundle, refs, OraclePredictor(scene, pose, "normal"),
            g_hat=bundle.gravity, e_hat=upright,
        )
        dm = depth_metrics(bundle.depth, depth_pred)
        nm = normal_metrics(bundle.normals, normal_pred)
        rows.append(
            {
                "angle_deg": a,
                "abs_rel": dm.abs_rel,
                "normal_mean_deg": nm.mean_deg,
                "valid_fraction": depth_pred.valid_fraction(),
            }
        )
    _print_json({"axis": args.axis, "results": rows})
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="egorect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cluster-refs", help="cluster manifest gravities into reference directions")
    p.add_argument("--manifest", required=True)
    p.add_argument("--delta", type=float, required=True,
                   help="mean squared chordal deviation threshold")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output refs.json path")

    p = sub.add_parser("rectify", help="warp each frame to its nearest reference direction")
    p.add_argument("--manifest", required=True)
    p.add_argument("--refs", required=True, help="refs.json from cluster-refs")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("render", help="render a scene at a list of tilt angles")
    p.add_argument("--scene", default=None, help="scene JSON (default: built-in reference scene)")
    p.add_argument("--angles", required=True, help="comma-separated degrees")
    p.add_argument("--axis", choices=["roll", "pitch"], required=True)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("eval-depth", help="depth metrics between two manifests")
    p.add_argument("--gt-manifest", required=True)
    p.add_argument("--pred-manifest", required=True)
    p.add_argument("--scale-align", action="store_true",
                   help="fit a global least-squares scale to the predictions first")

    p = sub.add_parser("eval-normal", help="surface normal metrics between two manifests")
    p.add_argument("--gt-manifest", required=True)
    p.add_argument("--pred-manifest", required=True)

    p = sub.add_parser("normals-from-depth", help="rebuild normal maps from manifest depths")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("demo-equivariance",
                       help="oracle round trip on the reference scene; prints per-angle metrics")
    p.add_argument("--angles", required=True, help="comma-separated degrees")
    p.add_argument("--axis", choices=["roll", "pitch"], default="pitch")

    return parser


def dispatch(argv) -> int:
    """Parse argv, run the subcommand, and translate errors to exit codes."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "cluster-refs":
            return _cmd_cluster_refs(args)
        if args.command == "rectify":
            return _cmd_rectify(args)
        if args.command == "render":
            return _cmd_render(args, parser)
        if args.command == "eval-depth":
            return _cmd_eval_depth(args)
        if args.command == "eval-normal":
            return _cmd_eval_normal(args)
        if args.command == "normals-from-depth":
            return _cmd_normals_from_depth(args)
        if args.command == "demo-equivariance":
            return _cmd_demo_equivariance(args, parser)
    except _DATA_ERRORS as e:
        print(f"egorect: data error: {e}", file=sys.stderr)
        return _DATA_EXIT
    except _NUMERIC_ERRORS as e:
        print(f"egorect: numerical failure: {e}", file=sys.stderr)
        return _NUMERIC_EXIT
    raise AssertionError(f"unhandled command {args.command!r}")


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
