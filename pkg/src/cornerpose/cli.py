"""Command-line pipeline driver.

Subcommands:

* ``extract-corners``: mesh file -> corner frame JSON.
* ``simulate``: object model -> scenario JSONL batch.
* ``estimate``: scenario JSONL -> pose JSONL, one record or ``null`` per line.
* ``evaluate``: pose + scenario JSONL -> CSV report, optional PGM overlays.
* ``render``: mesh at a pose -> PGM edge or silhouette image.

Config precedence: CLI flag > manifest file > built-in default.  A
manifest is a JSON object whose keys are the long option names with
underscores (for example {"model": "cube.obj", "tau_px": 6.0}).

Exit codes: 0 success, 1 runtime failure, 2 usage or input error.
"""

import argparse
import json
import multiprocessing
import os
import sys
from dataclasses import dataclass

import numpy as np

from .corners import detection_from_dict
from .estimator import EstimatorConfig, ObjectModel, estimate
from .geometry import (
    CameraIntrinsics,
    Pose,
    intrinsics_from_dict,
    pose_from_dict,
    pose_to_dict,
)
from .mesh import (
    ParseError,
    compute_diameter,
    extract_corners,
    frames_to_dicts,
    parse_obj,
    parse_ply,
)
from .metrics import aggregate, evaluate_pose, metric_points, summary_to_csv
from .render import Raster, pgm_bytes, render_edges, render_mask
from .simulate import (
    PERMUTATION_MODES,
    NoiseModel,
    sample_scenario,
    scenario_from_dict,
    scenario_seed,
    write_scenarios,
)

__all__ = ["RunManifest", "load_manifest", "main", "console_main"]

_SCORERS = ("reprojection", "edge_ncc")

# every key a manifest may carry, across all subcommands
_MANIFEST_KEYS = frozenset(
    {
        "model", "model_id", "scenarios", "poses", "output",
        "count", "seed", "sigma_px", "miss_rate", "outlier_rate",
        "clutter", "permutation_mode", "depth_min", "depth_max",
        "min_visible",
        "width", "height", "fx", "fy", "cx", "cy",
        "tau_px", "min_inliers", "inclusive_gate", "scorer", "blur",
        "parallel", "symmetric", "render",
        "sharp_angle_tol", "ortho_tol", "control_scale",
    }
)


class UsageError(ValueError):
    """Bad invocation or malformed input; maps to exit code 2."""


@dataclass(frozen=True)
class RunManifest:
    """Config values loaded from a JSON manifest file."""

    values: dict

    def __post_init__(self):
        unknown = set(self.values) - _MANIFEST_KEYS
        if unknown:
            raise UsageError(f"unknown manifest keys: {sorted(unknown)}")
        for key in ("model", "scenarios", "poses"):
            path = self.values.get(key)
            if path is not None and not os.path.exists(path):
                raise UsageError(f"manifest {key}: no such file: {path}")
        out = self.values.get("output")
        if out is not None:
            parent = os.path.dirname(os.path.abspath(str(out)))
            if not os.path.isdir(parent):
                raise UsageError(f"manifest output: no such directory: {parent}")

    def get(self, key, default=None):
        return self.values.get(key, default)


def load_manifest(path) -> RunManifest:
    if not os.path.exists(path):
        raise UsageError(f"no such manifest: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"manifest {path}: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"manifest {path}: expected a JSON object")
    return RunManifest(values=data)


def _resolve(cli_value, manifest, key, default):
    """CLI flag > manifest entry > default."""
    if cli_value is not None:
        return cli_value
    if manifest is not None:
        v = manifest.get(key)
        if v is not None:
            return v
    return default


def _load_mesh(path):
    if path is None:
        raise UsageError("a mesh path is required (--model or manifest 'model')")
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    low = str(path).lower()
    if low.endswith(".obj"):
        with open(path, "r", encoding="utf-8", errors="replace") as fh:
            return parse_obj(fh.read())
    if low.endswith(".ply"):
        with open(path, "rb") as fh:
            return parse_ply(fh.read())
    raise UsageError(f"unsupported mesh format (want .obj or .ply): {path}")


def _require_output(out):
    if out is None:
        raise UsageError("an output path is required (-o or manifest 'output')")
    return out


def _intrinsics(args, manifest) -> CameraIntrinsics:
    return CameraIntrinsics(
        fx=float(_resolve(args.fx, manifest, "fx", 600.0)),
        fy=float(_resolve(args.fy, manifest, "fy", 600.0)),
        cx=float(_resolve(args.cx, manifest, "cx", 319.5)),
        cy=float(_resolve(args.cy, manifest, "cy", 239.5)),
        width=int(_resolve(args.width, manifest, "width", 640)),
        height=int(_resolve(args.height, manifest, "height", 480)),
    )


def cmd_extract_corners(args) -> int:
    mesh = _load_mesh(args.mesh)
    frames = extract_corners(
        mesh,
        sharp_angle_tol=args.sharp_angle_tol,
        ortho_tol=args.ortho_tol,
    )
    if not frames:
        print("warning: no trihedral corners found", file=sys.stderr)
    with open(args.output, "w", encoding="ascii") as fh:
        json.dump(frames_to_dicts(frames), fh, separators=(",", ":"))
        fh.write("\n")
    print(f"{len(frames)} corners -> {args.output}")
    return 0


def cmd_simulate(args) -> int:
    manifest = load_manifest(args.manifest) if args.manifest else None
    mesh_path = _resolve(args.model, manifest, "model", None)
    out = _require_output(_resolve(args.output, manifest, "output", None))
    mesh = _load_mesh(mesh_path)
    model = ObjectModel.from_mesh(
        mesh, control_scale=_resolve(None, manifest, "control_scale", None)
    )
    model_id = _resolve(
        args.model_id, manifest, "model_id",
        os.path.splitext(os.path.basename(str(mesh_path)))[0],
    )
    count = int(_resolve(args.count, manifest, "count", 100))
    seed = int(_resolve(args.seed, manifest, "seed", 0))
    noise = NoiseModel(
        pixel_sigma=float(_resolve(args.sigma_px, manifest, "sigma_px", 1.0)),
        outlier_rate=float(_resolve(args.outlier_rate, manifest, "outlier_rate", 0.0)),
        miss_rate=float(_resolve(args.miss_rate, manifest, "miss_rate", 0.0)),
        permutation_flip=str(
            _resolve(args.permutation_mode, manifest, "permutation_mode", "uniform_random")
        ),
        clutter_corner_count=int(_resolve(args.clutter, manifest, "clutter", 0)),
    )
    intr = _intrinsics(args, manifest)
    depth_range = (
        float(_resolve(args.depth_min, manifest, "depth_min", 4.0)),
        float(_resolve(args.depth_max, manifest, "depth_max", 8.0)),
    )
    min_visible = int(_resolve(args.min_visible, manifest, "min_visible", 2))
    scenarios = [
        sample_scenario(
            model, model_id, intr, noise,
            seed=scenario_seed(seed, i),
            depth_range=depth_range,
            min_visible=min_visible,
        )
        for i in range(count)
    ]
    write_scenarios(out, scenarios)
    n_det = sum(len(s.detections) for s in scenarios)
    print(f"{len(scenarios)} scenarios, {n_det} detections -> {out}")
    return 0


# worker state for estimate; set once per process via the pool initializer
_WORKER = None


def _init_estimate_worker(model, config, blur):
    global _WORKER
    _WORKER = (model, config, blur)


def _estimate_record(record) -> str:
    model, config, blur = _WORKER
    detections = tuple(detection_from_dict(d) for d in record["detections"])
    intr = intrinsics_from_dict(record["intrinsics"])
    edges = None
    if config.scorer == "edge_ncc":
        # stand-in for a query image: edges rendered at ground truth
        edges = render_edges(model.mesh, pose_from_dict(record["gt_pose"]), intr, blur=blur)
    best = estimate(model, detections, intr, config, edges)
    if best is None:
        return "null"
    payload = {
        "pose": pose_to_dict(best.pose),
        "score": best.score,
        "inliers": best.inlier_count,
        "assignment": [
            [m.corner_index, m.detection_index, m.symmetry.json_name]
            for m in best.assignment
        ],
    }
    return json.dumps(payload, separators=(",", ":"), sort_keys=True)


def _read_records(path, need_gt: bool) -> list:
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    records = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise UsageError(f"{path}:{lineno}: {exc}") from None
            if not isinstance(rec, dict) or "detections" not in rec or "intrinsics" not in rec:
                raise UsageError(
                    f"{path}:{lineno}: scenario records need 'detections' and 'intrinsics'"
                )
            if need_gt and "gt_pose" not in rec:
                raise UsageError(
                    f"{path}:{lineno}: edge_ncc scoring needs 'gt_pose' in each record"
                )
            records.append(rec)
    return records


def cmd_estimate(args) -> int:
    manifest = load_manifest(args.manifest) if args.manifest else None
    scenarios_path = _resolve(args.scenarios, manifest, "scenarios", None)
    if scenarios_path is None:
        raise UsageError("a scenario file is required")
    mesh_path = _resolve(args.model, manifest, "model", None)
    out = _require_output(_resolve(args.output, manifest, "output", None))
    scorer = str(_resolve(args.scorer, manifest, "scorer", "reprojection"))
    if scorer not in _SCORERS:
        raise UsageError(f"scorer must be one of {_SCORERS}")
    config = EstimatorConfig(
        inlier_px_threshold=float(_resolve(args.tau_px, manifest, "tau_px", 8.0)),
        min_inliers=int(_resolve(args.min_inliers, manifest, "min_inliers", 1)),
        scorer=scorer,
        inclusive_gate=bool(
            _resolve(args.inclusive_gate, manifest, "inclusive_gate", False)
        ),
    )
    blur = bool(_resolve(args.blur, manifest, "blur", False))
    parallel = int(_resolve(args.parallel, manifest, "parallel", 1))
    if parallel < 1:
        raise UsageError("--parallel must be at least 1")
    mesh = _load_mesh(mesh_path)
    model = ObjectModel.from_mesh(
        mesh, control_scale=_resolve(None, manifest, "control_scale", None)
    )
    records = _read_records(scenarios_path, need_gt=(scorer == "edge_ncc"))
    if parallel > 1:
        with multiprocessing.Pool(
            parallel, initializer=_init_estimate_worker, initargs=(model, config, blur)
        ) as pool:
            lines = list(pool.imap(_estimate_record, records))
    else:
        _init_estimate_worker(model, config, blur)
        lines = [_estimate_record(r) for r in records]
    with open(out, "w", encoding="ascii") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")
    n_found = sum(1 for ln in lines if ln != "null")
    print(f"{n_found}/{len(lines)} poses -> {out}")
    return 0


def _read_pose_lines(path) -> list:
    if not os.path.exists(path):
        raise UsageError(f"no such file: {path}")
    out = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise UsageError(f"{path}:{lineno}: {exc}") from None
            if rec is None:
                out.append(None)
            elif isinstance(rec, dict) and "pose" in rec:
                out.append(pose_from_dict(rec["pose"]))
            else:
                raise UsageError(f"{path}:{lineno}: expected null or a pose record")
    return out


def cmd_evaluate(args) -> int:
    manifest = load_manifest(args.manifest) if args.manifest else None
    poses_path = _resolve(args.poses, manifest, "poses", None)
    scenarios_path = _resolve(args.scenarios, manifest, "scenarios", None)
    if poses_path is None or scenarios_path is None:
        raise UsageError("pose and scenario files are required")
    mesh_path = _resolve(args.model, manifest, "model", None)
    out = _require_output(_resolve(args.output, manifest, "output", None))
    symmetric = bool(_resolve(args.symmetric, manifest, "symmetric", False))
    render_dir = _resolve(args.render, manifest, "render", None)
    mesh = _load_mesh(mesh_path)
    diameter = compute_diameter(mesh)
    poses = _read_pose_lines(poses_path)
    raw = _read_records(scenarios_path, need_gt=True)
    if len(poses) != len(raw):
        raise UsageError(
            f"record count mismatch: {len(poses)} poses vs {len(raw)} scenarios"
        )
    scenarios = [scenario_from_dict(r) for r in raw]
    pts = metric_points(mesh)
    groups: dict = {}
    for est, scn in zip(poses, scenarios):
        rec = evaluate_pose(
            mesh, diameter, est, scn.gt_pose, scn.intrinsics,
            symmetric=symmetric, points=pts,
        )
        groups.setdefault(scn.model_id, []).append(rec)
    csv_text = summary_to_csv(aggregate(groups))
    with open(out, "w", encoding="ascii") as fh:
        fh.write(csv_text)
    sys.stdout.write(csv_text)
    if render_dir is not None:
        os.makedirs(str(render_dir), exist_ok=True)
        for i, (est, scn) in enumerate(zip(poses, scenarios)):
            gt_img = render_edges(mesh, scn.gt_pose, scn.intrinsics)
            values = 0.4 * gt_img.values
            if est is not None:
                values = values + 0.6 * render_edges(mesh, est, scn.intrinsics).values
            overlay = Raster(
                width=scn.intrinsics.width,
                height=scn.intrinsics.height,
                values=np.clip(values, 0.0, 1.0),
            )
            name = os.path.join(str(render_dir), f"overlay_{i:04d}.pgm")
            with open(name, "wb") as fh:
                fh.write(pgm_bytes(overlay))
    return 0


def cmd_render(args) -> int:
    mesh = _load_mesh(args.mesh)
    intr = _intrinsics(args, None)
    if args.pose is not None:
        if not os.path.exists(args.pose):
            raise UsageError(f"no such file: {args.pose}")
        with open(args.pose, "r", encoding="ascii") as fh:
            pose = pose_from_dict(json.load(fh))
    else:
        # default view: object centered on the optical axis at 4 diameters
        centroid = mesh.vertices.mean(axis=0)
        pose = Pose(
            np.eye(3), np.array([0.0, 0.0, 4.0 * compute_diameter(mesh)]) - centroid
        )
    if args.mask:
        raster = render_mask(mesh, pose, intr)
    else:
        raster = render_edges(mesh, pose, intr, blur=bool(args.blur))
    with open(args.output, "wb") as fh:
        fh.write(pgm_bytes(raster))
    print(f"{int(np.count_nonzero(raster.values))} lit pixels -> {args.output}")
    return 0


def _add_camera_flags(p):
    p.add_argument("--width", type=int, help="frame width in px (default 640)")
    p.add_argument("--height", type=int, help="frame height in px (default 480)")
    p.add_argument("--fx", type=float, help="focal length x (default 600)")
    p.add_argument("--fy", type=float, help="focal length y (default 600)")
    p.add_argument("--cx", type=float, help="principal point x (default 319.5)")
    p.add_argument("--cy", type=float, help="principal point y (default 239.5)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cornerpose",
        description="Corner-based 6D pose estimation pipeline.",
        epilog="Config precedence: CLI flag > manifest file > built-in default.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-corners", help="find trihedral corners in a mesh")
    p.add_argument("mesh", help="OBJ or PLY mesh file")
    p.add_argument("-o", "--output", required=True, help="corner JSON output path")
    p.add_argument("--sharp-angle-tol", type=float, default=0.35,
                   help="dihedral deviation above which an edge is sharp (rad)")
    p.add_argument("--ortho-tol", type=float, default=0.17,
                   help="allowed deviation of edge pairs from 90 degrees (rad)")
    p.set_defaults(func=cmd_extract_corners)

    p = sub.add_parser("simulate", help="generate a seeded scenario batch")
    p.add_argument("--manifest", help="JSON manifest file")
    p.add_argument("--model", help="OBJ or PLY mesh file")
    p.add_argument("--model-id", help="group label for evaluation (default: mesh basename)")
    p.add_argument("-o", "--output", help="scenario JSONL output path")
    p.add_argument("--count", type=int, help="number of scenarios (default 100)")
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    p.add_argument("--sigma-px", type=float, help="detection noise sigma in px (default 1.0)")
    p.add_argument("--miss-rate", type=float, help="chance a visible corner is dropped")
    p.add_argument("--outlier-rate", type=float,
                   help="target clutter fraction of the detection set")
    p.add_argument("--clutter", type=int, help="unconditional extra clutter detections")
    p.add_argument("--permutation-mode", choices=PERMUTATION_MODES,
                   help="corner relabeling mode (default uniform_random)")
    p.add_argument("--depth-min", type=float, help="min depth in diameters (default 4)")
    p.add_argument("--depth-max", type=float, help="max depth in diameters (default 8)")
    p.add_argument("--min-visible", type=int,
                   help="resample poses until this many corners are visible (default 2)")
    _add_camera_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate a pose for each scenario")
    p.add_argument("scenarios", nargs="?", help="scenario JSONL file")
    p.add_argument("--manifest", help="JSON manifest file")
    p.add_argument("--model", help="OBJ or PLY mesh file")
    p.add_argument("-o", "--output", help="pose JSONL output path")
    p.add_argument("--tau-px", type=float, help="inlier pixel threshold (default 8.0)")
    p.add_argument("--min-inliers", type=int, help="candidate gate (default 1)")
    p.add_argument("--inclusive-gate", action="store_true", default=None,
                   help="gate with count >= min-inliers instead of strict >")
    p.add_argument("--scorer", choices=_SCORERS, help="candidate scorer")
    p.add_argument("--blur", action="store_true", default=None,
                   help="blur rendered edges before edge_ncc scoring")
    p.add_argument("--parallel", type=int, metavar="N",
                   help="worker processes (default 1; output order is preserved)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("evaluate", help="score estimated poses against ground truth")
    p.add_argument("poses", nargs="?", help="pose JSONL file from 'estimate'")
    p.add_argument("scenarios", nargs="?", help="scenario JSONL file")
    p.add_argument("--manifest", help="JSON manifest file")
    p.add_argument("--model", help="OBJ or PLY mesh file")
    p.add_argument("-o", "--output", help="CSV report path")
    p.add_argument("--symmetric", action="store_true", default=None,
                   help="score with ADI (closest-point) instead of ADD")
    p.add_argument("--render", metavar="DIR",
                   help="write PGM edge overlays (ground truth + estimate) here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("render", help="render a mesh to a PGM image")
    p.add_argument("mesh", help="OBJ or PLY mesh file")
    p.add_argument("-o", "--output", required=True, help="PGM output path")
    p.add_argument("--pose", help="pose JSON file ({'R': 9 values, 't': 3})")
    p.add_argument("--mask", action="store_true", help="silhouette instead of edges")
    p.add_argument("--blur", action="store_true", help="3x3 binomial blur")
    _add_camera_flags(p)
    p.set_defaults(func=cmd_render)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failures: IO, numerics
        print(f"error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main(argv=None))
