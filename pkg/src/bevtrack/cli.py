"""Command-line entry points.

Exit codes: 0 on success, 1 when an input file fails validation, 2 on a
usage error (argparse's own convention).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .baseversion import parse_scene, read_tracking_output, write_scene, write_tracking_output
from .clear import clear_counts
from .config import load_config
from .errors import BevTrackError, MalformedDocument, SchemaViolation
from .experiments import ablation_rows, format_rows
from .geometry import COST_KINDS
from .motion_metrics import SGParams, evaluate_motion
from .synthetic import ScenarioSpec, generate_scenario
from .tracker import run_scene

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


def _read_json(path: str, what: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"{what} {path}: not valid JSON: {exc}") from exc


def _write_json(doc, path: Optional[str]) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_track(args) -> int:
    scene = parse_scene(args.input)
    cfg = load_config(args.config)
    if args.no_rv:
        cfg = cfg.with_overrides(rv_enabled=False)
    write_tracking_output(run_scene(scene, cfg), args.output, scene.scene_id)
    return EXIT_OK


def cmd_eval_motion(args) -> int:
    gt = parse_scene(args.gt)
    pred = read_tracking_output(args.pred)
    report = evaluate_motion(
        gt,
        pred,
        sg=SGParams(args.sg_window, args.sg_order),
        vde_window=args.vde_window,
        vde_max_shift=args.vde_max_shift,
        per_trajectory=args.per_trajectory,
    )
    _write_json(report.to_dict(), args.report)
    return EXIT_OK


def cmd_eval_clear(args) -> int:
    gt = parse_scene(args.gt)
    pred = read_tracking_output(args.pred)
    counts = clear_counts(gt, pred, threshold=args.threshold, from_frame=args.from_frame)
    _write_json(counts.to_dict(), args.report)
    return EXIT_OK


def cmd_generate(args) -> int:
    spec = ScenarioSpec.from_dict(_read_json(args.spec, "scenario spec"))
    gt, det = generate_scenario(spec)
    write_scene(gt, args.out_gt)
    write_scene(det, args.out_det)
    return EXIT_OK


def _parse_grid(doc) -> tuple:
    if not isinstance(doc, dict):
        raise SchemaViolation("grid: expected a JSON object")
    known = {"scenario", "seeds", "cost_kinds", "rv_enabled", "config"}
    unknown = sorted(k for k in doc if k not in known and not str(k).startswith("_"))
    if unknown:
        raise SchemaViolation(f"grid: unknown keys {unknown}")
    scenario = doc.get("scenario", {})
    seeds = doc.get("seeds", [scenario.get("seed", 0)] if isinstance(scenario, dict) else [0])
    if not isinstance(seeds, list) or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds) or not seeds:
        raise SchemaViolation("grid.seeds: expected a non-empty list of integers")
    kinds = doc.get("cost_kinds", list(COST_KINDS))
    if not isinstance(kinds, list) or not kinds or any(k not in COST_KINDS for k in kinds):
        raise SchemaViolation(f"grid.cost_kinds: expected a non-empty list drawn from {list(COST_KINDS)}")
    rv = doc.get("rv_enabled", [False, True])
    if not isinstance(rv, list) or not rv or any(not isinstance(v, bool) for v in rv):
        raise SchemaViolation("grid.rv_enabled: expected a non-empty list of booleans")
    base = ScenarioSpec.from_dict(scenario)
    specs = [ScenarioSpec.from_dict(base.to_dict() | {"seed": s}) for s in seeds]
    return specs, kinds, rv, doc.get("config")


def cmd_ablate(args) -> int:
    specs, kinds, rv, config_path = _parse_grid(_read_json(args.grid, "grid"))
    cfg = load_config(args.config or config_path)
    rows = ablation_rows(specs, cfg, kinds, rv)
    print(format_rows(rows))
    if args.out:
        _write_json({"rows": rows}, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bevtrack", description="3D multi-object tracking on BaseVersion scenes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="track a scene and write NDJSON output")
    p.add_argument("--input", required=True, help="BaseVersion scene JSON")
    p.add_argument("--config", help="tracker config JSON (default: shipped defaults)")
    p.add_argument("--output", required=True, help="tracking output NDJSON")
    p.add_argument("--no-rv", action="store_true", help="disable the image-plane stage")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval-motion", help="motion metrics of tracking output against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--report", help="report JSON path (default: stdout)")
    p.add_argument("--sg-window", type=int, default=SGParams().window)
    p.add_argument("--sg-order", type=int, default=SGParams().order)
    p.add_argument("--vde-window", type=int, default=10)
    p.add_argument("--vde-max-shift", type=int, default=10)
    p.add_argument("--per-trajectory", action="store_true", help="average trajectory means instead of samples")
    p.set_defaults(func=cmd_eval_motion)

    p = sub.add_parser("eval-clear", help="TP/FP/FN/IDSW counts of tracking output")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--threshold", type=float, default=2.0, help="centre distance in meters")
    p.add_argument("--from-frame", type=int, help="ignore frames before this index")
    p.add_argument("--report", help="report JSON path (default: stdout)")
    p.set_defaults(func=cmd_eval_clear)

    p = sub.add_parser("generate", help="synthetic ground truth and detections from a scenario spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-gt", required=True)
    p.add_argument("--out-det", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ablate", help="sweep cost kind and RV stage over synthetic scenes")
    p.add_argument("--grid", required=True)
    p.add_argument("--config", help="tracker config JSON, overrides the grid's own")
    p.add_argument("--out", help="write the rows as JSON here too")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "eval-motion":
        try:
            SGParams(args.sg_window, args.sg_order)
        except ValueError as exc:
            parser.error(str(exc))
        if args.vde_window < 3 or args.vde_max_shift < 0:
            parser.error("--vde-window must be >= 3 and --vde-max-shift >= 0")
    try:
        return args.func(args)
    except (BevTrackError, OSError) as exc:
        print(f"bevtrack {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
