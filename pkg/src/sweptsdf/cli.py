"""Command line: swept-volume fields, planning, benchmarks and renders.

Exit codes: 0 ok, 1 bad usage, 2 some field cells failed, 3 no path (or the
start/goal pose is blocked), 4 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from typing import Any, Optional, Sequence

import numpy as np

from . import io as sio
from .cases import FIELD_CASES, FieldCase, planner_robot
from .errors import PlanningError, SceneParseError, ShapeValidationError
from .geometry import Shape
from .planner import MapSpec, PlannerConfig, Scene, build_masks, failure_report, plan, random_scene, report_json
from .render import overlay_svg
from .svsdf import (GridSpec, GsipConfig, brute_force_svsdf, field_to_pgm, load_field, save_field,
                    svsdf_grid)
from .sweep import SweepProblem

EXIT_OK, EXIT_USAGE, EXIT_FIELD_FAILURES, EXIT_NO_PATH, EXIT_IO = 0, 1, 2, 3, 4

log = logging.getLogger("sweptsdf")

_PLANNER_KEYS = {f.name for f in fields(PlannerConfig)}
_GSIP_KEYS = {f.name for f in fields(GsipConfig)}
_MAP_KEYS = {f.name for f in fields(MapSpec)}
_EXTRA_KEYS = {"time_samples", "csv_step"}
SETTING_KEYS = _PLANNER_KEYS | _GSIP_KEYS | _MAP_KEYS | _EXTRA_KEYS


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors get their own exit code
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _setting(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    key = key.strip()
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    if key not in SETTING_KEYS:
        raise argparse.ArgumentTypeError(f"unknown setting {key!r}")
    return key, value.strip()


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _grid(text: str) -> GridSpec:
    try:
        x0, y0, cell, nx, ny = text.split(",")
        return GridSpec((float(x0), float(y0)), float(cell), int(nx), int(ny))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected x0,y0,cell,nx,ny ({e})") from e


# ---------------------------------------------------------------------------
# settings
# ---------------------------------------------------------------------------


def _coerce(value: str, like: Any):
    if isinstance(like, bool):
        if value.lower() not in ("1", "0", "true", "false", "on", "off", "yes", "no"):
            raise UsageError(f"expected a boolean, got {value!r}")
        return value.lower() in ("1", "true", "on", "yes")
    if isinstance(like, int):
        return int(value)
    if like is None and value.lower() == "none":
        return None
    return float(value)


def _apply(obj, keys: set[str], settings: dict[str, str]):
    kw = {}
    for k, v in settings.items():
        if k in keys:
            try:
                kw[k] = _coerce(v, getattr(obj, k))
            except ValueError as e:
                raise UsageError(f"bad value for {k}: {v!r}") from e
    try:
        return replace(obj, **kw) if kw else obj
    except ValueError as e:
        raise UsageError(str(e)) from e


def planner_config(settings: dict[str, str]) -> PlannerConfig:
    return _apply(PlannerConfig(), _PLANNER_KEYS, settings)


def gsip_config(settings: dict[str, str]) -> GsipConfig:
    return _apply(GsipConfig(), _GSIP_KEYS, settings)


def map_spec(settings: dict[str, str]) -> MapSpec:
    return _apply(MapSpec(), _MAP_KEYS, settings)


def _extra(settings: dict[str, str], key: str, default):
    if key not in settings:
        return default
    try:
        return type(default)(settings[key])
    except ValueError as e:
        raise UsageError(f"bad value for {key}: {settings[key]!r}") from e


# ---------------------------------------------------------------------------
# svsdf-grid / oracle
# ---------------------------------------------------------------------------


def field_case(args) -> FieldCase:
    """Built-in case, or shape + motion files on a grid."""
    if args.case:
        case = FIELD_CASES[args.case]()
        if args.grid is not None:
            case = FieldCase(case.name, case.problem, args.grid, case.exact)
        return case
    if not (args.shape and args.motion and args.grid):
        raise UsageError("give --case, or all of --shape, --motion and --grid")
    problem = SweepProblem(sio.load_shape(args.shape), sio.load_motion(args.motion))
    return FieldCase("custom", problem, args.grid)


def cmd_svsdf_grid(args, settings: dict[str, str]) -> int:
    case = field_case(args)
    cfg = gsip_config(settings)
    os.makedirs(args.out, exist_ok=True)
    res = svsdf_grid(case.problem, cfg, case.grid, warm_start=args.warm_start, workers=args.workers)
    save_field(os.path.join(args.out, "svsdf.f32"), res.values, case.grid)
    field_to_pgm(os.path.join(args.out, "svsdf.pgm"), res.values)
    ok = ~res.failed
    summary = {"case": case.name, "cells": int(res.values.size), "failed_cells": res.n_failed,
               "warm_start": bool(args.warm_start), "wall_time_s": res.wall_time,
               "mean_iterations": float(res.iterations[ok].mean()) if ok.any() else None,
               "gsip": {k: getattr(cfg, k) for k in sorted(_GSIP_KEYS)}}
    if case.exact is not None:
        err = np.abs(res.values - case.exact(case.grid.centers()))[ok]
        summary["max_abs_error_vs_closed_form"] = float(err.max()) if err.size else None
    if res.n_failed:
        iy, ix = np.nonzero(res.failed)
        summary["failures"] = [{"ix": int(a), "iy": int(b), "status": int(res.status[b, a])}
                               for a, b in zip(ix, iy)]
    sio.save_json(summary, os.path.join(args.out, "svsdf_summary.json"))
    print(f"{case.name}: {res.values.size} cells, {res.n_failed} failed, {res.wall_time:.2f} s")
    return EXIT_FIELD_FAILURES if res.n_failed else EXIT_OK


def cmd_oracle(args, settings: dict[str, str]) -> int:
    case = field_case(args)
    samples = _extra(settings, "time_samples", 10000)
    if samples < 1000:
        raise UsageError("time_samples must be >= 1000")
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    ref = brute_force_svsdf(case.problem, case.grid, samples)
    save_field(os.path.join(args.out, "oracle.f32"), ref, case.grid)
    field_to_pgm(os.path.join(args.out, "oracle.pgm"), ref)
    print(f"{case.name}: brute-force field with {samples} time samples in {time.perf_counter() - t0:.2f} s")
    return EXIT_OK


# ---------------------------------------------------------------------------
# plan
# ---------------------------------------------------------------------------


def _robot(path: Optional[str]) -> Shape:
    return sio.load_shape(path) if path else planner_robot()


def _scene(args, settings: dict[str, str]) -> Scene:
    if args.scene:
        return sio.load_scene(args.scene)
    return random_scene(args.seed, map_spec(settings))


def cmd_plan(args, settings: dict[str, str]) -> int:
    cfg = planner_config(settings)
    scene = _scene(args, settings)
    shape = _robot(args.shape)
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    try:
        res = plan(scene, shape, cfg, use_midend=not args.no_midend, use_backend=not args.no_backend,
                   warm_start=args.warm_start)
    except PlanningError as e:
        report = failure_report(f"{type(e).__name__}: {e}", 1e3 * (time.perf_counter() - t0))
        with open(os.path.join(args.out, "report.json"), "w") as f:
            f.write(report_json(report) + "\n")
        print(f"no path: {e}", file=sys.stderr)
        return EXIT_NO_PATH
    report = res.report
    res.trajectory.save_csv(os.path.join(args.out, "trajectory.csv"), _extra(settings, "csv_step", 0.05))
    sio.save_trajectory(res.trajectory, os.path.join(args.out, "trajectory.json"))
    with open(os.path.join(args.out, "report.json"), "w") as f:
        f.write(report_json(report) + "\n")
    svg = overlay_svg(scene, shape, res.astar.nodes, res.initial, res.trajectory)
    with open(os.path.join(args.out, "overlay.svg"), "w") as f:
        f.write(svg)
    clearance = report["min_clearance"]
    print(f"success={report['success']} cca_pass={report['cca_pass']} "
          f"min_clearance={'inf' if clearance is None else f'{clearance:.4f}'} "
          f"backend={report['status']['backend']}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

TRIAL_FIELDS = ("shape", "seed", "success", "cca_pass", "min_clearance", "planner_min_g", "wall_time_ms",
                "midend_status", "backend_status", "error")


def run_trial(seed: int, shape: Shape, shape_name: str, cfg: PlannerConfig, spec: MapSpec,
              use_midend: bool = True, use_backend: bool = True, warm_start: bool = True,
              masks=None) -> dict[str, Any]:
    """One seeded random map; failures come back as rows, never as exceptions."""
    t0 = time.perf_counter()
    row: dict[str, Any] = {"shape": shape_name, "seed": seed}
    try:
        scene = random_scene(seed, spec)
        res = plan(scene, shape, cfg, use_midend=use_midend, use_backend=use_backend,
                   warm_start=warm_start, masks=masks)
        r = res.report
        row.update(success=r["success"], cca_pass=r["cca_pass"], min_clearance=r["min_clearance"],
                   planner_min_g=r["planner_min_g"], wall_time_ms=r["wall_time_ms"],
                   midend_status=r["status"]["midend"], backend_status=r["status"]["backend"], error="")
    except Exception as e:  # a trial must not abort the batch
        row.update(success=False, cca_pass=False, min_clearance=None, planner_min_g=None,
                   wall_time_ms=1e3 * (time.perf_counter() - t0), midend_status="skipped",
                   backend_status="skipped", error=f"{type(e).__name__}: {e}")
    return row


def _trial_job(job):
    seed, shape_dict, name, cfg, spec, flags = job
    return run_trial(seed, Shape.from_dict(shape_dict), name, cfg, spec, *flags)


def summarize(rows: Sequence[dict[str, Any]]) -> dict[str, Any]:
    n = len(rows)
    clear = [r["min_clearance"] for r in rows if r["min_clearance"] is not None]
    return {"trials": n,
            "success_rate": sum(bool(r["success"]) for r in rows) / n if n else None,
            "cca_success_rate": sum(bool(r["cca_pass"]) for r in rows) / n if n else None,
            "false_positives": sum(bool(r["success"]) and not r["cca_pass"] for r in rows),
            "failed_trials": sum(bool(r["error"]) for r in rows),
            "mean_min_clearance": float(np.mean(clear)) if clear else None,
            "mean_wall_time_ms": float(np.mean([r["wall_time_ms"] for r in rows])) if n else None}


def run_bench(shapes: Sequence[tuple[str, Shape]], seeds: Sequence[int], cfg: PlannerConfig, spec: MapSpec,
              use_midend: bool = True, use_backend: bool = True, warm_start: bool = True,
              workers: int = 1) -> tuple[list[dict[str, Any]], dict[str, dict[str, Any]]]:
    """Rows ordered by (shape, seed) whatever the worker count, and one
    summary per shape."""
    flags = (use_midend, use_backend, warm_start)
    rows: list[dict[str, Any]] = []
    if workers <= 1:
        for name, shape in shapes:
            masks = build_masks(shape, spec.cell_size, cfg.yaw_channels)
            rows.extend(run_trial(s, shape, name, cfg, spec, *flags, masks=masks) for s in seeds)
    else:
        jobs = [(s, shape.to_dict(), name, cfg, spec, flags) for name, shape in shapes for s in seeds]
        with ProcessPoolExecutor(workers) as ex:
            rows = list(ex.map(_trial_job, jobs))
    summary = {name: summarize([r for r in rows if r["shape"] == name]) for name, _ in shapes}
    return rows, summary


def _csv_value(v):
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else v


def cmd_bench(args, settings: dict[str, str]) -> int:
    cfg = planner_config(settings)
    spec = map_spec(settings)
    paths = args.shape or []
    shapes = [(os.path.splitext(os.path.basename(p))[0], sio.load_shape(p)) for p in paths] or [
        ("l_robot", planner_robot())]
    if len({n for n, _ in shapes}) != len(shapes):
        raise UsageError("shape files must have distinct names")
    seeds = list(range(args.seed, args.seed + args.trials))
    t0 = time.perf_counter()
    rows, summary = run_bench(shapes, seeds, cfg, spec, not args.no_midend, not args.no_backend,
                              args.warm_start, args.workers)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "trials.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRIAL_FIELDS)
        for r in rows:
            w.writerow([_csv_value(r[k]) for k in TRIAL_FIELDS])
    keys = ["trials", "success_rate", "cca_success_rate", "false_positives", "failed_trials",
            "mean_min_clearance", "mean_wall_time_ms"]
    with open(os.path.join(args.out, "summary.csv"), "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["shape"] + keys)
        for name, s in summary.items():
            w.writerow([name] + [_csv_value(s[k]) for k in keys])
    doc = {"seeds": [seeds[0], seeds[-1]] if seeds else [], "use_midend": not args.no_midend,
           "use_backend": not args.no_backend, "warm_start": args.warm_start,
           "planner": cfg.to_dict(), "map": {f.name: getattr(spec, f.name) for f in fields(MapSpec)},
           "shapes": summary}
    sio.save_json(doc, os.path.join(args.out, "summary.json"))
    for name, s in summary.items():
        print(f"{name}: {s['trials']} trials, cca success {s['cca_success_rate']}, "
              f"false positives {s['false_positives']}, failed {s['failed_trials']}")
    print(f"bench wall time {time.perf_counter() - t0:.1f} s")
    return EXIT_OK


# ---------------------------------------------------------------------------
# render
# ---------------------------------------------------------------------------


def cmd_render(args, settings: dict[str, str]) -> int:
    if args.field:
        values, _ = load_field(args.field)
        field_to_pgm(args.out, values)
        return EXIT_OK
    if not args.scene:
        raise UsageError("render needs --scene (with optional --trajectory) or --field")
    scene = sio.load_scene(args.scene)
    traj = sio.load_trajectory(args.trajectory) if args.trajectory else None
    shape = _robot(args.shape)
    with open(args.out, "w") as f:
        f.write(overlay_svg(scene, shape, final=traj))
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--set", dest="settings", action="append", type=_setting, default=[],
                        metavar="KEY=VALUE", help="override a planner, GSIP or map setting")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--warm-start", type=_on_off, default=True, metavar="on|off")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="sweptsdf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def field_args(sp):
        sp.add_argument("--case", choices=sorted(FIELD_CASES))
        sp.add_argument("--shape", help="shape JSON")
        sp.add_argument("--motion", help="motion or trajectory JSON")
        sp.add_argument("--grid", type=_grid, help="x0,y0,cell,nx,ny")
        sp.add_argument("--out", required=True, help="output directory")

    sp = sub.add_parser("svsdf-grid", parents=[common], help="swept-volume SDF on a grid")
    field_args(sp)
    sp = sub.add_parser("oracle", parents=[common], help="brute-force reference field on a grid")
    field_args(sp)

    def ablation(sp):
        sp.add_argument("--no-backend", action="store_true")
        sp.add_argument("--no-midend", action="store_true")

    sp = sub.add_parser("plan", parents=[common], help="plan on a scene file or a seeded random map")
    sp.add_argument("--scene", help="scene .pgm or .json (default: random map from --seed)")
    sp.add_argument("--shape", help="robot shape JSON (default: L, arm 1 m, thickness 0.4 m)")
    sp.add_argument("--out", required=True, help="output directory")
    ablation(sp)

    sp = sub.add_parser("bench", parents=[common], help="seeded random-map batch")
    sp.add_argument("--trials", type=int, default=50)
    sp.add_argument("--shape", action="append", help="robot shape JSON; repeat for several")
    sp.add_argument("--out", required=True, help="output directory")
    ablation(sp)

    sp = sub.add_parser("render", parents=[common], help="SVG of a scene and trajectory, or PGM of a field")
    sp.add_argument("--scene")
    sp.add_argument("--trajectory", help="trajectory JSON")
    sp.add_argument("--shape")
    sp.add_argument("--field", help="float32 field written by svsdf-grid or oracle")
    sp.add_argument("--out", required=True, help="output file")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    settings = dict(args.settings)
    handler = {"svsdf-grid": cmd_svsdf_grid, "oracle": cmd_oracle, "plan": cmd_plan, "bench": cmd_bench,
               "render": cmd_render}[args.command]
    if getattr(args, "trials", 1) < 1 or args.workers < 1:
        print("sweptsdf: error: --trials and --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return handler(args, settings)
    except UsageError as e:
        print(f"sweptsdf: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, SceneParseError, ShapeValidationError, json.JSONDecodeError) as e:
        print(f"sweptsdf: I/O error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
