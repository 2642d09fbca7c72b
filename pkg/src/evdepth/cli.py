"""Command-line surface: simulate, depth, eval, ablate.

Every run resolves its full configuration (defaults < --config file < flags)
and writes it to a manifest JSON in the output directory, so any result can
be reproduced bit for bit by pointing --config at the manifest.

Exit codes: 0 success, 1 runtime failure, 2 configuration problem.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .costvol import (AggregationConfig, SweepConfig, estimate_depth,
                      inverse_depth_hypotheses)
from .events import form_windows, load_events, save_events_binary, save_events_text
from .focus import OBJECTIVE_KINDS, VOLUME_KINDS, FocusConfig, FocusWeights
from .imgio import read_pfm, write_pfm, write_pgm
from .metrics import aggregate_reports, evaluate
from .motion import (CameraRig, inject_velocity_noise, interpolate_velocity,
                     load_camera, load_track, average_velocity_norms,
                     save_camera, save_track)
from .synth import SceneSpec, generate, load_scene, save_scene

log = logging.getLogger("evdepth")


class ConfigError(Exception):
    """Invalid configuration or input files; maps to exit code 2."""


def _csv_floats(text):
    try:
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _add_global_flags(p):
    p.add_argument("--config", type=Path, default=None,
                   help="JSON file with defaults for any flag (flags override)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker processes for the hypothesis sweep")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verbose", action="store_true")


def _add_depth_flags(p):
    p.add_argument("--events", type=Path, help="event stream (.txt or .bin)")
    p.add_argument("--camera", type=Path, help="camera intrinsics JSON")
    p.add_argument("--track", type=Path, help="velocity track file")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--objective", default="fcd", choices=sorted(OBJECTIVE_KINDS))
    p.add_argument("--fcd-weights", type=_csv_floats, default=(1.0,) * 6,
                   help="six comma-separated gradient-channel weights")
    p.add_argument("--window-radius", type=int, default=5)
    p.add_argument("--sosa-lambda", type=float, default=1.0)
    p.add_argument("--dmin", type=float, default=2.0)
    p.add_argument("--dmax", type=float, default=80.0)
    p.add_argument("--num-hypotheses", type=int, default=64)
    p.add_argument("--scales", type=int, default=3)
    p.add_argument("--scale-weights", type=_csv_floats, default=None)
    p.add_argument("--trend-iters", type=int, default=1)
    p.add_argument("--peak-alpha", type=float, default=0.7)
    p.add_argument("--min-support", type=float, default=0.5)
    p.add_argument("--fill", default="none",
                   choices=["none", "nearest-valid", "median-window"])
    p.add_argument("--splat", default="bilinear", choices=["bilinear", "nearest"])
    p.add_argument("--max-count", type=int, default=80_000)
    p.add_argument("--max-interval", type=float, default=0.2)
    p.add_argument("--noise", type=float, default=0.0,
                   help="velocity noise level as a fraction of the velocity norm")


def build_parser():
    parser = argparse.ArgumentParser(prog="evdepth",
                                     description="plane-sweep depth from event streams")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    parser.subcommands = {}

    sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    _add_global_flags(sim)
    sim.add_argument("--scene", type=Path, help="scene spec JSON")
    sim.add_argument("--camera", type=Path, help="camera intrinsics JSON")
    sim.add_argument("--track", type=Path, help="velocity track file")
    sim.add_argument("--out", type=Path, help="output directory")
    sim.add_argument("--duration", type=float, default=0.1)
    sim.add_argument("--events-per-edge", type=int, default=10)
    sim.add_argument("--jitter", type=float, default=0.0)
    sim.add_argument("--format", default="text", choices=["text", "binary"])

    dep = sub.add_parser("depth", help="estimate depth maps from an event stream")
    _add_global_flags(dep)
    _add_depth_flags(dep)

    ev = sub.add_parser("eval", help="score predicted depth maps against truth")
    _add_global_flags(ev)
    ev.add_argument("--pred", type=Path, help="directory of predicted .pfm maps")
    ev.add_argument("--truth", type=Path,
                    help="truth .pfm file, or directory matched by filename")
    ev.add_argument("--max-depth", type=float, default=80.0)
    ev.add_argument("--out", type=Path, default=None,
                    help="directory for report JSON (default: print only)")

    ab = sub.add_parser("ablate", help="velocity-noise robustness sweep")
    _add_global_flags(ab)
    _add_depth_flags(ab)
    ab.add_argument("--truth", type=Path, help="ground-truth depth .pfm")
    ab.add_argument("--levels", type=_csv_floats, default=(0.0, 0.1, 0.2, 0.5, 1.0))
    ab.add_argument("--trials", type=int, default=10,
                    help="noise seeds per level")
    ab.add_argument("--max-depth", type=float, default=80.0)

    parser.subcommands = {"simulate": sim, "depth": dep, "eval": ev, "ablate": ab}
    return parser


def _merge_config(argv, parser):
    """Apply --config file values as defaults, keeping flag precedence."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config", type=Path, default=None)
    known, _ = probe.parse_known_args(argv)
    if known.config is None:
        return argv
    if not known.config.is_file():
        raise ConfigError(f"config file not found: {known.config}")
    with open(known.config) as fh:
        raw = json.load(fh)
    raw = raw.get("config", raw)
    subparser = parser.subcommands.get(argv[0] if argv else "")
    if subparser is None:
        return argv
    keys = {a.dest for a in subparser._actions}
    coerced = {}
    for key, value in raw.items():
        if key not in keys or key == "config":
            continue
        if isinstance(value, str) and key not in ("objective", "fill",
                                                  "splat", "format"):
            value = Path(value)
        if isinstance(value, list):
            value = tuple(value)
        coerced[key] = value
    subparser.set_defaults(**coerced)
    return argv


def _require(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise ConfigError(f"--{name.replace('_', '-')} is required")


def _check_file(path, what):
    if not Path(path).is_file():
        raise ConfigError(f"{what} not found: {path}")


def _parse_input(loader, path, what):
    """Wrap input-file parse failures as configuration errors."""
    try:
        return loader(path)
    except ValueError as exc:
        raise ConfigError(f"{what} {path}: {exc}") from exc


def _write_manifest(out_dir, command, args, skip=("config", "verbose")):
    cfg = {}
    for key, value in sorted(vars(args).items()):
        if key in skip or key == "command":
            continue
        if isinstance(value, Path):
            value = str(value)
        if isinstance(value, tuple):
            value = list(value)
        cfg[key] = value
    manifest = {"tool": "evdepth", "version": __version__,
                "command": command, "config": cfg}
    path = Path(out_dir) / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _load_rig(args) -> CameraRig:
    _check_file(args.camera, "camera config")
    _check_file(args.track, "velocity track")
    return CameraRig(intrinsics=_parse_input(load_camera, args.camera, "camera config"),
                     track=_parse_input(load_track, args.track, "velocity track"))


def cmd_simulate(args) -> int:
    _require(args, "scene", "camera", "track", "out")
    _check_file(args.scene, "scene spec")
    if args.duration <= 0:
        raise ConfigError("--duration must be positive")
    scene = _parse_input(load_scene, args.scene, "scene spec")
    rig = _load_rig(args)
    args.out.mkdir(parents=True, exist_ok=True)

    window, truth = generate(scene, rig, args.duration, args.events_per_edge,
                             seed=args.seed, jitter=args.jitter)
    if args.format == "binary":
        events_path = args.out / "events.bin"
        save_events_binary(events_path, window.events)
    else:
        events_path = args.out / "events.txt"
        save_events_text(events_path, window.events)
    save_camera(args.out / "camera.json", rig.intrinsics)
    save_track(args.out / "track.txt", rig.track)
    save_scene(args.out / "scene.json", scene)
    write_pfm(args.out / "truth.pfm", truth.depth)
    _write_manifest(args.out, "simulate", args)
    log.info("wrote %d events to %s", len(window.events), events_path)
    print(f"simulate: {len(window.events)} events -> {args.out}")
    return 0


def _focus_config(args) -> FocusConfig:
    if args.objective not in VOLUME_KINDS:
        raise ConfigError(
            f"objective {args.objective!r} has no per-pixel score map; "
            f"depth estimation supports {', '.join(sorted(VOLUME_KINDS))}")
    if len(args.fcd_weights) != 6:
        raise ConfigError("--fcd-weights needs exactly six values")
    if args.window_radius < 1 or args.window_radius % 2 == 0:
        raise ConfigError("--window-radius must be odd and >= 1")
    return FocusConfig(kind=args.objective,
                       weights=FocusWeights(values=args.fcd_weights),
                       window_radius=args.window_radius,
                       sosa_lambda=args.sosa_lambda)


def _pipeline_configs(args):
    focus = _focus_config(args)
    if not (0 < args.dmin < args.dmax):
        raise ConfigError("need 0 < --dmin < --dmax")
    if args.num_hypotheses < 1:
        raise ConfigError("--num-hypotheses must be >= 1")
    if args.scales < 1:
        raise ConfigError("--scales must be >= 1")
    if args.scale_weights is not None and len(args.scale_weights) != args.scales:
        raise ConfigError(f"--scale-weights needs {args.scales} values")
    if args.trend_iters < 0:
        raise ConfigError("--trend-iters must be >= 0")
    if args.noise < 0:
        raise ConfigError("--noise must be >= 0")
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    hyp = inverse_depth_hypotheses(args.dmin, args.dmax, args.num_hypotheses)
    sweep = SweepConfig(focus=focus, num_scales=args.scales,
                        splat=args.splat, workers=args.threads)
    agg = AggregationConfig(scale_weights=args.scale_weights,
                            trend_iterations=args.trend_iters,
                            peak_alpha=args.peak_alpha,
                            min_support=args.min_support,
                            fill=args.fill)
    return hyp, sweep, agg


def _window_velocity(rig, window, noise_level, noise_seed):
    t_first = float(window.events["t"][0])
    vel = interpolate_velocity(rig.track, t_first, window.t_ref)
    if noise_level > 0:
        lin_norm, ang_norm = average_velocity_norms(rig.track, t_first,
                                                    window.t_ref)
        vel = inject_velocity_noise(vel, noise_level, noise_seed,
                                    linear_norm=lin_norm, angular_norm=ang_norm)
    return vel


def _noise_seed(base_seed, level_index, window_index, trial) -> int:
    ss = np.random.SeedSequence([int(base_seed), level_index, window_index, trial])
    return int(ss.generate_state(1)[0])


def _sample_curves(fused, depth_map, max_pixels=8):
    """Score curves at a few well-supported pixels, for the diagnostics file."""
    ys, xs = np.nonzero(depth_map.valid)
    curves = {}
    if len(ys):
        step = max(len(ys) // max_pixels, 1)
        for y, x in zip(ys[::step][:max_pixels], xs[::step][:max_pixels]):
            curves[f"{y},{x}"] = [round(float(s), 6) for s in fused.scores[:, y, x]]
    return curves


def cmd_depth(args) -> int:
    _require(args, "events", "camera", "track", "out")
    _check_file(args.events, "event stream")
    hyp, sweep, agg = _pipeline_configs(args)
    rig = _load_rig(args)
    events = _parse_input(load_events, args.events, "event stream")
    if len(events) == 0:
        raise ConfigError(f"event stream is empty: {args.events}")
    args.out.mkdir(parents=True, exist_ok=True)
    _write_manifest(args.out, "depth", args)

    windows = form_windows(events, args.max_count, args.max_interval)
    log.info("%d events -> %d windows", len(events), len(windows))
    for i, window in enumerate(windows):
        t0 = time.perf_counter()
        vel = _window_velocity(rig, window, args.noise,
                               _noise_seed(args.seed, 0, i, 0))
        depth_map, result, fused = estimate_depth(window, rig.intrinsics, vel,
                                                  hyp, sweep, agg)
        elapsed = time.perf_counter() - t0
        write_pfm(args.out / f"depth_{i:04d}.pfm", depth_map.depth)
        write_pgm(args.out / f"mask_{i:04d}.pgm", depth_map.flags)
        write_pfm(args.out / f"confidence_{i:04d}.pfm", depth_map.confidence)
        diag = {
            "window": i,
            "t_ref": window.t_ref,
            "t_span": window.t_span,
            "n_events": len(window.events),
            "n_valid_pixels": int(depth_map.valid.sum()),
            "discarded": [int(x) for x in result.discarded],
            "iwe_mass": [round(float(m), 6) for m in result.mass],
            "hypotheses": [round(float(d), 6) for d in hyp.depths],
            "score_curves": _sample_curves(fused, depth_map),
            "timing_s": round(elapsed, 4),
            "workers": args.threads,
        }
        with open(args.out / f"diag_{i:04d}.json", "w") as fh:
            json.dump(diag, fh, indent=2)
            fh.write("\n")
        log.info("window %d: %d events, %.2fs, %d valid pixels",
                 i, len(window.events), elapsed, int(depth_map.valid.sum()))
    print(f"depth: {len(windows)} window(s) -> {args.out}")
    return 0


def _pair_predictions(pred_dir, truth_arg):
    preds = sorted(Path(pred_dir).glob("depth_*.pfm"))
    if not preds:
        preds = sorted(p for p in Path(pred_dir).glob("*.pfm")
                       if not p.name.startswith(("confidence", "truth")))
    if not preds:
        raise ConfigError(f"no .pfm predictions found in {pred_dir}")
    truth_path = Path(truth_arg)
    if truth_path.is_file():
        return [(p, truth_path) for p in preds]
    if not truth_path.is_dir():
        raise ConfigError(f"truth not found: {truth_path}")
    pairs, missing = [], []
    for p in preds:
        t = truth_path / p.name
        (pairs if t.is_file() else missing).append((p, t))
    if missing:
        names = ", ".join(str(t) for _, t in missing)
        raise ConfigError(f"unmatched prediction/truth files: {names}")
    return pairs


def cmd_eval(args) -> int:
    _require(args, "pred", "truth")
    if args.max_depth <= 0:
        raise ConfigError("--max-depth must be positive")
    pairs = _pair_predictions(args.pred, args.truth)
    reports = []
    for pred_path, truth_path in pairs:
        pred = read_pfm(pred_path)
        truth = read_pfm(truth_path)
        report = evaluate(pred, truth, max_depth=args.max_depth)
        reports.append((pred_path.name, report))
    total = aggregate_reports([r for _, r in reports])
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        for name, report in reports:
            stem = Path(name).stem
            with open(args.out / f"report_{stem}.json", "w") as fh:
                fh.write(report.to_json() + "\n")
        with open(args.out / "report_aggregate.json", "w") as fh:
            fh.write(total.to_json() + "\n")
        _write_manifest(args.out, "eval", args)
    print(total.table())
    return 0


def cmd_ablate(args) -> int:
    _require(args, "events", "camera", "track", "truth", "out")
    _check_file(args.events, "event stream")
    _check_file(args.truth, "ground-truth depth")
    if not args.levels:
        raise ConfigError("--levels must not be empty")
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    if any(lv < 0 for lv in args.levels):
        raise ConfigError("noise levels must be >= 0")
    hyp, sweep, agg = _pipeline_configs(args)
    rig = _load_rig(args)
    events = _parse_input(load_events, args.events, "event stream")
    truth = _parse_input(read_pfm, args.truth, "ground-truth depth")
    windows = form_windows(events, args.max_count, args.max_interval)
    if not windows:
        raise ConfigError("event stream produced no windows")
    args.out.mkdir(parents=True, exist_ok=True)
    _write_manifest(args.out, "ablate", args)

    rows = []
    for li, level in enumerate(args.levels):
        trial_reports = []
        for trial in range(args.trials if level > 0 else 1):
            per_window = []
            for wi, window in enumerate(windows):
                vel = _window_velocity(rig, window, level,
                                       _noise_seed(args.seed, li, wi, trial))
                depth_map, _, _ = estimate_depth(window, rig.intrinsics, vel,
                                                 hyp, sweep, agg)
                per_window.append(evaluate(depth_map.depth, truth,
                                           max_depth=args.max_depth))
            trial_reports.append(aggregate_reports(per_window))
        medians = {name: float(np.median([getattr(r, name)
                                          for r in trial_reports]))
                   for name in ("abs_rel", "sq_rel", "rmse", "rmse_log",
                                "delta1", "delta2", "delta3", "epe")}
        rows.append({"level": level, "trials": len(trial_reports), **medians})
        log.info("noise %.0f%%: median abs_rel %.4f",
                 100 * level, medians["abs_rel"])

    cols = ["level", "abs_rel", "sq_rel", "rmse", "rmse_log",
            "delta1", "delta2", "delta3", "epe"]
    lines = ["  ".join(c.rjust(8) for c in cols)]
    for row in rows:
        lines.append("  ".join(f"{row[c]:8.4f}" for c in cols))
    table = "\n".join(lines)
    with open(args.out / "ablation.json", "w") as fh:
        json.dump(rows, fh, indent=2)
        fh.write("\n")
    (args.out / "ablation.txt").write_text(table + "\n")
    print(table)
    return 0


COMMANDS = {"simulate": cmd_simulate, "depth": cmd_depth,
            "eval": cmd_eval, "ablate": cmd_ablate}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _merge_config(argv, parser)
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
