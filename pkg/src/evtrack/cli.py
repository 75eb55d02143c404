"""Command-line harness: synthesize scenes, run tracker banks, reconstruct
contours, benchmark against ground truth and render frame sequences.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import sys
import time
import tracemalloc
from pathlib import Path

import numpy as np

from . import render, synth
from .events import (
    BINARY_MAGIC,
    EventStream,
    EventStreamError,
    SensorGeometry,
    read_binary,
    read_csv,
    write_binary,
    write_csv,
)
from .metrics import compare_to_truth
from .projection import Velocity, recover_contour
from .tracker import (
    TrackerConfig,
    parse_config,
    read_telemetry_csv,
    seed_bank,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        raise _UsageError(message)


def _parse_geometry(spec: str) -> SensorGeometry:
    try:
        w, h = spec.lower().split("x")
        return SensorGeometry(int(w), int(h))
    except (ValueError, EventStreamError) as exc:
        raise _UsageError(f"bad --geometry {spec!r}: {exc}")


def _parse_positions(spec: str) -> list[tuple[float, float]]:
    out = []
    for chunk in spec.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            x, y = chunk.split(",")
            out.append((float(x), float(y)))
        except ValueError:
            raise _UsageError(f"bad position {chunk!r}, expected x,y")
    if not out:
        raise _UsageError("--positions is empty")
    return out


def _load_stream(path: str, geometry: SensorGeometry | None) -> EventStream:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(p, "rb") as fh:
        head = fh.read(8)
    if head == BINARY_MAGIC:
        return read_binary(p)
    return read_csv(p, geometry)


def _save_stream(stream: EventStream, path: str) -> None:
    if path.endswith(".csv"):
        write_csv(stream, path)
    else:
        write_binary(stream, path)


def _build_parser() -> _Parser:
    parser = _Parser(prog="evtrack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic event stream with ground truth")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", choices=["fig4"], help="built-in benchmark scene")
    src.add_argument("--script", help="scene script file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True, help="stream file (.evt binary or .csv)")
    p.add_argument("--truth", help="ground-truth CSV output path")

    p = sub.add_parser("track", help="run a tracker bank over a stream")
    p.add_argument("--input", required=True)
    p.add_argument("--config", help="key=value tracker config file")
    p.add_argument("--positions", required=True, help="window centers: 'x,y;x,y;...'")
    p.add_argument("--geometry", help="WxH for CSV inputs without a geometry comment")
    p.add_argument("--output", required=True, help="telemetry CSV path")

    p = sub.add_parser("reconstruct", help="recover the generative contour for one velocity")
    p.add_argument("--input", required=True)
    p.add_argument("--vx", type=float, required=True)
    p.add_argument("--vy", type=float, required=True)
    p.add_argument("--t-ref", type=float, default=0.0, help="projection plane time, seconds")
    p.add_argument("--pi", type=float, default=0.5)
    p.add_argument("--subpixel", type=int, default=1)
    p.add_argument("--geometry", help="WxH override")
    p.add_argument("--output", required=True, help="output prefix")

    p = sub.add_parser("bench", help="track a scene and compare against ground truth")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--builtin", choices=["fig4"])
    src.add_argument("--script")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--config")
    p.add_argument("--output", help="report CSV path")
    p.add_argument("--telemetry", help="also write the telemetry CSV here")
    p.add_argument("--check-alloc", action="store_true", help="report hot-loop allocation per event")

    p = sub.add_parser("render", help="write 8-bit PGM accumulation frames")
    p.add_argument("--input", required=True)
    p.add_argument("--window-ms", type=float, default=5.0)
    p.add_argument("--telemetry", help="overlay tracker boxes from this telemetry CSV")
    p.add_argument("--geometry", help="WxH for CSV inputs")
    p.add_argument("--output", required=True, help="output directory")

    return parser


def _cmd_synth(args) -> int:
    if args.builtin == "fig4":
        script, stream, truth = synth.fig4_benchmark(seed=args.seed)
    else:
        script = synth.read_script(args.script)
        stream, truth = synth.generate(script, args.seed)
    _save_stream(stream, args.output)
    if args.truth:
        truth.write_csv(args.truth)
    print(f"wrote {len(stream)} events to {args.output}")
    return EXIT_OK


def _cmd_track(args) -> int:
    geometry = _parse_geometry(args.geometry) if args.geometry else None
    stream = _load_stream(args.input, geometry)
    config = parse_config(args.config) if args.config else TrackerConfig()
    positions = _parse_positions(args.positions)
    t_start = float(stream.t_us[0]) / 1e6 if len(stream) else 0.0
    bank = seed_bank(positions, None, config, stream.geometry, t_start)
    telemetry = bank.process(stream)
    telemetry.write_csv(args.output)
    n_tracking = sum(1 for s in bank.states() if s.status.name == "TRACKING")
    print(
        f"{bank.n_trackers} trackers over {len(stream)} events: "
        f"{len(telemetry.rows)} corrections, {n_tracking} tracking"
    )
    return EXIT_OK


def _cmd_reconstruct(args) -> int:
    geometry = _parse_geometry(args.geometry) if args.geometry else None
    stream = _load_stream(args.input, geometry)
    v = Velocity(args.vx, args.vy)
    hist, pdf, contour = recover_contour(
        stream, v, t_ref=args.t_ref, subpixel_scale=args.subpixel, pi=args.pi
    )
    prefix = args.output
    render.pdf_to_pgm(pdf, f"{prefix}.pdf.pgm")
    render.contour_to_pgm(contour, pdf.values.shape, f"{prefix}.contour.pgm")
    render.contour_to_csv(contour, pdf, f"{prefix}.contour.csv")
    print(
        f"accepted {hist.accepted} events ({hist.rejected} rejected), "
        f"contour of {len(contour)} cells at threshold {args.pi}"
    )
    return EXIT_OK


def _cmd_bench(args) -> int:
    if args.builtin == "fig4":
        script, stream, truth = synth.fig4_benchmark(seed=args.seed)
    else:
        script = synth.read_script(args.script)
        stream, truth = synth.generate(script, args.seed)
    config = parse_config(args.config) if args.config else TrackerConfig(telemetry_stride=4)
    if not script.features:
        print("scene has no labeled features", file=sys.stderr)
        return EXIT_DATA
    t_start = float(stream.t_us[0]) / 1e6 if len(stream) else 0.0
    positions = []
    for fid in sorted(script.features):
        positions.append(truth.feature_position(fid, t_start))
    bank = seed_bank(positions, None, config, stream.geometry, t_start)

    t_s = stream.times_seconds()
    x = stream.x.astype(np.float64)
    y = stream.y.astype(np.float64)
    # warm pass on a throwaway bank so JIT compilation stays out of the timing
    warm = seed_bank(positions, None, config, stream.geometry, t_start)
    warm.process_arrays(t_s[:256], x[:256], y[:256])

    wall = time.perf_counter()
    telemetry = bank.process_arrays(t_s, x, y)
    wall = time.perf_counter() - wall

    if args.check_alloc:
        # diagnostic pass: telemetry off, count hot-loop allocations per event
        from dataclasses import replace as _replace

        diag = seed_bank(
            positions, None, _replace(config, telemetry_stride=0), stream.geometry, t_start
        )
        tracemalloc.start()
        before = tracemalloc.get_traced_memory()[0]
        diag.process_arrays(t_s, x, y)
        after = tracemalloc.get_traced_memory()[0]
        tracemalloc.stop()
        per_event = (after - before) / max(len(stream), 1)
        print(f"allocation: {after - before} bytes total, {per_event:.4f} B/event")

    report = compare_to_truth(telemetry, truth, bank)
    throughput = len(stream) / wall if wall > 0 else float("inf")
    print(f"throughput: {len(stream)} events in {wall:.3f} s = {throughput:,.0f} events/s")
    for r in report.features:
        conv = "n/a" if r.convergence_px is None else f"{r.convergence_px:.1f}px"
        print(
            f"feature {r.feature_id}: tracker {r.tracker_id}, eps_raw {r.eps_raw:.2f}px, "
            f"eps_comp {r.eps_comp:.2f}px, L {r.L:.1f}px, eps/L {100 * r.eps_over_L:.2f}%, "
            f"B_avg {100 * r.b_avg:.3f}%, converged at {conv}, {r.plan_updates} plan updates"
        )
    print(
        f"summary: eps/L mean {100 * report.mean_eps_over_L:.2f}% "
        f"sigma {100 * report.sigma_eps_over_L:.2f}% over {len(report.features)} features"
    )
    if args.output:
        report.write_csv(args.output)
    if args.telemetry:
        telemetry.write_csv(args.telemetry)
    return EXIT_OK


def _cmd_render(args) -> int:
    geometry = _parse_geometry(args.geometry) if args.geometry else None
    stream = _load_stream(args.input, geometry)
    telemetry = read_telemetry_csv(args.telemetry) if args.telemetry else None
    frames = render.render_frames(stream, args.output, args.window_ms, telemetry)
    print(f"wrote {len(frames)} frames to {args.output}")
    return EXIT_OK


_COMMANDS = {
    "synth": _cmd_synth,
    "track": _cmd_track,
    "reconstruct": _cmd_reconstruct,
    "bench": _cmd_bench,
    "render": _cmd_render,
}


def cli(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (EventStreamError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(cli())


if __name__ == "__main__":
    main()
