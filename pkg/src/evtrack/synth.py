"""Synthetic event-camera scenes with exact ground truth.

A scene is a rigid set of contour points translating at piecewise-constant
velocity. Every contour point emits `events_per_pixel` events each time it
crosses a pixel boundary, i.e. at unit arc-length steps along the
trajectory; emission coordinates are the contour point's position rounded
to the nearest pixel center, timestamps carry optional uniform jitter.
Background noise events are uniform over space and time. Output is
deterministic given (script, seed).

Ground truth keeps the closed-form trajectory, labeled feature offsets and
every event's source point id, so benchmark comparisons need no manual
annotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .events import EventStream, SensorGeometry, merge_sorted


@dataclass(frozen=True)
class TrajectorySegment:
    start_t: float  # seconds
    vx: float
    vy: float


@dataclass
class SceneScript:
    """Rigid contour, piecewise-constant trajectory and emission model."""

    contour: list[tuple[int, int]]
    start: tuple[float, float]
    segments: list[TrajectorySegment]
    duration: float
    events_per_pixel: int = 3
    jitter_us: float = 100.0
    noise_rate: float = 0.0  # background events per second over the frame
    geometry: SensorGeometry = field(default_factory=SensorGeometry)
    features: dict[int, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.events_per_pixel < 1:
            raise ValueError(f"events_per_pixel must be >= 1, got {self.events_per_pixel}")
        if self.duration <= 0:
            raise ValueError(f"duration must be positive, got {self.duration}")
        times = [s.start_t for s in self.segments]
        if times != sorted(times):
            raise ValueError("trajectory segments must be time-ordered")
        if not self.segments or self.segments[0].start_t != 0.0:
            raise ValueError("trajectory must start with a segment at t=0")


class GroundTruth:
    """Closed-form feature positions and per-event source ids."""

    def __init__(self, script: SceneScript, source_ids: np.ndarray):
        self.script = script
        self.source_ids = source_ids  # aligned with the generated stream

    def center(self, t: float) -> tuple[float, float]:
        cx, cy = self.script.start
        segs = self.script.segments
        for i, seg in enumerate(segs):
            end = segs[i + 1].start_t if i + 1 < len(segs) else self.script.duration
            hi = min(max(t, seg.start_t), end)
            if hi > seg.start_t:
                cx += seg.vx * (hi - seg.start_t)
                cy += seg.vy * (hi - seg.start_t)
            if t <= end:
                break
        return cx, cy

    def feature_position(self, feature_id: int, t: float) -> tuple[float, float]:
        off = self.script.features[feature_id]
        cx, cy = self.center(t)
        return cx + off[0], cy + off[1]

    def feature_positions(self, feature_id: int, t: np.ndarray) -> np.ndarray:
        """Vectorized feature_position: (n, 2) array for an array of times."""
        off = self.script.features[feature_id]
        t = np.asarray(t, dtype=np.float64)
        cx = np.full_like(t, self.script.start[0])
        cy = np.full_like(t, self.script.start[1])
        segs = self.script.segments
        for i, seg in enumerate(segs):
            end = segs[i + 1].start_t if i + 1 < len(segs) else self.script.duration
            dt = np.clip(t, seg.start_t, end) - seg.start_t
            dt = np.maximum(dt, 0.0)
            cx += seg.vx * dt
            cy += seg.vy * dt
        return np.column_stack([cx + off[0], cy + off[1]])

    def velocity(self, t: float) -> tuple[float, float]:
        v = (self.script.segments[0].vx, self.script.segments[0].vy)
        for seg in self.script.segments:
            if t >= seg.start_t:
                v = (seg.vx, seg.vy)
        return v

    def path_length(self, t0: float, t1: float) -> float:
        """Arc length of the trajectory between t0 and t1."""
        total = 0.0
        segs = self.script.segments
        for i, seg in enumerate(segs):
            end = segs[i + 1].start_t if i + 1 < len(segs) else self.script.duration
            lo, hi = max(t0, seg.start_t), min(t1, end)
            if hi > lo:
                total += math.hypot(seg.vx, seg.vy) * (hi - lo)
        return total

    def write_csv(self, path: str | Path, step_us: int = 1000) -> None:
        """Sampled `t_us,feature_id,x,y` rows."""
        with open(path, "w") as fh:
            fh.write("t_us,feature_id,x,y\n")
            n = int(self.script.duration * 1e6 / step_us) + 1
            for i in range(n):
                t_us = i * step_us
                t = t_us / 1e6
                for fid in sorted(self.script.features):
                    x, y = self.feature_position(fid, t)
                    fh.write(f"{t_us},{fid},{float(x)!r},{float(y)!r}\n")


def square_outline(side: int) -> list[tuple[int, int]]:
    """Axis-aligned square outline of the given side, centered on the origin."""
    half = side // 2
    pts = set()
    for u in range(-half, half + 1):
        pts.update([(u, half), (u, -half), (half, u), (-half, u)])
    return sorted(pts)


def diamond_outline(half_diagonal: int) -> list[tuple[int, int]]:
    """45-degree-rotated square outline: lattice points with |x| + |y| = h."""
    h = half_diagonal
    pts = set()
    for dx in range(-h, h + 1):
        dy = h - abs(dx)
        pts.add((dx, dy))
        pts.add((dx, -dy))
    return sorted(pts)


def _polarities(contour: list[tuple[int, int]], v: tuple[float, float]) -> np.ndarray:
    """Leading-edge points (outward side along v) emit +1, trailing -1."""
    arr = np.asarray(contour, dtype=np.float64)
    center = arr.mean(axis=0)
    lead = (arr - center) @ np.array(v) >= 0
    return np.where(lead, 1, -1).astype(np.int8)


def generate(script: SceneScript, seed: int = 0) -> tuple[EventStream, GroundTruth]:
    """Emit the scene's event stream plus its ground truth."""
    rng = np.random.default_rng(seed)
    geom = script.geometry
    segs = list(script.segments)
    contour = np.asarray(script.contour, dtype=np.float64)
    n_pts = len(contour)

    all_t = []
    all_x = []
    all_y = []
    all_p = []
    all_src = []
    cx, cy = script.start
    for i, seg in enumerate(segs):
        end = segs[i + 1].start_t if i + 1 < len(segs) else script.duration
        span = end - seg.start_t
        vn = math.hypot(seg.vx, seg.vy)
        if vn > 0.0 and span > 0.0 and n_pts:
            n_cross = int(math.floor(span * vn))
            if n_cross:
                tk = seg.start_t + np.arange(1, n_cross + 1) / vn
                rel = tk - seg.start_t
                pol = _polarities(script.contour, (seg.vx, seg.vy))
                for pi in range(n_pts):
                    px = np.floor(cx + contour[pi, 0] + seg.vx * rel + 0.5)
                    py = np.floor(cy + contour[pi, 1] + seg.vy * rel + 0.5)
                    for _ in range(script.events_per_pixel):
                        all_t.append(tk)
                        all_x.append(px)
                        all_y.append(py)
                        all_p.append(np.full(n_cross, pol[pi], dtype=np.int8))
                        all_src.append(np.full(n_cross, pi, dtype=np.int64))
        cx += seg.vx * span
        cy += seg.vy * span

    if all_t:
        t = np.concatenate(all_t)
        x = np.concatenate(all_x)
        y = np.concatenate(all_y)
        p = np.concatenate(all_p)
        src = np.concatenate(all_src)
        if script.jitter_us > 0:
            t = t + rng.uniform(-script.jitter_us * 1e-6, script.jitter_us * 1e-6, len(t))
        t_us = np.floor(t * 1e6 + 0.5).astype(np.int64)
        keep = (
            (t_us >= 0)
            & (x >= 0) & (x < geom.width)
            & (y >= 0) & (y < geom.height)
        )
        t_us, x, y, p, src = t_us[keep], x[keep], y[keep], p[keep], src[keep]
        order = np.argsort(t_us, kind="stable")
        signal = EventStream(t_us[order], x[order], y[order], p[order], geom, validate=False)
        src = src[order]
    else:
        signal = EventStream.empty(geom)
        src = np.zeros(0, dtype=np.int64)

    if script.noise_rate > 0:
        n_noise = int(rng.poisson(script.noise_rate * script.duration))
        nt = np.sort(rng.integers(0, int(script.duration * 1e6), n_noise))
        nx = rng.integers(0, geom.width, n_noise)
        ny = rng.integers(0, geom.height, n_noise)
        npol = rng.choice(np.array([-1, 1], dtype=np.int8), n_noise)
        noise = EventStream(nt, nx, ny, npol, geom, validate=False)
        merged = merge_sorted(signal, noise)
        # noise events carry source id -1; re-derive alignment from the merge
        src_all = np.concatenate([src, np.full(n_noise, -1, dtype=np.int64)])
        order = np.argsort(np.concatenate([signal.t_us, nt]), kind="stable")
        return merged, GroundTruth(script, src_all[order])

    return signal, GroundTruth(script, src)


def fig4_benchmark(
    seed: int = 7,
    noise_rate: float = 0.0,
    segments: list[TrajectorySegment] | None = None,
    events_per_pixel: int = 3,
) -> tuple[SceneScript, EventStream, GroundTruth]:
    """Canonical benchmark scene: a square with corner arms at 45 degrees to
    a diagonal trajectory of about 750 px/s, long enough for 450 px of travel
    inside a 640x480 frame. The four corners are the labeled features."""
    half = 50
    if segments is None:
        segments = [TrajectorySegment(0.0, 530.0, 530.0)]
    script = SceneScript(
        contour=square_outline(2 * half),
        start=(85.0, 75.0),
        segments=segments,
        duration=0.60,
        events_per_pixel=events_per_pixel,
        jitter_us=100.0,
        noise_rate=noise_rate,
        features={
            0: (half, half),
            1: (-half, half),
            2: (half, -half),
            3: (-half, -half),
        },
    )
    stream, truth = generate(script, seed)
    return script, stream, truth


# --- script files -----------------------------------------------------------

def write_script(script: SceneScript, path: str | Path) -> None:
    lines = [
        f"width={script.geometry.width}",
        f"height={script.geometry.height}",
        f"start={script.start[0]!r},{script.start[1]!r}",
        f"duration={script.duration!r}",
        f"events_per_pixel={script.events_per_pixel}",
        f"jitter_us={script.jitter_us!r}",
        f"noise_rate={script.noise_rate!r}",
    ]
    for seg in script.segments:
        lines.append(f"segment={seg.start_t!r},{seg.vx!r},{seg.vy!r}")
    for fid in sorted(script.features):
        off = script.features[fid]
        lines.append(f"feature={fid},{off[0]!r},{off[1]!r}")
    for (px, py) in script.contour:
        lines.append(f"point={px},{py}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_script(path: str | Path) -> SceneScript:
    path = Path(path)
    kv: dict[str, str] = {}
    segments: list[TrajectorySegment] = []
    features: dict[int, tuple[float, float]] = {}
    contour: list[tuple[int, int]] = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        try:
            if key == "segment":
                t0, vx, vy = val.split(",")
                segments.append(TrajectorySegment(float(t0), float(vx), float(vy)))
            elif key == "feature":
                fid, fx, fy = val.split(",")
                features[int(fid)] = (float(fx), float(fy))
            elif key == "point":
                px, py = val.split(",")
                contour.append((int(px), int(py)))
            elif key == "contour_csv":
                # point list in a side CSV (x,y rows), relative to the script
                csv_path = (path.parent / val).resolve()
                for crow in csv_path.read_text().splitlines():
                    crow = crow.split("#", 1)[0].strip()
                    if not crow or crow.lower().startswith("x"):
                        continue
                    px, py = crow.split(",")
                    contour.append((int(px), int(py)))
            else:
                kv[key] = val
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}")
        except OSError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}")
    try:
        sx, sy = kv["start"].split(",")
        return SceneScript(
            contour=contour,
            start=(float(sx), float(sy)),
            segments=segments,
            duration=float(kv["duration"]),
            events_per_pixel=int(kv.get("events_per_pixel", 3)),
            jitter_us=float(kv.get("jitter_us", 100.0)),
            noise_rate=float(kv.get("noise_rate", 0.0)),
            geometry=SensorGeometry(int(kv.get("width", 640)), int(kv.get("height", 480))),
            features=features,
        )
    except KeyError as exc:
        raise ValueError(f"{path}: missing required key {exc}")
