"""PGM rendering: accumulation frames, density maps, tracker overlays.

P5 binary PGM, 8-bit, max-normalized. Dependency-free output keeps golden
tests byte-stable.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterator

import numpy as np

from .events import EventStream
from .projection import Contour, Pdf, ProjectionHistogram
from .tracker import Telemetry


def write_pgm(grid: np.ndarray, path: str | Path) -> None:
    """Max-normalized 8-bit P5 image. An all-zero grid renders black."""
    g = np.asarray(grid, dtype=np.float64)
    peak = g.max() if g.size else 0.0
    if peak > 0:
        img = np.floor(g / peak * 255.0 + 0.5).astype(np.uint8)
    else:
        img = np.zeros(g.shape, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(img.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if not blob.startswith(b"P5"):
        raise ValueError(f"{path}: not a P5 PGM")
    parts = blob.split(b"\n", 3)
    w, h = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8, count=w * h).reshape(h, w)


def accumulation_frames(stream: EventStream, window_ms: float) -> Iterator[tuple[int, np.ndarray]]:
    """(start_t_us, count grid) per fixed time window; empty stream yields nothing."""
    if len(stream) == 0:
        return
    w_us = int(round(window_ms * 1000))
    if w_us <= 0:
        raise ValueError(f"window must be positive, got {window_ms} ms")
    g = stream.geometry
    t0 = int(stream.t_us[0])
    t_end = int(stream.t_us[-1])
    start = t0
    while start <= t_end:
        stop = start + w_us
        sel = (stream.t_us >= start) & (stream.t_us < stop)
        grid = np.zeros((g.height, g.width), dtype=np.int64)
        np.add.at(grid, (stream.y[sel], stream.x[sel]), 1)
        yield start, grid
        start = stop


def _draw_box(img: np.ndarray, cx: float, cy: float, r: float, value: int = 255) -> None:
    h, w = img.shape
    x0, x1 = int(round(cx - r)), int(round(cx + r))
    y0, y1 = int(round(cy - r)), int(round(cy + r))
    xs = slice(max(x0, 0), min(x1 + 1, w))
    ys = slice(max(y0, 0), min(y1 + 1, h))
    if 0 <= y0 < h:
        img[y0, xs] = value
    if 0 <= y1 < h:
        img[y1, xs] = value
    if 0 <= x0 < w:
        img[ys, x0] = value
    if 0 <= x1 < w:
        img[ys, x1] = value


def render_frames(
    stream: EventStream,
    out_dir: str | Path,
    window_ms: float = 5.0,
    telemetry: Telemetry | None = None,
    box_half: float = 15.0,
    prefix: str = "frame",
) -> list[Path]:
    """Write one max-normalized PGM per window, with tracker boxes overlaid
    at each tracker's last reported position inside the window."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    for idx, (start_us, grid) in enumerate(accumulation_frames(stream, window_ms)):
        peak = grid.max()
        img = (
            np.floor(grid / peak * 255.0 + 0.5).astype(np.uint8)
            if peak > 0
            else np.zeros(grid.shape, dtype=np.uint8)
        )
        if telemetry is not None and len(telemetry.rows):
            t_lo = start_us / 1e6
            t_hi = (start_us + window_ms * 1000) / 1e6
            rows = telemetry.rows
            sel = (rows[:, 0] >= t_lo) & (rows[:, 0] < t_hi)
            for k in np.unique(rows[sel, 1]):
                krows = rows[sel & (rows[:, 1] == k)]
                _draw_box(img, krows[-1, 9], krows[-1, 10], box_half)
        path = out_dir / f"{prefix}_{idx:04d}.pgm"
        with open(path, "wb") as fh:
            fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
            fh.write(img.tobytes())
        written.append(path)
    return written


def pdf_to_pgm(pdf: Pdf, path: str | Path) -> None:
    write_pgm(pdf.values, path)


def histogram_to_pgm(hist: ProjectionHistogram, path: str | Path) -> None:
    write_pgm(hist.counts, path)


def contour_to_pgm(contour: Contour, shape: tuple[int, int], path: str | Path) -> None:
    grid = np.zeros(shape, dtype=np.uint8)
    for (cx, cy) in contour.cells:
        if 0 <= cy < shape[0] and 0 <= cx < shape[1]:
            grid[cy, cx] = 1
    write_pgm(grid, path)


def grid_to_csv(grid: np.ndarray, path: str | Path) -> None:
    """Sparse `cx,cy,value` export of any non-negative grid."""
    with open(path, "w") as fh:
        fh.write("cx,cy,value\n")
        cy, cx = np.nonzero(grid)
        for x, y in zip(cx.tolist(), cy.tolist()):
            fh.write(f"{x},{y},{float(grid[y, x])!r}\n")


def contour_to_csv(contour: Contour, pdf: Pdf, path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("cx,cy,value\n")
        for (cx, cy) in sorted(contour.cells):
            fh.write(f"{cx},{cy},{float(pdf.values[cy, cx])!r}\n")
