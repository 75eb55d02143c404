"""Velocity-directed projection of events onto a reference plane.

Events are projected along a velocity hypothesis onto the plane t = t_ref:

    p(x_i) = x_i - v * (t_i - t_ref)

Projections of a rigid structure moving at exactly v collapse onto a
time-independent footprint; accumulating them into a histogram, normalizing
by the peak and thresholding recovers the generative contour of the
structure. The histogram may be subpixeled (s grid cells per sensor pixel)
to trade temporal precision for spatial resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .events import EventStream

# A contour is reported only after the structure has moved at least this many
# pixels; the pdf is ill-defined for short observation spans.
MIN_TRAVEL_PX = 10.0


@dataclass(frozen=True)
class Velocity:
    vx: float
    vy: float

    def norm(self) -> float:
        return math.hypot(self.vx, self.vy)


def project_event(x: float, y: float, t: float, v: Velocity, t_ref: float) -> tuple[float, float]:
    """Project an event at (x, y, t) onto the t = t_ref plane along v.

    t and t_ref are seconds; t < t_ref is allowed (the formula is algebraic).
    """
    dt = t - t_ref
    return (x - v.vx * dt, y - v.vy * dt)


def bin_projection(
    p: tuple[float, float], subpixel_scale: int, origin: tuple[float, float] = (0.0, 0.0)
) -> tuple[int, int]:
    """Grid cell of a projected point: floor((p - origin) * s + 0.5), half rounds up."""
    if subpixel_scale < 1:
        raise ValueError(f"subpixel_scale must be >= 1, got {subpixel_scale}")
    s = subpixel_scale
    return (
        int(math.floor((p[0] - origin[0]) * s + 0.5)),
        int(math.floor((p[1] - origin[1]) * s + 0.5)),
    )


@dataclass
class ProjectionHistogram:
    """Accumulation grid over a bounded region of the reference plane.

    counts[row, col] indexes (y, x) grid cells at subpixel resolution.
    Projections falling outside the region are counted as rejected, never
    clamped.
    """

    counts: np.ndarray
    subpixel_scale: int
    t_ref: float
    origin: tuple[float, float]
    accepted: int = 0
    rejected: int = 0
    # motion bookkeeping for the contour-validity gate
    travel_px: float = field(default=0.0)


def make_histogram(
    width_px: int,
    height_px: int,
    subpixel_scale: int = 1,
    t_ref: float = 0.0,
    origin: tuple[float, float] = (0.0, 0.0),
) -> ProjectionHistogram:
    if subpixel_scale < 1:
        raise ValueError(f"subpixel_scale must be >= 1, got {subpixel_scale}")
    shape = (height_px * subpixel_scale, width_px * subpixel_scale)
    return ProjectionHistogram(
        counts=np.zeros(shape, dtype=np.int64),
        subpixel_scale=subpixel_scale,
        t_ref=t_ref,
        origin=(float(origin[0]), float(origin[1])),
    )


def accumulate(
    hist: ProjectionHistogram,
    stream: EventStream,
    v: Velocity,
    t_start: float | None = None,
    t_stop: float | None = None,
) -> ProjectionHistogram:
    """Project events in [t_start, t_stop] along v and increment their cells.

    Defaults to [t_ref, last event]. Each accepted event increments exactly
    one cell by 1. Returns the same histogram, mutated.
    """
    t = stream.times_seconds()
    lo = hist.t_ref if t_start is None else t_start
    hi = np.inf if t_stop is None else t_stop
    sel = (t >= lo) & (t <= hi)
    if not sel.any():
        return hist
    ts = t[sel]
    dt = ts - hist.t_ref
    px = stream.x[sel].astype(np.float64) - v.vx * dt
    py = stream.y[sel].astype(np.float64) - v.vy * dt
    s = hist.subpixel_scale
    cx = np.floor((px - hist.origin[0]) * s + 0.5).astype(np.int64)
    cy = np.floor((py - hist.origin[1]) * s + 0.5).astype(np.int64)
    h, w = hist.counts.shape
    ok = (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
    np.add.at(hist.counts, (cy[ok], cx[ok]), 1)
    hist.accepted += int(ok.sum())
    hist.rejected += int((~ok).sum())
    if len(ts):
        hist.travel_px = max(hist.travel_px, float(ts.max() - hist.t_ref) * v.norm())
    return hist


@dataclass(frozen=True)
class Pdf:
    """Projected event density normalized by its peak; max cell = 1."""

    values: np.ndarray
    subpixel_scale: int
    origin: tuple[float, float]


def to_pdf(hist: ProjectionHistogram) -> Pdf:
    peak = hist.counts.max() if hist.counts.size else 0
    if peak <= 0:
        raise ValueError("cannot normalize an empty histogram")
    return Pdf(hist.counts / float(peak), hist.subpixel_scale, hist.origin)


@dataclass(frozen=True)
class Contour:
    """Grid cells whose pdf clears the threshold; the recovered structure."""

    cells: frozenset[tuple[int, int]]
    subpixel_scale: int
    origin: tuple[float, float]

    def __len__(self) -> int:
        return len(self.cells)

    def centroid(self) -> tuple[float, float]:
        """Mean cell position in sensor coordinates."""
        if not self.cells:
            raise ValueError("empty contour has no centroid")
        s = self.subpixel_scale
        xs = [c[0] for c in self.cells]
        ys = [c[1] for c in self.cells]
        return (
            self.origin[0] + (sum(xs) / len(xs)) / s,
            self.origin[1] + (sum(ys) / len(ys)) / s,
        )


def threshold_contour(pdf: Pdf, pi: float = 0.5) -> Contour:
    """Cells with pdf >= pi, for pi in (0, 1]."""
    if not (0.0 < pi <= 1.0):
        raise ValueError(f"threshold must be in (0, 1], got {pi}")
    cy, cx = np.nonzero(pdf.values >= pi)
    return Contour(
        frozenset(zip(cx.tolist(), cy.tolist())),
        pdf.subpixel_scale,
        pdf.origin,
    )


def sufficient_motion(hist: ProjectionHistogram, min_travel_px: float = MIN_TRAVEL_PX) -> bool:
    """True once the observation span times ||v|| covers min_travel_px pixels."""
    return hist.travel_px >= min_travel_px


def recover_contour(
    stream: EventStream,
    v: Velocity,
    t_ref: float = 0.0,
    subpixel_scale: int = 1,
    pi: float = 0.5,
    origin: tuple[float, float] = (0.0, 0.0),
    width_px: int | None = None,
    height_px: int | None = None,
    min_travel_px: float = MIN_TRAVEL_PX,
) -> tuple[ProjectionHistogram, Pdf, Contour]:
    """Full pipeline: accumulate -> pdf -> threshold, with the motion gate."""
    w = width_px if width_px is not None else stream.geometry.width
    h = height_px if height_px is not None else stream.geometry.height
    hist = make_histogram(w, h, subpixel_scale, t_ref, origin)
    accumulate(hist, stream, v)
    if not sufficient_motion(hist, min_travel_px):
        raise ValueError(
            f"insufficient motion for a contour: {hist.travel_px:.2f} px observed, "
            f"{min_travel_px} px required"
        )
    pdf = to_pdf(hist)
    return hist, pdf, threshold_contour(pdf, pi)
