"""Shape descriptors from converged decaying maps.

A tracker's decaying map, normalized to unit mass, is a discrete
probability density of the tracked shape. Because the decay constant is
one pixel-traversal time, the density is largely invariant to the
structure's speed, which makes it usable as a descriptor. Descriptors are
immutable values and compare via the Bhattacharyya distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .projection import Velocity


@dataclass(frozen=True)
class Descriptor:
    grid: np.ndarray  # non-negative, sums to 1
    tracker_id: int
    velocity: Velocity
    capture_t: float

    def __post_init__(self) -> None:
        total = float(self.grid.sum())
        if not math.isclose(total, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"descriptor mass must be 1, got {total}")
        if (self.grid < 0).any():
            raise ValueError("descriptor cells must be non-negative")
        self.grid.setflags(write=False)


def capture(state) -> Descriptor:
    """Snapshot a tracking tracker's map as a probability density.

    `state` is a tracker.TrackerState; its map is divided by its sum.
    """
    total = float(state.map_values.sum())
    if total <= 0:
        raise ValueError("cannot capture a descriptor from an empty map")
    if int(state.status) != 1:  # TrackerStatus.TRACKING
        raise ValueError(f"tracker {state.tracker_id} is not tracking (status {state.status})")
    return Descriptor(
        grid=state.map_values / total,
        tracker_id=state.tracker_id,
        velocity=state.velocity,
        capture_t=state.last_t,
    )


def _overlap_matrix(n_src: int, n_dst: int) -> np.ndarray:
    """Row-stochastic matrix mapping n_src cells onto n_dst cells by length
    of interval overlap, treating both axes as spanning the same extent."""
    m = np.zeros((n_src, n_dst))
    scale = n_dst / n_src
    for i in range(n_src):
        lo = i * scale
        hi = (i + 1) * scale
        j0 = int(math.floor(lo))
        j1 = min(int(math.ceil(hi)), n_dst)
        for j in range(j0, j1):
            m[i, j] = max(0.0, min(hi, j + 1) - max(lo, j)) / scale
    return m


def resample(grid: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Area-weighted resample preserving total mass."""
    if grid.shape == shape:
        return grid
    if min(shape) < 1 or min(grid.shape) < 1:
        raise ValueError(f"cannot resample {grid.shape} onto {shape}")
    rows = _overlap_matrix(grid.shape[0], shape[0])
    cols = _overlap_matrix(grid.shape[1], shape[1])
    return rows.T @ grid @ cols


def bhattacharyya_distance(a: Descriptor, b: Descriptor) -> float:
    """-ln sum(sqrt(a * b)); 0 for identical densities, +inf for disjoint.

    Grids of unequal shape are compared by resampling the smaller onto the
    larger with area weighting.
    """
    ga, gb = a.grid, b.grid
    if ga.shape != gb.shape:
        target = (max(ga.shape[0], gb.shape[0]), max(ga.shape[1], gb.shape[1]))
        ga = resample(ga, target)
        gb = resample(gb, target)
    if np.array_equal(ga, gb):
        return 0.0
    bc = float(np.sqrt(ga * gb).sum())
    if bc <= 0.0:
        return math.inf
    return max(0.0, -math.log(bc))


def write_csv(desc: Descriptor, path: str | Path) -> None:
    """Sparse `cx,cy,value` rows; grid shape kept in a comment for import."""
    h, w = desc.grid.shape
    with open(path, "w") as fh:
        fh.write(f"# grid {w} {h}\n")
        fh.write(f"# velocity {desc.velocity.vx!r} {desc.velocity.vy!r}\n")
        fh.write(f"# captured {desc.capture_t!r} tracker {desc.tracker_id}\n")
        fh.write("cx,cy,value\n")
        cy, cx = np.nonzero(desc.grid)
        for x, y in zip(cx.tolist(), cy.tolist()):
            fh.write(f"{x},{y},{float(desc.grid[y, x])!r}\n")


def read_csv(path: str | Path) -> Descriptor:
    shape = None
    velocity = Velocity(0.0, 0.0)
    capture_t = 0.0
    tracker_id = -1
    cells: list[tuple[int, int, float]] = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line.lstrip("#").split()
            if parts and parts[0] == "grid":
                shape = (int(parts[2]), int(parts[1]))  # (h, w)
            elif parts and parts[0] == "velocity":
                velocity = Velocity(float(parts[1]), float(parts[2]))
            elif parts and parts[0] == "captured":
                capture_t = float(parts[1])
                tracker_id = int(parts[3])
            continue
        if line.startswith("cx,"):
            continue
        x_s, y_s, v_s = line.split(",")
        cells.append((int(x_s), int(y_s), float(v_s)))
    if shape is None:
        raise ValueError(f"{path}: missing '# grid W H' header")
    grid = np.zeros(shape)
    for x, y, val in cells:
        grid[y, x] = val
    return Descriptor(grid, tracker_id, velocity, capture_t)
