"""Exponentially decaying accumulation grid.

Each event deposits 1 at its cell; every deposit fades as exp(-(t - t_j)/tau),
so the grid holds roughly one feature-pixel-traversal of history when
tau = 1 / ||v||. Decay is applied lazily: cells store their value at the
cumulative-decay ledger position of their last touch, and whole-map
aggregates (sum and first moments) are maintained in O(1) per event by
uniform rescaling, which is exact because decay is linear.
"""

from __future__ import annotations

import math

import numpy as np

TIME_REGRESSION_TOLERANCE = 1e-6  # seconds; one timestamp tick


class DecayingMap:
    def __init__(self, width_cells: int, height_cells: int, tau: float, t_start: float = 0.0):
        if tau <= 0:
            raise ValueError(f"tau must be positive, got {tau}")
        self.tau = float(tau)
        self._values = np.zeros((height_cells, width_cells), dtype=np.float64)
        self._anchors = np.zeros((height_cells, width_cells), dtype=np.float64)
        self._ledger = 0.0  # cumulative integral of dt/tau since t_start
        self.last_t = float(t_start)
        self.S = 0.0
        self.Mx = 0.0
        self.My = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self._values.shape

    def update(self, cx: int, cy: int, t: float) -> None:
        """Decay the map to t, then deposit 1 at cell (cx, cy).

        Out-of-order updates beyond the 1 us tolerance are an error.
        """
        dt = t - self.last_t
        if dt < -TIME_REGRESSION_TOLERANCE:
            raise ValueError(f"time regression: event at {t} after map time {self.last_t}")
        if dt > 0:
            self._ledger += dt / self.tau
            d = math.exp(-dt / self.tau)
            self.S *= d
            self.Mx *= d
            self.My *= d
            self.last_t = t
        g = self._ledger
        self._values[cy, cx] = self._values[cy, cx] * math.exp(-(g - self._anchors[cy, cx])) + 1.0
        self._anchors[cy, cx] = g
        self.S += 1.0
        self.Mx += cx
        self.My += cy

    def retune(self, tau: float) -> None:
        """Change the decay constant; past deposits keep the decay already applied."""
        if tau <= 0:
            raise ValueError(f"tau must be positive, got {tau}")
        self.tau = float(tau)

    def values(self, at_t: float | None = None) -> np.ndarray:
        """Decayed grid snapshot at at_t (default: the last update time)."""
        if at_t is None:
            g = self._ledger
        else:
            dt = at_t - self.last_t
            if dt < -TIME_REGRESSION_TOLERANCE:
                raise ValueError(f"time regression: query at {at_t} before map time {self.last_t}")
            g = self._ledger + max(dt, 0.0) / self.tau
        return self._values * np.exp(-(g - self._anchors))

    def value_at(self, cx: int, cy: int, at_t: float | None = None) -> float:
        if at_t is None:
            g = self._ledger
        else:
            g = self._ledger + max(at_t - self.last_t, 0.0) / self.tau
        return float(self._values[cy, cx] * math.exp(-(g - self._anchors[cy, cx])))

    def mean_position(self) -> tuple[float, float]:
        """Deposit-weighted centroid in cell coordinates, as of the last update."""
        if self.S <= 0.0:
            raise ValueError("mean position of an empty map")
        return (self.Mx / self.S, self.My / self.S)


def direct_map(
    cells_x: np.ndarray,
    cells_y: np.ndarray,
    times: np.ndarray,
    tau: float,
    t_query: float,
    shape: tuple[int, int],
) -> np.ndarray:
    """Evaluate the decaying map from scratch: sum of exp(-(t_query - t_j)/tau)
    per cell over all events with t_j <= t_query. Independent oracle for the
    incremental implementation."""
    grid = np.zeros(shape, dtype=np.float64)
    sel = times <= t_query
    w = np.exp(-(t_query - times[sel]) / tau)
    np.add.at(grid, (cells_y[sel], cells_x[sel]), w)
    return grid
