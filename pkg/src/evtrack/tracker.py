"""Multi-hypothesis per-event feature tracking.

A tracker bank holds one velocity hypothesis per (window position, seed
velocity) pair. Every event is offered to every active tracker whose
observation window contains the event's projection; accepted events update
the tracker's decaying map, mean position, speed error and velocity, in
that order, then the projection plan update conditions are checked.

Per-event work is O(1) per tracker (constant-time decayed aggregates), so
a bank sustains millions of events per second. Each tracker is
single-writer: events must be applied in timestamp order. Distinct banks
are independent and may run in parallel on disjoint streams.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import _kernel
from .events import EventStream, SensorGeometry
from .projection import Velocity

V_CLAMP_DEFAULT = 1.0  # px/s floor for tau = 1/||v||, bounds decay memory to 1 s


class TrackerStatus(enum.IntEnum):
    WARMING = _kernel.STATUS_WARMING
    TRACKING = _kernel.STATUS_TRACKING
    LOST = _kernel.STATUS_LOST
    IDLE = _kernel.STATUS_IDLE


@dataclass(frozen=True)
class TrackerConfig:
    """Bank configuration. `dx` defaults to R, the window side."""

    R: int = 30
    dx: float | None = None
    k: float = 0.01
    N: float = 6.0
    pi: float = 0.5
    subpixel: int = 1
    v_min: float = -1000.0
    v_max: float = 1000.0
    v_grid: int = 5
    b_detect: float = 0.01
    b_lost: float = 0.2
    a_idle: float = 0.1
    v_clamp: float = V_CLAMP_DEFAULT
    gate_px: float = 3.0
    plan_updates: bool = True
    telemetry_stride: int = 1

    def __post_init__(self) -> None:
        if self.R <= 0:
            raise ValueError(f"R must be positive, got {self.R}")
        if self.subpixel < 1:
            raise ValueError(f"subpixel must be >= 1, got {self.subpixel}")
        if self.v_grid < 1:
            raise ValueError(f"v_grid must be >= 1, got {self.v_grid}")
        if not (0 < self.pi <= 1):
            raise ValueError(f"pi must be in (0, 1], got {self.pi}")

    @property
    def dx_effective(self) -> float:
        return float(self.R) if self.dx is None else float(self.dx)


_CONFIG_KEYS = {
    "R": int,
    "dx": float,
    "k": float,
    "N": float,
    "pi": float,
    "subpixel": int,
    "v_min": float,
    "v_max": float,
    "v_grid": int,
    "b_detect": float,
    "b_lost": float,
    "a_idle": float,
    "v_clamp": float,
    "gate_px": float,
    "plan_updates": None,  # parsed as on/off
    "telemetry_stride": int,
}


def parse_config(path: str | Path) -> TrackerConfig:
    """Read a plain-text key=value config file. Unknown keys are an error."""
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        if key == "plan_updates":
            if val not in ("on", "off"):
                raise ValueError(f"{path}:{lineno}: plan_updates must be on or off, got {val!r}")
            values[key] = val == "on"
        else:
            try:
                values[key] = _CONFIG_KEYS[key](val)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad value for {key}: {exc}")
    return TrackerConfig(**values)


def write_config(config: TrackerConfig, path: str | Path) -> None:
    lines = []
    for f in fields(config):
        val = getattr(config, f.name)
        if f.name == "dx":
            val = config.dx_effective
        elif f.name == "plan_updates":
            val = "on" if val else "off"
        lines.append(f"{f.name}={val}")
    Path(path).write_text("\n".join(lines) + "\n")


def velocity_grid(config: TrackerConfig) -> list[tuple[float, float]]:
    """Uniform v_grid x v_grid seed velocities over [v_min, v_max]^2.

    The degenerate (0, 0) seed is clamped to (1, 0) px/s so tau stays finite.
    """
    axis = np.linspace(config.v_min, config.v_max, config.v_grid)
    seeds = []
    for vy in axis:
        for vx in axis:
            if vx == 0.0 and vy == 0.0:
                seeds.append((1.0, 0.0))
            else:
                seeds.append((float(vx), float(vy)))
    return seeds


# --- single-step correction formulas -------------------------------------

def speed_error(
    mean: tuple[float, float], x_ref: tuple[float, float], t_now: float, t0: float
) -> tuple[float, float]:
    """Drift of the mean position since the reference, per unit elapsed time."""
    dt = t_now - t0
    if dt <= 0:
        raise ValueError(f"elapsed time must be positive, got {dt}")
    return ((mean[0] - x_ref[0]) / dt, (mean[1] - x_ref[1]) / dt)


def gain(S: float, dx: float) -> float:
    """Correction gain 1 / (S * dx): one gain unit per dx pixels of travel."""
    if S <= 0:
        raise ValueError("gain undefined for an empty map")
    return 1.0 / (S * dx)


def apply_speed_update(
    v: tuple[float, float], eps: tuple[float, float], lam: float
) -> tuple[float, float]:
    return (v[0] + lam * eps[0], v[1] + lam * eps[1])


def plan_update_due(
    eps: tuple[float, float], v: tuple[float, float], t_now: float, t0: float, k: float, N: float
) -> bool:
    """Both stability and displacement conditions for re-anchoring the plan."""
    en = math.hypot(*eps)
    vn = math.hypot(*v)
    if vn <= 0:
        return False
    return en <= k * vn and (t_now - t0) > N / vn


def detection_ratios(
    S: float, R: float, eps: tuple[float, float] | None, v: tuple[float, float],
    v_clamp: float = V_CLAMP_DEFAULT,
) -> tuple[float, float]:
    """(A, B): window fill proxy S/R and relative speed error ||eps||/||v||.

    B is +inf below the velocity clamp and NaN before any error estimate.
    """
    a = S / R
    if eps is None:
        return a, math.nan
    vn = math.hypot(*v)
    if vn < v_clamp:
        return a, math.inf
    return a, math.hypot(*eps) / vn


# --- bank ------------------------------------------------------------------

@dataclass(frozen=True)
class TrackerState:
    """Read-only snapshot of one tracker."""

    tracker_id: int
    status: TrackerStatus
    velocity: Velocity
    t0: float
    window_center: tuple[float, float]
    R: int
    subpixel: int
    map_values: np.ndarray
    x_ref: tuple[float, float] | None  # window coordinates
    S: float
    last_epsilon: tuple[float, float] | None
    detected: bool
    tau: float
    last_t: float

    @property
    def A(self) -> float:
        return detection_ratios(self.S, self.R, None, (0, 0))[0]

    @property
    def B(self) -> float:
        eps = self.last_epsilon
        return detection_ratios(self.S, self.R, eps, (self.velocity.vx, self.velocity.vy))[1]


@dataclass
class Telemetry:
    """Per-correction log rows plus the plan-update side log."""

    rows: np.ndarray          # (n, 12) float64, columns _kernel.TELEMETRY_COLUMNS
    plan_events: np.ndarray   # (m, 3): t_s, tracker_id, report jump px

    columns = _kernel.TELEMETRY_COLUMNS

    def column(self, name: str) -> np.ndarray:
        return self.rows[:, self.columns.index(name)]

    def for_tracker(self, tracker_id: int) -> np.ndarray:
        return self.rows[self.rows[:, 1] == tracker_id]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                vals = [float(v) for v in row]
                fh.write(
                    f"{int(round(vals[0] * 1e6))},{int(vals[1])},"
                    f"{vals[2]!r},{vals[3]!r},{vals[4]!r},{vals[5]!r},"
                    f"{vals[6]!r},{vals[7]!r},{vals[8]!r},{vals[9]!r},{vals[10]!r},"
                    f"{int(vals[11])}\n"
                )


def read_telemetry_csv(path: str | Path) -> Telemetry:
    rows = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != _kernel.TELEMETRY_COLUMNS:
            raise ValueError(f"{path}: unexpected telemetry header {header}")
        for line in fh:
            parts = line.strip().split(",")
            rows.append([float(p) for p in parts])
    arr = np.array(rows) if rows else np.zeros((0, 12))
    if len(arr):
        arr[:, 0] /= 1e6
    return Telemetry(arr, np.zeros((0, 3)))


class TrackerBank:
    """State for a set of velocity-hypothesis trackers, stored as arrays."""

    def __init__(
        self,
        positions: list[tuple[float, float]],
        velocities: list[tuple[float, float]],
        config: TrackerConfig,
        geometry: SensorGeometry = SensorGeometry(),
        t_start: float = 0.0,
    ) -> None:
        if not positions:
            raise ValueError("at least one window position is required")
        if not velocities:
            raise ValueError("at least one seed velocity is required")
        self.config = config
        self.geometry = geometry
        self.t_start = float(t_start)
        self.positions = list(positions)
        self.velocities = list(velocities)
        n = len(positions) * len(velocities)
        self.n_trackers = n
        # position index for each tracker: trackers are laid out position-major
        self.position_index = np.repeat(np.arange(len(positions)), len(velocities))

        f8 = lambda v=0.0: np.full(n, v, dtype=np.float64)
        self._status = np.zeros(n, dtype=np.int8)
        self._t0 = f8(t_start)
        self._vx = np.array([v[0] for _ in positions for v in velocities], dtype=np.float64)
        self._vy = np.array([v[1] for _ in positions for v in velocities], dtype=np.float64)
        vn = np.maximum(np.hypot(self._vx, self._vy), config.v_clamp)
        self._tau = 1.0 / vn
        self._cx = np.array([p[0] for p in positions for _ in velocities], dtype=np.float64)
        self._cy = np.array([p[1] for p in positions for _ in velocities], dtype=np.float64)
        self._S = f8()
        self._Mx = f8()
        self._My = f8()
        self._ledger = f8()
        self._last_t = f8(t_start)
        self._ref_due = self._t0 + self._tau
        self._refx = f8(np.nan)
        self._refy = f8(np.nan)
        self._ex = f8(np.nan)
        self._ey = f8(np.nan)
        self._last_ok_t = f8(t_start)
        self._b_ok_since = f8(np.nan)
        self._b_bad_since = f8(np.nan)
        self._detected = np.zeros(n, dtype=np.int8)
        self._corr_count = np.zeros(n, dtype=np.int64)
        grid_n = config.R * config.subpixel
        self._maps = np.zeros((n, grid_n, grid_n), dtype=np.float64)
        self._map_anchor = np.zeros((n, grid_n, grid_n), dtype=np.float64)
        self._telem_buf = np.zeros((1 << 18, 12), dtype=np.float64)
        self._plan_buf = np.zeros((1 << 14, 3), dtype=np.float64)
        if n >= len(self._plan_buf):
            raise ValueError(f"bank of {n} trackers exceeds the per-event buffer budget")
        self.events_processed = 0

    # -- processing --------------------------------------------------------

    def process(self, stream: EventStream) -> Telemetry:
        """Feed a timestamp-ordered stream through every tracker."""
        return self.process_arrays(
            stream.times_seconds(),
            stream.x.astype(np.float64),
            stream.y.astype(np.float64),
        )

    def process_arrays(self, t_s: np.ndarray, x: np.ndarray, y: np.ndarray) -> Telemetry:
        cfg = self.config
        telem_parts: list[np.ndarray] = []
        plan_parts: list[np.ndarray] = []
        i = 0
        n = len(t_s)
        while i < n:
            next_i, tn, pn, code, detail = _kernel.run_events(
                t_s, x, y, i,
                self._status, self._t0, self._vx, self._vy, self._tau,
                self._cx, self._cy, self._S, self._Mx, self._My,
                self._ledger, self._last_t, self._ref_due, self._refx, self._refy,
                self._ex, self._ey, self._last_ok_t, self._b_ok_since,
                self._b_bad_since, self._detected, self._corr_count,
                self._maps, self._map_anchor,
                float(cfg.R), cfg.subpixel, cfg.dx_effective, cfg.k, cfg.N,
                cfg.b_detect, cfg.b_lost, cfg.a_idle, cfg.v_clamp, cfg.gate_px,
                1 if cfg.plan_updates else 0, cfg.telemetry_stride,
                self._telem_buf, 0, self._plan_buf, 0,
            )
            if tn:
                telem_parts.append(self._telem_buf[:tn].copy())
            if pn:
                plan_parts.append(self._plan_buf[:pn].copy())
            if code == _kernel.RET_TIME_REGRESSION:
                raise ValueError(
                    f"out-of-order event at index {next_i} (tracker {detail}): "
                    f"t={t_s[next_i]} before tracker time"
                )
            if code == _kernel.RET_DONE:
                break
            i = next_i  # buffer full: flushed above, resume
        self.events_processed += n
        rows = np.concatenate(telem_parts) if telem_parts else np.zeros((0, 12))
        plans = np.concatenate(plan_parts) if plan_parts else np.zeros((0, 3))
        return Telemetry(rows, plans)

    # -- inspection ----------------------------------------------------------

    def state(self, tracker_id: int) -> TrackerState:
        k = tracker_id
        has_ref = not math.isnan(self._refx[k])
        has_eps = not math.isnan(self._ex[k])
        return TrackerState(
            tracker_id=k,
            status=TrackerStatus(int(self._status[k])),
            velocity=Velocity(float(self._vx[k]), float(self._vy[k])),
            t0=float(self._t0[k]),
            window_center=(float(self._cx[k]), float(self._cy[k])),
            R=self.config.R,
            subpixel=self.config.subpixel,
            map_values=self._maps[k] * np.exp(-(self._ledger[k] - self._map_anchor[k])),
            x_ref=(float(self._refx[k]), float(self._refy[k])) if has_ref else None,
            S=float(self._S[k]),
            last_epsilon=(float(self._ex[k]), float(self._ey[k])) if has_eps else None,
            detected=bool(self._detected[k]),
            tau=float(self._tau[k]),
            last_t=float(self._last_t[k]),
        )

    def states(self) -> list[TrackerState]:
        return [self.state(k) for k in range(self.n_trackers)]

    def detection_metrics(self, tracker_id: int) -> tuple[float, float]:
        st = self.state(tracker_id)
        eps = st.last_epsilon
        return detection_ratios(
            st.S, self.config.R, eps, (st.velocity.vx, st.velocity.vy), self.config.v_clamp
        )

    def reported_position(self, tracker_id: int, t: float) -> tuple[float, float]:
        """Window center advected to t by the current velocity estimate."""
        k = tracker_id
        dt = t - self._t0[k]
        return (float(self._cx[k] + self._vx[k] * dt), float(self._cy[k] + self._vy[k] * dt))


def seed_bank(
    positions: list[tuple[float, float]],
    velocities: list[tuple[float, float]] | None,
    config: TrackerConfig,
    geometry: SensorGeometry = SensorGeometry(),
    t_start: float = 0.0,
) -> TrackerBank:
    """One warming tracker per (position, velocity) pair.

    velocities=None seeds the config's quantized velocity grid.
    """
    if velocities is None:
        velocities = velocity_grid(config)
    return TrackerBank(positions, velocities, config, geometry, t_start)
