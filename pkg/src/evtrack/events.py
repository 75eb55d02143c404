"""Event stream types and file I/O for event-camera recordings.

An event is one asynchronous luminance-change sample (x, y, t, polarity).
Timestamps are integer microseconds; all higher-level math converts to
double-precision seconds. Streams are immutable after construction and
safe to share read-only across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

DEFAULT_WIDTH = 640
DEFAULT_HEIGHT = 480

BINARY_MAGIC = b"EVT1\x00\x00\x00\x00"
# 13-byte packed record: u64 t_us, u16 x, u16 y, i8 polarity (little-endian)
RECORD_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1")])
HEADER_SIZE = len(BINARY_MAGIC) + 4


class EventStreamError(ValueError):
    """Malformed event data: parse failure, ordering or bounds violation."""


@dataclass(frozen=True)
class SensorGeometry:
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise EventStreamError(f"geometry must be positive, got {self.width}x{self.height}")


@dataclass(frozen=True)
class Event:
    """One luminance-change sample. t in integer microseconds, polarity in {-1, +1}."""

    t: int
    x: int
    y: int
    polarity: int


class EventStream:
    """Time-ordered event recording backed by read-only numpy arrays.

    Polarity is carried but ignored by the tracking math; it is preserved
    for round trips and future use.
    """

    def __init__(
        self,
        t_us: np.ndarray,
        x: np.ndarray,
        y: np.ndarray,
        polarity: np.ndarray,
        geometry: SensorGeometry = SensorGeometry(),
        validate: bool = True,
    ) -> None:
        self.t_us = np.ascontiguousarray(t_us, dtype=np.int64)
        self.x = np.ascontiguousarray(x, dtype=np.int32)
        self.y = np.ascontiguousarray(y, dtype=np.int32)
        self.polarity = np.ascontiguousarray(polarity, dtype=np.int8)
        self.geometry = geometry
        n = len(self.t_us)
        if not (len(self.x) == len(self.y) == len(self.polarity) == n):
            raise EventStreamError("event field arrays have mismatched lengths")
        if validate:
            self._validate()
        for a in (self.t_us, self.x, self.y, self.polarity):
            a.setflags(write=False)

    def _validate(self) -> None:
        if len(self.t_us) == 0:
            return
        if self.t_us[0] < 0:
            raise EventStreamError("negative timestamp at index 0")
        dt = np.diff(self.t_us)
        bad = np.nonzero(dt < 0)[0]
        if len(bad):
            i = int(bad[0]) + 1
            raise EventStreamError(
                f"timestamps must be non-decreasing: t[{i}]={self.t_us[i]} after t[{i-1}]={self.t_us[i-1]}"
            )
        g = self.geometry
        oob = np.nonzero((self.x < 0) | (self.x >= g.width) | (self.y < 0) | (self.y >= g.height))[0]
        if len(oob):
            i = int(oob[0])
            raise EventStreamError(
                f"event {i} at ({self.x[i]}, {self.y[i]}) outside {g.width}x{g.height} sensor"
            )
        badp = np.nonzero((self.polarity != 1) & (self.polarity != -1))[0]
        if len(badp):
            i = int(badp[0])
            raise EventStreamError(f"event {i} has polarity {self.polarity[i]}, expected -1 or +1")

    @classmethod
    def empty(cls, geometry: SensorGeometry = SensorGeometry()) -> "EventStream":
        z = np.zeros(0)
        return cls(z, z, z, z, geometry)

    @classmethod
    def from_events(cls, events: list[Event], geometry: SensorGeometry = SensorGeometry()) -> "EventStream":
        if not events:
            return cls.empty(geometry)
        return cls(
            np.array([e.t for e in events]),
            np.array([e.x for e in events]),
            np.array([e.y for e in events]),
            np.array([e.polarity for e in events]),
            geometry,
        )

    def times_seconds(self) -> np.ndarray:
        return self.t_us.astype(np.float64) / 1e6

    def __len__(self) -> int:
        return len(self.t_us)

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.t_us[i]), int(self.x[i]), int(self.y[i]), int(self.polarity[i]))

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.geometry == other.geometry
            and np.array_equal(self.t_us, other.t_us)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.polarity, other.polarity)
        )


def merge_sorted(a: EventStream, b: EventStream) -> EventStream:
    """Merge two sorted streams; equal timestamps keep a's events first."""
    if a.geometry != b.geometry:
        raise EventStreamError(f"geometry mismatch: {a.geometry} vs {b.geometry}")
    t = np.concatenate([a.t_us, b.t_us])
    order = np.argsort(t, kind="stable")
    return EventStream(
        t[order],
        np.concatenate([a.x, b.x])[order],
        np.concatenate([a.y, b.y])[order],
        np.concatenate([a.polarity, b.polarity])[order],
        a.geometry,
        validate=False,
    )


def _parse_geometry_comment(line: str) -> SensorGeometry | None:
    body = line.lstrip("#").strip()
    if not body.startswith("geometry"):
        return None
    spec = body.split(None, 1)[1].strip()
    try:
        w, h = spec.lower().split("x")
        return SensorGeometry(int(w), int(h))
    except (ValueError, IndexError) as exc:
        raise EventStreamError(f"bad geometry comment: {line!r}") from exc


def read_csv(path: str | Path, geometry: SensorGeometry | None = None) -> EventStream:
    """Read `t_us,x,y,p` lines. An optional header row is detected by a
    non-numeric first field; `# geometry WxH` comments set the geometry."""
    path = Path(path)
    file_geometry = None
    ts: list[int] = []
    xs: list[int] = []
    ys: list[int] = []
    ps: list[int] = []
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                g = _parse_geometry_comment(line)
                if g is not None:
                    file_geometry = g
                continue
            fields = line.split(",")
            if len(fields) != 4:
                raise EventStreamError(f"{path}:{lineno}: expected 4 fields, got {len(fields)}")
            try:
                t = int(fields[0])
            except ValueError:
                if lineno == 1 or not ts:
                    continue  # header row
                raise EventStreamError(f"{path}:{lineno}: bad timestamp {fields[0]!r}")
            try:
                x, y, p = int(fields[1]), int(fields[2]), int(fields[3])
            except ValueError as exc:
                raise EventStreamError(f"{path}:{lineno}: bad field: {exc}")
            if p not in (-1, 1):
                raise EventStreamError(f"{path}:{lineno}: polarity {p} not in {{-1, 1}}")
            ts.append(t)
            xs.append(x)
            ys.append(y)
            ps.append(p)
    geom = geometry or file_geometry or SensorGeometry()
    if not ts:
        return EventStream.empty(geom)
    try:
        return EventStream(np.array(ts), np.array(xs), np.array(ys), np.array(ps), geom)
    except EventStreamError as exc:
        raise EventStreamError(f"{path}: {exc}") from exc


def write_csv(stream: EventStream, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"# geometry {stream.geometry.width}x{stream.geometry.height}\n")
        fh.write("t_us,x,y,p\n")
        for i in range(len(stream)):
            fh.write(f"{stream.t_us[i]},{stream.x[i]},{stream.y[i]},{stream.polarity[i]}\n")


def read_binary(path: str | Path) -> EventStream:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < HEADER_SIZE:
        raise EventStreamError(f"{path}: truncated header ({len(blob)} bytes)")
    if blob[: len(BINARY_MAGIC)] != BINARY_MAGIC:
        raise EventStreamError(f"{path}: bad magic {blob[:8]!r}")
    w = int.from_bytes(blob[8:10], "little")
    h = int.from_bytes(blob[10:12], "little")
    body = blob[HEADER_SIZE:]
    if len(body) % RECORD_DTYPE.itemsize != 0:
        raise EventStreamError(
            f"{path}: truncated record ({len(body)} bytes is not a multiple of {RECORD_DTYPE.itemsize})"
        )
    rec = np.frombuffer(body, dtype=RECORD_DTYPE)
    geom = SensorGeometry(w, h)
    if rec["t"].size and rec["t"].max() > np.iinfo(np.int64).max:
        raise EventStreamError(f"{path}: timestamp overflows signed 64-bit range")
    try:
        return EventStream(rec["t"].astype(np.int64), rec["x"], rec["y"], rec["p"], geom)
    except EventStreamError as exc:
        raise EventStreamError(f"{path}: {exc}") from exc


def write_binary(stream: EventStream, path: str | Path) -> None:
    """Bit-exact inverse of read_binary: write(read(p)) reproduces p byte-for-byte."""
    path = Path(path)
    rec = np.empty(len(stream), dtype=RECORD_DTYPE)
    rec["t"] = stream.t_us.astype(np.uint64)
    rec["x"] = stream.x.astype(np.uint16)
    rec["y"] = stream.y.astype(np.uint16)
    rec["p"] = stream.polarity
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(int(stream.geometry.width).to_bytes(2, "little"))
        fh.write(int(stream.geometry.height).to_bytes(2, "little"))
        fh.write(rec.tobytes())
