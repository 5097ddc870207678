"""Asynchronous event streams: parsing, serialization, synthetic generation.

Wire formats
------------
Text: UTF-8, ``#``-prefixed comments, one header line ``# evt1 <W> <H> <T_us>``
before any data line, then ``t x y p`` per event.
Binary: magic ``EVB1``, little-endian u16 W, u16 H, u64 T_us, u64 count, then
16-byte records ``u64 t, u16 x, u16 y, i8 p`` plus 3 zero pad bytes.
Ground truth: one line per segment ``k x y w h`` (top-left + size, pixels).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .boxes import BBox

BINARY_MAGIC = b"EVB1"
_RECORD = struct.Struct("<QHHb3x")
_HEADER = struct.Struct("<HHQQ")


class EventFormatError(ValueError):
    """Malformed event or ground-truth file; carries the offending line."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class Event(NamedTuple):
    """One camera event: microsecond timestamp, pixel, polarity (+1/-1)."""

    t: int
    x: int
    y: int
    p: int


@dataclass(frozen=True)
class EventStream:
    """Time-sorted event arrays plus sensor geometry.

    Columnar storage (t: int64, x/y: int32, p: int8); immutable after
    construction and safe to share across threads.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray
    sensor_w: int
    sensor_h: int
    duration_us: int

    def __post_init__(self):
        if self.sensor_w <= 0 or self.sensor_h <= 0:
            raise EventFormatError(
                f"sensor dims must be positive, got {self.sensor_w}x{self.sensor_h}"
            )
        if self.duration_us < 0:
            raise EventFormatError(f"negative duration {self.duration_us}")
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise EventFormatError("event column lengths differ")
        if n:
            if np.any(np.diff(self.t) < 0):
                raise EventFormatError("events not sorted by timestamp")
            if self.t[0] < 0 or self.t[-1] > self.duration_us:
                raise EventFormatError("event timestamp outside [0, duration]")
            if (
                np.any(self.x < 0)
                or np.any(self.x >= self.sensor_w)
                or np.any(self.y < 0)
                or np.any(self.y >= self.sensor_h)
            ):
                raise EventFormatError("event coordinate outside sensor bounds")
            if not np.all(np.abs(self.p) == 1):
                raise EventFormatError("polarity outside {-1, 1}")
        for arr in (self.t, self.x, self.y, self.p):
            arr.setflags(write=False)

    @classmethod
    def from_arrays(cls, t, x, y, p, sensor_w, sensor_h, duration_us,
                    sort: bool = False) -> "EventStream":
        t = np.asarray(t, dtype=np.int64)
        x = np.asarray(x, dtype=np.int32)
        y = np.asarray(y, dtype=np.int32)
        p = np.asarray(p, dtype=np.int8)
        if sort and len(t):
            order = np.argsort(t, kind="stable")
            t, x, y, p = t[order], x[order], y[order], p[order]
        return cls(t, x, y, p, int(sensor_w), int(sensor_h), int(duration_us))

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def slice_window(self, t_lo: int, t_hi: int) -> tuple[np.ndarray, ...]:
        """Columns of all events with t in the closed interval [t_lo, t_hi]."""
        lo = int(np.searchsorted(self.t, t_lo, side="left"))
        hi = int(np.searchsorted(self.t, t_hi, side="right"))
        return self.t[lo:hi], self.x[lo:hi], self.y[lo:hi], self.p[lo:hi]

    def segment_count(self, dt_us: int) -> int:
        return self.duration_us // dt_us


@dataclass(frozen=True)
class GroundTruth:
    """One annotation box per temporal segment."""

    boxes: tuple[BBox, ...]
    segment_count: int

    def __post_init__(self):
        if len(self.boxes) != self.segment_count:
            raise ValueError(
                f"{len(self.boxes)} boxes for {self.segment_count} segments"
            )


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def parse_text(path) -> EventStream:
    """Parse the text format; unsorted input is tolerated and stably sorted."""
    header = None
    ts, xs, ys, ps = [], [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                fields = line[1:].split()
                if fields[:1] == ["evt1"]:
                    if header is not None:
                        raise EventFormatError("duplicate header", lineno)
                    if len(fields) != 4:
                        raise EventFormatError(
                            f"header needs '# evt1 W H T_us', got {line!r}", lineno
                        )
                    try:
                        header = tuple(int(v) for v in fields[1:])
                    except ValueError:
                        raise EventFormatError(
                            f"non-integer header field in {line!r}", lineno
                        ) from None
                continue
            if header is None:
                raise EventFormatError("data before '# evt1' header", lineno)
            fields = line.split()
            if len(fields) != 4:
                raise EventFormatError(
                    f"expected 4 fields 't x y p', got {len(fields)}", lineno
                )
            try:
                t, x, y, p = (int(v) for v in fields)
            except ValueError:
                raise EventFormatError(f"non-integer field in {line!r}", lineno) from None
            if p not in (-1, 1):
                raise EventFormatError(f"polarity {p} outside {{-1, 1}}", lineno)
            w, h, dur = header
            if not (0 <= x < w and 0 <= y < h):
                raise EventFormatError(f"coordinate ({x}, {y}) out of bounds", lineno)
            if not (0 <= t <= dur):
                raise EventFormatError(f"timestamp {t} outside [0, {dur}]", lineno)
            ts.append(t)
            xs.append(x)
            ys.append(y)
            ps.append(p)
    if header is None:
        raise EventFormatError("missing '# evt1 W H T_us' header")
    w, h, dur = header
    return EventStream.from_arrays(ts, xs, ys, ps, w, h, dur, sort=True)


def write_text(stream: EventStream, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# evt1 {stream.sensor_w} {stream.sensor_h} {stream.duration_us}\n")
        for i in range(len(stream)):
            e = stream[i]
            fh.write(f"{e.t} {e.x} {e.y} {e.p}\n")


# ---------------------------------------------------------------------------
# binary format
# ---------------------------------------------------------------------------

def parse_binary(path) -> EventStream:
    """Parse the binary format; events must already be sorted."""
    data = Path(path).read_bytes()
    if len(data) < 4:
        raise EventFormatError("truncated file: missing magic")
    magic = data[:4]
    if magic != BINARY_MAGIC:
        if magic[:3] == BINARY_MAGIC[:3]:
            raise EventFormatError(
                f"version mismatch: magic {magic!r}, expected {BINARY_MAGIC!r}"
            )
        raise EventFormatError(f"bad magic {magic!r}")
    if len(data) < 4 + _HEADER.size:
        raise EventFormatError("truncated file: incomplete header")
    w, h, dur, count = _HEADER.unpack_from(data, 4)
    body = data[4 + _HEADER.size:]
    if len(body) != count * _RECORD.size:
        raise EventFormatError(
            f"truncated or oversized body: {len(body)} bytes for {count} records"
        )
    rec = np.frombuffer(
        body,
        dtype=np.dtype(
            [("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1"), ("pad", "V3")]
        ),
    )
    return EventStream(
        rec["t"].astype(np.int64),
        rec["x"].astype(np.int32),
        rec["y"].astype(np.int32),
        rec["p"].astype(np.int8),
        int(w),
        int(h),
        int(dur),
    )


def write_binary(stream: EventStream, path) -> None:
    rec = np.zeros(
        len(stream),
        dtype=np.dtype(
            [("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "i1"), ("pad", "V3")]
        ),
    )
    rec["t"] = stream.t
    rec["x"] = stream.x
    rec["y"] = stream.y
    rec["p"] = stream.p
    header = _HEADER.pack(
        stream.sensor_w, stream.sensor_h, stream.duration_us, len(stream)
    )
    Path(path).write_bytes(BINARY_MAGIC + header + rec.tobytes())


# ---------------------------------------------------------------------------
# ground truth
# ---------------------------------------------------------------------------

def parse_ground_truth(path) -> GroundTruth:
    boxes = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 5:
                raise EventFormatError("expected 'k x y w h'", lineno)
            k = int(fields[0])
            if k != len(boxes):
                raise EventFormatError(f"segment index {k}, expected {len(boxes)}", lineno)
            x, y, w, h = (float(v) for v in fields[1:])
            boxes.append(BBox(x, y, w, h))
    return GroundTruth(tuple(boxes), len(boxes))


def write_ground_truth(gt: GroundTruth, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for k, b in enumerate(gt.boxes):
            fh.write(f"{k} {b.x:.4f} {b.y:.4f} {b.w:.4f} {b.h:.4f}\n")


# ---------------------------------------------------------------------------
# synthetic generation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SceneSpec:
    """A moving-rectangle scene that emits perimeter and background events.

    waypoints are (t_us, cx, cy) triples defining a piecewise-linear center
    trajectory; the box is target_w x target_h around it. lambda_edge is the
    event rate per perimeter pixel per microsecond, lambda_bg per sensor
    pixel per microsecond.
    """

    sensor_w: int
    sensor_h: int
    duration_us: int
    dt_us: int
    waypoints: tuple[tuple[int, float, float], ...]
    target_w: float = 12.0
    target_h: float = 12.0
    lambda_edge: float = 0.01
    lambda_bg: float = 1e-5
    time_bins_per_segment: int = 8

    def __post_init__(self):
        if self.lambda_edge < 0 or self.lambda_bg < 0:
            raise ValueError("event rates must be non-negative")
        if self.dt_us <= 0 or self.duration_us <= 0:
            raise ValueError("dt_us and duration_us must be positive")
        if len(self.waypoints) < 1:
            raise ValueError("at least one waypoint required")
        if list(self.waypoints) != sorted(self.waypoints, key=lambda w: w[0]):
            raise ValueError("waypoints must be sorted by time")

    @property
    def segment_count(self) -> int:
        return self.duration_us // self.dt_us

    def center_at(self, t_us: float) -> tuple[float, float]:
        pts = self.waypoints
        if t_us <= pts[0][0]:
            return pts[0][1], pts[0][2]
        for (t0, x0, y0), (t1, x1, y1) in zip(pts, pts[1:]):
            if t_us <= t1:
                a = (t_us - t0) / (t1 - t0) if t1 > t0 else 0.0
                return x0 + a * (x1 - x0), y0 + a * (y1 - y0)
        return pts[-1][1], pts[-1][2]

    def velocity_at(self, t_us: float) -> tuple[float, float]:
        pts = self.waypoints
        for (t0, x0, y0), (t1, x1, y1) in zip(pts, pts[1:]):
            if t0 <= t_us <= t1 and t1 > t0:
                return (x1 - x0) / (t1 - t0), (y1 - y0) / (t1 - t0)
        return 0.0, 0.0

    def box_at(self, t_us: float) -> BBox:
        cx, cy = self.center_at(t_us)
        return BBox(cx - self.target_w / 2.0, cy - self.target_h / 2.0,
                    self.target_w, self.target_h)


def _perimeter_pixels(box: BBox, width: int, height: int):
    """Unique integer perimeter pixels with summed outward normals."""
    x0 = int(round(box.x))
    y0 = int(round(box.y))
    x1 = int(round(box.x2)) - 1
    y1 = int(round(box.y2)) - 1
    x0, x1 = max(x0, 0), min(x1, width - 1)
    y0, y1 = max(y0, 0), min(y1, height - 1)
    if x1 < x0 or y1 < y0:
        return np.empty((0, 2), dtype=np.int64), np.empty((0, 2), dtype=np.float64)
    normals: dict[tuple[int, int], list[float]] = {}

    def add(px, py, nx, ny):
        n = normals.setdefault((px, py), [0.0, 0.0])
        n[0] += nx
        n[1] += ny

    for px in range(x0, x1 + 1):
        add(px, y0, 0.0, -1.0)
        add(px, y1, 0.0, 1.0)
    for py in range(y0, y1 + 1):
        add(x0, py, -1.0, 0.0)
        add(x1, py, 1.0, 0.0)
    keys = sorted(normals)
    pix = np.array(keys, dtype=np.int64)
    nrm = np.array([normals[k] for k in keys], dtype=np.float64)
    return pix, nrm


def generate_synthetic(spec: SceneSpec, seed: int) -> tuple[EventStream, GroundTruth]:
    """Poisson-sample a synthetic stream; pure function of (spec, seed).

    Perimeter pixels of the moving target emit events with polarity +1 where
    the outward normal points along the motion (leading edge) and -1 where it
    points against it (trailing edge). Background noise is uniform.
    """
    for t_us, _, _ in spec.waypoints:
        b = spec.box_at(t_us)
        if b.x < 0 or b.y < 0 or b.x2 > spec.sensor_w or b.y2 > spec.sensor_h:
            raise ValueError(f"trajectory leaves sensor bounds at t={t_us}")

    rng = np.random.Generator(np.random.Philox(seed))
    W, H, T = spec.sensor_w, spec.sensor_h, spec.duration_us
    ts, xs, ys, ps = [], [], [], []

    # background: one Poisson draw for the whole scene, uniform in time/space
    n_bg = int(rng.poisson(spec.lambda_bg * W * H * T))
    if n_bg:
        ts.append(rng.integers(0, T + 1, size=n_bg, dtype=np.int64))
        xs.append(rng.integers(0, W, size=n_bg, dtype=np.int64))
        ys.append(rng.integers(0, H, size=n_bg, dtype=np.int64))
        ps.append(rng.choice(np.array([-1, 1], dtype=np.int64), size=n_bg))

    # target edges: per time bin, Poisson counts per perimeter pixel
    bin_us = max(1, spec.dt_us // spec.time_bins_per_segment)
    for b0 in range(0, T, bin_us):
        b1 = min(b0 + bin_us, T)
        mid = (b0 + b1) / 2.0
        pix, nrm = _perimeter_pixels(spec.box_at(mid), W, H)
        if len(pix) == 0:
            continue
        counts = rng.poisson(spec.lambda_edge * (b1 - b0), size=len(pix))
        total = int(counts.sum())
        if total == 0:
            continue
        vx, vy = spec.velocity_at(mid)
        dots = nrm[:, 0] * vx + nrm[:, 1] * vy
        pol = np.where(dots < 0, -1, 1).astype(np.int64)
        rep = np.repeat(np.arange(len(pix)), counts)
        ts.append(rng.integers(b0, b1 + 1, size=total, dtype=np.int64))
        xs.append(pix[rep, 0])
        ys.append(pix[rep, 1])
        ps.append(pol[rep])

    if ts:
        t = np.concatenate(ts)
        x = np.concatenate(xs)
        y = np.concatenate(ys)
        p = np.concatenate(ps)
    else:
        t = x = y = p = np.empty(0, dtype=np.int64)
    stream = EventStream.from_arrays(t, x, y, p, W, H, T, sort=True)

    n_seg = spec.segment_count
    boxes = tuple(
        spec.box_at(k * spec.dt_us + spec.dt_us / 2.0) for k in range(n_seg)
    )
    return stream, GroundTruth(boxes, n_seg)
