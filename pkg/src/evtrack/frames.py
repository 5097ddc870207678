"""Multi-density event frames and template/search crops.

Each temporal segment gets three nested windows around its center time; the
events in each window are stacked into a 3-channel frame (positive count,
negative count, normalized recency). Frames are cropped and bilinearly
resampled to the fixed template/search resolutions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import accel
from .boxes import BBox
from .events import EventStream

COUNT_CLIP = 255.0


def _ceil_div(a: int, b: int) -> int:
    return -((-a) // b)


@dataclass(frozen=True)
class SegmentWindows:
    """Nested closed intervals [lo, hi] (µs) centered on one segment.

    Widths are dt/2, dt and 3*dt/2; fractional bounds round inward
    (ceil(lo), floor(hi)) so sparse ⊆ medium ⊆ dense holds in integer time.
    """

    t_k: int
    sparse: tuple[int, int]
    medium: tuple[int, int]
    dense: tuple[int, int]

    def __post_init__(self):
        s, m, d = self.sparse, self.medium, self.dense
        if not (d[0] <= m[0] <= s[0] and s[1] <= m[1] <= d[1]):
            raise ValueError(f"windows not nested: {s}, {m}, {d}")

    def by_density(self) -> dict[str, tuple[int, int]]:
        return {"sparse": self.sparse, "medium": self.medium, "dense": self.dense}


def segment_windows(t_k: int, dt_us: int, duration_us: int) -> SegmentWindows:
    """The three windows for a segment centered at t_k, clipped to [0, T]."""
    if dt_us <= 0:
        raise ValueError(f"dt_us must be positive, got {dt_us}")

    def clip(lo: int, hi: int) -> tuple[int, int]:
        return max(lo, 0), min(hi, duration_us)

    sparse = clip(_ceil_div(4 * t_k - dt_us, 4), (4 * t_k + dt_us) // 4)
    medium = clip(_ceil_div(2 * t_k - dt_us, 2), (2 * t_k + dt_us) // 2)
    dense = clip(_ceil_div(4 * t_k - 3 * dt_us, 4), (4 * t_k + 3 * dt_us) // 4)
    return SegmentWindows(t_k, sparse, medium, dense)


@dataclass(frozen=True)
class EventFrame:
    """3-channel stack of one window's events.

    channels[0]/[1] hold raw positive/negative counts per pixel (so the sum
    over both equals the window's event count); channels[2] is the recency
    map in [0, 1]. density is the total contributing-event count.
    """

    channels: np.ndarray
    density: int

    def __post_init__(self):
        if self.channels.shape[0] != 3 or self.channels.ndim != 3:
            raise ValueError(f"expected (3, H, W) channels, got {self.channels.shape}")
        if not np.all(np.isfinite(self.channels)):
            raise ValueError("non-finite frame channel values")
        self.channels.setflags(write=False)

    @property
    def height(self) -> int:
        return self.channels.shape[1]

    @property
    def width(self) -> int:
        return self.channels.shape[2]

    def normalized(self) -> np.ndarray:
        """Planes for embedding: counts clipped at 255 and scaled to [0, 1]."""
        out = np.empty_like(self.channels)
        out[0] = np.minimum(self.channels[0], COUNT_CLIP) / COUNT_CLIP
        out[1] = np.minimum(self.channels[1], COUNT_CLIP) / COUNT_CLIP
        out[2] = self.channels[2]
        return out


@dataclass(frozen=True)
class FrameTriplet:
    """Sparse/medium/dense frames for one segment; densities are nested."""

    sparse: EventFrame
    medium: EventFrame
    dense: EventFrame

    def __post_init__(self):
        if not (self.sparse.density <= self.medium.density <= self.dense.density):
            raise ValueError(
                "density monotonicity violated: "
                f"{self.sparse.density}, {self.medium.density}, {self.dense.density}"
            )

    def by_density(self) -> dict[str, EventFrame]:
        return {"sparse": self.sparse, "medium": self.medium, "dense": self.dense}


def build_frame(stream: EventStream, window: tuple[int, int]) -> EventFrame:
    """Accumulate the events with t in the closed window into one frame."""
    t, x, y, p = stream.slice_window(*window)
    pos, neg, rec = accel.accumulate_events(
        np.ascontiguousarray(t),
        np.ascontiguousarray(x),
        np.ascontiguousarray(y),
        np.ascontiguousarray(p),
        stream.sensor_w,
        stream.sensor_h,
        window[0],
        window[1],
    )
    return EventFrame(np.stack([pos, neg, rec]), density=len(t))


def build_triplet(stream: EventStream, windows: SegmentWindows) -> FrameTriplet:
    return FrameTriplet(
        sparse=build_frame(stream, windows.sparse),
        medium=build_frame(stream, windows.medium),
        dense=build_frame(stream, windows.dense),
    )


@dataclass(frozen=True)
class Crop:
    """Resampled square patch plus the affine map back to sensor coords.

    sensor = crop * scale + offset, applied per axis to continuous
    coordinates; sizes map by scale alone.
    """

    pixels: np.ndarray
    scale: float
    offset: tuple[float, float]

    @property
    def size(self) -> int:
        return self.pixels.shape[1]

    def to_sensor(self, crop_x: float, crop_y: float) -> tuple[float, float]:
        return crop_x * self.scale + self.offset[0], crop_y * self.scale + self.offset[1]

    def to_crop(self, sensor_x: float, sensor_y: float) -> tuple[float, float]:
        return (sensor_x - self.offset[0]) / self.scale, (sensor_y - self.offset[1]) / self.scale


def crop_resize(frame: EventFrame, center_box: BBox, context_factor: float,
                out_size: int) -> Crop:
    """Square crop of side context_factor * sqrt(w*h) around the box center,
    bilinearly resampled (zero-padded outside the frame) to out_size.

    Operates on the frame's normalized planes, so pixel values are bounded.
    """
    if context_factor <= 0:
        raise ValueError(f"context_factor must be positive, got {context_factor}")
    if out_size <= 0:
        raise ValueError(f"out_size must be positive, got {out_size}")
    side = context_factor * math.sqrt(center_box.w * center_box.h)
    scale = side / out_size
    off_x = center_box.cx - side / 2.0
    off_y = center_box.cy - side / 2.0
    planes = frame.normalized()
    pixels = np.stack(
        [
            accel.bilinear_resample(
                np.ascontiguousarray(planes[c]), out_size, out_size,
                scale, scale, off_y, off_x,
            )
            for c in range(3)
        ]
    )
    return Crop(pixels=pixels, scale=scale, offset=(off_x, off_y))
