"""Axis-aligned boxes (top-left + size, pixels) and overlap geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class BBox:
    """Box as top-left corner (x, y) plus size (w, h), all in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        if not (self.w > 0 and self.h > 0):
            raise ValueError(f"degenerate box: w={self.w}, h={self.h}")

    @property
    def cx(self) -> float:
        return self.x + self.w / 2.0

    @property
    def cy(self) -> float:
        return self.y + self.h / 2.0

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def diagonal(self) -> float:
        return math.hypot(self.w, self.h)

    def clamped(self, width: float, height: float) -> "BBox":
        """Clip to the sensor rectangle, keeping at least a 1-px box."""
        w = min(max(self.w, 1.0), float(width))
        h = min(max(self.h, 1.0), float(height))
        x = min(max(self.x, 0.0), float(width) - w)
        y = min(max(self.y, 0.0), float(height) - h)
        return BBox(x, y, w, h)


def intersection_area(a: BBox, b: BBox) -> float:
    iw = min(a.x2, b.x2) - max(a.x, b.x)
    ih = min(a.y2, b.y2) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    return iw * ih


def iou(a: BBox, b: BBox) -> float:
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    return inter / union if union > 0 else 0.0


def giou(a: BBox, b: BBox) -> float:
    """Overlap score in [-1, 1]: IoU minus the empty share of the hull."""
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    hull = (max(a.x2, b.x2) - min(a.x, b.x)) * (max(a.y2, b.y2) - min(a.y, b.y))
    return inter / union - (hull - union) / hull


def center_distance(a: BBox, b: BBox) -> float:
    return math.hypot(a.cx - b.cx, a.cy - b.cy)
