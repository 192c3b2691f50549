"""Box geometry and the value types passed between pipeline stages."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in continuous pixel coordinates (x1, y1, x2, y2)."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        coords = (self.x1, self.y1, self.x2, self.y2)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"non-finite box coordinates: {coords}")
        if not (self.x2 > self.x1 and self.y2 > self.y1):
            raise ValueError(f"box must have positive width and height: {coords}")

    @classmethod
    def from_cxcywh(cls, cx: float, cy: float, w: float, h: float) -> "BBox":
        return cls(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def center(self) -> tuple[float, float]:
        return (self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)

    def translate(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)


def area(b: BBox) -> float:
    return (b.x2 - b.x1) * (b.y2 - b.y1)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0.0 when they are disjoint."""
    if a == b:
        return 1.0
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = area(a) + area(b) - inter
    return min(1.0, inter / union)


def boxes_to_array(boxes: Sequence[BBox]) -> np.ndarray:
    if not boxes:
        return np.zeros((0, 4), dtype=np.float64)
    return np.array([b.as_tuple() for b in boxes], dtype=np.float64)


@dataclass(frozen=True)
class Detection:
    video_id: str
    frame_idx: int
    bbox: BBox
    det_score: float
    model_id: str = "model"

    def __post_init__(self):
        if self.frame_idx < 0:
            raise ValueError(f"frame_idx must be non-negative, got {self.frame_idx}")
        if not (0.0 <= self.det_score <= 1.0):
            raise ValueError(f"det_score must lie in [0, 1], got {self.det_score}")


PROB_SUM_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class ClassifiedItem:
    """A detection plus the second-stage class-probability vector.

    ``class_probs`` may be ``None`` for records coming out of a class-agnostic
    stage; such items report ``label == -1`` and ``cls_score == 0.0``.
    """

    detection: Detection
    class_probs: Optional[tuple[float, ...]] = None
    label: int = field(init=False)
    cls_score: float = field(init=False)

    def __post_init__(self):
        probs = self.class_probs
        if probs is None:
            object.__setattr__(self, "label", -1)
            object.__setattr__(self, "cls_score", 0.0)
            return
        probs = tuple(map(float, probs))
        if not probs:
            raise ValueError("class_probs must not be empty")
        top = max(probs)
        if not (min(probs) >= 0.0 and top <= 1.0):
            raise ValueError("class_probs entries must lie in [0, 1]")
        total = math.fsum(probs)
        if not abs(total - 1.0) <= PROB_SUM_TOL:
            raise ValueError(f"class_probs must sum to 1, got {total}")
        object.__setattr__(self, "class_probs", probs)
        # index() returns the first maximal entry: lowest class id on ties
        object.__setattr__(self, "label", probs.index(top))
        object.__setattr__(self, "cls_score", top)

    @property
    def classified(self) -> bool:
        return self.class_probs is not None

    @property
    def video_id(self) -> str:
        return self.detection.video_id

    @property
    def frame_idx(self) -> int:
        return self.detection.frame_idx

    @property
    def bbox(self) -> BBox:
        return self.detection.bbox

    @property
    def det_score(self) -> float:
        return self.detection.det_score

    def __eq__(self, other):
        if not isinstance(other, ClassifiedItem):
            return NotImplemented
        return self.detection == other.detection and self.class_probs == other.class_probs

    def __hash__(self):
        return hash((self.detection, self.class_probs))


@dataclass(frozen=True)
class VideoMeta:
    video_id: str
    fps: float = 60.0
    width: float = 1920.0
    height: float = 1080.0

    def __post_init__(self):
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if not (self.width > 0 and self.height > 0):
            raise ValueError("image width and height must be positive")

    @property
    def image_area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class CheckoutEvent:
    """Final output unit.

    ``timestamp_s`` is the emitted (possibly rounded) time; ``exact_s`` keeps
    the unrounded track midpoint for diagnostics.
    """

    video_id: str
    class_id: int
    timestamp_s: float
    exact_s: Optional[float] = None

    def __post_init__(self):
        if self.timestamp_s < 0:
            raise ValueError(f"timestamp must be non-negative, got {self.timestamp_s}")


def video_sort_key(video_id: str):
    """Numeric ids sort numerically ("2" before "10"), others lexicographically."""
    s = str(video_id)
    if s.isdigit():
        return (0, int(s), s)
    return (1, 0, s)
