"""Seeded synthetic checkout scenarios with known ground truth.

Products move along straight lines (matching the tracker's constant-velocity
model), so a noise-free scenario is an exact fixed point of the pipeline.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from checkout_track.config import ConfigError, coerce, iter_kv
from checkout_track.core import BBox, ClassifiedItem, Detection, VideoMeta
from checkout_track.metrics import GroundTruthEvent
from checkout_track.tracker import Roi

SIM_MODEL_ID = "sim"


@dataclass(frozen=True)
class Product:
    class_id: int
    entry: int
    exit: int
    start: tuple[float, float]  # box center at entry
    end: tuple[float, float]    # box center at exit
    size: tuple[float, float]   # (w, h)

    def center_at(self, frame):
        t = (np.asarray(frame, dtype=np.float64) - self.entry) / (self.exit - self.entry)
        x = self.start[0] + t * (self.end[0] - self.start[0])
        y = self.start[1] + t * (self.end[1] - self.start[1])
        return x, y


@dataclass(frozen=True)
class ScenarioSpec:
    video_id: str = "1"
    fps: float = 60.0
    width: float = 1920.0
    height: float = 1080.0
    duration: int = 1800  # frames
    num_classes: int = 116
    products: tuple = ()
    roi_fraction: float = 0.5
    jitter_sigma: float = 0.0
    miss_rate: float = 0.0
    spurious_rate: float = 0.0
    label_noise_rate: float = 0.0
    true_score_min: float = 0.6
    true_score_max: float = 1.0
    spurious_score_min: float = 0.05
    spurious_score_max: float = 0.3
    # share of spurious boxes scored above the tracker's filter
    spurious_high_fraction: float = 0.1
    spurious_high_max: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if self.duration < 1 or self.num_classes < 1 or self.fps <= 0:
            raise ValueError("duration, num_classes and fps must be positive")
        for name in ("miss_rate", "label_noise_rate", "spurious_high_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")
        if self.spurious_rate < 0 or self.jitter_sigma < 0:
            raise ValueError("spurious_rate and jitter_sigma must be non-negative")
        if self.label_noise_rate > 0:
            if self.num_classes < 2:
                raise ValueError("label noise needs at least two classes")
            if not 1.0 - self.label_noise_rate > self.label_noise_rate / (self.num_classes - 1):
                raise ValueError("label_noise_rate too high for the noisy label to stay the argmax")
        if not 0.0 <= self.true_score_min <= self.true_score_max <= 1.0:
            raise ValueError("bad true score range")
        if not 0.0 <= self.spurious_score_min <= self.spurious_score_max <= 1.0:
            raise ValueError("bad spurious score range")
        if not self.spurious_score_max <= self.spurious_high_max <= 1.0:
            raise ValueError("bad spurious high-score range")
        roi = Roi.centered(self.meta, self.roi_fraction)
        for p in self.products:
            if not 0 <= p.entry < p.exit <= self.duration:
                raise ValueError(f"product frames must satisfy 0 <= entry < exit <= duration: {p}")
            if not 0 <= p.class_id < self.num_classes:
                raise ValueError(f"class id {p.class_id} outside [0, {self.num_classes})")
            if min(p.size) <= 0:
                raise ValueError("product size must be positive")
            for pt in (p.start, p.end):
                if not roi.contains(*pt):
                    raise ValueError(f"trajectory point {pt} leaves the ROI")

    @property
    def meta(self) -> VideoMeta:
        return VideoMeta(self.video_id, self.fps, self.width, self.height)


def expected_events(spec: ScenarioSpec) -> list[GroundTruthEvent]:
    order = sorted(range(len(spec.products)), key=lambda i: spec.products[i].entry)
    return [
        GroundTruthEvent(
            spec.video_id,
            spec.products[i].class_id,
            spec.products[i].entry / spec.fps,
            spec.products[i].exit / spec.fps,
        )
        for i in order
    ]


def _probs(label: int, num_classes: int, noise: float) -> tuple:
    if noise == 0.0:
        p = [0.0] * num_classes
        p[label] = 1.0
        return tuple(p)
    rest = noise / (num_classes - 1)
    p = [rest] * num_classes
    p[label] = 1.0 - noise
    return tuple(p)


def generate_scenario(spec: ScenarioSpec) -> tuple[list[GroundTruthEvent], list[ClassifiedItem]]:
    """Ground-truth events plus the detection stream, sorted by frame.

    Within a frame, product detections come first (in product order), then
    spurious boxes.
    """
    rng = np.random.default_rng(spec.seed)
    C = spec.num_classes
    by_frame: dict = {}

    for pi, p in enumerate(spec.products):
        frames = np.arange(p.entry, p.exit + 1)
        n = frames.size
        cx, cy = p.center_at(frames)
        keep = rng.random(n) >= spec.miss_rate
        jit = rng.normal(0.0, spec.jitter_sigma, size=(n, 2)) if spec.jitter_sigma > 0 else np.zeros((n, 2))
        flip = rng.random(n) < spec.label_noise_rate
        wrong = rng.integers(0, C - 1, size=n) if C > 1 else np.zeros(n, dtype=np.int64)
        scores = rng.uniform(spec.true_score_min, spec.true_score_max, size=n)
        w, h = p.size
        for k in range(n):
            if not keep[k]:
                continue
            label = p.class_id
            if flip[k]:
                label = int(wrong[k]) + (1 if wrong[k] >= p.class_id else 0)
            x, y = float(cx[k] + jit[k, 0]), float(cy[k] + jit[k, 1])
            det = Detection(spec.video_id, int(frames[k]), BBox.from_cxcywh(x, y, w, h),
                            float(scores[k]), SIM_MODEL_ID)
            by_frame.setdefault(int(frames[k]), []).append(
                ClassifiedItem(det, _probs(label, C, spec.label_noise_rate))
            )

    if spec.spurious_rate > 0:
        counts = rng.poisson(spec.spurious_rate, size=spec.duration)
        for f in np.flatnonzero(counts):
            for _ in range(int(counts[f])):
                w, h = rng.uniform(40.0, 200.0, size=2)
                x = rng.uniform(w / 2, spec.width - w / 2)
                y = rng.uniform(h / 2, spec.height - h / 2)
                if rng.random() < spec.spurious_high_fraction:
                    score = rng.uniform(spec.spurious_score_max, spec.spurious_high_max)
                else:
                    score = rng.uniform(spec.spurious_score_min, spec.spurious_score_max)
                label = int(rng.integers(0, C))
                det = Detection(spec.video_id, int(f), BBox.from_cxcywh(x, y, w, h), float(score), SIM_MODEL_ID)
                by_frame.setdefault(int(f), []).append(
                    ClassifiedItem(det, _probs(label, C, spec.label_noise_rate))
                )

    items = [it for f in sorted(by_frame) for it in by_frame[f]]
    return expected_events(spec), items


def random_scenario(
    seed: int,
    n_products: Optional[int] = None,
    duration_s: tuple = (30.0, 60.0),
    span_s: tuple = (2.0, 8.0),
    max_speed: float = 2.5,
    **noise,
) -> ScenarioSpec:
    """Random but well-posed scenario: two horizontal lanes inside the ROI.

    Products in one lane never overlap in time (gap >= 1 s); the lanes are far
    enough apart that boxes from different lanes never intersect.
    """
    rng = np.random.default_rng([seed, 7919])
    base = ScenarioSpec(**{k: v for k, v in noise.items() if k in ScenarioSpec.__dataclass_fields__})
    fps = base.fps
    duration = int(rng.integers(int(duration_s[0] * fps), int(duration_s[1] * fps) + 1))
    roi = Roi.centered(base.meta, base.roi_fraction)
    if n_products is None:
        n_products = int(rng.integers(1, 6))
    lane_h = (roi.y2 - roi.y1) / 2.0
    lane_cy = [roi.y1 + lane_h / 2.0, roi.y1 + 1.5 * lane_h]
    max_box = min(220.0, lane_h - 40.0)
    drift = 10.0
    gap = int(fps)
    free = [0, 0]
    products = []
    for _ in range(n_products):
        lane = int(np.argmin(free)) if rng.random() < 0.5 else int(rng.integers(0, 2))
        span = int(rng.integers(int(span_s[0] * fps), int(span_s[1] * fps) + 1))
        entry = free[lane] + int(rng.integers(0, int(3 * fps)))
        if entry + span > duration - 1:
            lane = int(np.argmin(free))
            entry = free[lane]
            span = min(span, duration - 1 - entry)
            if span < int(span_s[0] * fps):
                break
        exit_ = entry + span
        w, h = rng.uniform(150.0, max_box, size=2)
        x0 = rng.uniform(roi.x1 + 1.0, roi.x2 - 1.0)
        x1 = float(np.clip(x0 + rng.uniform(-max_speed, max_speed) * span, roi.x1 + 1.0, roi.x2 - 1.0))
        y0 = lane_cy[lane] + rng.uniform(-drift, drift)
        y1 = lane_cy[lane] + rng.uniform(-drift, drift)
        products.append(
            Product(int(rng.integers(0, base.num_classes)), entry, exit_, (float(x0), float(y0)),
                    (x1, float(y1)), (float(w), float(h)))
        )
        free[lane] = exit_ + gap
    return replace(base, duration=duration, products=tuple(products), seed=seed)


# -- flat key-value scenario files ------------------------------------------

_SPEC_TYPES = {
    "video_id": str, "fps": float, "width": float, "height": float, "duration": int,
    "num_classes": int, "roi_fraction": float, "jitter_sigma": float, "miss_rate": float,
    "spurious_rate": float, "label_noise_rate": float, "true_score_min": float,
    "true_score_max": float, "spurious_score_min": float, "spurious_score_max": float,
    "spurious_high_fraction": float, "spurious_high_max": float, "seed": int,
}


def parse_scenario(text: str, seed: Optional[int] = None) -> ScenarioSpec:
    """Scenario from ``key = value`` text.

    ``product = class entry exit x0 y0 x1 y1 w h`` may repeat; without any
    product line a random layout is drawn from the seed (``n_products``
    optionally fixes the count).
    """
    values: dict = {}
    products = []
    n_products = None
    for lineno, key, value in iter_kv(text):
        if key == "product":
            parts = value.split()
            if len(parts) != 9:
                raise ConfigError(f"line {lineno}: product needs 9 fields, got {len(parts)}")
            try:
                c, e, x = int(parts[0]), int(parts[1]), int(parts[2])
                nums = [float(v) for v in parts[3:]]
            except ValueError:
                raise ConfigError(f"line {lineno}: malformed product {value!r}") from None
            products.append(Product(c, e, x, (nums[0], nums[1]), (nums[2], nums[3]), (nums[4], nums[5])))
        elif key == "n_products":
            n_products = coerce(value, int, key, lineno)
        elif key in _SPEC_TYPES:
            values[key] = coerce(value, _SPEC_TYPES[key], key, lineno)
        else:
            raise ConfigError(f"line {lineno}: unknown scenario key {key!r}")
    if seed is not None:
        values["seed"] = seed
    try:
        if products:
            return ScenarioSpec(products=tuple(products), **values)
        s = values.pop("seed", 0)
        return random_scenario(s, n_products=n_products, **values)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid scenario: {exc}") from None


def load_scenario(path: Union[str, Path, None], seed: Optional[int] = None) -> ScenarioSpec:
    text = Path(path).read_text(encoding="utf-8") if path is not None else ""
    return parse_scenario(text, seed)
