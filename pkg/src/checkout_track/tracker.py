"""IoU + Kalman multi-object tracking of classified product boxes."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from checkout_track.config import PipelineConfig
from checkout_track.core import BBox, ClassifiedItem, VideoMeta, boxes_to_array
from checkout_track.kalman import KalmanState, kalman_initiate, kalman_predict, kalman_update
from checkout_track.kernels import iou_matrix

ACTIVE = "active"
TERMINATED = "terminated"


@dataclass(frozen=True)
class Roi:
    x1: float
    y1: float
    x2: float
    y2: float

    @classmethod
    def centered(cls, meta: VideoMeta, fraction: float) -> "Roi":
        if not 0.0 < fraction <= 1.0:
            raise ValueError(f"roi fraction must lie in (0, 1], got {fraction}")
        mx = meta.width * (1.0 - fraction) / 2.0
        my = meta.height * (1.0 - fraction) / 2.0
        return cls(mx, my, meta.width - mx, meta.height - my)

    def contains(self, x: float, y: float) -> bool:
        return self.x1 <= x <= self.x2 and self.y1 <= y <= self.y2


@dataclass
class Track:
    track_id: int
    kalman: KalmanState
    items: list = field(default_factory=list)
    first_frame: int = -1
    last_frame: int = -1
    misses: int = 0
    status: str = ACTIVE
    video_id: str = ""
    # frame the Kalman state refers to (may run ahead of last_frame)
    state_frame: int = -1

    @property
    def span(self) -> int:
        return self.last_frame - self.first_frame + 1

    def __len__(self):
        return len(self.items)


def score_filter(items: Iterable[ClassifiedItem], cfg: PipelineConfig):
    """Keep items with det_score >= det_score_min and cls_score >= cls_score_min."""
    return [
        it for it in items
        if it.det_score >= cfg.det_score_min and it.cls_score >= cfg.cls_score_min
    ]


def roi_filter(items: Iterable[ClassifiedItem], roi: Roi):
    return [it for it in items if roi.contains(*it.bbox.center)]


def associate(track_boxes, item_boxes, iou_gate: float = 0.8):
    """Optimal one-to-one matching of predicted track boxes to frame items.

    Only pairs with IoU strictly above ``iou_gate`` may match. Among feasible
    matchings the one with the most pairs wins, then the smallest total
    (1 - IoU). Returns (matches, unmatched track indices, unmatched item indices).
    """
    tb = track_boxes if isinstance(track_boxes, np.ndarray) else boxes_to_array(list(track_boxes))
    ib = item_boxes if isinstance(item_boxes, np.ndarray) else boxes_to_array(list(item_boxes))
    n, m = tb.shape[0], ib.shape[0]
    if n == 0 or m == 0:
        return [], list(range(n)), list(range(m))
    ious = iou_matrix(tb, ib)
    feasible = ious > iou_gate
    matches = []
    if feasible.any():
        # an infeasible pair costs more than any full set of feasible pairs
        cost = np.where(feasible, 1.0 - ious, float(min(n, m) + 1))
        rows, cols = linear_sum_assignment(cost)
        matches = [(int(r), int(c)) for r, c in zip(rows, cols) if feasible[r, c]]
    mt = {r for r, _ in matches}
    mi = {c for _, c in matches}
    return (
        matches,
        [i for i in range(n) if i not in mt],
        [j for j in range(m) if j not in mi],
    )


class Tracker:
    """Per-video tracking state; drive with ``step`` in ascending frame order."""

    def __init__(self, meta: VideoMeta, cfg: Optional[PipelineConfig] = None):
        self.meta = meta
        self.cfg = cfg or PipelineConfig()
        self.roi = Roi.centered(meta, self.cfg.roi_fraction)
        self.active: list[Track] = []
        self.finished: list[Track] = []
        self.class_counts: Counter = Counter()
        self.frame = -1
        self._next_id = 0

    def _predict_to(self, track: Track, frame: int) -> None:
        cfg = self.cfg
        state = track.kalman
        while track.state_frame < frame:
            state = kalman_predict(state, cfg.kalman_std_pos, cfg.kalman_std_vel)
            track.state_frame += 1
        track.kalman = state

    def _retire_stale(self, frame: int) -> None:
        keep = []
        for t in self.active:
            t.misses = frame - t.last_frame - 1
            if t.misses > self.cfg.max_track_age_frames:
                t.status = TERMINATED
                self.finished.append(t)
            else:
                keep.append(t)
        self.active = keep

    def step(self, frame_idx: int, items: Sequence[ClassifiedItem]) -> None:
        if frame_idx <= self.frame:
            raise ValueError(f"frames out of order: {frame_idx} after {self.frame}")
        self.frame = frame_idx
        for it in items:
            if not it.classified:
                raise ValueError(f"frame {frame_idx}: item without class probabilities")
            if it.frame_idx != frame_idx:
                raise ValueError(f"item frame {it.frame_idx} in frame group {frame_idx}")
        kept = roi_filter(score_filter(items, self.cfg), self.roi)
        self._retire_stale(frame_idx)
        if not kept:
            return
        self.class_counts.update(it.label for it in kept)

        for t in self.active:
            self._predict_to(t, frame_idx)
        predicted = np.array([t.kalman.bbox_array() for t in self.active]).reshape(-1, 4)
        item_boxes = boxes_to_array([it.bbox for it in kept])
        matches, _, new_items = associate(predicted, item_boxes, self.cfg.iou_gate)

        for ti, ii in matches:
            t = self.active[ti]
            it = kept[ii]
            t.kalman = kalman_update(t.kalman, it.bbox, self.cfg.kalman_std_pos)
            t.items.append(it)
            t.last_frame = frame_idx
            t.misses = 0
        for ii in new_items:
            it = kept[ii]
            t = Track(
                track_id=self._next_id,
                kalman=kalman_initiate(it.bbox, self.cfg.kalman_std_pos, self.cfg.kalman_std_vel),
                items=[it],
                first_frame=frame_idx,
                last_frame=frame_idx,
                video_id=it.video_id,
                state_frame=frame_idx,
            )
            self._next_id += 1
            self.active.append(t)

    def finish(self) -> list[Track]:
        """Terminate everything and return tracks spanning >= min_track_frames."""
        for t in self.active:
            t.status = TERMINATED
        self.finished.extend(self.active)
        self.active = []
        done = [t for t in self.finished if t.span >= self.cfg.min_track_frames]
        return sorted(done, key=lambda t: t.track_id)


def group_frames(items: Iterable[ClassifiedItem]):
    """Group one video's items into ascending (frame_idx, items) pairs."""
    frames: dict = {}
    for it in items:
        frames.setdefault(it.frame_idx, []).append(it)
    return sorted(frames.items())


def run_tracker(frames, meta: VideoMeta, cfg: Optional[PipelineConfig] = None) -> tuple[list[Track], Counter]:
    """Track one video; returns surviving tracks and post-filter label counts."""
    tracker = Tracker(meta, cfg)
    for frame_idx, items in frames:
        tracker.step(frame_idx, items)
    return tracker.finish(), tracker.class_counts


def track_video(frames, meta: VideoMeta, cfg: Optional[PipelineConfig] = None) -> list[Track]:
    return run_tracker(frames, meta, cfg)[0]
