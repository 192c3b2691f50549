"""Event-level precision/recall/F1 and class-agnostic detection AP."""
from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import asdict, dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

from checkout_track.core import BBox, CheckoutEvent, Detection, boxes_to_array, video_sort_key
from checkout_track.kernels import iou_matrix


@dataclass(frozen=True)
class GroundTruthEvent:
    """A product's presence interval, in seconds."""

    video_id: str
    class_id: int
    t_start: float
    t_end: float

    def __post_init__(self):
        if not 0 <= self.t_start <= self.t_end:
            raise ValueError(
                f"need 0 <= t_start <= t_end, got ({self.t_start}, {self.t_end})"
            )


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float

    def to_text(self) -> str:
        return (
            f"TP={self.tp} FP={self.fp} FN={self.fn}  "
            f"F1={self.f1:.4f} Precision={self.precision:.4f} Recall={self.recall:.4f}"
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def prf1(tp: int, fp: int, fn: int) -> EvalReport:
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return EvalReport(tp, fp, fn, precision, recall, f1)


def _window(truth: GroundTruthEvent, rule: str, window_s: float) -> tuple[float, float]:
    if rule == "interval":
        return truth.t_start, truth.t_end
    if rule == "window":
        mid = 0.5 * (truth.t_start + truth.t_end)
        return mid - window_s, mid + window_s
    raise ValueError(f"unknown match rule {rule!r}")


def match_events(
    preds: Sequence[CheckoutEvent],
    truths: Sequence[GroundTruthEvent],
    rule: str = "interval",
    window_s: float = 1.0,
) -> tuple[int, int, int]:
    """Greedy one-to-one matching of predictions to ground truth.

    Predictions are visited in timestamp order. Each one takes, among the
    unmatched truths of the same video and class whose window contains its
    timestamp, the one whose window closes first. For point-in-interval
    matching this greedy order yields a maximum matching.
    """
    pool = defaultdict(list)
    for idx, t in enumerate(truths):
        lo, hi = _window(t, rule, window_s)
        pool[(str(t.video_id), int(t.class_id))].append((hi, lo, idx))
    for cands in pool.values():
        cands.sort()
    used = set()
    tp = 0
    order = sorted(preds, key=lambda e: (e.timestamp_s, video_sort_key(e.video_id), e.class_id))
    for ev in order:
        for hi, lo, idx in pool.get((str(ev.video_id), int(ev.class_id)), ()):
            if idx not in used and lo <= ev.timestamp_s <= hi:
                used.add(idx)
                tp += 1
                break
    return tp, len(preds) - tp, len(truths) - tp


def evaluate(preds, truths, rule: str = "interval", window_s: float = 1.0) -> EvalReport:
    return prf1(*match_events(preds, truths, rule, window_s))


def average_precision(recall: np.ndarray, precision: np.ndarray) -> float:
    """All-point interpolated area under a precision/recall curve."""
    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.flatnonzero(mrec[1:] != mrec[:-1])
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def detection_map(
    dets: Mapping[Hashable, Sequence[Detection]],
    truths: Mapping[Hashable, Sequence[BBox]],
    iou_thr: float = 0.5,
) -> float:
    """Class-agnostic AP of detections keyed by image against truth boxes.

    Detections are ranked globally by score (stable on ties); each takes the
    best-overlapping still-unmatched truth in its image if IoU >= ``iou_thr``.
    """
    if not 0.0 < iou_thr < 1.0:
        raise ValueError("iou_thr must lie in (0, 1)")
    n_truth = sum(len(v) for v in truths.values())
    if n_truth == 0:
        return 0.0
    ranked = []
    for key, items in dets.items():
        for j, d in enumerate(items):
            ranked.append((d.det_score, key, j))
    if not ranked:
        return 0.0
    # stable descending sort on score only
    order = sorted(range(len(ranked)), key=lambda i: -ranked[i][0])
    overlaps = {}
    for key, items in dets.items():
        gt = truths.get(key, ())
        overlaps[key] = iou_matrix(boxes_to_array([d.bbox for d in items]), boxes_to_array(list(gt)))
    matched = {key: np.zeros(len(v), dtype=bool) for key, v in truths.items()}
    tp = np.zeros(len(ranked))
    for rank, i in enumerate(order):
        _, key, j = ranked[i]
        ov = overlaps[key]
        if ov.shape[1] == 0:
            continue
        row = np.where(matched[key], -1.0, ov[j])
        best = int(np.argmax(row))
        if row[best] >= iou_thr:
            matched[key][best] = True
            tp[rank] = 1.0
    ctp = np.cumsum(tp)
    cfp = np.cumsum(1.0 - tp)
    return average_precision(ctp / n_truth, ctp / (ctp + cfp))
