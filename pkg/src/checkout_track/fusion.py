"""Multi-detector box fusion (WBF), greedy ensemble selection, score averaging."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Mapping, Optional, Sequence

import numpy as np

from checkout_track.core import BBox, ClassifiedItem, Detection
from checkout_track.kernels import wbf_cluster
from checkout_track.metrics import detection_map

log = logging.getLogger(__name__)

FrameKey = Hashable  # usually (video_id, frame_idx)


@dataclass
class ModelDetections:
    """One detector's outputs, keyed per frame.

    Values are ``ClassifiedItem`` so that per-box class probabilities (when a
    classifier already ran) survive fusion.
    """

    model_id: str
    frames: dict = field(default_factory=dict)
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError(f"model weight must be > 0, got {self.weight}")

    @classmethod
    def from_items(cls, model_id: str, items, weight: float = 1.0) -> "ModelDetections":
        frames: dict = {}
        for it in items:
            if not isinstance(it, ClassifiedItem):
                it = ClassifiedItem(it)
            frames.setdefault((it.video_id, it.frame_idx), []).append(it)
        return cls(model_id, frames, weight)

    def keys(self):
        return self.frames.keys()


@dataclass(frozen=True)
class FusionCluster:
    members: tuple
    member_weights: tuple
    bbox: BBox
    score: float


def average_class_scores(probs: Sequence[Sequence[float]]) -> np.ndarray:
    if len(probs) == 0:
        raise ValueError("need at least one probability vector")
    lengths = {len(p) for p in probs}
    if len(lengths) != 1:
        raise ValueError(f"probability vectors differ in length: {sorted(lengths)}")
    arr = np.asarray(probs, dtype=np.float64)
    # fsum per column keeps the result independent of input order
    return np.array([math.fsum(col) / arr.shape[0] for col in arr.T])


def _fused_model_id(models) -> str:
    return "+".join(sorted(m.model_id for m in models))


def wbf_clusters(models: Sequence[ModelDetections], key: FrameKey, iou_thr: float = 0.55):
    """Cluster the boxes all models produced for one frame."""
    if not models:
        raise ValueError("need at least one model to fuse")
    pooled = []
    for m in models:
        for it in m.frames.get(key, ()):
            if it.det_score > 0:
                pooled.append((it.det_score * m.weight, it, m.weight))
    # stable: equal scores keep model order, then within-model order
    pooled.sort(key=lambda t: -t[0])
    if not pooled:
        return []
    boxes = np.array([t[1].bbox.as_tuple() for t in pooled])
    eff = np.array([t[0] for t in pooled])
    labels, fused, _ = wbf_cluster(boxes, eff, iou_thr)
    total_weight = sum(m.weight for m in models)
    clusters = []
    for k in range(fused.shape[0]):
        idx = np.flatnonzero(labels == k)
        members = tuple(pooled[i][1] for i in idx)
        mean_eff = math.fsum(eff[i] for i in idx) / len(idx)
        score = mean_eff * min(len(idx), len(models)) / total_weight
        clusters.append(
            FusionCluster(
                members=members,
                member_weights=tuple(pooled[i][2] for i in idx),
                bbox=BBox(*fused[k]),
                score=min(1.0, score),
            )
        )
    return clusters


def wbf_fuse(models: Sequence[ModelDetections], key: FrameKey, iou_thr: float = 0.55):
    """Weighted Box Fusion of every model's boxes for one frame.

    Returns fused ``ClassifiedItem``s in cluster order (descending lead score).
    Class probabilities of members, when present, are averaged.
    """
    if not models:
        raise ValueError("need at least one model to fuse")
    video_id, frame_idx = key if isinstance(key, tuple) else ("0", key)
    model_id = _fused_model_id(models)
    out = []
    for c in wbf_clusters(models, key, iou_thr):
        probs = [m.class_probs for m in c.members if m.class_probs is not None]
        class_probs = tuple(average_class_scores(probs)) if probs else None
        det = Detection(video_id, frame_idx, c.bbox, c.score, model_id)
        out.append(ClassifiedItem(det, class_probs))
    return out


def fuse_models(models: Sequence[ModelDetections], iou_thr: float = 0.55) -> ModelDetections:
    if not models:
        raise ValueError("need at least one model to fuse")
    keys = set()
    for m in models:
        keys.update(m.keys())
    frames = {}
    for key in sorted(keys, key=repr):
        fused = wbf_fuse(models, key, iou_thr)
        if fused:
            frames[key] = fused
    return ModelDetections(_fused_model_id(models), frames)


def map_metric(iou_thr: float = 0.5) -> Callable:
    def metric(fused: ModelDetections, truth: Mapping) -> float:
        dets = {k: [it.detection for it in v] for k, v in fused.frames.items()}
        return detection_map(dets, truth, iou_thr)

    return metric


@dataclass
class EnsembleResult:
    selected: list
    fused: ModelDetections
    score: float
    history: list = field(default_factory=list)   # (added model_id, metric) per step
    ties: list = field(default_factory=list)      # steps where the best candidates tied


def greedy_auto_ensemble(
    models: Sequence[ModelDetections],
    val_truth: Mapping,
    metric: Optional[Callable] = None,
    iou_thr: float = 0.55,
) -> EnsembleResult:
    """Forward selection of detectors on a validation metric.

    Starts from the best single model (by the metric of its own fusion) and
    keeps adding the candidate whose fusion with the current selection raises
    the metric most, until nothing improves it. Ties go to the smallest id.
    """
    if not models:
        raise ValueError("need at least one model")
    if not val_truth or sum(len(v) for v in val_truth.values()) == 0:
        raise ValueError("validation truth is empty")
    metric = metric or map_metric()
    ids = [m.model_id for m in models]
    if len(set(ids)) != len(ids):
        raise ValueError("model ids must be unique")
    by_id = {m.model_id: m for m in models}

    def score_of(selection):
        fused = fuse_models([by_id[i] for i in selection], iou_thr)
        return metric(fused, val_truth), fused

    result = EnsembleResult([], None, -math.inf)
    candidates = sorted(ids)
    while candidates:
        trials = []
        for cand in candidates:
            s, fused = score_of(result.selected + [cand])
            trials.append((s, cand, fused))
        best_s = max(t[0] for t in trials)
        tied = [t for t in trials if t[0] == best_s]
        s, cand, fused = min(tied, key=lambda t: t[1])
        if len(tied) > 1:
            result.ties.append((len(result.selected), [t[1] for t in tied]))
            log.info("greedy ensemble tie at step %d: %s", len(result.selected), [t[1] for t in tied])
        if result.selected and not s > result.score:
            break
        result.selected.append(cand)
        result.score = s
        result.fused = fused
        result.history.append((cand, s))
        candidates.remove(cand)
    return result
