"""Per-video orchestration: fuse -> score/ROI filter -> track -> vote -> events."""
from __future__ import annotations

from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from checkout_track.config import PipelineConfig
from checkout_track.core import CheckoutEvent, ClassifiedItem, VideoMeta, video_sort_key
from checkout_track.fusion import EnsembleResult, ModelDetections, fuse_models, greedy_auto_ensemble, map_metric
from checkout_track.io import group_by_video
from checkout_track.tracker import Track, group_frames, run_tracker
from checkout_track.voting import resolve_events


@dataclass
class VideoResult:
    video_id: str
    tracks: list
    class_counts: Counter
    events: list


def meta_for(video_id: str, cfg: PipelineConfig, metas: Optional[Mapping[str, VideoMeta]] = None) -> VideoMeta:
    if metas and video_id in metas:
        return metas[video_id]
    return VideoMeta(video_id, cfg.fps, cfg.image_width, cfg.image_height)


def track_items(items: Sequence[ClassifiedItem], meta: VideoMeta, cfg: PipelineConfig):
    return run_tracker(group_frames(items), meta, cfg)


def process_video(items: Sequence[ClassifiedItem], meta: VideoMeta, cfg: PipelineConfig) -> VideoResult:
    tracks, counts = track_items(items, meta, cfg)
    events = resolve_events(tracks, meta, cfg, freqs=counts)
    return VideoResult(meta.video_id, tracks, counts, events)


def _process(args):
    return process_video(*args)


def process_stream(
    items: Sequence[ClassifiedItem],
    cfg: Optional[PipelineConfig] = None,
    metas: Optional[Mapping[str, VideoMeta]] = None,
    jobs: int = 1,
) -> list[VideoResult]:
    """Run every video of a stream; results come back in ascending video order."""
    cfg = cfg or PipelineConfig()
    videos = group_by_video(items)
    work = [(v_items, meta_for(vid, cfg, metas), cfg) for vid, v_items in videos.items()]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_process, work))
    else:
        results = [_process(w) for w in work]
    return sorted(results, key=lambda r: video_sort_key(r.video_id))


def resolve(items, cfg=None, metas=None, jobs: int = 1) -> list[CheckoutEvent]:
    return [ev for r in process_stream(items, cfg, metas, jobs) for ev in r.events]


def fuse_streams(
    streams: Sequence[tuple[str, Sequence[ClassifiedItem]]],
    cfg: Optional[PipelineConfig] = None,
    val_truth: Optional[Mapping] = None,
) -> tuple[list[ClassifiedItem], Optional[EnsembleResult]]:
    """Fuse per-model streams; with validation boxes, select models greedily first."""
    cfg = cfg or PipelineConfig()
    if not streams:
        raise ValueError("no detection streams to fuse")
    if len(streams) == 1:
        # nothing to fuse: a single stream passes through untouched
        return list(streams[0][1]), None
    models = [ModelDetections.from_items(mid, items) for mid, items in streams]
    result = None
    if val_truth:
        result = greedy_auto_ensemble(models, val_truth, map_metric(cfg.map_iou_thr), cfg.wbf_iou_thr)
        fused = result.fused
    else:
        fused = fuse_models(models, cfg.wbf_iou_thr)
    items = [
        it for key in sorted(fused.frames, key=lambda k: (video_sort_key(k[0]), k[1]))
        for it in fused.frames[key]
    ]
    return items, result
