"""Per-track label voting and checkout-event resolution.

Each item of a track gets a contribution score

    c_i = f(l_i)**alpha * softmax_i(a_i**beta * s_i**gamma / tau)

where f is the label's frequency in the video, a_i the box area normalized by
the image area (raw pixel areas overflow exp), and s_i the detection score.
The track takes the label of its highest-scoring item.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from checkout_track.config import PipelineConfig
from checkout_track.core import CheckoutEvent, ClassifiedItem, VideoMeta, area


@dataclass(frozen=True)
class VotingParams:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    tau: float = 1.0
    freq_mode: str = "count"

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("alpha, beta and gamma must be non-negative")
        if self.freq_mode not in ("count", "normalized"):
            raise ValueError(f"unknown freq_mode {self.freq_mode!r}")

    @classmethod
    def from_config(cls, cfg: PipelineConfig) -> "VotingParams":
        return cls(cfg.alpha, cfg.beta, cfg.gamma, cfg.tau, cfg.freq_mode)


def class_frequencies(items: Iterable[ClassifiedItem]) -> Counter:
    return Counter(it.label for it in items)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max())
    # fsum: exact-rounded, so the result does not depend on item order
    return e / math.fsum(e)


def _items(track) -> Sequence[ClassifiedItem]:
    return track.items if hasattr(track, "items") else track


def contribution_scores(
    track,
    freqs: Mapping[int, float],
    params: VotingParams,
    image_area: float,
) -> np.ndarray:
    items = _items(track)
    if not items:
        raise ValueError("cannot vote on an empty track")
    if not image_area > 0:
        raise ValueError("image_area must be positive")
    total = sum(freqs.values())
    f = []
    for it in items:
        if freqs.get(it.label, 0) <= 0:
            raise KeyError(f"no frequency entry for class {it.label}")
        f.append(freqs[it.label] / total if params.freq_mode == "normalized" else freqs[it.label])
    a = np.array([area(it.bbox) for it in items]) / image_area
    s = np.array([it.det_score for it in items])
    logits = (a**params.beta) * (s**params.gamma) / params.tau
    return np.asarray(f, dtype=np.float64) ** params.alpha * softmax(logits)


def vote_label(track, freqs, params: VotingParams, image_area: float) -> int:
    """Label of the item with the highest contribution score.

    Ties go to the earliest frame, then the lowest class id.
    """
    items = _items(track)
    c = contribution_scores(items, freqs, params, image_area)
    best = min(range(len(items)), key=lambda i: (-c[i], items[i].frame_idx, items[i].label))
    return items[best].label


def track_timestamp(track, meta: VideoMeta) -> float:
    return (track.first_frame + track.last_frame) / (2.0 * meta.fps)


def round_timestamp(t: float, mode: str = "nearest") -> float:
    if mode == "nearest":
        return float(math.floor(t + 0.5))
    if mode == "floor":
        return float(math.floor(t))
    if mode == "none":
        return t
    raise ValueError(f"unknown rounding mode {mode!r}")


def resolve_events(
    tracks,
    meta: VideoMeta,
    cfg: Optional[PipelineConfig] = None,
    freqs: Optional[Mapping[int, float]] = None,
) -> list[CheckoutEvent]:
    """One checkout event per track, sorted by timestamp.

    ``freqs`` defaults to the label counts of the tracks' own items; pass the
    video-wide post-filter counts from the tracker to follow the pipeline.
    """
    cfg = cfg or PipelineConfig()
    params = VotingParams.from_config(cfg)
    if freqs is None:
        freqs = class_frequencies(it for t in tracks for it in t.items)
    events = []
    for t in tracks:
        label = vote_label(t, freqs, params, meta.image_area)
        exact = track_timestamp(t, meta)
        events.append(
            CheckoutEvent(meta.video_id, label, round_timestamp(exact, cfg.timestamp_rounding), exact)
        )
    events.sort(key=lambda e: (e.timestamp_s, e.exact_s, e.class_id))
    return events
