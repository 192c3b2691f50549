"""Readers and writers for detection streams, tracks, submissions and truth.

Detection records are JSON lines::

    {"video_id": "1", "frame": 12, "bbox": [x1, y1, x2, y2],
     "det_score": 0.91, "model_id": "tood", "class_probs": [...]}

``class_probs`` is optional for class-agnostic detector output.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence, Union

import numpy as np

from checkout_track.core import BBox, CheckoutEvent, ClassifiedItem, Detection, video_sort_key
from checkout_track.kalman import KalmanState
from checkout_track.metrics import GroundTruthEvent
from checkout_track.tracker import TERMINATED, Track

RENORM_TOL = 1e-3
# float64 vectors within this of summing to 1 are kept bit-for-bit
_EXACT_TOL = 1e-9

PathOrFile = Union[str, Path, IO]


class RecordError(ValueError):
    """A malformed or invalid input line."""

    def __init__(self, lineno: int, message: str, field: str = "", source: str = ""):
        self.lineno = lineno
        self.message = message
        self.field = field
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}line {lineno}: {message}")

    def in_source(self, source) -> "RecordError":
        return RecordError(self.lineno, self.message, self.field, str(source))


def _lines(source) -> Iterator[tuple[int, str]]:
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            yield from _lines(fh)
        return
    for lineno, raw in enumerate(source, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        line = raw.strip()
        if line:
            yield lineno, line


def _load(lineno: int, line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordError(lineno, f"malformed JSON ({exc.msg})") from None
    if not isinstance(obj, dict):
        raise RecordError(lineno, "record must be a JSON object")
    return obj


def _require(obj: dict, lineno: int, name: str):
    if name not in obj:
        raise RecordError(lineno, f"missing field {name!r}", name)
    return obj[name]


def _number(value, lineno: int, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RecordError(lineno, f"field {name!r} must be a number", name)
    value = float(value)
    if not math.isfinite(value):
        raise RecordError(lineno, f"field {name!r} must be finite", name)
    return value


def record_to_item(obj: dict, lineno: int = 0) -> ClassifiedItem:
    video_id = str(_require(obj, lineno, "video_id"))
    frame = _require(obj, lineno, "frame")
    if isinstance(frame, bool) or not isinstance(frame, int):
        raise RecordError(lineno, "field 'frame' must be an integer", "frame")
    if frame < 0:
        raise RecordError(lineno, f"field 'frame' must be non-negative, got {frame}", "frame")
    raw_box = _require(obj, lineno, "bbox")
    if not isinstance(raw_box, list) or len(raw_box) != 4:
        raise RecordError(lineno, "field 'bbox' must be [x1, y1, x2, y2]", "bbox")
    coords = [_number(v, lineno, "bbox") for v in raw_box]
    try:
        bbox = BBox(*coords)
    except ValueError as exc:
        raise RecordError(lineno, str(exc), "bbox") from None
    det_score = _number(_require(obj, lineno, "det_score"), lineno, "det_score")
    if not 0.0 <= det_score <= 1.0:
        raise RecordError(lineno, f"field 'det_score' must lie in [0, 1], got {det_score}", "det_score")
    model_id = str(obj.get("model_id", "model"))
    probs = obj.get("class_probs")
    if probs is not None:
        if not isinstance(probs, list) or not probs:
            raise RecordError(lineno, "field 'class_probs' must be a non-empty list", "class_probs")
        probs = [_number(p, lineno, "class_probs") for p in probs]
        if any(p < 0 for p in probs):
            raise RecordError(lineno, "field 'class_probs' has negative entries", "class_probs")
        total = math.fsum(probs)
        if abs(total - 1.0) > RENORM_TOL:
            raise RecordError(
                lineno, f"field 'class_probs' sums to {total:.6g}, outside 1 +/- {RENORM_TOL}", "class_probs"
            )
        if abs(total - 1.0) > _EXACT_TOL:
            probs = [p / total for p in probs]
        probs = tuple(min(1.0, p) for p in probs)
    try:
        return ClassifiedItem(Detection(video_id, frame, bbox, det_score, model_id), probs)
    except ValueError as exc:
        raise RecordError(lineno, str(exc)) from None


def parse_detection_stream(source) -> list[ClassifiedItem]:
    """Parse a JSONL stream (path, text/binary file, or iterable of lines).

    Items come back sorted by (video_id, frame); input order is kept within a frame.
    """
    items = [record_to_item(_load(lineno, line), lineno) for lineno, line in _lines(source)]
    items.sort(key=lambda it: (video_sort_key(it.video_id), it.frame_idx))
    return items


def item_to_record(it: ClassifiedItem) -> dict:
    rec = {
        "video_id": it.video_id,
        "frame": it.frame_idx,
        "bbox": list(it.bbox.as_tuple()),
        "det_score": it.det_score,
        "model_id": it.detection.model_id,
    }
    if it.class_probs is not None:
        rec["class_probs"] = list(it.class_probs)
    return rec


def dumps_item(it: ClassifiedItem) -> str:
    return json.dumps(item_to_record(it), separators=(",", ":"))


def _write_lines(lines: Iterable[str], sink: PathOrFile) -> None:
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            _write_lines(lines, fh)
        return
    for line in lines:
        sink.write(line + "\n")


def write_detection_stream(items: Iterable[ClassifiedItem], sink: PathOrFile) -> None:
    _write_lines((dumps_item(it) for it in items), sink)


def group_by_video(items: Iterable[ClassifiedItem]) -> dict:
    out: dict = {}
    for it in items:
        out.setdefault(it.video_id, []).append(it)
    return {k: out[k] for k in sorted(out, key=video_sort_key)}


# -- submissions ------------------------------------------------------------

def _fmt_time(t: float) -> str:
    return str(int(t)) if float(t).is_integer() else repr(float(t))


def format_submission(events: Iterable[CheckoutEvent]) -> str:
    ordered = sorted(
        events, key=lambda e: (video_sort_key(e.video_id), e.timestamp_s, e.class_id)
    )
    return "".join(f"{e.video_id} {e.class_id} {_fmt_time(e.timestamp_s)}\n" for e in ordered)


def write_submission(events: Iterable[CheckoutEvent], sink: PathOrFile) -> None:
    text = format_submission(events)
    if isinstance(sink, (str, Path)):
        with open(sink, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sink.write(text)


def read_submission(source) -> list[CheckoutEvent]:
    events = []
    for lineno, line in _lines(source):
        parts = line.split()
        if len(parts) != 3:
            raise RecordError(lineno, f"expected 'video_id class_id timestamp', got {line!r}")
        try:
            events.append(CheckoutEvent(parts[0], int(parts[1]), float(parts[2])))
        except ValueError as exc:
            raise RecordError(lineno, str(exc)) from None
    return events


# -- ground truth -----------------------------------------------------------

def write_ground_truth(events: Iterable[GroundTruthEvent], sink: PathOrFile) -> None:
    _write_lines(
        (
            json.dumps(
                {"video_id": e.video_id, "class_id": e.class_id, "t_start": e.t_start, "t_end": e.t_end},
                separators=(",", ":"),
            )
            for e in events
        ),
        sink,
    )


def read_ground_truth(source) -> list[GroundTruthEvent]:
    out = []
    for lineno, line in _lines(source):
        obj = _load(lineno, line)
        try:
            out.append(
                GroundTruthEvent(
                    str(_require(obj, lineno, "video_id")),
                    int(_require(obj, lineno, "class_id")),
                    float(_require(obj, lineno, "t_start")),
                    float(_require(obj, lineno, "t_end")),
                )
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, RecordError):
                raise
            raise RecordError(lineno, str(exc)) from None
    return out


def read_truth_boxes(source) -> dict:
    """Validation boxes for mAP: JSONL ``{video_id, frame, bbox}`` records."""
    out: dict = {}
    for lineno, line in _lines(source):
        obj = _load(lineno, line)
        frame = _require(obj, lineno, "frame")
        raw = _require(obj, lineno, "bbox")
        if not isinstance(raw, list) or len(raw) != 4:
            raise RecordError(lineno, "field 'bbox' must be [x1, y1, x2, y2]", "bbox")
        try:
            box = BBox(*(_number(v, lineno, "bbox") for v in raw))
        except ValueError as exc:
            if isinstance(exc, RecordError):
                raise
            raise RecordError(lineno, str(exc), "bbox") from None
        out.setdefault((str(_require(obj, lineno, "video_id")), int(frame)), []).append(box)
    return out


def write_truth_boxes(truth: dict, sink: PathOrFile) -> None:
    lines = []
    for (video_id, frame), boxes in sorted(truth.items(), key=lambda kv: (video_sort_key(kv[0][0]), kv[0][1])):
        for b in boxes:
            lines.append(json.dumps({"video_id": video_id, "frame": frame, "bbox": list(b.as_tuple())},
                                    separators=(",", ":")))
    _write_lines(lines, sink)


# -- tracks -----------------------------------------------------------------

def write_tracks(per_video: Sequence[tuple[str, Sequence[Track], Counter]], sink: PathOrFile) -> None:
    """Tracks JSONL: a ``video`` header with label counts, then its ``track`` lines."""
    lines = []
    for video_id, tracks, counts in per_video:
        lines.append(json.dumps(
            {"type": "video", "video_id": video_id,
             "class_counts": {str(k): counts[k] for k in sorted(counts)}},
            separators=(",", ":"),
        ))
        for t in tracks:
            lines.append(json.dumps(
                {"type": "track", "video_id": video_id, "track_id": t.track_id,
                 "first_frame": t.first_frame, "last_frame": t.last_frame,
                 "items": [item_to_record(it) for it in t.items]},
                separators=(",", ":"),
            ))
    _write_lines(lines, sink)


def read_tracks(source) -> list[tuple[str, list[Track], Counter]]:
    videos: dict = {}
    for lineno, line in _lines(source):
        obj = _load(lineno, line)
        kind = obj.get("type")
        video_id = str(_require(obj, lineno, "video_id"))
        entry = videos.setdefault(video_id, ([], Counter()))
        if kind == "video":
            counts = _require(obj, lineno, "class_counts")
            entry[1].update({int(k): int(v) for k, v in counts.items()})
        elif kind == "track":
            items = [record_to_item(rec, lineno) for rec in _require(obj, lineno, "items")]
            if not items:
                raise RecordError(lineno, "track has no items", "items")
            t = Track(
                track_id=int(_require(obj, lineno, "track_id")),
                kalman=KalmanState(np.zeros(8), np.eye(8)),
                items=items,
                first_frame=int(_require(obj, lineno, "first_frame")),
                last_frame=int(_require(obj, lineno, "last_frame")),
                status=TERMINATED,
                video_id=video_id,
            )
            entry[0].append(t)
        else:
            raise RecordError(lineno, f"unknown record type {kind!r}", "type")
    return [(v, *videos[v]) for v in sorted(videos, key=video_sort_key)]

