"""Pipeline configuration and the flat ``key = value`` file format."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Union

ROUNDING_MODES = ("nearest", "floor", "none")
FREQ_MODES = ("count", "normalized")
MATCH_RULES = ("interval", "window")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    # score filter applied before tracking
    det_score_min: float = 0.3
    cls_score_min: float = 0.3
    # tracker
    iou_gate: float = 0.8
    min_track_frames: int = 15
    max_track_age_frames: int = 30
    roi_fraction: float = 0.5
    kalman_std_pos: float = 1.0 / 20.0
    kalman_std_vel: float = 1.0 / 160.0
    # label voting
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    tau: float = 1.0
    freq_mode: str = "count"
    # fusion / distillation
    wbf_iou_thr: float = 0.55
    map_iou_thr: float = 0.5
    sim_loss_weight: float = 2.0
    # output and evaluation
    timestamp_rounding: str = "nearest"
    match_rule: str = "interval"
    match_window_s: float = 1.0
    # video geometry used when the stream carries none
    fps: float = 60.0
    image_width: float = 1920.0
    image_height: float = 1080.0

    def __post_init__(self):
        for name in ("det_score_min", "cls_score_min"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        for name in ("iou_gate", "roi_fraction"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ConfigError(f"{name} must lie in (0, 1], got {v}")
        for name in ("wbf_iou_thr", "map_iou_thr"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if self.tau <= 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        for name in ("alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.min_track_frames < 1:
            raise ConfigError("min_track_frames must be >= 1")
        if self.max_track_age_frames < 0:
            raise ConfigError("max_track_age_frames must be >= 0")
        if self.sim_loss_weight <= 0:
            raise ConfigError("sim_loss_weight must be > 0")
        if self.kalman_std_pos <= 0 or self.kalman_std_vel <= 0:
            raise ConfigError("Kalman noise scales must be > 0")
        if self.match_window_s < 0:
            raise ConfigError("match_window_s must be >= 0")
        if self.fps <= 0 or self.image_width <= 0 or self.image_height <= 0:
            raise ConfigError("fps and image size must be positive")
        _check_choice("timestamp_rounding", self.timestamp_rounding, ROUNDING_MODES)
        _check_choice("freq_mode", self.freq_mode, FREQ_MODES)
        _check_choice("match_rule", self.match_rule, MATCH_RULES)


def _check_choice(name, value, choices):
    if value not in choices:
        raise ConfigError(f"{name} must be one of {choices}, got {value!r}")


def iter_kv(text: str) -> Iterator[tuple[int, str, str]]:
    """Yield (line number, key, raw value) from flat ``key = value`` text."""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: missing key")
        yield lineno, key, value


def coerce(value: str, typ, key: str, lineno: int):
    try:
        if typ is int:
            return int(value)
        if typ is float:
            return float(value)
        if typ is bool:
            low = value.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
    except ValueError:
        raise ConfigError(
            f"line {lineno}: {key} expects {typ.__name__}, got {value!r}"
        ) from None
    return value


_TYPES = {"float": float, "int": int, "str": str, "bool": bool}


def field_types(cls) -> dict:
    return {f.name: _TYPES.get(f.type, f.type) for f in dataclasses.fields(cls)}


def parse_config(text: str) -> PipelineConfig:
    types = field_types(PipelineConfig)
    values = {}
    for lineno, key, value in iter_kv(text):
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = coerce(value, types[key], key, lineno)
    return PipelineConfig(**values)


def load_config(path: Union[str, Path, None]) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def dump_config(cfg: PipelineConfig) -> str:
    lines = [f"{f.name} = {getattr(cfg, f.name)}" for f in dataclasses.fields(cfg)]
    return "\n".join(lines) + "\n"
