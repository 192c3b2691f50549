"""Turn per-frame product detections into checkout events."""
from checkout_track.config import PipelineConfig, load_config
from checkout_track.core import BBox, CheckoutEvent, ClassifiedItem, Detection, VideoMeta
from checkout_track.kernels import BACKEND
from checkout_track.pipeline import process_stream, resolve

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BBox",
    "CheckoutEvent",
    "ClassifiedItem",
    "Detection",
    "PipelineConfig",
    "VideoMeta",
    "load_config",
    "process_stream",
    "resolve",
]
