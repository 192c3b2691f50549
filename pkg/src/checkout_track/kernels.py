"""Backend selection for the hot kernels.

The compiled extension is used when it was built; otherwise, or when
``CHECKOUT_TRACK_PURE_PYTHON=1`` is set, the numpy reference versions are used.
"""
import os

from checkout_track import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("CHECKOUT_TRACK_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from checkout_track import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

iou_matrix = _impl.iou_matrix
wbf_cluster = _impl.wbf_cluster
kf_predict = _impl.kf_predict
kf_update = _impl.kf_update

__all__ = ["BACKEND", "iou_matrix", "wbf_cluster", "kf_predict", "kf_update"]
