"""Reference (numpy) implementations of the hot kernels.

Every function here has a compiled twin in ``_ckernels.pyx`` with the same
signature; ``checkout_track.kernels`` picks one at import time.
"""
import numpy as np

_F = np.eye(8)
_F[:4, 4:] = np.eye(4)


def iou_matrix(a, b):
    """Pairwise IoU between (n, 4) and (m, 4) corner-format arrays."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    out = np.zeros((a.shape[0], b.shape[0]), dtype=np.float64)
    if out.size == 0:
        return out
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    np.clip(iw, 0.0, None, out=iw)
    np.clip(ih, 0.0, None, out=ih)
    inter = iw * ih
    area_a = np.clip(a[:, 2] - a[:, 0], 0.0, None) * np.clip(a[:, 3] - a[:, 1], 0.0, None)
    area_b = np.clip(b[:, 2] - b[:, 0], 0.0, None) * np.clip(b[:, 3] - b[:, 1], 0.0, None)
    union = area_a[:, None] + area_b[None, :] - inter
    ok = (inter > 0.0) & (union > 0.0)
    out[ok] = np.minimum(1.0, inter[ok] / union[ok])
    return out


def _iou_one(a, b):
    iw = min(a[2], b[2]) - max(a[0], b[0])
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    if union <= 0.0:
        return 0.0
    return min(1.0, inter / union)


def wbf_cluster(boxes, weights, thr):
    """Greedy weighted-box clustering of boxes already sorted by score.

    Each box joins the first cluster whose running weighted-mean box overlaps
    it with IoU >= ``thr``; otherwise it opens a new cluster.

    Returns (labels (n,), fused boxes (k, 4), weight sums (k,)).
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    weights = np.asarray(weights, dtype=np.float64)
    n = boxes.shape[0]
    labels = np.empty(n, dtype=np.int64)
    sums = []      # per-cluster weighted coordinate sums
    wsums = []
    fused = []
    for i in range(n):
        box = boxes[i].tolist()
        w = float(weights[i])
        hit = -1
        for k in range(len(fused)):
            if _iou_one(fused[k], box) >= thr:
                hit = k
                break
        if hit < 0:
            sums.append([w * box[0], w * box[1], w * box[2], w * box[3]])
            wsums.append(w)
            fused.append(list(box))
            labels[i] = len(fused) - 1
        else:
            s = sums[hit]
            for c in range(4):
                s[c] += w * box[c]
            wsums[hit] += w
            fused[hit] = [s[c] / wsums[hit] for c in range(4)]
            labels[i] = hit
    return (
        labels,
        np.array(fused, dtype=np.float64).reshape(-1, 4),
        np.array(wsums, dtype=np.float64),
    )


def kf_predict(mean, cov, std_pos, std_vel):
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    h = mean[3]
    q = np.empty(8)
    q[:4] = (std_pos * h) ** 2
    q[4:] = (std_vel * h) ** 2
    new_mean = _F @ mean
    new_cov = _F @ cov @ _F.T
    new_cov[np.diag_indices(8)] += q
    return new_mean, 0.5 * (new_cov + new_cov.T)


def kf_update(mean, cov, z, std_pos):
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    r = (std_pos * mean[3]) ** 2
    s = cov[:4, :4] + r * np.eye(4)
    # K = P H^T S^-1, solved without forming the inverse
    gain = np.linalg.solve(s, cov[:4, :]).T
    new_mean = mean + gain @ (z - mean[:4])
    new_cov = cov - gain @ cov[:4, :]
    return new_mean, 0.5 * (new_cov + new_cov.T)
