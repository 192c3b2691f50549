# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline double _iou(double ax1, double ay1, double ax2, double ay2,
                        double bx1, double by1, double bx2, double by2) nogil:
    cdef double iw = (ax2 if ax2 < bx2 else bx2) - (ax1 if ax1 > bx1 else bx1)
    cdef double ih = (ay2 if ay2 < by2 else by2) - (ay1 if ay1 > by1 else by1)
    cdef double inter, union
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union <= 0.0:
        return 0.0
    if inter >= union:
        return 1.0
    return inter / union


def iou_matrix(a, b):
    cdef const double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 4)
    cdef const double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t n = av.shape[0], m = bv.shape[0], i, j
    out = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    with nogil:
        for i in range(n):
            for j in range(m):
                ov[i, j] = _iou(av[i, 0], av[i, 1], av[i, 2], av[i, 3],
                                bv[j, 0], bv[j, 1], bv[j, 2], bv[j, 3])
    return out


def wbf_cluster(boxes, weights, double thr):
    cdef const double[:, ::1] bv = np.ascontiguousarray(boxes, dtype=np.float64).reshape(-1, 4)
    cdef const double[::1] wv = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = bv.shape[0], i, k, c, nclus = 0, hit
    labels = np.empty(n, dtype=np.int64)
    sums_a = np.zeros((n, 4), dtype=np.float64)
    fused_a = np.zeros((n, 4), dtype=np.float64)
    wsum_a = np.zeros(n, dtype=np.float64)
    cdef long long[::1] lv = labels
    cdef double[:, ::1] sv = sums_a
    cdef double[:, ::1] fv = fused_a
    cdef double[::1] wsv = wsum_a
    cdef double w
    with nogil:
        for i in range(n):
            w = wv[i]
            hit = -1
            for k in range(nclus):
                if _iou(fv[k, 0], fv[k, 1], fv[k, 2], fv[k, 3],
                        bv[i, 0], bv[i, 1], bv[i, 2], bv[i, 3]) >= thr:
                    hit = k
                    break
            if hit < 0:
                for c in range(4):
                    sv[nclus, c] = w * bv[i, c]
                    fv[nclus, c] = bv[i, c]
                wsv[nclus] = w
                lv[i] = nclus
                nclus += 1
            else:
                for c in range(4):
                    sv[hit, c] += w * bv[i, c]
                wsv[hit] += w
                for c in range(4):
                    fv[hit, c] = sv[hit, c] / wsv[hit]
                lv[i] = hit
    return labels, fused_a[:nclus].copy(), wsum_a[:nclus].copy()


def kf_predict(mean, cov, double std_pos, double std_vel):
    cdef const double[::1] mv = np.ascontiguousarray(mean, dtype=np.float64)
    cdef const double[:, ::1] pv = np.ascontiguousarray(cov, dtype=np.float64)
    new_mean = np.empty(8, dtype=np.float64)
    new_cov = np.empty((8, 8), dtype=np.float64)
    cdef double[::1] nm = new_mean
    cdef double[:, ::1] nc = new_cov
    cdef double tmp[8][8]
    cdef double h = mv[3]
    cdef double qp = (std_pos * h) * (std_pos * h)
    cdef double qv = (std_vel * h) * (std_vel * h)
    cdef int i, j
    for i in range(4):
        nm[i] = mv[i] + mv[i + 4]
        nm[i + 4] = mv[i + 4]
    # tmp = F P  (row i of F adds row i+4 for the position block)
    for i in range(8):
        for j in range(8):
            tmp[i][j] = pv[i, j] + (pv[i + 4, j] if i < 4 else 0.0)
    # nc = tmp F^T
    for i in range(8):
        for j in range(8):
            nc[i, j] = tmp[i][j] + (tmp[i][j + 4] if j < 4 else 0.0)
    for i in range(4):
        nc[i, i] += qp
        nc[i + 4, i + 4] += qv
    for i in range(8):
        for j in range(i + 1, 8):
            nc[i, j] = 0.5 * (nc[i, j] + nc[j, i])
            nc[j, i] = nc[i, j]
    return new_mean, new_cov


def kf_update(mean, cov, z, double std_pos):
    cdef const double[::1] mv = np.ascontiguousarray(mean, dtype=np.float64)
    cdef const double[:, ::1] pv = np.ascontiguousarray(cov, dtype=np.float64)
    cdef const double[::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    new_mean = np.empty(8, dtype=np.float64)
    new_cov = np.empty((8, 8), dtype=np.float64)
    cdef double[::1] nm = new_mean
    cdef double[:, ::1] nc = new_cov
    cdef double L[4][4]
    cdef double X[4][8]     # S^-1 H P, i.e. gain transposed
    cdef double y[4]
    cdef double r = (std_pos * mv[3]) * (std_pos * mv[3])
    cdef double acc
    cdef int i, j, k
    # Cholesky of S = P[:4,:4] + r I
    for i in range(4):
        for j in range(i + 1):
            acc = pv[i, j] + (r if i == j else 0.0)
            for k in range(j):
                acc -= L[i][k] * L[j][k]
            if i == j:
                if acc <= 0.0:
                    raise np.linalg.LinAlgError("innovation covariance is not positive definite")
                L[i][i] = sqrt(acc)
            else:
                L[i][j] = acc / L[j][j]
    # solve S X = P[:4, :] column by column
    for j in range(8):
        for i in range(4):
            acc = pv[i, j]
            for k in range(i):
                acc -= L[i][k] * y[k]
            y[i] = acc / L[i][i]
        for i in range(3, -1, -1):
            acc = y[i]
            for k in range(i + 1, 4):
                acc -= L[k][i] * X[k][j]
            X[i][j] = acc / L[i][i]
    for i in range(4):
        y[i] = zv[i] - mv[i]
    for i in range(8):
        acc = mv[i]
        for k in range(4):
            acc += X[k][i] * y[k]
        nm[i] = acc
    for i in range(8):
        for j in range(8):
            acc = pv[i, j]
            for k in range(4):
                acc -= X[k][i] * pv[k, j]
            nc[i, j] = acc
    for i in range(8):
        for j in range(i + 1, 8):
            nc[i, j] = 0.5 * (nc[i, j] + nc[j, i])
            nc[j, i] = nc[i, j]
    return new_mean, new_cov
