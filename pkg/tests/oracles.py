"""Brute-force reference implementations used as test oracles.

Nothing here imports package internals beyond plain value types; each routine
is written the slow, obvious way.
"""
import itertools
import math

import numpy as np


def iou_ref(a, b):
    ix = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    iy = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = ix * iy
    if inter == 0.0:
        return 0.0
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def wbf_reference(models, thr):
    """models: list of (weight, [(box4, score), ...]). Returns [(box4, score)]."""
    pooled = []
    for weight, dets in models:
        for box, score in dets:
            if score > 0:
                pooled.append((score * weight, tuple(box)))
    pooled.sort(key=lambda t: -t[0])  # stable
    clusters = []
    for eff, box in pooled:
        for cl in clusters:
            if iou_ref(_fused(cl), box) >= thr:
                cl.append((eff, box))
                break
        else:
            clusters.append([(eff, box)])
    total_w = sum(w for w, _ in models)
    out = []
    for cl in clusters:
        mean = sum(e for e, _ in cl) / len(cl)
        out.append((_fused(cl), min(1.0, mean * min(len(cl), len(models)) / total_w)))
    return out


def _fused(cl):
    wsum = 0.0
    acc = [0.0, 0.0, 0.0, 0.0]
    for eff, box in cl:
        wsum += eff
        for c in range(4):
            acc[c] += eff * box[c]
    return tuple(v / wsum for v in acc)


def assignment_bruteforce(ious, gate):
    """Best (cardinality, -cost) matching over all permutations."""
    n, m = ious.shape
    best = (0, 0.0, [])
    if n == 0 or m == 0:
        return best
    if n <= m:
        perms = (list(zip(range(n), p)) for p in itertools.permutations(range(m), n))
    else:
        perms = (list(zip(p, range(m))) for p in itertools.permutations(range(n), m))
    for pairs in perms:
        ok = [(i, j) for i, j in pairs if ious[i, j] > gate]
        cost = sum(1.0 - ious[i, j] for i, j in ok)
        if len(ok) > best[0] or (len(ok) == best[0] and cost < best[1] - 1e-12):
            best = (len(ok), cost, sorted(ok))
    return best


def ap_bruteforce(dets, truths, thr):
    """dets: {key: [(box, score)]}, truths: {key: [box]} -> all-point AP."""
    ranked = sorted(
        ((score, key, j) for key, ds in dets.items() for j, (_, score) in enumerate(ds)),
        key=lambda t: -t[0],
    )
    G = sum(len(v) for v in truths.values())
    if G == 0 or not ranked:
        return 0.0
    used = {k: set() for k in truths}
    hits = []
    for score, key, j in ranked:
        box = dets[key][j][0]
        best, best_i = -1.0, None
        for i, tb in enumerate(truths.get(key, [])):
            if i in used[key]:
                continue
            o = iou_ref(box, tb.as_tuple() if hasattr(tb, "as_tuple") else tb)
            if o > best:
                best, best_i = o, i
        if best_i is not None and best >= thr:
            used[key].add(best_i)
            hits.append(1)
        else:
            hits.append(0)
    precisions = []
    tp = 0
    for k, h in enumerate(hits, start=1):
        tp += h
        precisions.append(tp / k)
    # each recovered truth contributes (1/G) * best precision at or beyond its rank
    ap = 0.0
    for k, h in enumerate(hits):
        if h:
            ap += max(precisions[k:]) / G
    return ap


def max_event_matching(preds, truths, contains):
    """Maximum one-to-one matching size by exhaustive search."""
    best = 0
    n, m = len(preds), len(truths)
    for r in range(min(n, m), 0, -1):
        for ps in itertools.combinations(range(n), r):
            for ts in itertools.permutations(range(m), r):
                if all(contains(preds[p], truths[t]) for p, t in zip(ps, ts)):
                    return r
    return best


def contribution_direct(areas, scores, freqs_of_items, alpha, beta, gamma, tau):
    """Contribution scores evaluated straight from the formula, no stabilization."""
    logits = [(a ** beta) * (s ** gamma) / tau for a, s in zip(areas, scores)]
    ex = [math.exp(z) for z in logits]
    total = sum(ex)
    return [(f ** alpha) * e / total for f, e in zip(freqs_of_items, ex)]


def kalman_scalar_update_only(e0, n):
    """Residual of a position component after n updates at a fixed target.

    Per component the prior variance is 4r and each update adds 1/r of
    precision, so the posterior weight on the initial guess is 1 / (1 + 4n).
    """
    return e0 / (1 + 4 * n)


def random_simplex(rng, k):
    return rng.dirichlet(np.ones(k))
