"""Acceptance gate: one test per criterion, each reported as a PASS/FAIL line.

Lines are gathered in ``ACCEPTANCE`` and printed in the terminal summary (see
conftest.py), so they show up with or without ``-s``.
"""
import itertools
import time

import numpy as np
import pytest

from checkout_track.config import PipelineConfig
from checkout_track.core import BBox, ClassifiedItem, Detection, VideoMeta, iou
from checkout_track.distill import kl_gradient, kl_similarity_loss, weighted_similarity_loss
from checkout_track.fusion import ModelDetections, fuse_models, greedy_auto_ensemble, map_metric, wbf_fuse
from checkout_track.kalman import kalman_initiate, kalman_predict, kalman_update
from checkout_track.kernels import iou_matrix
from checkout_track.metrics import evaluate, prf1
from checkout_track.pipeline import resolve
from checkout_track.sim import generate_scenario, random_scenario
from checkout_track.tracker import associate, score_filter, track_video
from checkout_track.voting import VotingParams, contribution_scores, softmax, vote_label
from conftest import ACCEPTANCE, make_item, one_hot
from oracles import assignment_bruteforce, random_simplex, wbf_reference

# voting parameters frozen for the noisy end-to-end run
NOISY_VOTING = dict(alpha=0.5, beta=0.0, gamma=4.0, tau=0.01)
NOISE = dict(jitter_sigma=2.0, miss_rate=0.05, spurious_rate=0.02, label_noise_rate=0.05)


def _report(number, name, ok, detail):
    ACCEPTANCE.append(f"criterion {number} [{name}]: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def test_criterion_1_reference_metric_rows():
    rows = [((9, 35, 12), (0.2769, 0.2045, 0.4286)),
            ((9, 25, 12), (0.3273, 0.2647, 0.4286)),
            ((10, 19, 11), (0.4000, 0.3448, 0.4762))]
    t0 = time.perf_counter()
    worst = 0.0
    for counts, (f1, p, r) in rows:
        rep = prf1(*counts)
        worst = max(worst, abs(rep.f1 - f1), abs(rep.precision - p), abs(rep.recall - r))
    dt = time.perf_counter() - t0
    _report(1, "metric arithmetic", worst <= 5e-4 and dt < 0.1, f"max abs err {worst:.2e}, {dt * 1e3:.2f} ms")


def test_criterion_2_not_reproducible():
    ACCEPTANCE.append(
        "criterion 2 [trained-model scores]: NOT RUN (needs trained detectors and hidden data; "
        "covered by criteria 3-8)"
    )


def _end_to_end(seeds, cfg, **noise):
    f1s, worst_dt = [], 0.0
    for seed in seeds:
        spec = random_scenario(seed, **noise)
        truth, items = generate_scenario(spec)
        events = resolve(items, cfg, {spec.video_id: spec.meta})
        f1s.append(evaluate(events, truth).f1)
        if not noise:
            exact = sorted(e.exact_s for e in events)
            target = sorted((p.entry + p.exit) / (2 * spec.fps) for p in spec.products)
            if len(exact) == len(target):
                worst_dt = max([worst_dt] + [abs(a - b) for a, b in zip(exact, target)])
            else:
                worst_dt = float("inf")
    return f1s, worst_dt


def test_criterion_3_zero_noise_end_to_end():
    t0 = time.perf_counter()
    f1s, worst_dt = _end_to_end(range(20), PipelineConfig())
    dt = time.perf_counter() - t0
    ok = min(f1s) == 1.0 and worst_dt <= 1 / 120 and dt < 5.0
    _report(3, "zero-noise end-to-end", ok,
            f"min F1 {min(f1s):.4f}, max timestamp error {worst_dt:.2e} s, {dt:.2f} s")


def test_criterion_4_noisy_end_to_end():
    cfg = PipelineConfig(**NOISY_VOTING)
    t0 = time.perf_counter()
    f1s, _ = _end_to_end(range(20), cfg, **NOISE)
    dt = time.perf_counter() - t0
    mean = float(np.mean(f1s))
    # default voting parameters, reported for reference only
    base, _ = _end_to_end(range(20), PipelineConfig(), **NOISE)
    _report(4, "noisy end-to-end", mean >= 0.95 and dt < 30.0,
            f"mean F1 {mean:.4f} in {dt:.2f} s; default voting params give {np.mean(base):.4f}")


def test_criterion_5_kl_suite():
    rng = np.random.default_rng(5)
    ok = True
    for _ in range(1000):
        k = int(rng.integers(2, 12))
        p, q = random_simplex(rng, k), random_simplex(rng, k)
        ok &= abs(kl_similarity_loss(p, p)) <= 1e-12
        ok &= kl_similarity_loss(p, q) >= 0.0
        ok &= weighted_similarity_loss(p, q, 2.0) == 2.0 * kl_similarity_loss(p, q)
    worst = 0.0
    h = 1e-6
    for _ in range(100):
        k = int(rng.integers(2, 10))
        p = 0.5 * random_simplex(rng, k) + 0.5 / k
        q = random_simplex(rng, k)
        g = kl_gradient(p, q)
        for i in range(k):
            e = np.zeros(k)
            e[i] = h
            fd = (kl_similarity_loss(p + e, q, check=False) - kl_similarity_loss(p - e, q, check=False)) / (2 * h)
            worst = max(worst, abs(fd - g[i]) / max(1.0, abs(g[i])))
    _report(5, "KL loss suite", bool(ok) and worst <= 1e-5, f"max finite-difference rel err {worst:.2e}")


def _frame(rng):
    n_models = int(rng.integers(1, 4))
    weights = [float(rng.uniform(0.5, 2.0)) for _ in range(n_models)]
    per = [[] for _ in range(n_models)]
    anchors = rng.uniform(0, 80, size=(3, 2))
    for _ in range(int(rng.integers(0, 9))):
        a = anchors[int(rng.integers(0, 3))]
        x1, y1 = a + rng.normal(0, 3, 2)
        w, h = rng.uniform(15, 40, 2)
        per[int(rng.integers(0, n_models))].append((BBox(x1, y1, x1 + w, y1 + h), float(rng.uniform(0.01, 1))))
    return weights, per


def test_criterion_6_wbf_oracle():
    rng = np.random.default_rng(6)
    key = ("1", 0)
    worst, ok = 0.0, True
    for _ in range(500):
        weights, per = _frame(rng)
        models = [ModelDetections(f"m{i}", {key: [ClassifiedItem(Detection("1", 0, b, s)) for b, s in d]}, w)
                  for i, (w, d) in enumerate(zip(weights, per))]
        got = [(it.bbox.as_tuple(), it.det_score) for it in wbf_fuse(models, key)]
        ref = wbf_reference([(w, [(b.as_tuple(), s) for b, s in d]) for w, d in zip(weights, per)], 0.55)
        if len(got) != len(ref):
            ok = False
            continue
        for (gb, gs), (rb, rs) in zip(got, ref):
            worst = max(worst, float(np.max(np.abs(np.subtract(gb, rb)))))
            ok &= abs(gs - rs) <= 1e-12
    # single model, NMS-clean boxes: output must equal input exactly
    identity = True
    for _ in range(500):
        dets = []
        for _ in range(int(rng.integers(0, 9))):
            x, y = rng.uniform(0, 300, 2)
            b = BBox(x, y, x + rng.uniform(5, 60), y + rng.uniform(5, 60))
            if all(iou(b, d[0]) < 0.55 for d in dets):
                dets.append((b, float(rng.uniform(0.01, 1))))
        m = ModelDetections("a", {key: [ClassifiedItem(Detection("1", 0, b, s)) for b, s in dets]})
        out = sorted((it.bbox.as_tuple(), it.det_score) for it in wbf_fuse([m], key))
        identity &= out == sorted((b.as_tuple(), s) for b, s in dets)
    _report(6, "WBF oracle", bool(ok) and worst <= 1e-9 and bool(identity),
            f"max coord err {worst:.2e}, identity {'exact' if identity else 'broken'}")


def test_criterion_7_tracker_suite():
    rng = np.random.default_rng(7)
    cfg = PipelineConfig()
    meta = VideoMeta("1", 60.0, 1920.0, 1080.0)
    assign_ok = True
    for _ in range(1000):
        xy = rng.uniform(0, 30, size=(6, 2))
        tb = [BBox(x, y, x + 40, y + 40) for x, y in xy]
        ib = [BBox(x + dx, y + dy, x + dx + 40, y + dy + 40) for (x, y), (dx, dy) in zip(xy[rng.permutation(6)], rng.normal(0, 2, (6, 2)))]
        matches, _, _ = associate(tb, ib, 0.8)
        m = iou_matrix(np.array([b.as_tuple() for b in tb]), np.array([b.as_tuple() for b in ib]))
        card, cost, _ = assignment_bruteforce(m, 0.8)
        got_cost = sum(1 - m[i, j] for i, j in matches)
        assign_ok &= len(matches) == card and abs(got_cost - cost) <= 1e-9
    gate_ok = associate([BBox(0, 0, 10, 10)], [BBox(0, 0, 10, 8)], 0.8)[0] == []

    def linear(n):
        return [(f, [make_item(f, BBox.from_cxcywh(700 + 2 * f, 500, 160, 120), 0.9, one_hot(1))]) for f in range(n)]

    prune_ok = track_video(linear(14), meta, cfg) == [] and len(track_video(linear(15), meta, cfg)) == 1
    filt_ok = (score_filter([make_item(det=0.3, probs=(0.3, 0.3, 0.3, 0.1))], cfg) != []
               and score_filter([make_item(det=0.29, probs=(0.9, 0.1))], cfg) == [])
    s = kalman_initiate(BBox(100, 100, 160, 140))
    mono_ok = True
    for _ in range(200):
        p = kalman_predict(s)
        mono_ok &= p.trace() >= s.trace()
        u = kalman_update(p, BBox.from_cxcywh(*(p.mean[:4] + rng.normal(0, 1, 4))))
        mono_ok &= u.trace() <= p.trace()
        s = u
    spec = random_scenario(3, **NOISE)
    _, items = generate_scenario(spec)
    frames = {}
    for it in items:
        frames.setdefault(it.frame_idx, []).append(it)
    grouped = sorted(frames.items())
    t1 = track_video(grouped, spec.meta, cfg)
    t2 = track_video(grouped, spec.meta, cfg)
    det_ok = [(t.first_frame, t.last_frame, t.items) for t in t1] == [(t.first_frame, t.last_frame, t.items) for t in t2]
    parts = dict(assignment=assign_ok, gate=gate_ok, pruning=prune_ok, score_filter=filt_ok,
                 kalman=mono_ok, determinism=det_ok)
    _report(7, "tracker suite", all(parts.values()), ", ".join(f"{k} {'ok' if v else 'BAD'}" for k, v in parts.items()))


def test_criterion_8_voting_suite():
    rng = np.random.default_rng(8)
    area = 1920.0 * 1080.0
    perm_ok = closed_ok = dom_ok = norm_ok = True
    for _ in range(1000):
        n = int(rng.integers(1, 20))
        items = []
        for f in np.sort(rng.choice(300, n, replace=False)):
            side = rng.uniform(60, 400)
            items.append(make_item(int(f), BBox.from_cxcywh(960, 540, side, side), float(rng.uniform(0.3, 1)),
                                   one_hot(int(rng.integers(0, 6)), 8)))
        freqs = {l: int(rng.integers(1, 40)) for l in range(8)}
        p = VotingParams(*(float(x) for x in rng.uniform(0.1, 3, 3)), float(rng.uniform(0.01, 3)))
        label = vote_label(items, freqs, p, area)
        perm_ok &= vote_label([items[i] for i in rng.permutation(n)], freqs, p, area) == label
        c0 = contribution_scores(items, freqs, VotingParams(p.alpha, 0.0, 0.0, p.tau), area)
        closed_ok &= np.allclose(c0, [freqs[it.label] ** p.alpha / n for it in items], rtol=1e-12, atol=0)
        c = contribution_scores(items, freqs, p, area)
        norm_ok &= abs(float(np.sum(c / [freqs[it.label] ** p.alpha for it in items])) - 1.0) <= 1e-9
        norm_ok &= abs(float(softmax(rng.normal(0, 30, n)).sum()) - 1.0) <= 1e-9
        best_score = max(it.det_score for it in items)
        if best_score < 1.0:
            dom = make_item(400, BBox.from_cxcywh(960, 540, 420, 420), min(1.0, best_score + 1e-3), one_hot(7, 8))
            f2 = dict(freqs)
            f2[7] = max(freqs.values()) + 1
            dom_ok &= vote_label(items + [dom], f2, p, area) == 7
    parts = dict(permutation=perm_ok, closed_form=closed_ok, dominance=dom_ok, normalization=norm_ok)
    _report(8, "voting suite", all(parts.values()), ", ".join(f"{k} {'ok' if v else 'BAD'}" for k, v in parts.items()))


def _validation(rng, n_frames=10):
    truth = {}
    for f in range(n_frames):
        boxes = []
        for _ in range(int(rng.integers(1, 4))):
            x, y = rng.uniform(0, 600, 2)
            b = BBox(x, y, x + rng.uniform(40, 120), y + rng.uniform(40, 120))
            if all(iou(b, o) == 0 for o in boxes):
                boxes.append(b)
        truth[("v", f)] = boxes
    return truth


def _detector(rng, mid, truth):
    jitter, miss, fp = rng.uniform(1, 12), rng.uniform(0, 0.4), rng.uniform(0, 1.5)
    frames = {}
    for key, boxes in truth.items():
        out = []
        for b in boxes:
            if rng.random() < miss:
                continue
            j = rng.normal(0, jitter, 4)
            x1, y1 = b.x1 + j[0], b.y1 + j[1]
            out.append(ClassifiedItem(Detection("v", key[1], BBox(x1, y1, max(x1 + 5, b.x2 + j[2]), max(y1 + 5, b.y2 + j[3])),
                                                float(rng.uniform(0.3, 1)), mid)))
        for _ in range(int(rng.poisson(fp))):
            x, y = rng.uniform(0, 700, 2)
            out.append(ClassifiedItem(Detection("v", key[1], BBox(x, y, x + 50, y + 50), float(rng.uniform(0.05, 0.9)), mid)))
        if out:
            frames[key] = out
    return ModelDetections(mid, frames)


def test_criterion_9_greedy_ensemble():
    rng = np.random.default_rng(9)
    metric = map_metric()
    dominates = agrees = True
    checked = ambiguous = 0
    for _ in range(20):
        truth = _validation(rng)
        n = int(rng.integers(1, 5))
        models = [_detector(rng, f"m{i}", truth) for i in range(n)]
        by_id = {m.model_id: m for m in models}
        table = {frozenset(c): metric(fuse_models([by_id[x] for x in c]), truth)
                 for r in range(1, n + 1) for c in itertools.combinations(sorted(by_id), r)}
        res = greedy_auto_ensemble(models, truth)
        dominates &= all(res.score >= table[frozenset([m])] for m in by_id)
        # replay forward selection on the exhaustive table
        sel, score, amb = [], -np.inf, False
        cands = sorted(by_id)
        while cands:
            trials = [(table[frozenset(sel + [c])], c) for c in cands]
            best = max(t[0] for t in trials)
            tied = [c for s, c in trials if s == best]
            amb |= len(tied) > 1
            if sel and not best > score:
                break
            sel.append(tied[0])
            cands.remove(tied[0])
            score = best
        if amb:
            ambiguous += 1
            continue
        checked += 1
        agrees &= res.selected == sel and res.score == score
    _report(9, "greedy ensemble", bool(dominates and agrees),
            f"{checked} unambiguous sets matched exhaustive replay, {ambiguous} tie-logged")
