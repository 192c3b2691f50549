"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Kernel timings call both modules directly; the end-to-end timing runs the
pipeline in a subprocess per backend, since the choice is made at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from checkout_track import _pykernels

try:
    from checkout_track import _ckernels
except ImportError:
    _ckernels = None

END_TO_END = """
import time
from checkout_track import kernels
from checkout_track.pipeline import resolve
from checkout_track.sim import generate_scenario, random_scenario
specs = [random_scenario(s, jitter_sigma=2.0, miss_rate=0.05, spurious_rate=0.02, label_noise_rate=0.05)
         for s in range(10)]
data = [(generate_scenario(s)[1], {s.video_id: s.meta}) for s in specs]
t0 = time.perf_counter()
for items, metas in data:
    resolve(items, metas=metas)
print(kernels.BACKEND, time.perf_counter() - t0)
"""


def _cases(rng):
    a = rng.uniform(0, 500, (40, 2))
    boxes_a = np.hstack([a, a + rng.uniform(20, 120, (40, 2))])
    b = rng.uniform(0, 500, (40, 2))
    boxes_b = np.hstack([b, b + rng.uniform(20, 120, (40, 2))])
    w = np.sort(rng.uniform(0.05, 1.0, 40))[::-1].copy()
    mean = np.array([300.0, 200.0, 80.0, 60.0, 1.0, 0.5, 0.0, 0.0])
    cov = np.diag(rng.uniform(1, 20, 8))
    z = mean[:4] + 1.0
    return {
        "iou_matrix 40x40": lambda m: m.iou_matrix(boxes_a, boxes_b),
        "wbf_cluster n=40": lambda m: m.wbf_cluster(boxes_a, w, 0.55),
        "kf_predict": lambda m: m.kf_predict(mean, cov, 0.05, 1 / 160),
        "kf_update": lambda m: m.kf_update(mean, cov, z, 0.05),
    }


def _best(fn, repeat, number=200):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    cases = _cases(np.random.default_rng(0))
    print(f"{'kernel':<20}{'python (us)':>14}{'cython (us)':>14}{'speedup':>10}")
    for name, call in cases.items():
        py = _best(lambda: call(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:<20}{py * 1e6:>14.2f}{'n/a':>14}{'':>10}")
            continue
        cy = _best(lambda: call(_ckernels), args.repeat)
        print(f"{name:<20}{py * 1e6:>14.2f}{cy * 1e6:>14.2f}{py / cy:>9.1f}x")

    print("\nend to end, 10 noisy scenarios:")
    for pure in ("1", "0"):
        env = dict(os.environ, CHECKOUT_TRACK_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
        backend, seconds = out.stdout.split()
        print(f"  {backend:<8}{float(seconds):.3f} s")


if __name__ == "__main__":
    main()
