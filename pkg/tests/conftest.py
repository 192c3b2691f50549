import numpy as np
import pytest

from checkout_track.core import BBox, ClassifiedItem, Detection


def random_box(rng, lo=0.0, hi=100.0, min_size=1.0, max_size=50.0):
    x, y = rng.uniform(lo, hi, size=2)
    w, h = rng.uniform(min_size, max_size, size=2)
    return BBox(float(x), float(y), float(x + w), float(y + h))


def make_item(frame=0, box=(0, 0, 10, 10), det=0.9, probs=(0.1, 0.9), video="1", model="m"):
    b = box if isinstance(box, BBox) else BBox(*box)
    return ClassifiedItem(Detection(video, frame, b, det, model), probs)


def one_hot(label, k=4, mass=1.0):
    p = [(1.0 - mass) / (k - 1)] * k if k > 1 else [0.0]
    p[label] = mass
    return tuple(p)


@pytest.fixture
def rng():
    return np.random.default_rng(20220601)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
