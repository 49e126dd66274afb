import math
import sys
from functools import lru_cache

import numpy as np
from hypothesis import strategies as st

from qmem.entropy import make_state
from qmem.shapes import Shape, make_shape

P_VALUES = [1.0, 1.5, 2.0, 3.0, 10.0, math.inf]


@lru_cache(maxsize=None)
def partitions(n, largest=None):
    """All partitions of n as descending tuples."""
    largest = n if largest is None else largest
    if n == 0:
        return ((),)
    out = []
    for first in range(min(n, largest), 0, -1):
        for rest in partitions(n - first, first):
            out.append((first,) + rest)
    return tuple(out)


def shapes_up_to(total):
    """Every shape with 1-norm at most ``total``."""
    return [make_shape(p) for n in range(1, total + 1) for p in partitions(n)]


def shape_strategy(max_size=5, max_parts=5):
    return st.lists(st.integers(1, max_size), min_size=1, max_size=max_parts).map(make_shape)


def random_state(shape: Shape, rng: np.random.Generator, sparsity: float = 0.0):
    """Random diagonal state on ``shape``; ``sparsity`` zeroes that fraction of entries."""
    sizes = list(shape.blocks())
    raw = [rng.exponential(size=s) ** rng.uniform(0.5, 3) for s in sizes]
    if sparsity:
        raw = [np.where(rng.random(len(r)) < sparsity, 0.0, r) for r in raw]
    total = sum(float(r.sum()) for r in raw)
    if total == 0:
        raw[0][0] = 1.0
        total = 1.0
    return make_state(shape, [list(r / total) for r in raw])


def random_shape(rng: np.random.Generator, max_size=4, max_parts=4) -> Shape:
    n = int(rng.integers(1, max_parts + 1))
    return make_shape([int(x) for x in rng.integers(1, max_size + 1, size=n)])


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
