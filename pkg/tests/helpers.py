"""Shared test utilities: root enumeration, rasterization oracle."""

from fractions import Fraction

import numpy as np

from kakeyalab.madic import point_address


def root_addr(i: int, M: int, J: int):
    return point_address((Fraction(i, M ** J),), M, J)


def all_roots_1d(pruned):
    K = pruned.M ** pruned.J
    return [root_addr(i, pruned.M, pruned.J) for i in range(K)]


def rasterize_pair_volume(t1, t2, window, cells: int = 1000):
    """Grid bracket of a 1-d pair-intersection volume.

    Marks cells whose center lies in both tubes (estimate) and returns the
    matching inner/outer counts so the exact value can be sandwiched:
    cells entirely inside both tubes give the lower count, cells merely
    touching both give the upper.
    """
    a = float(max(window.lo, 0))
    b = float(min(window.hi, 10 * t1.A0))
    if a >= b:
        return 0.0, 0.0
    s = float(t1.side)
    c1 = float(t1.center()[0]); w1 = float(t1.slope[0])
    c2 = float(t2.center()[0]); w2 = float(t2.slope[0])
    ylo = min(c1 + a * w1, c1 + b * w1, c2 + a * w2, c2 + b * w2) - s
    yhi = max(c1 + a * w1, c1 + b * w1, c2 + a * w2, c2 + b * w2) + s
    xs = np.linspace(a, b, cells, endpoint=False) + (b - a) / (2 * cells)
    ys = np.linspace(ylo, yhi, cells, endpoint=False) + (yhi - ylo) / (2 * cells)
    dx = (b - a) / cells
    dy = (yhi - ylo) / cells
    X, Y = np.meshgrid(xs, ys, indexing="ij")

    def inside(cb, wb, margin):
        return np.abs(Y - (cb + X * wb)) <= s / 2 + margin

    lower = np.count_nonzero(inside(c1, w1, -dy / 2) & inside(c2, w2, -dy / 2))
    upper = np.count_nonzero(inside(c1, w1, +dy / 2) & inside(c2, w2, +dy / 2))
    return lower * dx * dy, upper * dx * dy
