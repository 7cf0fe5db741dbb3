"""Shared quasi-random sampling."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import qmc


def sobol_points(lo, hi, count: int, seed=0) -> np.ndarray:
    """``count`` scrambled Sobol points in the box ``[lo, hi]``.

    The sequence is drawn in a power-of-two block and truncated, which keeps
    the balance properties of the leading points.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    count = int(count)
    m = int(math.ceil(math.log2(max(count, 2))))
    pts = qmc.Sobol(lo.size, scramble=True, seed=seed).random_base2(m)[:count]
    # degenerate axes collapse to the lower end
    return lo + pts * np.where(hi > lo, hi - lo, 0.0)
