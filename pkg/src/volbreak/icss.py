"""Iterated cumulative sum of squares (ICSS) variance change-point detector.

The centred cumulative sum of squares ``D_t = C_t / C_n - t / n`` is scaled
by ``sqrt(n / 2)``; its maximum absolute value behaves like the supremum of
a Brownian bridge for iid Gaussian data, which gives the usual asymptotic
5% critical value of 1.358. Heavy-tailed data break that calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from volbreak.errors import AllZeroSeries, SeriesTooShort
from volbreak.segmentation import Segmentation, binary_segment

__all__ = [
    "IcssConfig",
    "CusumPath",
    "cusum_squares",
    "icss_statistic",
    "icss_single_test",
    "icss_segment",
    "ICSS_ASYMPTOTIC_5PCT",
]

ICSS_ASYMPTOTIC_5PCT = 1.358


@dataclass(frozen=True)
class IcssConfig:
    threshold: float = ICSS_ASYMPTOTIC_5PCT
    min_segment: int = 10
    demean: bool = False

    def __post_init__(self) -> None:
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        if self.min_segment < 2:
            raise ValueError("min_segment must be at least 2")


@dataclass(frozen=True)
class CusumPath:
    """``d[t]`` for ``t = 0..n``; ``d[0] == d[n] == 0``."""

    d: NDArray[np.float64]
    n: int


def cusum_squares(r: ArrayLike) -> CusumPath:
    x = np.asarray(r, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise SeriesTooShort(f"need at least 2 observations, got {n}")
    c = np.cumsum(x * x)
    total = c[-1]
    if total == 0.0:
        raise AllZeroSeries("cumulative sum of squares is zero")
    d = np.empty(n + 1)
    d[0] = 0.0
    d[1:] = c / total - np.arange(1, n + 1) / n
    d[n] = 0.0
    return CusumPath(d, n)


def icss_statistic(r: ArrayLike, min_segment: int = 10) -> tuple[float, int]:
    """Return ``(sqrt(n/2) * max|d_t|, argmax t)`` over ``t in [min_segment, n - min_segment]``.

    ``t`` counts the observations before the candidate change, so it is also
    the 0-based index at which the new regime starts. Ties go to the
    smallest ``t``.
    """
    x = np.asarray(r, dtype=np.float64)
    n = len(x)
    if n < 2 * min_segment:
        raise SeriesTooShort(f"need at least {2 * min_segment} observations, got {n}")
    path = cusum_squares(x)
    window = np.abs(path.d[min_segment : n - min_segment + 1])
    i = int(np.argmax(window))
    return math.sqrt(n / 2.0) * float(window[i]), min_segment + i


def icss_single_test(r: ArrayLike, cfg: IcssConfig = IcssConfig()) -> Optional[int]:
    """Single change-point test; returns the split index when the statistic exceeds the threshold."""
    x = np.asarray(r, dtype=np.float64)
    if cfg.demean:
        x = x - x.mean()
    stat, tau = icss_statistic(x, cfg.min_segment)
    return tau if stat > cfg.threshold else None


def icss_segment(r: ArrayLike, cfg: IcssConfig = IcssConfig()) -> Segmentation:
    """Recursive ICSS binary segmentation.

    After a change is found at ``tau`` the blocks ``[start, tau)`` and
    ``[tau, end)`` are tested independently, until no block flags or a block
    is shorter than ``2 * min_segment``.
    """
    x = np.asarray(r, dtype=np.float64)

    def find_split(start: int, end: int) -> Optional[int]:
        block = x[start:end]
        if not np.any(block):
            return None
        tau = icss_single_test(block, cfg)
        return None if tau is None else start + tau

    if len(x) >= 2 and not np.any(x):
        raise AllZeroSeries("cumulative sum of squares is zero")
    return binary_segment(len(x), cfg.min_segment, find_split)
