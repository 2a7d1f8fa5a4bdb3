"""Nonparametric change-point model (NPCPM) built on the Mood scale test.

Every observation is replaced by its rank in the pooled sample. Mood's
statistic sums the squared deviations of one sample's ranks from the
midrank ``(N + 1) / 2``; after standardisation by its exact null mean and
variance it is maximised over all admissible split points. The null
distribution of the maximum depends only on the series length, so one table
of critical values serves every continuous return distribution.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import IO, Literal, Mapping, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats

from volbreak._rng import replicate_rng, student_t
from volbreak.errors import BelowTableRange, EmptySample, InsufficientSims, SeriesTooShort
from volbreak.segmentation import Segmentation, binary_segment

__all__ = [
    "MoodResult",
    "MaxMoodResult",
    "ThresholdTable",
    "DEFAULT_THRESHOLDS",
    "ranks",
    "mood_statistic",
    "max_mood_statistic",
    "threshold_lookup",
    "calibrate_threshold",
    "calibrate_table",
    "npcpm_segment",
]

Ties = Literal["max", "average"]

# Split window used to calibrate the shipped table: k in [2, n - 2].
CALIBRATION_MIN_SEGMENT = 2


@dataclass(frozen=True)
class MoodResult:
    m_raw: float
    mean: float
    std: float
    m: float


@dataclass(frozen=True)
class MaxMoodResult:
    m_max: float
    tau_hat: int
    per_k: Optional[NDArray[np.float64]] = None
    k_min: int = 1


@dataclass(frozen=True)
class ThresholdTable:
    """Critical values ``h_n`` of the maximised Mood statistic by series length."""

    entries: Mapping[int, float]
    alpha: float = 0.05

    def __post_init__(self) -> None:
        items = sorted((int(n), float(h)) for n, h in self.entries.items())
        if not items:
            raise ValueError("threshold table is empty")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        hs = [h for _, h in items]
        if any(h <= 0 for h in hs):
            raise ValueError("thresholds must be positive")
        if any(b < a for a, b in zip(hs, hs[1:])):
            raise ValueError("thresholds must be nondecreasing in n")
        object.__setattr__(self, "entries", dict(items))

    @property
    def lengths(self) -> list[int]:
        return list(self.entries)

    def to_csv(self) -> str:
        lines = [f"# alpha={self.alpha:g}", "n,h"]
        lines += [f"{n},{h:.6g}" for n, h in self.entries.items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str | IO[str]) -> "ThresholdTable":
        stream = io.StringIO(text) if isinstance(text, str) else text
        alpha = 0.05
        entries: dict[int, float] = {}
        seen_header = False
        for raw in stream:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key.strip().lower() == "alpha":
                    alpha = float(value)
                continue
            if not seen_header:
                if [c.strip().lower() for c in line.split(",")] != ["n", "h"]:
                    raise ValueError(f"expected header 'n,h', got {line!r}")
                seen_header = True
                continue
            n, h = line.split(",")
            entries[int(n)] = float(h)
        return cls(entries, alpha)


DEFAULT_THRESHOLDS = ThresholdTable(
    {
        10: 2.48,
        20: 2.65,
        50: 2.88,
        100: 2.99,
        200: 3.09,
        500: 3.20,
        1000: 3.25,
        5000: 3.35,
        10000: 3.37,
        20000: 3.42,
    },
    alpha=0.05,
)


def ranks(x: ArrayLike, ties: Ties = "max") -> NDArray:
    """Rank of each element within ``x``.

    With ``ties="max"`` the rank of ``x_i`` is the number of elements it is
    greater than or equal to (itself included), so tied values share the
    largest rank of their group. ``ties="average"`` gives midranks.
    """
    x = np.asarray(x, dtype=np.float64)
    if ties == "max":
        return np.searchsorted(np.sort(x), x, side="right")
    if ties == "average":
        return stats.rankdata(x, method="average")
    raise ValueError(f"unknown ties policy {ties!r}")


def _null_moments(m, n):
    """Null mean and standard deviation of Mood's M' for sample sizes ``m`` and ``n``."""
    big_n = m + n
    mean = m * (big_n * big_n - 1) / 12.0
    var = m * n * (big_n + 1) * (big_n * big_n - 4) / 180.0
    return mean, np.sqrt(var)


def mood_statistic(a: ArrayLike, b: ArrayLike, ties: Ties = "max") -> MoodResult:
    """Standardised Mood statistic for the scale of ``a`` against ``b``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise EmptySample("both samples must be non-empty")
    m, n = len(a), len(b)
    if m + n < 3:
        raise EmptySample("pooled sample needs at least 3 observations")
    r = ranks(np.concatenate([a, b]), ties)[:m]
    centre = (m + n + 1) / 2.0
    m_raw = float(np.sum((r - centre) ** 2))
    mean, std = _null_moments(m, n)
    return MoodResult(m_raw, float(mean), float(std), abs(m_raw - mean) / std)


def _mood_profile(rank_rows: NDArray, k_min: int, k_max: int) -> NDArray:
    """Standardised Mood statistic for every split ``k`` in ``[k_min, k_max]``.

    ``rank_rows`` holds pooled ranks along its last axis; leading axes are
    batch dimensions. A single prefix sum of the squared rank deviations
    gives M' for every split.
    """
    big_n = rank_rows.shape[-1]
    dev = (rank_rows - (big_n + 1) / 2.0) ** 2
    m_raw = np.cumsum(dev, axis=-1)[..., k_min - 1 : k_max]
    k = np.arange(k_min, k_max + 1, dtype=np.float64)
    mean, std = _null_moments(k, big_n - k)
    return np.abs(m_raw - mean) / std


def max_mood_statistic(
    r: ArrayLike,
    min_segment: int = 10,
    ties: Ties = "max",
    keep_per_k: bool = False,
) -> MaxMoodResult:
    """Maximise the Mood statistic over splits ``r[:k] | r[k:]``.

    ``k`` ranges over ``[min_segment, n - min_segment]``; ties go to the
    smallest ``k``. The series is ranked once.

    A constant series carries no information about scale and returns
    ``m_max = 0`` at the first admissible split.
    """
    x = np.asarray(r, dtype=np.float64)
    n = len(x)
    if min_segment < 1:
        raise ValueError("min_segment must be positive")
    if n < 2 * min_segment or n < 3:
        raise SeriesTooShort(f"need at least {max(2 * min_segment, 3)} observations, got {n}")
    k_min, k_max = min_segment, n - min_segment
    if np.all(x == x[0]):
        per_k = np.zeros(k_max - k_min + 1)
        return MaxMoodResult(0.0, k_min, per_k if keep_per_k else None, k_min)
    per_k = _mood_profile(ranks(x, ties), k_min, k_max)
    i = int(np.argmax(per_k))
    return MaxMoodResult(float(per_k[i]), k_min + i, per_k if keep_per_k else None, k_min)


def threshold_lookup(table: ThresholdTable, n: int) -> float:
    """Critical value for length ``n``.

    Exact for tabulated lengths, linear in ``log n`` between them, and
    clamped to the last entry beyond the table.
    """
    lengths = table.lengths
    if n < lengths[0]:
        raise BelowTableRange(f"n={n} is below the smallest tabulated length {lengths[0]}")
    if n in table.entries:
        return table.entries[n]
    if n >= lengths[-1]:
        return table.entries[lengths[-1]]
    hs = [table.entries[m] for m in lengths]
    return float(np.interp(math.log(n), np.log(lengths), hs))


def _simulate_max_mood(
    n: int,
    num_sims: int,
    seed: int,
    min_segment: int,
    dist: str,
    nu: float,
    chunk: int,
) -> NDArray:
    out = np.empty(num_sims)
    k_min, k_max = min_segment, n - min_segment
    for lo in range(0, num_sims, chunk):
        hi = min(lo + chunk, num_sims)
        block = np.empty((hi - lo, n))
        for j in range(lo, hi):
            rng = replicate_rng(seed, j)
            if dist == "gaussian":
                block[j - lo] = rng.standard_normal(n)
            else:
                block[j - lo] = student_t(rng, nu, n)
        # continuous draws: ties have probability zero
        rank_rows = block.argsort(axis=1).argsort(axis=1) + 1.0
        out[lo:hi] = _mood_profile(rank_rows, k_min, k_max).max(axis=1)
    return out


def calibrate_threshold(
    n: int,
    alpha: float = 0.05,
    num_sims: int = 10_000,
    seed: int = 0,
    min_segment: int = CALIBRATION_MIN_SEGMENT,
    dist: Literal["gaussian", "student_t"] = "gaussian",
    nu: float = 3.0,
    return_samples: bool = False,
):
    """Monte Carlo ``(1 - alpha)`` quantile of the maximised Mood statistic.

    Replicate ``i`` draws its series from a stream derived from
    ``(seed, i)``, so the result does not depend on batching.

    Parameters
    ----------
    n : int
        Series length.
    alpha : float
        False-positive probability under the no-change null.
    num_sims : int
        Number of simulated null series. At least ``1 / alpha`` are needed.
    seed : int
        Master seed.
    min_segment : int
        Smallest sample allowed on either side of a split. The default of 2
        is the window the shipped table was built with.
    dist : {"gaussian", "student_t"}
        Null distribution. Irrelevant in theory; exposed to check exactly that.
    nu : float
        Degrees of freedom when ``dist="student_t"``.
    return_samples : bool
        Also return the simulated maxima.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if num_sims * alpha < 1:
        raise InsufficientSims(f"{num_sims} simulations cannot resolve alpha={alpha}")
    if n < 2 * min_segment or n < 3:
        raise SeriesTooShort(f"n={n} leaves no admissible split for min_segment={min_segment}")
    if dist not in ("gaussian", "student_t"):
        raise ValueError(f"unknown null distribution {dist!r}")
    chunk = max(1, min(num_sims, 4_000_000 // n))
    samples = _simulate_max_mood(n, num_sims, seed, min_segment, dist, nu, chunk)
    h = float(np.quantile(samples, 1.0 - alpha))
    return (h, samples) if return_samples else h


def calibrate_table(
    lengths,
    alpha: float = 0.05,
    num_sims: int = 10_000,
    seed: int = 0,
    min_segment: int = CALIBRATION_MIN_SEGMENT,
) -> ThresholdTable:
    """Build a :class:`ThresholdTable` by calibrating each length.

    Monte Carlo noise can make neighbouring quantiles dip; a running maximum
    restores monotonicity.
    """
    lengths = sorted(int(n) for n in lengths)
    hs = [calibrate_threshold(n, alpha, num_sims, seed, min_segment) for n in lengths]
    hs = np.maximum.accumulate(hs)
    return ThresholdTable(dict(zip(lengths, hs.tolist())), alpha)


def npcpm_segment(
    r: ArrayLike,
    table: ThresholdTable = DEFAULT_THRESHOLDS,
    min_segment: int = 10,
    ties: Ties = "max",
) -> Segmentation:
    """Recursive NPCPM binary segmentation.

    Each block is compared against the threshold for its own length.
    """
    x = np.asarray(r, dtype=np.float64)

    def find_split(start: int, end: int) -> Optional[int]:
        res = max_mood_statistic(x[start:end], min_segment, ties)
        if res.m_max > threshold_lookup(table, end - start):
            return start + res.tau_hat
        return None

    return binary_segment(len(x), min_segment, find_split)
