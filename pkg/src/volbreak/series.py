"""Price ingestion, log returns and descriptive diagnostics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import IO, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import stats

from volbreak.errors import (
    BadRow,
    ConstantSeries,
    DegenerateStatistic,
    EmptySeries,
    MalformedHeader,
    SeriesTooShort,
)

__all__ = [
    "PriceSeries",
    "ReturnSeries",
    "SummaryStats",
    "parse_price_csv",
    "read_price_csv",
    "log_returns",
    "summary_stats",
    "ljung_box",
    "DEFAULT_LB_LAGS",
]

DEFAULT_LB_LAGS = 20


@dataclass(frozen=True)
class PriceSeries:
    prices: NDArray[np.float64]
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        prices = np.asarray(self.prices, dtype=np.float64)
        if prices.ndim != 1:
            raise ValueError("prices must be one-dimensional")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise ValueError("prices must be finite and strictly positive")
        object.__setattr__(self, "prices", prices)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(prices):
                raise ValueError("labels and prices differ in length")
            if any(b <= a for a, b in zip(labels, labels[1:])):
                raise ValueError("labels must be strictly increasing")
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.prices)


@dataclass(frozen=True)
class ReturnSeries:
    """Log returns ``r_t = ln S_t - ln S_{t-1}`` with optional date labels.

    Behaves like a 1-d float array under ``np.asarray`` so every detector and
    fitter accepts either a ``ReturnSeries`` or a plain array.
    """

    values: NDArray[np.float64]
    labels: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise ValueError("return values must be finite")
        object.__setattr__(self, "values", values)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(values):
                raise ValueError("labels and values differ in length")
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def label(self, index: int) -> Optional[str]:
        return None if self.labels is None else self.labels[index]


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std_dev: float
    skewness: float
    excess_kurtosis: float
    ljung_box_p: float
    ljung_box_sq_p: float

    def to_dict(self) -> dict[str, float]:
        return {
            "mean": self.mean,
            "std_dev": self.std_dev,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
            "ljung_box_p": self.ljung_box_p,
            "ljung_box_sq_p": self.ljung_box_sq_p,
        }


def parse_price_csv(text: str | IO[str]) -> PriceSeries:
    """Parse a ``date,close`` CSV into a :class:`PriceSeries`.

    Column names are matched case-insensitively; extra columns are ignored
    and the ``date`` column may be omitted. Rows must already be sorted by
    date. Line numbers in :class:`BadRow` count the header as line 1.
    """
    stream = io.StringIO(text) if isinstance(text, str) else text
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedHeader("input is empty") from None
    names = [h.strip().lower() for h in header]
    if "close" not in names:
        raise MalformedHeader(f"header must contain a 'close' column, got {header!r}")
    close_col = names.index("close")
    date_col = names.index("date") if "date" in names else None

    prices: list[float] = []
    labels: list[str] = []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(names):
            raise BadRow(line_no, f"expected {len(names)} fields, got {len(row)}")
        raw = row[close_col].strip()
        try:
            price = float(raw)
        except ValueError:
            raise BadRow(line_no, f"unparseable price {raw!r}") from None
        if not math.isfinite(price):
            raise BadRow(line_no, f"non-finite price {raw!r}")
        if price <= 0:
            raise BadRow(line_no, f"non-positive price {raw!r}")
        if date_col is not None:
            date = row[date_col].strip()
            if not date:
                raise BadRow(line_no, "missing date")
            if labels and date <= labels[-1]:
                raise BadRow(line_no, f"date {date!r} not after {labels[-1]!r}")
            labels.append(date)
        prices.append(price)

    if len(prices) < 2:
        raise EmptySeries(f"need at least 2 prices to form a return, got {len(prices)}")
    return PriceSeries(np.array(prices), tuple(labels) if date_col is not None else None)


def read_price_csv(path: str) -> PriceSeries:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_price_csv(fh)


def log_returns(p: PriceSeries) -> ReturnSeries:
    """Log returns of consecutive prices; labels follow the later price."""
    if len(p) < 2:
        raise EmptySeries("need at least 2 prices")
    lp = np.log(p.prices)
    labels = None if p.labels is None else p.labels[1:]
    return ReturnSeries(np.diff(lp), labels)


def summary_stats(r: ArrayLike, lags: int = DEFAULT_LB_LAGS) -> SummaryStats:
    """Mean, sample sd, skewness, excess kurtosis and Ljung-Box p-values.

    Raises
    ------
    SeriesTooShort
        If the series has ``lags`` or fewer observations.
    DegenerateStatistic
        If the series is constant, so the standardized moments are undefined.
    """
    x = np.asarray(r, dtype=np.float64)
    if lags < 1:
        raise ValueError("lags must be positive")
    if len(x) < lags + 1:
        raise SeriesTooShort(f"need at least {lags + 1} observations, got {len(x)}")
    mean = float(np.mean(x))
    if np.all(x == x[0]):
        # np.std can leave rounding residue on a constant series
        raise DegenerateStatistic(
            "skewness and kurtosis are undefined for a constant series", mean=float(x[0]), std_dev=0.0
        )
    std = float(np.std(x, ddof=1))
    skew = float(stats.skew(x, bias=True))
    kurt = float(stats.kurtosis(x, fisher=True, bias=True))
    _, p = ljung_box(x, lags)
    x2 = x * x
    if np.all(x2 == x2[0]):
        # |r_t| constant: no volatility clustering is possible
        p_sq = 1.0
    else:
        _, p_sq = ljung_box(x2, lags)
    return SummaryStats(mean, std, skew, kurt, p, p_sq)


def ljung_box(x: ArrayLike, lags: int = DEFAULT_LB_LAGS) -> tuple[float, float]:
    """Ljung-Box portmanteau statistic and its chi-square(lags) p-value.

    ``Q = n (n + 2) * sum_{k=1..lags} acf_k**2 / (n - k)``
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if lags < 1:
        raise ValueError("lags must be positive")
    if n <= lags:
        raise SeriesTooShort(f"need more than {lags} observations, got {n}")
    xc = x - x.mean()
    denom = float(np.dot(xc, xc))
    if denom == 0.0 or np.all(x == x[0]):
        raise ConstantSeries("Ljung-Box is undefined for a constant series")
    acf = np.array([np.dot(xc[k:], xc[:-k]) for k in range(1, lags + 1)]) / denom
    q = float(n * (n + 2) * np.sum(acf**2 / (n - np.arange(1, lags + 1))))
    return q, float(stats.chi2.sf(q, lags))

