"""Exception hierarchy shared by every volbreak module."""

from __future__ import annotations


class VolbreakError(ValueError):
    """Base class for all domain errors raised by volbreak."""


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------


class MalformedHeader(VolbreakError):
    pass


class BadRow(VolbreakError):
    """A data row could not be accepted.

    Parameters
    ----------
    line : int
        1-based line number in the source text (the header is line 1).
    reason : str
        Human-readable description of the problem.
    """

    def __init__(self, line: int, reason: str) -> None:
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class EmptySeries(VolbreakError):
    pass


class SeriesTooShort(VolbreakError):
    pass


class ConstantSeries(VolbreakError):
    pass


class DegenerateStatistic(VolbreakError):
    """A moment statistic is undefined for the data (e.g. skewness of a constant).

    ``mean`` and ``std_dev`` carry whatever was still computable.
    """

    def __init__(self, message: str, mean: float | None = None, std_dev: float | None = None) -> None:
        self.mean = mean
        self.std_dev = std_dev
        super().__init__(message)


# ---------------------------------------------------------------------------
# Change-point detection
# ---------------------------------------------------------------------------


class AllZeroSeries(VolbreakError):
    pass


class EmptySample(VolbreakError):
    pass


class BelowTableRange(VolbreakError):
    pass


class InsufficientSims(VolbreakError):
    pass


# ---------------------------------------------------------------------------
# GARCH
# ---------------------------------------------------------------------------


class InvalidParams(VolbreakError):
    pass


class InvalidNu(InvalidParams):
    pass


class LengthMismatch(VolbreakError):
    pass


class NonPositiveVariance(VolbreakError):
    pass


class RegimeTooShort(VolbreakError):
    """A regime is too short to fit or summarise.

    ``regime`` is the 0-based index of the offending regime, ``start``/``end``
    its half-open bounds in the full series.
    """

    def __init__(self, regime: int, start: int, end: int, minimum: int) -> None:
        self.regime = regime
        self.start = start
        self.end = end
        self.minimum = minimum
        super().__init__(
            f"regime {regime} [{start}, {end}) has {end - start} observations; "
            f"at least {minimum} required"
        )


# ---------------------------------------------------------------------------
# Simulation / pipeline
# ---------------------------------------------------------------------------


class InvalidSpec(VolbreakError):
    pass


class StageError(VolbreakError):
    """Wraps an error raised inside one pipeline stage, naming the stage."""

    def __init__(self, stage: str, cause: Exception) -> None:
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage}: {cause}")
