"""Change-point segmentations and the recursive binary-splitting driver."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

__all__ = ["Segmentation", "binary_segment"]


@dataclass(frozen=True)
class Segmentation:
    """Sorted change points partitioning ``range(n)`` into regimes.

    A change point ``c`` is the 0-based index of the first observation of a
    new regime, so the regimes are ``r[0:c1], r[c1:c2], ..., r[ck:n]``.
    """

    change_points: tuple[int, ...]
    n: int

    def __post_init__(self) -> None:
        cps = tuple(int(c) for c in self.change_points)
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ValueError(f"change points must be strictly increasing: {cps}")
        if cps and (cps[0] <= 0 or cps[-1] >= self.n):
            raise ValueError(f"change points must lie strictly inside (0, {self.n})")
        object.__setattr__(self, "change_points", cps)

    @property
    def n_regimes(self) -> int:
        return len(self.change_points) + 1

    def regimes(self) -> list[tuple[int, int]]:
        """Half-open ``(start, end)`` bounds of each regime."""
        edges = (0, *self.change_points, self.n)
        return list(zip(edges[:-1], edges[1:]))

    def lengths(self) -> list[int]:
        return [e - s for s, e in self.regimes()]

    def merge_short(self, minimum: int) -> tuple["Segmentation", list[int]]:
        """Merge regimes shorter than ``minimum`` into their shorter neighbour.

        The shortest offending regime is merged first, repeatedly, until every
        regime has at least ``minimum`` observations or only one remains.
        Returns the new segmentation and the removed change points in removal
        order.
        """
        cps = list(self.change_points)
        removed: list[int] = []
        while cps:
            edges = [0, *cps, self.n]
            lengths = [b - a for a, b in zip(edges[:-1], edges[1:])]
            short = [i for i, ln in enumerate(lengths) if ln < minimum]
            if not short:
                break
            # shortest first, earliest on ties
            i = min(short, key=lambda j: (lengths[j], j))
            if i == 0:
                drop = 0
            elif i == len(lengths) - 1:
                drop = i - 1
            else:
                # boundary i-1 separates regime i from its left neighbour
                drop = i - 1 if lengths[i - 1] <= lengths[i + 1] else i
            removed.append(cps.pop(drop))
        return Segmentation(tuple(cps), self.n), removed

    def to_dict(self) -> dict:
        return {"n": self.n, "change_points": list(self.change_points)}


def binary_segment(
    n: int,
    min_segment: int,
    find_split: Callable[[int, int], Optional[int]],
) -> Segmentation:
    """Recursive binary segmentation over ``range(n)``.

    ``find_split(start, end)`` tests the half-open block ``[start, end)`` and
    returns an absolute split index or ``None``. Blocks shorter than
    ``2 * min_segment`` are never tested.
    """
    found: list[int] = []
    stack = [(0, n)]
    while stack:
        start, end = stack.pop()
        if end - start < 2 * min_segment:
            continue
        split = find_split(start, end)
        if split is None:
            continue
        found.append(split)
        stack.append((split, end))
        stack.append((start, split))
    return Segmentation(tuple(sorted(found)), n)
