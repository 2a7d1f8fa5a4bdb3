"""Regime-switching heavy-tailed series and detector Monte Carlo experiments."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping, Optional

import numpy as np

from volbreak._rng import replicate_rng, student_t
from volbreak.errors import InvalidSpec, VolbreakError
from volbreak.pipeline import PipelineConfig, detect
from volbreak.series import ReturnSeries

__all__ = [
    "RegimeSpec",
    "DetectorSummary",
    "ExperimentReport",
    "PAPER_DESIGN",
    "gen_student_t_regimes",
    "draw_regimes",
    "run_experiment",
]


@dataclass(frozen=True)
class RegimeSpec:
    """Piecewise-constant variance design.

    ``segments`` holds ``(length, variance)`` pairs. Within a segment draws
    are iid standard Student-t(``nu``) rescaled to the requested variance,
    or Gaussian when ``innovations="gaussian"``.
    """

    segments: tuple[tuple[int, float], ...]
    nu: float = 3.0
    seed: int = 0
    innovations: Literal["student_t", "gaussian"] = "student_t"

    def __post_init__(self) -> None:
        segs = tuple((int(n), float(v)) for n, v in self.segments)
        if not segs:
            raise InvalidSpec("at least one segment is required")
        for n, v in segs:
            if n < 1:
                raise InvalidSpec(f"segment length must be positive, got {n}")
            if not (math.isfinite(v) and v > 0):
                raise InvalidSpec(f"segment variance must be positive, got {v}")
        if self.innovations == "student_t" and not self.nu > 2:
            raise InvalidSpec(f"nu must exceed 2 for finite variance, got {self.nu}")
        if self.innovations not in ("student_t", "gaussian"):
            raise InvalidSpec(f"unknown innovations {self.innovations!r}")
        if self.seed < 0:
            raise InvalidSpec("seed must be non-negative")
        object.__setattr__(self, "segments", segs)

    @property
    def length(self) -> int:
        return sum(n for n, _ in self.segments)

    @property
    def true_change_points(self) -> tuple[int, ...]:
        return tuple(np.cumsum([n for n, _ in self.segments])[:-1].tolist())

    def scales(self) -> list[float]:
        """Multipliers applied to the unit draws of each segment."""
        if self.innovations == "gaussian":
            return [math.sqrt(v) for _, v in self.segments]
        return [math.sqrt(v * (self.nu - 2) / self.nu) for _, v in self.segments]

    @classmethod
    def from_dict(cls, d: Mapping) -> "RegimeSpec":
        try:
            segments = tuple((s["length"], s["variance"]) for s in d["segments"])
            return cls(
                segments,
                nu=float(d.get("nu", 3.0)),
                seed=int(d.get("seed", 0)),
                innovations=d.get("innovations", "student_t"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidSpec(f"malformed regime spec: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "segments": [{"length": n, "variance": v} for n, v in self.segments],
            "nu": self.nu,
            "seed": self.seed,
            "innovations": self.innovations,
        }


# 600 observations, t(3), variances 3 / 12 / 3, changes at 200 and 400
PAPER_DESIGN = RegimeSpec(((200, 3.0), (200, 12.0), (200, 3.0)), nu=3.0)


def draw_regimes(spec: RegimeSpec, rng: np.random.Generator) -> np.ndarray:
    parts = []
    for (n, _), scale in zip(spec.segments, spec.scales()):
        if spec.innovations == "gaussian":
            parts.append(scale * rng.standard_normal(n))
        else:
            parts.append(scale * student_t(rng, spec.nu, n))
    return np.concatenate(parts)


def gen_student_t_regimes(spec: RegimeSpec) -> ReturnSeries:
    """One realisation of ``spec``, deterministic in ``spec.seed``."""
    return ReturnSeries(draw_regimes(spec, np.random.default_rng(spec.seed)))


@dataclass
class DetectorSummary:
    mean_cp_count: Optional[float]
    mean_regime_count: Optional[float]
    any_change_rate: Optional[float]
    cp_location_histogram: dict[int, int]
    regime_count_distribution: dict[int, int]
    failures: int = 0

    def to_dict(self) -> dict:
        return {
            "mean_cp_count": self.mean_cp_count,
            "mean_regime_count": self.mean_regime_count,
            "any_change_rate": self.any_change_rate,
            "cp_location_histogram": {str(k): v for k, v in self.cp_location_histogram.items()},
            "regime_count_distribution": {
                str(k): v for k, v in self.regime_count_distribution.items()
            },
            "failures": self.failures,
        }

    def top_locations(self, count: int) -> list[int]:
        ranked = sorted(self.cp_location_histogram.items(), key=lambda kv: (-kv[1], kv[0]))
        return [k for k, _ in ranked[:count]]


@dataclass
class ExperimentReport:
    spec: RegimeSpec
    replications: int
    master_seed: int
    detectors: dict[str, DetectorSummary] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "replications": self.replications,
            "master_seed": self.master_seed,
            "detectors": {name: s.to_dict() for name, s in self.detectors.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def histogram_csv(self) -> str:
        lines = ["detector,index,count"]
        for name, s in self.detectors.items():
            lines += [f"{name},{k},{v}" for k, v in s.cp_location_histogram.items()]
        return "\n".join(lines) + "\n"


def run_experiment(
    spec: RegimeSpec,
    replications: int,
    detectors: Iterable[str] = ("icss", "npcpm"),
    master_seed: int = 0,
    config: PipelineConfig = PipelineConfig(),
) -> ExperimentReport:
    """Apply each detector to ``replications`` independent draws of ``spec``.

    Replicate ``i`` uses a stream derived from ``(master_seed, i)`` and is
    shared by all detectors. A replicate on which a detector raises is
    counted in ``failures`` and excluded from that detector's averages.
    """
    if replications < 1:
        raise InvalidSpec("replications must be at least 1")
    names = list(dict.fromkeys(detectors))
    for name in names:
        if name not in ("icss", "npcpm"):
            raise InvalidSpec(f"unknown detector {name!r}")
    counts: dict[str, list[int]] = {name: [] for name in names}
    locations: dict[str, Counter] = {name: Counter() for name in names}
    failures = Counter()

    for i in range(replications):
        x = draw_regimes(spec, replicate_rng(master_seed, i))
        for name in names:
            try:
                seg = detect(x, name, config)
            except VolbreakError:
                failures[name] += 1
                continue
            counts[name].append(len(seg.change_points))
            locations[name].update(seg.change_points)

    report = ExperimentReport(spec, replications, master_seed)
    for name in names:
        c = np.array(counts[name], dtype=float)
        done = len(c)
        report.detectors[name] = DetectorSummary(
            mean_cp_count=float(c.mean()) if done else None,
            mean_regime_count=float(c.mean() + 1) if done else None,
            any_change_rate=float(np.mean(c > 0)) if done else None,
            cp_location_histogram=dict(sorted(locations[name].items())),
            regime_count_distribution=dict(sorted(Counter(int(k) + 1 for k in c).items())),
            failures=failures[name],
        )
    return report
