"""Detector + GARCH pipelines and the model-comparison grid.

Two-stage: detect change points on the raw returns, then fit a
regime-switching GARCH(1,1) conditional on them. Three-stage: fit a plain
Gaussian GARCH(1,1) first, run the detector on the standardised residuals
``r_t / sqrt(h_t)``, then fit the regime model to the raw returns.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from numpy.typing import ArrayLike

from volbreak.errors import RegimeTooShort, StageError, VolbreakError
from volbreak.garch import (
    DISTRIBUTIONS,
    MIN_FIT_LENGTH,
    FitResult,
    fit_abo_garch,
    fit_garch,
    fit_omega_garch,
)
from volbreak.icss import IcssConfig, icss_segment
from volbreak.npcpm import DEFAULT_THRESHOLDS, ThresholdTable, npcpm_segment
from volbreak.segmentation import Segmentation

__all__ = [
    "PipelineConfig",
    "PipelineResult",
    "ComparisonRow",
    "ComparisonTable",
    "detect",
    "fit_model",
    "run_two_stage",
    "run_three_stage",
    "compare_models",
    "regime_volatility",
]

Detector = Literal["icss", "npcpm"]
ThreeStageDetector = Literal["gicss", "gnpcpm"]
Model = Literal["omega", "abo"]

MODEL_LABELS = {"plain": "GARCH", "omega": "omega-GARCH", "abo": "alpha-beta-omega-GARCH"}
DIST_LABELS = {"gaussian": "Gaussian", "student_t": "Student-t"}


@dataclass(frozen=True)
class PipelineConfig:
    icss: IcssConfig = IcssConfig()
    npcpm_table: ThresholdTable = DEFAULT_THRESHOLDS
    npcpm_min_segment: int = 10
    min_fit_length: int = MIN_FIT_LENGTH


@dataclass
class PipelineResult:
    detector: str
    model: str
    distribution: str
    segmentation: Segmentation
    fit: FitResult
    regime_vols: list[float]
    detected: Segmentation
    merged: list[int] = field(default_factory=list)
    stage1: Optional[FitResult] = None

    def to_dict(self) -> dict:
        out = {
            "detector": self.detector,
            "model": self.model,
            "distribution": self.distribution,
            "detected_change_points": list(self.detected.change_points),
            "merged_change_points": list(self.merged),
            "change_points": list(self.segmentation.change_points),
            "regime_vols": list(self.regime_vols),
            "fit": self.fit.to_dict(),
        }
        if self.stage1 is not None:
            out["stage1"] = self.stage1.to_dict()
        return out


def detect(r: ArrayLike, detector: str, config: PipelineConfig = PipelineConfig()) -> Segmentation:
    x = np.asarray(r, dtype=np.float64)
    if detector == "icss":
        return icss_segment(x, config.icss)
    if detector == "npcpm":
        return npcpm_segment(x, config.npcpm_table, config.npcpm_min_segment)
    raise ValueError(f"unknown detector {detector!r}")


def fit_model(
    r: ArrayLike,
    seg: Segmentation,
    model: str,
    dist: str,
    warm_start: Optional[FitResult] = None,
    min_length: int = MIN_FIT_LENGTH,
) -> FitResult:
    """Dispatch to the plain, omega-switching or fully switching fitter."""
    if model == "plain":
        return fit_garch(r, dist)
    if model == "omega":
        return fit_omega_garch(r, seg, dist, warm_start=warm_start, min_length=min_length)
    if model == "abo":
        return fit_abo_garch(r, seg, dist, warm_start=warm_start, min_length=min_length)
    raise ValueError(f"unknown model {model!r}")


def _staged(stage: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except VolbreakError as exc:
        raise StageError(stage, exc) from exc


def _finish(
    x: np.ndarray,
    detector: str,
    detected: Segmentation,
    model: str,
    dist: str,
    config: PipelineConfig,
    stage1: Optional[FitResult],
    warm_start: Optional[FitResult],
) -> PipelineResult:
    seg, merged = detected.merge_short(config.min_fit_length)
    if warm_start is None and model == "omega" and seg.change_points:
        warm_start = stage1 if stage1 is not None and stage1.distribution == dist else None
        if warm_start is None:
            warm_start = _staged("fit", fit_garch, x, dist)
    fit = _staged("fit", fit_model, x, seg, model, dist, warm_start, config.min_fit_length)
    vols = _staged("summary", regime_volatility, x, seg)
    return PipelineResult(detector, model, dist, seg, fit, vols, detected, merged, stage1)


def run_two_stage(
    r: ArrayLike,
    detector: Detector,
    model: Model,
    dist: str = "gaussian",
    config: PipelineConfig = PipelineConfig(),
    segmentation: Optional[Segmentation] = None,
    warm_start: Optional[FitResult] = None,
) -> PipelineResult:
    """Detect on raw returns, merge sub-minimal regimes, then fit.

    Supplying ``segmentation`` skips detection and uses it as the detector
    output.
    """
    x = np.asarray(r, dtype=np.float64)
    if detector not in ("icss", "npcpm"):
        raise ValueError(f"unknown two-stage detector {detector!r}")
    detected = segmentation if segmentation is not None else _staged("detect", detect, x, detector, config)
    return _finish(x, detector, detected, model, dist, config, None, warm_start)


def run_three_stage(
    r: ArrayLike,
    detector: ThreeStageDetector,
    model: Model,
    dist: str = "gaussian",
    config: PipelineConfig = PipelineConfig(),
    segmentation: Optional[Segmentation] = None,
    stage1: Optional[FitResult] = None,
    warm_start: Optional[FitResult] = None,
) -> PipelineResult:
    """GARCH, then detection on standardised residuals, then the regime fit on raw returns.

    The standardising fit is always the Gaussian single-regime GARCH,
    whatever ``dist`` the final model uses.
    """
    x = np.asarray(r, dtype=np.float64)
    base = {"gicss": "icss", "gnpcpm": "npcpm"}.get(detector)
    if base is None:
        raise ValueError(f"unknown three-stage detector {detector!r}")
    if stage1 is None:
        stage1 = _staged("stage1", fit_garch, x, "gaussian")
    if segmentation is None:
        y = standardized_residuals(x, stage1)
        segmentation = _staged("detect", detect, y, base, config)
    return _finish(x, detector, segmentation, model, dist, config, stage1, warm_start)


def standardized_residuals(r: ArrayLike, fit: FitResult) -> np.ndarray:
    return np.asarray(r, dtype=np.float64) / np.sqrt(fit.variance_path)


def regime_volatility(r: ArrayLike, seg: Segmentation) -> list[float]:
    """Sample standard deviation of the raw returns within each regime."""
    x = np.asarray(r, dtype=np.float64)
    out = []
    for i, (s, e) in enumerate(seg.regimes()):
        if e - s < 2:
            raise RegimeTooShort(i, s, e, 2)
        out.append(float(np.std(x[s:e], ddof=1)))
    return out


# ---------------------------------------------------------------------------
# Model comparison
# ---------------------------------------------------------------------------


@dataclass
class ComparisonRow:
    label: str
    model: str
    detector: str
    distribution: str
    log_lik: Optional[float] = None
    aic: Optional[float] = None
    bic: Optional[float] = None
    k: Optional[int] = None
    n_regimes: Optional[int] = None
    converged: Optional[bool] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "model": self.model,
            "detector": self.detector,
            "distribution": self.distribution,
            "log_lik": self.log_lik,
            "aic": self.aic,
            "bic": self.bic,
            "k": self.k,
            "n_regimes": self.n_regimes,
            "converged": self.converged,
            "error": self.error,
        }


@dataclass
class ComparisonTable:
    rows: list[ComparisonRow]
    n: int
    best_aic: Optional[int] = None
    best_bic: Optional[int] = None

    def __post_init__(self) -> None:
        ok = [i for i, row in enumerate(self.rows) if row.ok]
        if ok:
            # min() keeps the first of equal keys
            self.best_aic = min(ok, key=lambda i: self.rows[i].aic)
            self.best_bic = min(ok, key=lambda i: self.rows[i].bic)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "rows": [row.to_dict() for row in self.rows],
            "best_aic": self.best_aic,
            "best_bic": self.best_bic,
        }

    def to_text(self) -> str:
        width = max(len(row.label) for row in self.rows)
        head = f"{'model':<{width}}  {'L':>14}  {'AIC':>14}  {'BIC':>14}  {'k':>4}"
        lines = [head, "-" * len(head)]
        for i, row in enumerate(self.rows):
            if row.ok:
                marks = ("*" if i == self.best_aic else " ") + ("+" if i == self.best_bic else " ")
                lines.append(
                    f"{row.label:<{width}}  {row.log_lik:>14.3f}  {row.aic:>14.3f}  "
                    f"{row.bic:>14.3f}  {row.k:>4d}  {marks}"
                )
            else:
                lines.append(f"{row.label:<{width}}  failed: {row.error}")
        lines.append("* best AIC   + best BIC")
        return "\n".join(lines) + "\n"


def _label(model: str, detector: str, dist: str) -> str:
    parts = [MODEL_LABELS[model]]
    if detector != "none":
        parts.append(detector.upper())
    parts.append(DIST_LABELS[dist])
    return ", ".join(parts)


def compare_models(
    r: ArrayLike,
    config: PipelineConfig = PipelineConfig(),
    detectors: tuple[str, ...] = ("icss", "npcpm", "gicss", "gnpcpm"),
    models: tuple[str, ...] = ("omega", "abo"),
) -> ComparisonTable:
    """Fit the full grid of models and rank them by AIC and BIC.

    Rows come in a fixed order: plain GARCH per distribution, then for each
    model, detector and distribution. A failed row keeps its place with the
    error message in ``error``.
    """
    x = np.asarray(r, dtype=np.float64)
    rows: list[ComparisonRow] = []
    plain: dict[str, FitResult] = {}

    def record(row: ComparisonRow, fit: FitResult) -> None:
        row.log_lik, row.aic, row.bic, row.k = fit.log_lik, fit.aic, fit.bic, fit.k
        row.n_regimes, row.converged = len(fit.params.per_regime), fit.converged

    for dist in DISTRIBUTIONS:
        row = ComparisonRow(_label("plain", "none", dist), "plain", "none", dist)
        try:
            plain[dist] = fit_garch(x, dist)
            record(row, plain[dist])
        except VolbreakError as exc:
            row.error = str(exc)
        rows.append(row)

    # detection is shared by every model/distribution on the same detector
    segs: dict[str, Segmentation | Exception] = {}
    stage1 = plain.get("gaussian")
    for det in detectors:
        try:
            if det in ("icss", "npcpm"):
                segs[det] = detect(x, det, config)
            else:
                if stage1 is None:
                    raise StageError("stage1", VolbreakError("Gaussian GARCH fit failed"))
                segs[det] = detect(standardized_residuals(x, stage1), det[1:], config)
        except (VolbreakError, ValueError) as exc:
            segs[det] = exc

    for model in models:
        for det in detectors:
            for dist in DISTRIBUTIONS:
                row = ComparisonRow(_label(model, det, dist), model, det, dist)
                seg = segs[det]
                try:
                    if isinstance(seg, Exception):
                        raise StageError("detect", seg)
                    if det in ("icss", "npcpm"):
                        res = run_two_stage(x, det, model, dist, config, seg, warm_start=plain.get(dist))
                    else:
                        res = run_three_stage(
                            x, det, model, dist, config, seg, stage1, warm_start=plain.get(dist)
                        )
                    record(row, res.fit)
                except VolbreakError as exc:
                    row.error = str(exc)
                rows.append(row)

    return ComparisonTable(rows, len(x))

