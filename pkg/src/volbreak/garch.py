"""GARCH(1,1) filtering, likelihoods and regime-switching maximum likelihood.

Coefficient roles follow the convention

    h_t = omega + alpha * h_{t-1} + beta * r_{t-1}**2

so ``alpha`` multiplies the lagged conditional variance and ``beta`` the
lagged squared return. ``h_t`` is the conditional variance: ``r_t =
sqrt(h_t) * eps_t`` with unit-variance innovations (Gaussian or
standardised Student-t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import optimize, signal
from scipy.special import gammaln

from volbreak.errors import (
    InvalidNu,
    InvalidParams,
    LengthMismatch,
    NonPositiveVariance,
    RegimeTooShort,
    SeriesTooShort,
)
from volbreak.segmentation import Segmentation

__all__ = [
    "GarchParams",
    "RegimeParams",
    "FitResult",
    "garch_filter",
    "gaussian_loglik",
    "student_t_loglik",
    "fit_garch",
    "fit_omega_garch",
    "fit_abo_garch",
    "information_criteria",
    "simulate_garch",
    "MIN_FIT_LENGTH",
]

Dist = Literal["gaussian", "student_t"]
DISTRIBUTIONS: tuple[str, ...] = ("gaussian", "student_t")

MIN_FIT_LENGTH = 30

# (alpha, beta) starting points; omega is then set to match the sample variance
_START_AB = ((0.85, 0.10), (0.60, 0.25), (0.20, 0.10))
_START_NU = 8.0
_BAD = 1e100

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GarchParams:
    omega: float
    alpha: float
    beta: float
    nu: Optional[float] = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.omega) and self.omega > 0):
            raise InvalidParams(f"omega must be positive, got {self.omega}")
        if not (self.alpha >= 0 and self.beta >= 0):
            raise InvalidParams("alpha and beta must be non-negative")
        if not self.alpha + self.beta < 1:
            raise InvalidParams(f"alpha + beta must be < 1, got {self.alpha + self.beta}")
        if self.nu is not None and not self.nu > 2:
            raise InvalidNu(f"nu must exceed 2, got {self.nu}")

    @property
    def persistence(self) -> float:
        return self.alpha + self.beta

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.alpha - self.beta)


@dataclass(frozen=True)
class RegimeParams:
    per_regime: tuple[GarchParams, ...]
    sharing: Literal["omega_only", "all_free"]

    def __post_init__(self) -> None:
        if self.sharing == "omega_only":
            first = self.per_regime[0]
            for p in self.per_regime[1:]:
                if (p.alpha, p.beta, p.nu) != (first.alpha, first.beta, first.nu):
                    raise InvalidParams("omega_only regimes must share alpha, beta and nu")
        elif self.sharing != "all_free":
            raise ValueError(f"unknown sharing {self.sharing!r}")


@dataclass
class FitResult:
    model: str
    distribution: str
    params: RegimeParams
    segmentation: Segmentation
    variance_path: NDArray[np.float64]
    log_lik: float
    k: int
    n: int
    aic: float
    bic: float
    converged: bool
    n_eval: int
    regime_fits: list["FitResult"] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        regimes = []
        for (start, end), p in zip(self.segmentation.regimes(), self.params.per_regime):
            row = {"start": start, "end": end, "omega": p.omega, "alpha": p.alpha, "beta": p.beta}
            if p.nu is not None:
                row["nu"] = p.nu
            regimes.append(row)
        return {
            "model": self.model,
            "distribution": self.distribution,
            "regimes": regimes,
            "log_lik": self.log_lik,
            "k": self.k,
            "n": self.n,
            "aic": self.aic,
            "bic": self.bic,
            "converged": self.converged,
        }


def information_criteria(log_lik: float, k: int, n: int) -> tuple[float, float]:
    """``(AIC, BIC) = (2k - 2L, k ln n - 2L)``; lower is better."""
    if k < 1 or n < 1:
        raise ValueError("k and n must be positive")
    return 2.0 * k - 2.0 * log_lik, k * math.log(n) - 2.0 * log_lik


# ---------------------------------------------------------------------------
# Filtering and likelihoods
# ---------------------------------------------------------------------------


def _filter(r2: NDArray, omega_t, alpha: float, beta: float, h1: float) -> NDArray:
    # h[t] - alpha * h[t-1] = omega_t + beta * r2[t-1] is a first-order IIR filter
    drive = omega_t[1:] if np.ndim(omega_t) else np.full(len(r2) - 1, omega_t)
    drive = drive + beta * r2[:-1]
    h = np.empty(len(r2))
    h[0] = h1
    if len(r2) > 1:
        h[1:], _ = signal.lfilter([1.0], [1.0, -alpha], drive, zi=[alpha * h1])
    return h


def garch_filter(r: ArrayLike, p: GarchParams, h1: float) -> NDArray[np.float64]:
    """Conditional variance path with ``h[0] = h1``."""
    x = np.asarray(r, dtype=np.float64)
    if not (math.isfinite(h1) and h1 > 0):
        raise InvalidParams(f"h1 must be positive, got {h1}")
    return _filter(x * x, p.omega, p.alpha, p.beta, h1)


def _check_path(r: ArrayLike, h: ArrayLike) -> tuple[NDArray, NDArray]:
    x = np.asarray(r, dtype=np.float64)
    hh = np.asarray(h, dtype=np.float64)
    if x.shape != hh.shape:
        raise LengthMismatch(f"returns have length {len(x)}, variances {len(hh)}")
    if np.any(~(hh > 0)):
        raise NonPositiveVariance("conditional variances must be positive")
    return x, hh


def _gauss_ll(x: NDArray, h: NDArray) -> float:
    return float(-0.5 * np.sum(_LOG_2PI + np.log(h) + x * x / h))


def _log_gamma_half_ratio(a: float) -> float:
    """``ln G(a + 1/2) - ln G(a)`` without cancellation for large ``a``."""
    if a < 1000.0:
        return float(gammaln(a + 0.5) - gammaln(a))
    # asymptotic series; the next term is O(a**-5)
    return 0.5 * math.log(a) - 1.0 / (8.0 * a) + 1.0 / (192.0 * a**3)


def _t_ll(x: NDArray, h: NDArray, nu: float) -> float:
    const = _log_gamma_half_ratio(nu / 2) - 0.5 * math.log(math.pi * (nu - 2))
    body = np.log(h) + (nu + 1) * np.log1p(x * x / ((nu - 2) * h))
    return float(len(x) * const - 0.5 * np.sum(body))


def gaussian_loglik(r: ArrayLike, h: ArrayLike) -> float:
    x, hh = _check_path(r, h)
    return _gauss_ll(x, hh)


def student_t_loglik(r: ArrayLike, h: ArrayLike, nu: float) -> float:
    """Log-likelihood under unit-variance (standardised) Student-t innovations."""
    if not nu > 2:
        raise InvalidNu(f"nu must exceed 2, got {nu}")
    x, hh = _check_path(r, h)
    return _t_ll(x, hh, nu)


# ---------------------------------------------------------------------------
# Parameter transforms
# ---------------------------------------------------------------------------


def _ab_from_free(a: float, b: float) -> tuple[float, float]:
    # softmax with a fixed zero logit for the "remainder" 1 - alpha - beta;
    # the upper clip keeps alpha + beta representably below 1
    a, b = min(a, 30.0), min(b, 30.0)
    m = max(a, b, 0.0)
    ea, eb, e0 = math.exp(a - m), math.exp(b - m), math.exp(-m)
    s = ea + eb + e0
    return ea / s, eb / s


def _ab_to_free(alpha: float, beta: float) -> tuple[float, float]:
    alpha = max(alpha, 1e-8)
    beta = max(beta, 1e-8)
    rest = max(1.0 - alpha - beta, 1e-8)
    return math.log(alpha / rest), math.log(beta / rest)


def _nu_from_free(c: float) -> float:
    return 2.0 + math.exp(min(max(c, -30.0), 30.0))


def _nu_to_free(nu: float) -> float:
    return math.log(max(nu - 2.0, 1e-8))


# ---------------------------------------------------------------------------
# Optimisation
# ---------------------------------------------------------------------------


@dataclass
class _Search:
    x: NDArray
    fun: float
    converged: bool
    n_eval: int


def _minimise(objective, starts: Sequence[NDArray]) -> _Search:
    """Nelder-Mead from each start, one restart from the best, then keep the best."""
    dim = len(starts[0])
    opts = {
        "xatol": 1e-8,
        "fatol": 1e-10,
        "maxiter": 4000 * dim,
        "maxfev": 4000 * dim,
        "adaptive": dim > 4,
    }
    n_eval = 0
    best: Optional[optimize.OptimizeResult] = None
    start_fun = min(objective(np.asarray(s, dtype=float)) for s in starts)
    n_eval += len(starts)
    any_success = False
    for x0 in starts:
        res = optimize.minimize(objective, np.asarray(x0, dtype=float), method="Nelder-Mead", options=opts)
        n_eval += res.nfev
        any_success |= bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    # a fresh simplex around the incumbent guards against premature collapse
    res = optimize.minimize(objective, best.x, method="Nelder-Mead", options=opts)
    n_eval += res.nfev
    if res.fun <= best.fun:
        best = res
    any_success |= bool(res.success)
    # quasi-Newton polish; accepted only when it improves
    pol = optimize.minimize(objective, best.x, method="L-BFGS-B")
    n_eval += pol.nfev
    if np.isfinite(pol.fun) and pol.fun < best.fun:
        best = pol
    converged = bool(any_success and best.fun < _BAD and best.fun <= start_fun)
    return _Search(np.asarray(best.x), float(best.fun), converged, n_eval)


def _sample_var(x: NDArray) -> float:
    v = float(np.var(x, ddof=1)) if len(x) > 1 else 0.0
    if v <= 0:
        v = float(np.mean(x * x))
    if v <= 0:
        raise NonPositiveVariance("series has zero variance; GARCH likelihood is degenerate")
    return v


def _ll(x: NDArray, h: NDArray, dist: str, nu: Optional[float]) -> float:
    if dist == "gaussian":
        return _gauss_ll(x, h)
    return _t_ll(x, h, nu)


def _check_dist(dist: str) -> None:
    if dist not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {dist!r}; expected one of {DISTRIBUTIONS}")


def _check_regimes(seg: Segmentation, n: int, minimum: int) -> None:
    if seg.n != n:
        raise LengthMismatch(f"segmentation covers {seg.n} observations, series has {n}")
    for i, (s, e) in enumerate(seg.regimes()):
        if e - s < minimum:
            raise RegimeTooShort(i, s, e, minimum)


def fit_garch(
    r: ArrayLike,
    dist: Dist = "gaussian",
    h1: Optional[float] = None,
    starts: Sequence[GarchParams] = (),
) -> FitResult:
    """Maximum-likelihood GARCH(1,1) for a single regime.

    The search runs in an unconstrained space: ``omega = exp(a)``,
    ``(alpha, beta)`` from a three-way softmax so that both are positive
    with ``alpha + beta < 1``, and ``nu = 2 + exp(c)``.

    Parameters
    ----------
    r : array_like
        Returns.
    dist : {"gaussian", "student_t"}
        Innovation distribution. ``nu`` is estimated for Student-t.
    h1 : float, optional
        Initial conditional variance; defaults to the sample variance.
    starts : sequence of GarchParams
        Extra starting points tried alongside the fixed ones.
    """
    _check_dist(dist)
    x = np.asarray(r, dtype=np.float64)
    n = len(x)
    if n < MIN_FIT_LENGTH:
        raise SeriesTooShort(f"GARCH fitting needs at least {MIN_FIT_LENGTH} observations, got {n}")
    var = _sample_var(x)
    h1 = var if h1 is None else float(h1)
    r2 = x * x
    student = dist == "student_t"

    def unpack(theta):
        omega = math.exp(min(theta[0], 700.0))
        alpha, beta = _ab_from_free(theta[1], theta[2])
        nu = _nu_from_free(theta[3]) if student else None
        return omega, alpha, beta, nu

    def objective(theta):
        omega, alpha, beta, nu = unpack(theta)
        h = _filter(r2, omega, alpha, beta, h1)
        if not np.all(np.isfinite(h)) or np.any(h <= 0):
            return _BAD
        val = -_ll(x, h, dist, nu)
        return val if math.isfinite(val) else _BAD

    def to_theta(omega, alpha, beta, nu):
        theta = [math.log(omega), *_ab_to_free(alpha, beta)]
        if student:
            theta.append(_nu_to_free(nu if nu is not None else _START_NU))
        return np.array(theta)

    start_list = [to_theta(var * (1 - a - b), a, b, _START_NU) for a, b in _START_AB]
    start_list += [to_theta(p.omega, p.alpha, p.beta, p.nu) for p in starts]
    search = _minimise(objective, start_list)

    omega, alpha, beta, nu = unpack(search.x)
    params = GarchParams(omega, alpha, beta, nu)
    h = _filter(r2, omega, alpha, beta, h1)
    log_lik = _ll(x, h, dist, nu)
    k = 4 if student else 3
    aic, bic = information_criteria(log_lik, k, n)
    return FitResult(
        model="garch",
        distribution=dist,
        params=RegimeParams((params,), "all_free"),
        segmentation=Segmentation((), n),
        variance_path=h,
        log_lik=log_lik,
        k=k,
        n=n,
        aic=aic,
        bic=bic,
        converged=search.converged,
        n_eval=search.n_eval,
    )


def fit_omega_garch(
    r: ArrayLike,
    seg: Segmentation,
    dist: Dist = "gaussian",
    warm_start: Optional[FitResult] = None,
    min_length: int = MIN_FIT_LENGTH,
) -> FitResult:
    """GARCH(1,1) whose intercept switches at each change point.

    ``alpha``, ``beta`` (and ``nu``) are shared by all regimes and one
    variance recursion runs across the whole series without resetting at
    regime boundaries. ``warm_start`` (typically the single-regime fit) is
    added as a starting point, which keeps the nested likelihood ordering.
    """
    _check_dist(dist)
    x = np.asarray(r, dtype=np.float64)
    n = len(x)
    if n < MIN_FIT_LENGTH:
        raise SeriesTooShort(f"GARCH fitting needs at least {MIN_FIT_LENGTH} observations, got {n}")
    _check_regimes(seg, n, min_length)
    if warm_start is None and seg.change_points:
        warm_start = fit_garch(x, dist)
    if not seg.change_points:
        base = fit_garch(x, dist, starts=_plain_starts(warm_start))
        base.model = "omega_garch"
        base.params = RegimeParams(base.params.per_regime, "omega_only")
        return base

    bounds = seg.regimes()
    n_reg = len(bounds)
    regime_id = np.repeat(np.arange(n_reg), [e - s for s, e in bounds])
    regime_var = [_sample_var(x[s:e]) for s, e in bounds]
    h1 = _sample_var(x)
    r2 = x * x
    student = dist == "student_t"

    def unpack(theta):
        omegas = np.exp(np.minimum(theta[:n_reg], 700.0))
        alpha, beta = _ab_from_free(theta[n_reg], theta[n_reg + 1])
        nu = _nu_from_free(theta[n_reg + 2]) if student else None
        return omegas, alpha, beta, nu

    def objective(theta):
        omegas, alpha, beta, nu = unpack(theta)
        h = _filter(r2, omegas[regime_id], alpha, beta, h1)
        if not np.all(np.isfinite(h)) or np.any(h <= 0):
            return _BAD
        val = -_ll(x, h, dist, nu)
        return val if math.isfinite(val) else _BAD

    def to_theta(omegas, alpha, beta, nu):
        theta = [*np.log(omegas), *_ab_to_free(alpha, beta)]
        if student:
            theta.append(_nu_to_free(nu if nu is not None else _START_NU))
        return np.array(theta)

    starts = [to_theta([v * (1 - a - b) for v in regime_var], a, b, _START_NU) for a, b in _START_AB]
    if warm_start is not None:
        p = warm_start.params.per_regime[0]
        starts.append(to_theta([p.omega] * n_reg, p.alpha, p.beta, p.nu))
    search = _minimise(objective, starts)

    omegas, alpha, beta, nu = unpack(search.x)
    per_regime = tuple(GarchParams(float(w), alpha, beta, nu) for w in omegas)
    h = _filter(r2, omegas[regime_id], alpha, beta, h1)
    log_lik = _ll(x, h, dist, nu)
    k = n_reg + 2 + (1 if student else 0)
    aic, bic = information_criteria(log_lik, k, n)
    return FitResult(
        model="omega_garch",
        distribution=dist,
        params=RegimeParams(per_regime, "omega_only"),
        segmentation=seg,
        variance_path=h,
        log_lik=log_lik,
        k=k,
        n=n,
        aic=aic,
        bic=bic,
        converged=search.converged,
        n_eval=search.n_eval,
    )


def _plain_starts(fit: Optional[FitResult]) -> list[GarchParams]:
    return [] if fit is None else [fit.params.per_regime[0]]


def fit_abo_garch(
    r: ArrayLike,
    seg: Segmentation,
    dist: Dist = "gaussian",
    warm_start: Optional[FitResult] = None,
    min_length: int = MIN_FIT_LENGTH,
) -> FitResult:
    """Independent GARCH(1,1) in every regime (all of omega, alpha, beta free).

    Each regime's recursion starts from that regime's sample variance. If
    ``warm_start`` is given, its parameters for the matching regime (or its
    single parameter set, for a one-regime fit) are added as a starting
    point.
    """
    _check_dist(dist)
    x = np.asarray(r, dtype=np.float64)
    n = len(x)
    if n < MIN_FIT_LENGTH:
        raise SeriesTooShort(f"GARCH fitting needs at least {MIN_FIT_LENGTH} observations, got {n}")
    _check_regimes(seg, n, min_length)
    bounds = seg.regimes()
    warm: list[Optional[GarchParams]] = [None] * len(bounds)
    if warm_start is not None:
        given = warm_start.params.per_regime
        if len(given) == 1:
            warm = [given[0]] * len(bounds)
        elif len(given) == len(bounds):
            warm = list(given)

    fits = []
    for (s, e), w in zip(bounds, warm):
        fits.append(fit_garch(x[s:e], dist, starts=[] if w is None else [w]))

    log_lik = float(sum(f.log_lik for f in fits))
    k = sum(f.k for f in fits)
    aic, bic = information_criteria(log_lik, k, n)
    return FitResult(
        model="abo_garch",
        distribution=dist,
        params=RegimeParams(tuple(f.params.per_regime[0] for f in fits), "all_free"),
        segmentation=seg,
        variance_path=np.concatenate([f.variance_path for f in fits]),
        log_lik=log_lik,
        k=k,
        n=n,
        aic=aic,
        bic=bic,
        converged=all(f.converged for f in fits),
        n_eval=sum(f.n_eval for f in fits),
        regime_fits=fits,
    )


def simulate_garch(
    n: int,
    omega: float | ArrayLike,
    alpha: float,
    beta: float,
    rng: np.random.Generator,
    nu: Optional[float] = None,
    burn: int = 500,
) -> NDArray[np.float64]:
    """Simulate ``n`` returns from a GARCH(1,1) process.

    ``omega`` may be an array of length ``n`` giving a time-varying
    intercept; the burn-in then uses its first value. Innovations are
    standard Gaussian, or standardised Student-t when ``nu`` is given.
    """
    omega_t = np.broadcast_to(np.asarray(omega, dtype=np.float64), (n,))
    omega_all = np.concatenate([np.full(burn, omega_t[0]), omega_t])
    total = n + burn
    if nu is None:
        eps = rng.standard_normal(total)
    else:
        z = rng.standard_normal(total)
        v = rng.chisquare(nu, total)
        eps = z / np.sqrt(v / nu) * math.sqrt((nu - 2) / nu)
    out = np.empty(total)
    h = omega_all[0] / (1 - alpha - beta)
    prev_r2 = h
    for t in range(total):
        h = omega_all[t] + alpha * h + beta * prev_r2
        out[t] = math.sqrt(h) * eps[t]
        prev_r2 = out[t] * out[t]
    return out[burn:]
