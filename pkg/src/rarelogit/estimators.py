"""The five point estimators for rare-events logistic regression.

Besides the full-data MLE there are four subsample estimators, one
weighted and one bias-corrected variant per sampling scheme:

- under-sampled weighted: inverse-probability weights 1/pi_i on the
  selected rows;
- under-sampled unweighted: plain MLE on the selected rows, then the exact
  intercept shift +log(pi0);
- over-sampled weighted: weights tau_i / (1 + lambda_n y_i) on all rows;
- over-sampled unweighted: count weights tau_i, then the exact intercept
  shift -log(1 + lambda_n).

The corrections are applied after convergence, never inside the
iteration, so the weighted/bias-corrected pair computed from one design
is deterministic given that design.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import (
    Coefficients,
    Dataset,
    FitResult,
    RareLogitError,
    SolverSettings,
    fit_mle,
)
from .sampling import DesignKind, SampleDesign, oversample, undersample

__all__ = [
    "EstimatorFamily",
    "EstimatorKind",
    "NoControlsSelectedError",
    "fit_estimator",
    "full_mle",
    "over_bias_corrected",
    "over_weighted",
    "realize_design",
    "under_bias_corrected",
    "under_weighted",
]


class NoControlsSelectedError(RareLogitError):
    """An under-sampling draw selected no controls: the subsample MLE fails."""


class EstimatorFamily(enum.Enum):
    FULL = "full"
    UNDER_WEIGHTED = "under-w"
    UNDER_BIAS_CORRECTED = "under-bc"
    OVER_WEIGHTED = "over-w"
    OVER_BIAS_CORRECTED = "over-bc"


_UNDER = (EstimatorFamily.UNDER_WEIGHTED, EstimatorFamily.UNDER_BIAS_CORRECTED)
_OVER = (EstimatorFamily.OVER_WEIGHTED, EstimatorFamily.OVER_BIAS_CORRECTED)


@dataclass(frozen=True)
class EstimatorKind:
    """Estimator family tag plus its sampling rate (pi0 or lambda_n)."""

    tag: EstimatorFamily
    rate: float | None = None

    def __post_init__(self) -> None:
        if self.tag is EstimatorFamily.FULL:
            if self.rate is not None:
                raise ValueError("the full-data estimator takes no rate")
            return
        if self.rate is None:
            raise ValueError(f"{self.tag.value} requires a sampling rate")
        rate = float(self.rate)
        if self.tag in _UNDER and not (0.0 < rate <= 1.0):
            raise ValueError(f"pi0 must be in (0, 1], got {rate}")
        if self.tag in _OVER and not rate >= 0.0:
            raise ValueError(f"lambda_n must be >= 0, got {rate}")
        object.__setattr__(self, "rate", rate)

    @property
    def design_kind(self) -> DesignKind | None:
        if self.tag in _UNDER:
            return DesignKind.UNDERSAMPLE
        if self.tag in _OVER:
            return DesignKind.OVERSAMPLE
        return None


def full_mle(data: Dataset, settings: SolverSettings = SolverSettings()) -> FitResult:
    """MLE on the full data (unit weights)."""
    return _fit(data, np.ones(data.n), settings)


def _fit(data: Dataset, weights: np.ndarray, settings: SolverSettings) -> FitResult:
    return fit_mle(
        data,
        weights,
        tol=settings.tol,
        max_iter=settings.max_iter,
        divergence_bound=settings.divergence_bound,
    )


def _selected(data: Dataset, design: SampleDesign) -> tuple[Dataset, np.ndarray]:
    if design.kind is not DesignKind.UNDERSAMPLE:
        raise ValueError(f"expected an under-sampling design, got {design.kind}")
    if design.n != data.n:
        raise ValueError("design and dataset lengths differ")
    mask = design.indicators == 1
    if not np.any(data.y[mask] == 0):
        raise NoControlsSelectedError(
            f"no controls selected at pi0={design.rate:g} (n0={data.n0})"
        )
    return Dataset(x=data.x[mask], y=data.y[mask]), mask


def under_weighted(
    data: Dataset, design: SampleDesign, settings: SolverSettings = SolverSettings()
) -> FitResult:
    """Fit on the selected rows with inverse-probability weights 1/pi_i."""
    sub, mask = _selected(data, design)
    return _fit(sub, 1.0 / design.inclusion_weight[mask], settings)


def under_bias_corrected(
    data: Dataset, design: SampleDesign, settings: SolverSettings = SolverSettings()
) -> FitResult:
    """Unweighted fit on the selected rows, then shift the intercept by log(pi0).

    Diagnostics (convergence, gradient norm, curvature) describe the
    underlying unweighted fit; only theta carries the correction.
    """
    sub, _ = _selected(data, design)
    fit = _fit(sub, np.ones(sub.n), settings)
    corrected = Coefficients(fit.theta.alpha + math.log(design.rate), fit.theta.beta)
    return dataclasses.replace(fit, theta=corrected)


def _check_over(data: Dataset, design: SampleDesign) -> None:
    if design.kind is not DesignKind.OVERSAMPLE:
        raise ValueError(f"expected an over-sampling design, got {design.kind}")
    if design.n != data.n:
        raise ValueError("design and dataset lengths differ")


def over_weighted(
    data: Dataset, design: SampleDesign, settings: SolverSettings = SolverSettings()
) -> FitResult:
    """Fit with weights tau_i / (1 + lambda_n y_i)."""
    _check_over(data, design)
    return _fit(data, design.indicators / design.inclusion_weight, settings)


def over_bias_corrected(
    data: Dataset, design: SampleDesign, settings: SolverSettings = SolverSettings()
) -> FitResult:
    """Fit with count weights tau_i, then shift the intercept by -log(1 + lambda_n).

    Count weights reproduce the objective of materializing the replicated
    rows without the memory cost.  Diagnostics describe the uncorrected fit.
    """
    _check_over(data, design)
    fit = _fit(data, design.indicators.astype(np.float64), settings)
    corrected = Coefficients(fit.theta.alpha - math.log1p(design.rate), fit.theta.beta)
    return dataclasses.replace(fit, theta=corrected)


def realize_design(
    kind: EstimatorKind, data: Dataset, rng: np.random.Generator
) -> SampleDesign | None:
    """Draw the sampling design an estimator kind calls for (None for full)."""
    if kind.design_kind is DesignKind.UNDERSAMPLE:
        return undersample(data, kind.rate, rng)
    if kind.design_kind is DesignKind.OVERSAMPLE:
        return oversample(data, kind.rate, rng)
    return None


def fit_estimator(
    kind: EstimatorKind,
    data: Dataset,
    design: SampleDesign | None = None,
    settings: SolverSettings = SolverSettings(),
) -> FitResult:
    """Dispatch to the estimator named by kind, using a realized design."""
    if kind.tag is EstimatorFamily.FULL:
        return full_mle(data, settings)
    if design is None:
        raise ValueError(f"{kind.tag.value} requires a realized design")
    if kind.tag is EstimatorFamily.UNDER_WEIGHTED:
        return under_weighted(data, design, settings)
    if kind.tag is EstimatorFamily.UNDER_BIAS_CORRECTED:
        return under_bias_corrected(data, design, settings)
    if kind.tag is EstimatorFamily.OVER_WEIGHTED:
        return over_weighted(data, design, settings)
    return over_bias_corrected(data, design, settings)
