"""Randomized sampling designs for imbalanced data.

Two plans are supported: Bernoulli under-sampling of controls (keep every
case, keep each control independently with probability pi0) and Poisson
over-sampling of cases (use each case 1 + Poisson(lambda_n) times, each
control once).  A realized plan is stored as per-row indicators plus the
inclusion weights they induce; indicators are kept for all n rows so the
design stays index-aligned with its parent dataset.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import Dataset

__all__ = [
    "DesignKind",
    "SampleDesign",
    "effective_sample_size",
    "oversample",
    "substream",
    "undersample",
]


def substream(base_seed: int, *path: int) -> np.random.Generator:
    """Independent reproducible random stream for (base_seed, *path).

    Streams are derived by keying a SeedSequence with the base seed as
    entropy and the path as spawn key, so distinct paths give statistically
    independent generators and the mapping is deterministic.
    """
    seq = np.random.SeedSequence(
        entropy=int(base_seed), spawn_key=tuple(int(p) for p in path)
    )
    return np.random.default_rng(seq)


class DesignKind(enum.Enum):
    UNDERSAMPLE = "undersample"
    OVERSAMPLE = "oversample"


@dataclass(frozen=True, eq=False)
class SampleDesign:
    """A realized sampling plan.

    indicators[i] is the number of times row i enters the subsample: 0/1
    selection flags for under-sampling, replication counts >= 1 for
    over-sampling.  inclusion_weight[i] is the conditional expectation of
    indicators[i] given the data (pi0 + (1 - pi0) y_i, or 1 + lambda_n y_i),
    the denominator of the inverse-probability weights.
    """

    kind: DesignKind
    rate: float
    indicators: np.ndarray
    inclusion_weight: np.ndarray

    def __post_init__(self) -> None:
        ind = np.asarray(self.indicators, dtype=np.int64)
        wgt = np.asarray(self.inclusion_weight, dtype=np.float64)
        if ind.ndim != 1 or wgt.shape != ind.shape:
            raise ValueError("indicators and inclusion_weight must be equal-length vectors")
        if self.kind is DesignKind.UNDERSAMPLE:
            if not (0.0 < self.rate <= 1.0):
                raise ValueError("under-sampling rate must be in (0, 1]")
            if not np.all((ind == 0) | (ind == 1)):
                raise ValueError("under-sampling indicators must be 0/1")
            if not np.all((wgt > 0.0) & (wgt <= 1.0)):
                raise ValueError("inclusion weights must be in (0, 1]")
        else:
            if not self.rate >= 0.0:
                raise ValueError("over-sampling rate must be >= 0")
            if not np.all(ind >= 1):
                raise ValueError("over-sampling counts must be >= 1")
            if not np.all(wgt >= 1.0):
                raise ValueError("inclusion weights must be >= 1")
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "indicators", ind)
        object.__setattr__(self, "inclusion_weight", wgt)

    @property
    def n(self) -> int:
        return self.indicators.shape[0]


def undersample(data: Dataset, pi0: float, rng: np.random.Generator) -> SampleDesign:
    """Keep all cases; keep each control independently with probability pi0.

    Indicators follow delta_i = y_i + (1 - y_i) 1{u_i <= pi0} with u_i iid
    uniform(0, 1) drawn from rng; inclusion weights are pi0 + (1 - pi0) y_i.
    pi0 = 0 is rejected: an all-case subsample admits no MLE.
    """
    pi0 = float(pi0)
    if not (0.0 < pi0 <= 1.0):
        raise ValueError(f"pi0 must be in (0, 1], got {pi0}")
    u = rng.random(data.n)
    ind = np.where(data.y == 1, 1, (u <= pi0).astype(np.int64))
    wgt = np.where(data.y == 1, 1.0, pi0)
    return SampleDesign(
        kind=DesignKind.UNDERSAMPLE, rate=pi0, indicators=ind, inclusion_weight=wgt
    )


def oversample(data: Dataset, lambda_n: float, rng: np.random.Generator) -> SampleDesign:
    """Use each case 1 + Poisson(lambda_n) times and each control once.

    Counts follow tau_i = y_i v_i + 1 with v_i iid Poisson(lambda_n) drawn
    from rng; inclusion weights are 1 + lambda_n y_i.
    """
    lambda_n = float(lambda_n)
    if not lambda_n >= 0.0:
        raise ValueError(f"lambda_n must be >= 0, got {lambda_n}")
    v = rng.poisson(lam=lambda_n, size=data.n)
    ind = data.y * v + 1
    wgt = np.where(data.y == 1, 1.0 + lambda_n, 1.0)
    return SampleDesign(
        kind=DesignKind.OVERSAMPLE, rate=lambda_n, indicators=ind, inclusion_weight=wgt
    )


def effective_sample_size(design: SampleDesign) -> int:
    """Realized number of data points used: the sum of the indicators."""
    return int(design.indicators.sum())
