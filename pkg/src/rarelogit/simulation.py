"""Synthetic data generators, intercept calibration, and the replication harness.

Two experiment designs are supported: a conditional-Gaussian mixture
(labels first, then one Gaussian covariate per class, whose induced
logistic coefficients follow the discriminant-analysis closed form) and a
marginal-logistic design (covariates first, then Bernoulli labels from the
logistic model).  The harness repeats either design over seeded
substreams, fits a list of estimators per replication, and aggregates
empirical mean squared errors.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import expit

from .estimators import EstimatorFamily, EstimatorKind, fit_estimator, realize_design
from .model import Coefficients, Dataset, RareLogitError, SolverSettings
from .sampling import SampleDesign, substream

__all__ = [
    "AllReplicationsFailedError",
    "CalibrationError",
    "ConditionalGaussianDesign",
    "EmseReport",
    "EstimatorEmse",
    "ExperimentConfig",
    "GaussianLaw",
    "MarginalLogisticDesign",
    "calibrate_intercept",
    "emse",
    "generate_conditional",
    "generate_marginal",
    "run_experiment",
]

MC_CALIBRATION_DRAWS = 10_000_000
ALPHA_BRACKET = (-50.0, 50.0)
QUAD_RANGE = 16.0


class CalibrationError(RareLogitError):
    """Intercept calibration failed to bracket or reach the target rate."""


class AllReplicationsFailedError(RareLogitError):
    """Every replication failed for some estimator; no eMSE is defined."""


@dataclass(frozen=True)
class GaussianLaw:
    """Independent Gaussian covariate components with given means and sds."""

    means: tuple[float, ...]
    sds: tuple[float, ...]

    def __post_init__(self) -> None:
        means = tuple(float(m) for m in self.means)
        sds = tuple(float(s) for s in self.sds)
        if len(means) != len(sds) or len(means) < 1:
            raise ValueError("means and sds must be equal-length, nonempty")
        if not all(math.isfinite(m) for m in means):
            raise ValueError("means must be finite")
        if not all(math.isfinite(s) and s > 0 for s in sds):
            raise ValueError("sds must be positive and finite")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sds", sds)

    @property
    def dim(self) -> int:
        return len(self.means)

    @classmethod
    def standard(cls, d: int = 1) -> "GaussianLaw":
        return cls(means=(0.0,) * d, sds=(1.0,) * d)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        draws = rng.standard_normal((n, self.dim))
        return draws * np.asarray(self.sds) + np.asarray(self.means)


def _discriminant_coefficients(
    mu1: float, mu0: float, sigma: float, target_rate: float
) -> Coefficients:
    """Logistic coefficients induced by the two-Gaussian mixture.

    With P(y=1) = rho and x | y ~ N(mu_y, sigma^2), Bayes' rule gives a
    logistic model with slope (mu1 - mu0)/sigma^2 and intercept
    log(rho/(1-rho)) - (mu1^2 - mu0^2)/(2 sigma^2).
    """
    beta = (mu1 - mu0) / sigma**2
    alpha = math.log(target_rate / (1.0 - target_rate)) - (mu1**2 - mu0**2) / (
        2.0 * sigma**2
    )
    return Coefficients(alpha=alpha, beta=np.array([beta]))


@dataclass(frozen=True)
class ConditionalGaussianDesign:
    """Labels ~ Bernoulli(target_rate); x | y ~ N(mu_y, sigma^2), one covariate."""

    mu1: float
    mu0: float
    sigma: float
    target_rate: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu1) and math.isfinite(self.mu0)):
            raise ValueError("means must be finite")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not (0.0 < self.target_rate < 1.0):
            raise ValueError("target_rate must be in (0, 1)")

    def true_coefficients(self) -> Coefficients:
        return _discriminant_coefficients(
            self.mu1, self.mu0, self.sigma, self.target_rate
        )


@dataclass(frozen=True)
class MarginalLogisticDesign:
    """x ~ law; y ~ Bernoulli(p(theta; x)) from the logistic model."""

    theta: Coefficients
    law: GaussianLaw

    def __post_init__(self) -> None:
        if self.theta.beta.shape[0] != self.law.dim:
            raise ValueError("theta and covariate law dimensions differ")


def generate_conditional(
    n: int,
    target_rate: float,
    mu1: float,
    mu0: float,
    sigma: float,
    rng: np.random.Generator,
) -> tuple[Dataset, Coefficients]:
    """Draw the conditional-Gaussian design and return its true coefficients."""
    design = ConditionalGaussianDesign(
        mu1=mu1, mu0=mu0, sigma=sigma, target_rate=target_rate
    )
    if n < 1:
        raise ValueError("n must be >= 1")
    y = (rng.random(n) < design.target_rate).astype(np.int64)
    mu = np.where(y == 1, design.mu1, design.mu0)
    x = mu + design.sigma * rng.standard_normal(n)
    return Dataset(x=x[:, None], y=y), design.true_coefficients()


def generate_marginal(
    n: int, theta_t: Coefficients, law: GaussianLaw, rng: np.random.Generator
) -> Dataset:
    """Draw covariates from the law, then labels from the logistic model."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if theta_t.beta.shape[0] != law.dim:
        raise ValueError("theta_t and covariate law dimensions differ")
    x = law.sample(n, rng)
    p = expit(theta_t.alpha + x @ theta_t.beta)
    y = (rng.random(n) < p).astype(np.int64)
    return Dataset(x=x, y=y)


def _quadrature_event_rate(alpha: float, beta: float, law: GaussianLaw) -> float:
    """E_x expit(alpha + beta x) for a one-dimensional Gaussian law."""
    mean, sd = law.means[0], law.sds[0]
    inv_sqrt2pi = 1.0 / math.sqrt(2.0 * math.pi)

    def integrand(t: float) -> float:
        return float(expit(alpha + beta * (mean + sd * t))) * inv_sqrt2pi * math.exp(
            -0.5 * t * t
        )

    hints = []
    if beta != 0.0:
        crossing = -(alpha + beta * mean) / (beta * sd)
        if abs(crossing) < QUAD_RANGE:
            hints = [crossing]
    value, _ = quad(
        integrand,
        -QUAD_RANGE,
        QUAD_RANGE,
        points=hints or None,
        limit=200,
        epsabs=0.0,
        epsrel=1e-11,
    )
    return value


def calibrate_intercept(
    beta: np.ndarray,
    law: GaussianLaw,
    target_rate: float,
    precision: float = 1e-8,
    method: str = "auto",
    rng: np.random.Generator | None = None,
) -> float:
    """Solve E_x[p(alpha, beta)] = target_rate for alpha by monotone bisection.

    The event rate is strictly increasing in alpha, so bisection over
    [-50, 50] converges; the expectation is computed by adaptive quadrature
    for one-dimensional Gaussian laws and otherwise by a fixed 10^7-draw
    Monte Carlo sample (drawn once from rng and reused, so the solution is
    exact for that sample's empirical law).  With an all-zero slope the
    closed form log(rho/(1-rho)) is returned directly.
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    if beta.shape != (law.dim,):
        raise ValueError("beta and covariate law dimensions differ")
    if not (0.0 < target_rate < 1.0):
        raise ValueError("target_rate must be in (0, 1)")
    if not precision > 0:
        raise ValueError("precision must be positive")
    if method not in ("auto", "quadrature", "mc"):
        raise ValueError(f"unknown method {method!r}")
    if np.all(beta == 0.0):
        return math.log(target_rate / (1.0 - target_rate))
    if method == "auto":
        method = "quadrature" if law.dim == 1 else "mc"

    if method == "quadrature":
        if law.dim != 1:
            raise ValueError("quadrature calibration supports d = 1 only")

        def event_rate(alpha: float) -> float:
            return _quadrature_event_rate(alpha, float(beta[0]), law)

    else:
        if rng is None:
            raise ValueError("Monte Carlo calibration requires an rng")
        proj = law.sample(MC_CALIBRATION_DRAWS, rng) @ beta

        def event_rate(alpha: float) -> float:
            return float(np.mean(expit(alpha + proj)))

    lo, hi = ALPHA_BRACKET
    f_lo = event_rate(lo)
    f_hi = event_rate(hi)
    if not (f_lo <= target_rate <= f_hi):
        raise CalibrationError(
            f"no bracket for rate {target_rate:g} with alpha in [{lo:g}, {hi:g}] "
            f"(rates {f_lo:.3e} .. {f_hi:.3e})"
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = event_rate(mid)
        if abs(f_mid - target_rate) <= precision:
            return mid
        if f_mid < target_rate:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(
        f"bisection did not reach precision {precision:g} for rate {target_rate:g}"
    )


def emse(
    estimates: list[Coefficients], theta_t: Coefficients
) -> tuple[float, np.ndarray]:
    """Empirical MSE: mean of ||theta_hat - theta_t||^2 plus componentwise means.

    The total is formed as the sum of the componentwise means, so the
    decomposition total = alpha-part + sum(beta-parts) is an exact identity.
    """
    if len(estimates) == 0:
        raise ValueError("need at least one estimate")
    target = theta_t.as_vector()
    errs = np.stack([est.as_vector() for est in estimates]) - target
    if errs.shape[1] != target.shape[0]:
        raise ValueError("estimate and target dimensions differ")
    per_component = np.mean(errs**2, axis=0)
    return float(per_component[0] + per_component[1:].sum()), per_component


@dataclass(frozen=True)
class EstimatorEmse:
    """Per-estimator slice of an experiment report."""

    kind: EstimatorKind
    emse_total: float
    emse_alpha: float
    emse_beta: tuple[float, ...]
    failed: int


@dataclass(frozen=True, eq=False)
class EmseReport:
    """Aggregated empirical MSEs for one experiment configuration."""

    entries: tuple[EstimatorEmse, ...]
    reps: int
    mean_n1: float
    theta_t: Coefficients

    def entry(self, kind: EstimatorKind) -> EstimatorEmse:
        for item in self.entries:
            if item.kind == kind:
                return item
        raise KeyError(f"no entry for {kind}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines one replicated experiment.

    The harness is a pure function of this object: replication s uses
    substream (base_seed, s) for the data and (base_seed, s, i) for the
    sampling design first needed by estimator i, and a design is shared by
    the weighted/bias-corrected variants of the same scheme and rate.
    """

    design: ConditionalGaussianDesign | MarginalLogisticDesign
    n: int
    reps: int
    estimators: tuple[EstimatorKind, ...]
    base_seed: int
    solver: SolverSettings = SolverSettings()

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        estimators = tuple(self.estimators)
        if not estimators:
            raise ValueError("need at least one estimator")
        if isinstance(self.design, ConditionalGaussianDesign):
            if not (0.0 < self.design.target_rate < 0.5):
                raise ValueError("target_rate must be in (0, 0.5)")
        object.__setattr__(self, "estimators", estimators)
        object.__setattr__(self, "base_seed", int(self.base_seed))

    def true_coefficients(self) -> Coefficients:
        if isinstance(self.design, ConditionalGaussianDesign):
            return self.design.true_coefficients()
        return self.design.theta


def _simulate(config: ExperimentConfig, s: int) -> Dataset:
    rng = substream(config.base_seed, s)
    if isinstance(config.design, ConditionalGaussianDesign):
        data, _ = generate_conditional(
            config.n,
            config.design.target_rate,
            config.design.mu1,
            config.design.mu0,
            config.design.sigma,
            rng,
        )
        return data
    return generate_marginal(config.n, config.design.theta, config.design.law, rng)


def _run_replication(
    config: ExperimentConfig, s: int
) -> tuple[int, list[np.ndarray | None]]:
    data = _simulate(config, s)
    designs: dict[tuple, SampleDesign] = {}
    fits: list[np.ndarray | None] = []
    for i, kind in enumerate(config.estimators):
        design = None
        if kind.tag is not EstimatorFamily.FULL:
            key = (kind.design_kind, kind.rate)
            if key not in designs:
                designs[key] = realize_design(
                    kind, data, substream(config.base_seed, s, i)
                )
            design = designs[key]
        try:
            fit = fit_estimator(kind, data, design, config.solver)
        except RareLogitError:
            fits.append(None)
        else:
            fits.append(fit.theta.as_vector())
    return data.n1, fits


def _worker(args: tuple[ExperimentConfig, int]) -> tuple[int, list[np.ndarray | None]]:
    return _run_replication(*args)


def run_experiment(config: ExperimentConfig, threads: int = 1) -> EmseReport:
    """Run the replicated experiment and aggregate empirical MSEs.

    Failed replications (separation, one-class subsamples, singular Newton
    systems) are excluded from an estimator's eMSE and counted in its
    failed field.  Replications are embarrassingly parallel; results are
    always reduced in replication order, so any threads value produces the
    same report bit for bit.
    """
    reps = range(1, config.reps + 1)
    if threads > 1:
        chunk = max(1, config.reps // (4 * threads))
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(_worker, ((config, s) for s in reps), chunksize=chunk)
            )
    else:
        results = [_run_replication(config, s) for s in reps]

    theta_t = config.true_coefficients()
    mean_n1 = float(np.mean([n1 for n1, _ in results]))
    entries = []
    for i, kind in enumerate(config.estimators):
        successes = [fits[i] for _, fits in results if fits[i] is not None]
        failed = config.reps - len(successes)
        if not successes:
            raise AllReplicationsFailedError(
                f"all {config.reps} replications failed for {kind.tag.value}"
            )
        total, comps = emse(
            [Coefficients.from_vector(v) for v in successes], theta_t
        )
        entries.append(
            EstimatorEmse(
                kind=kind,
                emse_total=total,
                emse_alpha=float(comps[0]),
                emse_beta=tuple(float(c) for c in comps[1:]),
                failed=failed,
            )
        )
    return EmseReport(
        entries=tuple(entries), reps=config.reps, mean_n1=mean_n1, theta_t=theta_t
    )
