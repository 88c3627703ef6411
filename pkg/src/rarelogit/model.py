"""Logistic-regression objective machinery and a damped Newton maximizer.

Everything here works on a weighted log-likelihood

    l(theta) = sum_i w_i * { y_i * z_i'theta - log(1 + exp(z_i'theta)) }

with nonnegative observation weights w_i and z_i = (1, x_i')'.  The solver
is plain Newton ascent with backtracking step-halving, which is globally
convergent on this concave objective whenever the maximizer exists.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
from scipy.special import expit

__all__ = [
    "AllOneClassError",
    "Coefficients",
    "Dataset",
    "FitResult",
    "RareLogitError",
    "SeparationError",
    "SingularHessianError",
    "SolverSettings",
    "fit_mle",
    "gradient",
    "hessian",
    "log_likelihood",
    "predict_prob",
]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 100
DEFAULT_DIVERGENCE_BOUND = 30.0
MAX_HALVINGS = 30
RIDGE_SCALE = 1e-10
# Slack for step acceptance: near the optimum the true Newton gain drops
# below the float resolution of the objective, so "does not decrease" must
# be read up to rounding noise or backtracking stalls before grad <= tol.
ACCEPT_SLACK_ULPS = 16.0


class RareLogitError(Exception):
    """Base class for statistical and numerical failures in this package.

    Contract violations (bad shapes, out-of-range parameters) raise plain
    ValueError instead; this hierarchy is reserved for data-dependent
    failures a caller may want to catch and count.
    """


class AllOneClassError(RareLogitError):
    """No weighted case or no weighted control: the MLE does not exist."""


class SeparationError(RareLogitError):
    """Iterates diverged past the bound: the data are (quasi-)separated."""


class SingularHessianError(RareLogitError):
    """The Newton system is unsolvable even after the ridge fallback."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Covariate rows plus binary labels.

    x has shape (n, d) and carries no intercept column; the augmented
    vector z = (1, x')' is formed internally by every operation.  y holds
    0/1 labels.  Case and control counts are derived at construction.
    """

    x: np.ndarray
    y: np.ndarray
    n1: int = field(init=False)
    n0: int = field(init=False)

    def __post_init__(self) -> None:
        x = np.ascontiguousarray(self.x, dtype=np.float64)
        if x.ndim != 2:
            raise ValueError(f"x must be 2-D (n, d), got ndim={x.ndim}")
        n, d = x.shape
        if n < 1 or d < 1:
            raise ValueError(f"need n >= 1 and d >= 1, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("covariates must be finite")
        y = np.asarray(self.y)
        if y.shape != (n,):
            raise ValueError(f"y must have shape ({n},), got {y.shape}")
        y = y.astype(np.int64)
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "n1", int(y.sum()))
        object.__setattr__(self, "n0", int(n - y.sum()))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True, eq=False)
class Coefficients:
    """Intercept plus slope vector: theta = (alpha, beta')'."""

    alpha: float
    beta: np.ndarray

    def __post_init__(self) -> None:
        alpha = float(self.alpha)
        beta = np.atleast_1d(np.asarray(self.beta, dtype=np.float64)).copy()
        if beta.ndim != 1:
            raise ValueError("beta must be a vector")
        if not (np.isfinite(alpha) and np.all(np.isfinite(beta))):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def dim(self) -> int:
        """Length of the full vector, 1 + len(beta)."""
        return 1 + self.beta.shape[0]

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([self.alpha], self.beta))

    @classmethod
    def from_vector(cls, theta: np.ndarray) -> "Coefficients":
        theta = np.asarray(theta, dtype=np.float64)
        return cls(alpha=float(theta[0]), beta=theta[1:])

    @classmethod
    def zeros(cls, d: int) -> "Coefficients":
        return cls(alpha=0.0, beta=np.zeros(d))


@dataclass(frozen=True)
class SolverSettings:
    """Newton solver knobs shared by every estimator."""

    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    divergence_bound: float = DEFAULT_DIVERGENCE_BOUND

    def __post_init__(self) -> None:
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.divergence_bound > 0:
            raise ValueError("divergence_bound must be positive")


@dataclass(frozen=True, eq=False)
class FitResult:
    """Fitted coefficients plus solver diagnostics.

    The solver rescales weights so that the largest active weight is one
    (the maximizer is invariant under positive rescaling of the weights);
    grad_max_norm and neg_hessian refer to that rescaled objective.
    neg_hessian is the negative Hessian at theta, a symmetric positive
    semidefinite matrix.
    """

    theta: Coefficients
    converged: bool
    iterations: int
    grad_max_norm: float
    neg_hessian: np.ndarray


def _augment(x: np.ndarray) -> np.ndarray:
    """Prepend the intercept column: z = (1, x')'."""
    n = x.shape[0]
    return np.hstack([np.ones((n, 1)), x])


def _check_weights(data: Dataset, weights: np.ndarray) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (data.n,):
        raise ValueError(f"weights must have shape ({data.n},), got {w.shape}")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    return w


def _check_theta(data: Dataset, theta: Coefficients) -> np.ndarray:
    if theta.beta.shape[0] != data.d:
        raise ValueError(
            f"beta has length {theta.beta.shape[0]}, dataset has d={data.d}"
        )
    return theta.as_vector()


def predict_prob(theta: Coefficients, x_row: np.ndarray) -> float:
    """Event probability exp(a + x'b) / (1 + exp(a + x'b)) for one row.

    Evaluated through the symmetric sigmoid, so linear predictors with
    magnitude up to several hundred do not overflow.
    """
    x_row = np.atleast_1d(np.asarray(x_row, dtype=np.float64))
    if x_row.shape != theta.beta.shape:
        raise ValueError(
            f"x_row has shape {x_row.shape}, beta has shape {theta.beta.shape}"
        )
    if not np.all(np.isfinite(x_row)):
        raise ValueError("x_row must be finite")
    return float(expit(theta.alpha + x_row @ theta.beta))


def _loglik_terms(z: np.ndarray, y: np.ndarray, theta_vec: np.ndarray) -> np.ndarray:
    eta = z @ theta_vec
    # log(1 + e^t) as max(t, 0) + log1p(e^-|t|)
    return y * eta - np.logaddexp(0.0, eta)


def log_likelihood(data: Dataset, weights: np.ndarray, theta: Coefficients) -> float:
    """Weighted log-likelihood sum_i w_i {y_i z_i'theta - log(1 + e^{z_i'theta})}."""
    w = _check_weights(data, weights)
    tv = _check_theta(data, theta)
    return float(w @ _loglik_terms(_augment(data.x), data.y, tv))


def gradient(data: Dataset, weights: np.ndarray, theta: Coefficients) -> np.ndarray:
    """Gradient sum_i w_i {y_i - p_i(theta)} z_i of the weighted log-likelihood."""
    w = _check_weights(data, weights)
    tv = _check_theta(data, theta)
    z = _augment(data.x)
    p = expit(z @ tv)
    return z.T @ (w * (data.y - p))


def hessian(data: Dataset, weights: np.ndarray, theta: Coefficients) -> np.ndarray:
    """Hessian -sum_i w_i p_i(1 - p_i) z_i z_i' of the weighted log-likelihood."""
    w = _check_weights(data, weights)
    tv = _check_theta(data, theta)
    z = _augment(data.x)
    p = expit(z @ tv)
    phi = p * (1.0 - p)
    h = -(z * (w * phi)[:, None]).T @ z
    return 0.5 * (h + h.T)


def _solve_newton(neg_hess: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Solve neg_hess @ step = grad via Cholesky, with one ridge retry."""
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(neg_hess), grad)
    except scipy.linalg.LinAlgError:
        pass
    k = neg_hess.shape[0]
    ridge = RIDGE_SCALE * np.trace(neg_hess) / k
    if ridge > 0:
        try:
            return scipy.linalg.cho_solve(
                scipy.linalg.cho_factor(neg_hess + ridge * np.eye(k)), grad
            )
        except scipy.linalg.LinAlgError:
            pass
    raise SingularHessianError(
        "Newton system not solvable with a nonzero gradient "
        f"(max|grad| = {np.max(np.abs(grad)):.3e})"
    )


def fit_mle(
    data: Dataset,
    weights: np.ndarray,
    init: Coefficients | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    divergence_bound: float = DEFAULT_DIVERGENCE_BOUND,
    callback: Callable[[int, np.ndarray, float], None] | None = None,
) -> FitResult:
    """Maximize the weighted log-likelihood by damped Newton ascent.

    Zero-weight rows are dropped up front; the remaining weights are
    rescaled by their maximum, so fits are exactly invariant under
    positive rescaling of the weight vector.  Steps are halved (at most
    30 times) until the objective does not decrease beyond its float
    resolution, which keeps the sequence of accepted objective values
    nondecreasing up to rounding noise.

    Parameters
    ----------
    data, weights : the problem; weights must be nonnegative.
    init : starting point, all zeros unless supplied.
    tol : convergence threshold on the gradient max-norm.
    max_iter : maximum number of accepted Newton steps.
    divergence_bound : max-norm bound on iterates; crossing it raises
        SeparationError (the usual symptom of separated data).
    callback : optional hook called as callback(iteration, theta_vec, objective)
        after each accepted step.

    Raises
    ------
    AllOneClassError : no positively weighted case or control.
    SeparationError : iterates escaped past divergence_bound.
    SingularHessianError : Newton system unsolvable at a non-stationary point.
    """
    w_all = _check_weights(data, weights)
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")

    active = w_all > 0
    y = data.y[active]
    w = w_all[active]
    if not np.any(y == 1) or not np.any(y == 0):
        raise AllOneClassError(
            "need at least one positively weighted case and one control"
        )
    w = w / w.max()
    z = _augment(data.x[active])
    k = z.shape[1]

    if init is None:
        theta = np.zeros(k)
    else:
        theta = _check_theta(data, init)

    obj = float(w @ _loglik_terms(z, y, theta))
    iterations = 0
    converged = False
    while True:
        p = expit(z @ theta)
        grad = z.T @ (w * (y - p))
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm <= tol:
            converged = True
            break
        if iterations >= max_iter:
            break
        phi = p * (1.0 - p)
        neg_hess = (z * (w * phi)[:, None]).T @ z
        step = _solve_newton(0.5 * (neg_hess + neg_hess.T), grad)

        accepted = False
        scale = 1.0
        slack = ACCEPT_SLACK_ULPS * np.finfo(float).eps * (1.0 + abs(obj))
        for _ in range(MAX_HALVINGS + 1):
            cand = theta + scale * step
            cand_obj = float(w @ _loglik_terms(z, y, cand))
            if np.isfinite(cand_obj) and cand_obj >= obj - slack:
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            # numerically stationary: no step improves the objective
            break
        theta, obj = cand, cand_obj
        iterations += 1
        if np.max(np.abs(theta)) > divergence_bound:
            raise SeparationError(
                f"iterate max-norm {np.max(np.abs(theta)):.3g} exceeded "
                f"{divergence_bound:.3g}: data appear separated"
            )
        if callback is not None:
            callback(iterations, theta.copy(), obj)

    p = expit(z @ theta)
    phi = p * (1.0 - p)
    neg_hess = (z * (w * phi)[:, None]).T @ z
    return FitResult(
        theta=Coefficients.from_vector(theta),
        converged=converged,
        iterations=iterations,
        grad_max_norm=grad_norm,
        neg_hessian=0.5 * (neg_hess + neg_hess.T),
    )
