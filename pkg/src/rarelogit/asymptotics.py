"""Asymptotic covariance matrices of the rare-events estimators.

All matrices are covariances of sqrt(n1) * (theta_hat - theta_true) in the
rare-events limit and are evaluated by plug-in: population expectations
over the covariate law are replaced by averages over a user-supplied
covariate sample xs (the dataset's own covariates, or fresh draws in
simulation work).  With z = (1, x')' and e = exp(beta'x), the moment
matrices are averages of

    plain     e * z z'
    times     e * (1 + k e) * z z'
    over      e / (1 + k e) * z z'
    over_sq   e / (1 + k e)^2 * z z'

for a nonnegative constant k, and the covariances are

    full      E(e) * plain^-1
    under-w   E(e) * plain^-1 @ times(c) @ plain^-1
    under-bc  E(e) * over(c)^-1
    over-w    f(lam) * E(e) * plain^-1
    over-bc   f(lam) * E(e) * over(c_o)^-1 @ over_sq(c_o) @ over(c_o)^-1

where f(lam) = ((1+lam)^2 + lam) / (1+lam)^2 is the over-sampling
inflation factor and the limit constants are c = exp(alpha_t)/pi0 and
c_o = lambda_n * exp(alpha_t).  Efficiency comparisons between these
matrices are statements in the Loewner (positive-semidefinite) order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .estimators import EstimatorFamily
from .model import RareLogitError

__all__ = [
    "SCALING_LABEL",
    "SingularMomentMatrixError",
    "VarianceReport",
    "limit_constants",
    "loewner_ge",
    "moment_matrix",
    "oversampling_variance_factor",
    "v_full",
    "v_over_bc",
    "v_over_weighted",
    "v_under_bc",
    "v_under_weighted",
    "weighted_moment_inequality_check",
]

SCALING_LABEL = "covariance of sqrt(n1) * (theta_hat - theta_true)"
EXPONENT_GUARD = 700.0
CONDITION_LIMIT = 1e12
LOEWNER_RTOL = 1e-8

MomentTransform = Literal["plain", "times", "over", "over_sq"]


class SingularMomentMatrixError(RareLogitError):
    """A plug-in moment matrix is numerically singular (condition > 1e12)."""


@dataclass(frozen=True, eq=False)
class VarianceReport:
    """An asymptotic covariance matrix tagged with its estimator family.

    v is symmetric positive definite whenever the plug-in moment matrices
    are nonsingular; scaling records the convention it is stated in.  The
    limit constants that produced it (c, c_o, lam) are kept when they
    apply to the family.
    """

    kind: EstimatorFamily
    v: np.ndarray
    scaling: str = SCALING_LABEL
    c: float | None = None
    c_o: float | None = None
    lam: float | None = None


def _as_sample(xs: np.ndarray, beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim == 1:
        xs = xs[:, None]
    if xs.ndim != 2:
        raise ValueError("covariate sample must be an (m, d) matrix")
    beta = np.atleast_1d(np.asarray(beta, dtype=np.float64))
    if beta.shape != (xs.shape[1],):
        raise ValueError(
            f"beta has shape {beta.shape}, sample has d={xs.shape[1]}"
        )
    if xs.shape[0] < xs.shape[1] + 1:
        raise ValueError("need at least d + 1 sample rows")
    return xs, beta


def moment_matrix(
    xs: np.ndarray,
    beta: np.ndarray,
    transform: MomentTransform = "plain",
    constant: float = 0.0,
) -> tuple[np.ndarray, float]:
    """Plug-in moment matrix over xs, plus the average of exp(beta'x).

    transform selects the integrand listed in the module docstring;
    constant is its k.  Exponents beyond 700 in magnitude (or a nonfinite
    integrand) raise OverflowError instead of propagating infinities.
    """
    xs, beta = _as_sample(xs, beta)
    constant = float(constant)
    if not constant >= 0.0:
        raise ValueError(f"constant must be >= 0, got {constant}")
    expo = xs @ beta
    if np.max(np.abs(expo), initial=0.0) > EXPONENT_GUARD:
        raise OverflowError(
            f"exponent magnitude exceeds {EXPONENT_GUARD:g}; the plug-in "
            "average would overflow"
        )
    e = np.exp(expo)
    if transform == "plain":
        wgt = e
    elif transform == "times":
        wgt = e * (1.0 + constant * e)
    elif transform == "over":
        wgt = e / (1.0 + constant * e)
    elif transform == "over_sq":
        wgt = e / (1.0 + constant * e) ** 2
    else:
        raise ValueError(f"unknown transform {transform!r}")
    if not np.all(np.isfinite(wgt)):
        raise OverflowError("nonfinite integrand in the plug-in average")
    m = xs.shape[0]
    z = np.hstack([np.ones((m, 1)), xs])
    mat = (z * wgt[:, None]).T @ z / m
    return 0.5 * (mat + mat.T), float(np.mean(e))


def _sym_inverse(mat: np.ndarray) -> np.ndarray:
    """Inverse through a symmetric eigendecomposition, with a condition check."""
    vals, vecs = np.linalg.eigh(mat)
    tiny = np.max(np.abs(vals)) / CONDITION_LIMIT
    if np.min(vals) <= tiny:
        cond = np.inf if np.min(np.abs(vals)) == 0 else np.max(np.abs(vals)) / np.min(np.abs(vals))
        raise SingularMomentMatrixError(
            f"moment matrix is numerically singular (condition {cond:.3e})"
        )
    inv = (vecs / vals) @ vecs.T
    return 0.5 * (inv + inv.T)


def _sandwich(bread_inv: np.ndarray, meat: np.ndarray) -> np.ndarray:
    v = bread_inv @ meat @ bread_inv
    return 0.5 * (v + v.T)


def v_full(xs: np.ndarray, beta: np.ndarray) -> VarianceReport:
    """Covariance of the full-data MLE: E(e) * plain^-1."""
    mf, e_mean = moment_matrix(xs, beta, "plain")
    return VarianceReport(kind=EstimatorFamily.FULL, v=e_mean * _sym_inverse(mf))


def v_under_weighted(xs: np.ndarray, beta: np.ndarray, c: float) -> VarianceReport:
    """Covariance of the under-sampled weighted estimator (sandwich in c)."""
    c = _check_constant(c, "c")
    mf, e_mean = moment_matrix(xs, beta, "plain")
    mf_inv = _sym_inverse(mf)
    if c == 0.0:
        # times(0) == plain, so the sandwich collapses exactly
        v = e_mean * mf_inv
    else:
        mw, _ = moment_matrix(xs, beta, "times", c)
        v = e_mean * _sandwich(mf_inv, mw)
    return VarianceReport(kind=EstimatorFamily.UNDER_WEIGHTED, v=v, c=c)


def v_under_bc(xs: np.ndarray, beta: np.ndarray, c: float) -> VarianceReport:
    """Covariance of the under-sampled bias-corrected estimator: E(e) * over(c)^-1."""
    c = _check_constant(c, "c")
    mbc, e_mean = moment_matrix(xs, beta, "over", c)
    return VarianceReport(
        kind=EstimatorFamily.UNDER_BIAS_CORRECTED, v=e_mean * _sym_inverse(mbc), c=c
    )


def oversampling_variance_factor(lam: float) -> float:
    """Variance inflation ((1+lam)^2 + lam) / (1+lam)^2 from case replication.

    Equals 1 only at lam = 0 and tends back to 1 as lam grows.
    """
    lam = _check_constant(lam, "lam")
    return ((1.0 + lam) ** 2 + lam) / (1.0 + lam) ** 2


def v_over_weighted(xs: np.ndarray, beta: np.ndarray, lam: float) -> VarianceReport:
    """Covariance of the over-sampled weighted estimator: f(lam) * E(e) * plain^-1."""
    lam = _check_constant(lam, "lam")
    factor = oversampling_variance_factor(lam)
    mf, e_mean = moment_matrix(xs, beta, "plain")
    v = factor * (e_mean * _sym_inverse(mf))
    return VarianceReport(kind=EstimatorFamily.OVER_WEIGHTED, v=v, lam=lam)


def v_over_bc(
    xs: np.ndarray, beta: np.ndarray, lam: float, c_o: float
) -> VarianceReport:
    """Covariance of the over-sampled bias-corrected estimator (sandwich in c_o)."""
    lam = _check_constant(lam, "lam")
    c_o = _check_constant(c_o, "c_o")
    factor = oversampling_variance_factor(lam)
    m2, e_mean = moment_matrix(xs, beta, "over", c_o)
    m2_inv = _sym_inverse(m2)
    if c_o == 0.0:
        # over(0) == over_sq(0) == plain: the sandwich collapses exactly
        v = factor * (e_mean * m2_inv)
    else:
        m1, _ = moment_matrix(xs, beta, "over_sq", c_o)
        v = factor * (e_mean * _sandwich(m2_inv, m1))
    return VarianceReport(
        kind=EstimatorFamily.OVER_BIAS_CORRECTED, v=v, c_o=c_o, lam=lam
    )


def _check_constant(value: float, name: str) -> float:
    value = float(value)
    if not value >= 0.0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    return value


def limit_constants(
    alpha_t: float, pi0: float | None = None, lambda_n: float | None = None
) -> tuple[float | None, float | None]:
    """Limit constants (c, c_o) = (exp(alpha_t)/pi0, lambda_n * exp(alpha_t)).

    Either rate may be omitted, in which case the matching constant is None.
    """
    alpha_t = float(alpha_t)
    if not np.isfinite(alpha_t):
        raise ValueError("alpha_t must be finite")
    c = None
    c_o = None
    if pi0 is not None:
        pi0 = float(pi0)
        if not (0.0 < pi0 <= 1.0):
            raise ValueError(f"pi0 must be in (0, 1], got {pi0}")
        c = float(np.exp(alpha_t)) / pi0
    if lambda_n is not None:
        lambda_n = float(lambda_n)
        if not lambda_n >= 0.0:
            raise ValueError(f"lambda_n must be >= 0, got {lambda_n}")
        c_o = lambda_n * float(np.exp(alpha_t))
    return c, c_o


def _check_symmetric_pair(a: np.ndarray, b: np.ndarray, tol: float) -> None:
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrices must be square and of equal shape")
    if np.max(np.abs(a - a.T)) > tol or np.max(np.abs(b - b.T)) > tol:
        raise ValueError("matrices must be symmetric within tol")


def loewner_ge(a: np.ndarray, b: np.ndarray, tol: float | None = None) -> bool:
    """True iff a - b is positive semidefinite within tol.

    The default tolerance is 1e-8 relative to the larger trace of the two
    matrices (falling back to 1e-8 absolute when both traces vanish).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if tol is None:
        scale = max(abs(float(np.trace(a))), abs(float(np.trace(b))))
        tol = LOEWNER_RTOL * (scale if scale > 0 else 1.0)
    _check_symmetric_pair(a, b, tol)
    return bool(np.min(np.linalg.eigvalsh(a - b)) >= -tol)


def weighted_moment_inequality_check(vs: np.ndarray, hs: np.ndarray, tol: float = 1e-8) -> bool:
    """Verify the weighted-moment inequality on an empirical sample.

    For vectors v and positive scalars h,

        {E(v v')}^-1 E(h v v') {E(v v')}^-1  >=  {E(1/h v v')}^-1

    in the Loewner order, under any probability measure.  Here the
    expectations are averages over the rows of vs / entries of hs, so the
    check must come out true (up to floating point) for every valid input;
    it certifies e.g. the weighted-versus-bias-corrected variance ordering
    when v = e^{beta'x/2} z and h = 1 + c e^{beta'x}.
    """
    vs = np.asarray(vs, dtype=np.float64)
    if vs.ndim == 1:
        vs = vs[:, None]
    hs = np.asarray(hs, dtype=np.float64)
    if hs.shape != (vs.shape[0],):
        raise ValueError("hs must be one scalar per row of vs")
    if not np.all(np.isfinite(hs)) or np.any(hs <= 0.0):
        raise ValueError("h must be positive and finite")
    m = vs.shape[0]
    m0 = (vs.T @ vs) / m
    mh = (vs * hs[:, None]).T @ vs / m
    mih = (vs / hs[:, None]).T @ vs / m
    m0_inv = _sym_inverse(0.5 * (m0 + m0.T))
    lhs = _sandwich(m0_inv, 0.5 * (mh + mh.T))
    rhs = _sym_inverse(0.5 * (mih + mih.T))
    return bool(np.min(np.linalg.eigvalsh(lhs - rhs)) >= -tol)
