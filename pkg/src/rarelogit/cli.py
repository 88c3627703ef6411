"""Command-line surface: dataset I/O, fits, simulation tables, variance reports.

Subcommands: fit, table1, sweep, variance.  Datasets are CSV with a header
row, a first column y of 0/1 labels and covariate columns x1..xd.  Result
files are CSV with a leading provenance comment line `# seed=<s>
version=<v>`; numeric fields carry 17 significant digits so values
round-trip exactly.  Exit codes: 0 success, 2 input or I/O error, 3
numeric or solver failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import __version__
from .asymptotics import (
    VarianceReport,
    limit_constants,
    oversampling_variance_factor,
    v_full,
    v_over_bc,
    v_over_weighted,
    v_under_bc,
    v_under_weighted,
)
from .estimators import (
    EstimatorFamily,
    EstimatorKind,
    fit_estimator,
    realize_design,
)
from .model import Coefficients, Dataset, RareLogitError, SolverSettings
from .sampling import DesignKind, effective_sample_size, substream
from .simulation import (
    ConditionalGaussianDesign,
    ExperimentConfig,
    GaussianLaw,
    MarginalLogisticDesign,
    run_experiment,
)

__all__ = ["load_dataset", "load_covariates", "main", "save_dataset"]

_KIND_ALIASES = {
    "full": EstimatorFamily.FULL,
    "under-w": EstimatorFamily.UNDER_WEIGHTED,
    "uw": EstimatorFamily.UNDER_WEIGHTED,
    "under-bc": EstimatorFamily.UNDER_BIAS_CORRECTED,
    "ubc": EstimatorFamily.UNDER_BIAS_CORRECTED,
    "over-w": EstimatorFamily.OVER_WEIGHTED,
    "ow": EstimatorFamily.OVER_WEIGHTED,
    "over-bc": EstimatorFamily.OVER_BIAS_CORRECTED,
    "obc": EstimatorFamily.OVER_BIAS_CORRECTED,
}


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _write_table(path: str, seed: int, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# seed={seed} version={__version__}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def save_dataset(path: str, data: Dataset) -> None:
    """Write a dataset as CSV: header y,x1..xd, 17-significant-digit values."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["y"] + [f"x{j + 1}" for j in range(data.d)])
        for i in range(data.n):
            writer.writerow([str(int(data.y[i]))] + [_fmt(v) for v in data.x[i]])


def load_dataset(path: str) -> Dataset:
    """Read a dataset CSV (header y,x1..xd) back into a Dataset."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "y":
            raise ValueError(f"{path}: expected header starting with 'y'")
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    y = np.array([float(r[0]) for r in rows])
    x = np.array([[float(v) for v in r[1:]] for r in rows])
    return Dataset(x=x, y=y)


def load_covariates(path: str) -> np.ndarray:
    """Read a covariate sample CSV (header x1..xd, no label column)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValueError(f"{path}: empty file")
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.array([[float(v) for v in r] for r in rows])


def _floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip() != ""]


def _ints(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip() != ""]


def _estimator_kind(name: str, pi0: float | None, lambda_n: float | None) -> EstimatorKind:
    tag = _KIND_ALIASES[name]
    if tag is EstimatorFamily.FULL:
        return EstimatorKind(tag)
    if tag in (EstimatorFamily.UNDER_WEIGHTED, EstimatorFamily.UNDER_BIAS_CORRECTED):
        if pi0 is None:
            raise ValueError(f"--estimator {name} requires --pi0")
        return EstimatorKind(tag, rate=pi0)
    if lambda_n is None:
        raise ValueError(f"--estimator {name} requires --lambda")
    return EstimatorKind(tag, rate=lambda_n)


def _variance_for(
    family: EstimatorFamily,
    xs: np.ndarray,
    beta: np.ndarray,
    c: float | None,
    c_o: float | None,
    lam: float | None,
) -> VarianceReport:
    if family is EstimatorFamily.FULL:
        return v_full(xs, beta)
    if family is EstimatorFamily.UNDER_WEIGHTED:
        if c is None:
            raise ValueError("under-w variance needs c (or --alpha-t with --pi0)")
        return v_under_weighted(xs, beta, c)
    if family is EstimatorFamily.UNDER_BIAS_CORRECTED:
        if c is None:
            raise ValueError("under-bc variance needs c (or --alpha-t with --pi0)")
        return v_under_bc(xs, beta, c)
    if lam is None:
        raise ValueError("over-sampling variances need --lambda")
    if family is EstimatorFamily.OVER_WEIGHTED:
        return v_over_weighted(xs, beta, lam)
    if c_o is None:
        raise ValueError("over-bc variance needs c_o (or --alpha-t with --lambda)")
    return v_over_bc(xs, beta, lam, c_o)


def _variance_rows(report: VarianceReport) -> list[list]:
    rows: list[list] = []
    if report.c is not None:
        rows.append(["c", report.c])
    if report.c_o is not None:
        rows.append(["c_o", report.c_o])
    if report.lam is not None:
        rows.append(["lambda", report.lam])
        rows.append(["factor", oversampling_variance_factor(report.lam)])
    k = report.v.shape[0]
    for i in range(k):
        for j in range(k):
            rows.append([f"v_{i + 1}_{j + 1}", report.v[i, j]])
    return rows


def _cmd_fit(args: argparse.Namespace) -> None:
    data = load_dataset(args.data)
    kind = _estimator_kind(args.estimator, args.pi0, args.lambda_n)
    settings = SolverSettings(tol=args.tol, max_iter=args.max_iter)
    design = realize_design(kind, data, substream(args.seed))
    fit = fit_estimator(kind, data, design, settings)

    rows: list[list] = [
        ["estimator", kind.tag.value],
        ["rate", "" if kind.rate is None else kind.rate],
        ["n", data.n],
        ["n1", data.n1],
        ["n0", data.n0],
        ["effective_n", data.n if design is None else effective_sample_size(design)],
        ["converged", fit.converged],
        ["iterations", fit.iterations],
        ["grad_max_norm", fit.grad_max_norm],
        ["alpha", fit.theta.alpha],
    ]
    for j, b in enumerate(fit.theta.beta):
        rows.append([f"beta{j + 1}", b])

    if args.alpha_t is not None or args.c is not None or args.c_o is not None:
        pi0 = kind.rate if kind.design_kind is DesignKind.UNDERSAMPLE else None
        lam = kind.rate if kind.design_kind is DesignKind.OVERSAMPLE else None
        c, c_o = args.c, args.c_o
        if args.alpha_t is not None:
            derived_c, derived_co = limit_constants(args.alpha_t, pi0=pi0, lambda_n=lam)
            c = derived_c if c is None else c
            c_o = derived_co if c_o is None else c_o
        report = _variance_for(kind.tag, data.x, fit.theta.beta, c, c_o, lam)
        rows.extend(_variance_rows(report))

    _write_table(args.out, args.seed, ["field", "value"], rows)
    print(args.out)


def _cmd_table1(args: argparse.Namespace) -> None:
    sizes = _ints(args.n)
    rates = _floats(args.rate)
    if len(sizes) != len(rates):
        raise ValueError("--n and --rate must pair up one-to-one")
    rows = []
    for n, rate in zip(sizes, rates):
        config = ExperimentConfig(
            design=ConditionalGaussianDesign(
                mu1=args.mu1, mu0=args.mu0, sigma=args.sigma, target_rate=rate
            ),
            n=n,
            reps=args.reps,
            estimators=(EstimatorKind(EstimatorFamily.FULL),),
            base_seed=args.seed,
            solver=SolverSettings(tol=args.tol, max_iter=args.max_iter),
        )
        report = run_experiment(config, threads=args.threads)
        entry = report.entries[0]
        expected_n1 = n * rate
        rows.append(
            [
                n,
                rate,
                expected_n1,
                expected_n1 * entry.emse_alpha,
                expected_n1 * sum(entry.emse_beta),
                n * entry.emse_alpha,
                n * sum(entry.emse_beta),
                entry.failed,
            ]
        )
        print(f"table1: n={n} rate={rate:g} done", file=sys.stderr)
    header = [
        "n",
        "rate",
        "expected_n1",
        "en1_emse_alpha",
        "en1_emse_beta",
        "n_emse_alpha",
        "n_emse_beta",
        "failed",
    ]
    _write_table(args.out, args.seed, header, rows)
    print(args.out)


def _sweep_estimators(scheme: str, grid: list[float]) -> tuple[EstimatorKind, ...]:
    kinds: list[EstimatorKind] = [EstimatorKind(EstimatorFamily.FULL)]
    for rate in grid:
        if scheme == "under":
            kinds.append(EstimatorKind(EstimatorFamily.UNDER_WEIGHTED, rate=rate))
            kinds.append(EstimatorKind(EstimatorFamily.UNDER_BIAS_CORRECTED, rate=rate))
        else:
            kinds.append(EstimatorKind(EstimatorFamily.OVER_WEIGHTED, rate=rate))
            kinds.append(EstimatorKind(EstimatorFamily.OVER_BIAS_CORRECTED, rate=rate))
    return tuple(kinds)


def _cmd_sweep(args: argparse.Namespace) -> None:
    if (args.pi0_grid is None) == (args.lambda_grid is None):
        raise ValueError("give exactly one of --pi0-grid and --lambda-grid")
    if args.pi0_grid is not None:
        scheme, grid = "under", _floats(args.pi0_grid)
    else:
        scheme, grid = "over", _floats(args.lambda_grid)
    theta_vals = _floats(args.theta_t)
    if len(theta_vals) < 2:
        raise ValueError("--theta-t needs an intercept and at least one slope")
    theta_t = Coefficients(alpha=theta_vals[0], beta=np.array(theta_vals[1:]))
    d = theta_t.beta.shape[0]
    means = _floats(args.law_mean) if args.law_mean else [0.0] * d
    sds = _floats(args.law_sd) if args.law_sd else [1.0] * d
    law = GaussianLaw(means=tuple(means), sds=tuple(sds))

    config = ExperimentConfig(
        design=MarginalLogisticDesign(theta=theta_t, law=law),
        n=args.n,
        reps=args.reps,
        estimators=_sweep_estimators(scheme, grid),
        base_seed=args.seed,
        solver=SolverSettings(tol=args.tol, max_iter=args.max_iter),
    )
    report = run_experiment(config, threads=args.threads)
    rows = []
    for entry in report.entries:
        rows.append(
            [
                entry.kind.tag.value,
                "" if entry.kind.rate is None else entry.kind.rate,
                1e3 * entry.emse_total,
                1e3 * entry.emse_alpha,
                1e3 * sum(entry.emse_beta),
                entry.failed,
            ]
        )
    header = ["estimator", "rate", "emse_x1000", "emse_alpha_x1000", "emse_beta_x1000", "failed"]
    _write_table(args.out, args.seed, header, rows)
    print(args.out)


def _cmd_variance(args: argparse.Namespace) -> None:
    family = _KIND_ALIASES[args.kind]
    beta = np.array(_floats(args.beta))
    if args.xs is not None:
        xs = load_covariates(args.xs)
    else:
        d = beta.shape[0]
        means = _floats(args.law_mean) if args.law_mean else [0.0] * d
        sds = _floats(args.law_sd) if args.law_sd else [1.0] * d
        law = GaussianLaw(means=tuple(means), sds=tuple(sds))
        xs = law.sample(args.m, substream(args.seed))

    c, c_o, lam = args.c, args.c_o, args.lambda_n
    if args.alpha_t is not None:
        derived_c, derived_co = limit_constants(
            args.alpha_t, pi0=args.pi0, lambda_n=args.lambda_n
        )
        c = derived_c if c is None else c
        c_o = derived_co if c_o is None else c_o
    report = _variance_for(family, xs, beta, c, c_o, lam)
    rows: list[list] = [["kind", family.value], ["m", xs.shape[0]]]
    rows.extend(_variance_rows(report))
    _write_table(args.out, args.seed, ["field", "value"], rows)
    print(args.out)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rarelogit",
        description="Rare-events logistic regression: subsampling estimators, "
        "bias corrections, asymptotic variances, and simulation tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=0, help="base RNG seed (default 0)")
        p.add_argument("--out", required=True, help="result CSV path")
        p.add_argument("--tol", type=float, default=1e-8, help="gradient tolerance (default 1e-8)")
        p.add_argument("--max-iter", type=int, default=100, help="Newton step cap (default 100)")

    fit = sub.add_parser("fit", help="fit one estimator on a dataset CSV")
    fit.add_argument("--data", required=True, help="dataset CSV (header y,x1..xd)")
    fit.add_argument(
        "--estimator",
        required=True,
        choices=sorted(_KIND_ALIASES),
        help="estimator: full, under-w, under-bc, over-w, over-bc",
    )
    fit.add_argument("--pi0", type=float, help="control retention probability")
    fit.add_argument("--lambda", dest="lambda_n", type=float, help="case over-sampling rate")
    fit.add_argument(
        "--alpha-t",
        type=float,
        help="true intercept; when given, the matching asymptotic variance is reported",
    )
    fit.add_argument("--c", type=float, help="limit constant exp(alpha_t)/pi0, given directly")
    fit.add_argument("--c-o", type=float, help="limit constant lambda*exp(alpha_t), given directly")
    common(fit)
    fit.set_defaults(func=_cmd_fit)

    table1 = sub.add_parser("table1", help="scaled full-data eMSE table over (n, rate) pairs")
    table1.add_argument("--n", required=True, help="comma list of sample sizes")
    table1.add_argument("--rate", required=True, help="comma list of event rates, paired with --n")
    table1.add_argument("--reps", type=int, default=1000, help="replication count S (default 1000)")
    table1.add_argument("--mu1", type=float, default=1.0, help="case covariate mean (default 1)")
    table1.add_argument("--mu0", type=float, default=0.0, help="control covariate mean (default 0)")
    table1.add_argument("--sigma", type=float, default=1.0, help="covariate sd (default 1)")
    table1.add_argument(
        "--threads", type=int, default=os.cpu_count() or 1, help="parallel replications"
    )
    common(table1)
    table1.set_defaults(func=_cmd_table1)

    sweep = sub.add_parser("sweep", help="eMSE of the sampling estimators over a rate grid")
    sweep.add_argument("--pi0-grid", help="comma list of under-sampling rates")
    sweep.add_argument("--lambda-grid", help="comma list of over-sampling rates")
    sweep.add_argument("--n", type=int, required=True, help="sample size per replication")
    sweep.add_argument(
        "--theta-t", required=True, help="true coefficients, comma list alpha,beta1,.."
    )
    sweep.add_argument("--law-mean", help="covariate means (default zeros)")
    sweep.add_argument("--law-sd", help="covariate sds (default ones)")
    sweep.add_argument("--reps", type=int, default=1000, help="replication count S (default 1000)")
    sweep.add_argument(
        "--threads", type=int, default=os.cpu_count() or 1, help="parallel replications"
    )
    common(sweep)
    sweep.set_defaults(func=_cmd_sweep)

    variance = sub.add_parser("variance", help="asymptotic covariance matrix and constants")
    variance.add_argument(
        "--kind", required=True, choices=sorted(_KIND_ALIASES), help="estimator family"
    )
    variance.add_argument("--beta", required=True, help="slope vector, comma list")
    variance.add_argument("--alpha-t", type=float, help="true intercept for the limit constants")
    variance.add_argument("--pi0", type=float, help="under-sampling rate (with --alpha-t)")
    variance.add_argument("--lambda", dest="lambda_n", type=float, help="over-sampling rate")
    variance.add_argument("--c", type=float, help="limit constant exp(alpha_t)/pi0, given directly")
    variance.add_argument("--c-o", type=float, help="limit constant lambda*exp(alpha_t), given directly")
    variance.add_argument("--xs", help="covariate sample CSV (header x1..xd)")
    variance.add_argument("--m", type=int, default=1_000_000, help="law draws when no --xs (default 1e6)")
    variance.add_argument("--law-mean", help="covariate means (default zeros)")
    variance.add_argument("--law-sd", help="covariate sds (default ones)")
    common(variance)
    variance.set_defaults(func=_cmd_variance)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        args.func(args)
    except (RareLogitError, OverflowError) as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return 3
    except (OSError, ValueError, csv.Error) as err:
        print(f"{type(err).__name__}: {err}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
