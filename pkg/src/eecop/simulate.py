"""Synthetic data generators, baseline estimators, and RMSE study harness.

Three generators:

- ``linear_gaussian``: Y = sum_j X_j + Z with X ~ N(0, I_p), Z ~ N(0, 1);
  the joint law is Gaussian, so the parametric weight estimator is correctly
  specified and can be compared against OLS.
- ``mean_shift``:     Y = exp(X_1) + Z with X ~ U(-1, 1)^p,
- ``variance_shift``: Y = (1 + exp(X_1)) Z with X ~ U(-1, 1)^p;
  both depend on X only through the first coordinate.

Closed-form truths for these generators back the RMSE metric
RMSE = [E{theta_hat(X) - theta_0(X)}^2]^{1/2}, evaluated at covariate points
drawn fresh from the covariate law for each replication.  All randomness
comes from PCG64 streams keyed by (seed, n, rep), so studies are
deterministic and independent of worker scheduling.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .data import Sample
from .errors import ConfigError, EecopError, FitError
from .families import mean_family, quantile_family
from .pipeline import EstimatorConfig, fit_joint, weight_fn_for
from .solver import solve_mean, solve_quantile
from .weights import evaluate_weights

DGP_KINDS = ("linear_gaussian", "mean_shift", "variance_shift")

ESTIMATOR_NAMES = ("oracle", "ols", "nw", "eecop_param", "eecop_kernel")


@dataclass(frozen=True)
class DgpSpec:
    kind: str
    n: int
    p: int
    seed: object = 0

    def __post_init__(self):
        if self.kind not in DGP_KINDS:
            raise ConfigError("config.unknown_dgp",
                              f"unknown generator {self.kind!r}")
        if self.n < 10:
            raise ConfigError("config.bad_n", "need n >= 10")
        if self.p < 1:
            raise ConfigError("config.bad_p", "need p >= 1")


def generate(spec: DgpSpec) -> Sample:
    """Deterministic draw from the generator. Seed may be an int or a
    sequence of ints (stream key)."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "linear_gaussian":
        x = rng.standard_normal((spec.n, spec.p))
        z = rng.standard_normal(spec.n)
        y = x.sum(axis=1) + z
    else:
        x = rng.uniform(-1.0, 1.0, size=(spec.n, spec.p))
        z = rng.standard_normal(spec.n)
        if spec.kind == "mean_shift":
            y = np.exp(x[:, 0]) + z
        else:
            y = (1.0 + np.exp(x[:, 0])) * z
    return Sample(y=y[:, None], x=x)


def draw_eval_points(kind: str, p: int, count: int, seed) -> np.ndarray:
    """Fresh covariate draws from the generator's covariate law."""
    rng = np.random.default_rng(seed)
    if kind == "linear_gaussian":
        return rng.standard_normal((count, p))
    return rng.uniform(-1.0, 1.0, size=(count, p))


def true_conditional_mean(kind: str, x) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if kind == "linear_gaussian":
        return float(x.sum())
    if kind == "mean_shift":
        return float(np.exp(x[0]))
    return 0.0


def true_conditional_quantile(kind: str, x, t: float) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = float(ndtri(t))
    if kind == "linear_gaussian":
        return float(x.sum()) + z
    if kind == "mean_shift":
        return float(np.exp(x[0])) + z
    return (1.0 + float(np.exp(x[0]))) * z


@dataclass(frozen=True)
class OlsFit:
    """Least-squares fit with intercept."""

    coef: np.ndarray  # (p + 1,), intercept first

    def predict(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.coef[0] + x @ self.coef[1:])


def ols_baseline(sample: Sample) -> OlsFit:
    """OLS of the (scalar) response on the covariates, via lstsq."""
    design = np.hstack([np.ones((sample.n, 1)), sample.x])
    coef, _, rank, _ = np.linalg.lstsq(design, sample.y[:, 0], rcond=None)
    if rank < design.shape[1]:
        raise FitError("simulate.rank_deficient",
                       f"design matrix has rank {rank} < {design.shape[1]}")
    return OlsFit(coef=coef)


def nadaraya_watson_baseline(sample: Sample, x0, bandwidth) -> float:
    """Product-Gaussian-kernel regression of Y_1 on X at x0."""
    h = np.atleast_1d(np.asarray(bandwidth, dtype=float))
    if h.size == 1:
        h = np.full(sample.p, float(h[0]))
    if np.any(h <= 0.0):
        raise FitError("simulate.bad_bandwidth", "bandwidth must be positive")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    z = (sample.x - x0[None, :]) / h
    k = np.exp(-0.5 * np.einsum("ij,ij->i", z, z))
    mass = k.sum()
    if mass <= 0.0:
        raise FitError("simulate.zero_kernel_mass",
                       "no kernel mass at this evaluation point")
    return float((k @ sample.y[:, 0]) / mass)


def nw_rule_bandwidth(sample: Sample) -> np.ndarray:
    """Per-coordinate rule-of-thumb bandwidth sd_j * n^(-1/(p+4))."""
    sd = sample.x.std(axis=0)
    return sd * sample.n ** (-1.0 / (sample.p + 4.0))


@dataclass(frozen=True)
class StudySpec:
    """One RMSE study: a generator crossed with estimators and sample sizes."""

    dgp: str
    n_values: tuple
    p: int
    estimators: tuple
    reps: int
    eval_points: int = 10
    family: str = "mean"
    t_values: tuple = ()
    seed: int = 0
    kernel_config: EstimatorConfig = field(
        default_factory=lambda: EstimatorConfig(weights_estimator="kernel"))

    def __post_init__(self):
        if self.reps < 1:
            raise ConfigError("config.bad_reps", "need reps >= 1")
        if self.family not in ("mean", "quantile"):
            raise ConfigError("config.bad_family",
                              "studies support mean or quantile families")
        if self.family == "quantile" and not self.t_values:
            raise ConfigError("config.t_required",
                              "quantile studies need t values")
        for est in self.estimators:
            if est not in ESTIMATOR_NAMES:
                raise ConfigError("config.unknown_estimator",
                                  f"unknown estimator {est!r}")
            if est in ("ols", "nw") and self.family != "mean":
                raise ConfigError("config.estimator_family",
                                  f"{est} is a mean baseline only")


def _truths(spec: StudySpec, points: np.ndarray) -> dict:
    ts = spec.t_values if spec.family == "quantile" else (None,)
    out = {}
    for t in ts:
        if t is None:
            out[t] = np.array([true_conditional_mean(spec.dgp, x)
                               for x in points])
        else:
            out[t] = np.array([true_conditional_quantile(spec.dgp, x, t)
                               for x in points])
    return out


def _predict_rep(spec: StudySpec, est: str, sample: Sample,
                 points: np.ndarray, truths: dict) -> dict:
    """Predictions per t at each eval point; NaN marks a failed cell."""
    ts = spec.t_values if spec.family == "quantile" else (None,)
    preds = {t: np.full(points.shape[0], np.nan) for t in ts}
    if est == "oracle":
        for t in ts:
            preds[t] = truths[t].copy()
        return preds
    if est == "ols":
        fit = ols_baseline(sample)
        preds[None] = np.array([fit.predict(x) for x in points])
        return preds
    if est == "nw":
        h = nw_rule_bandwidth(sample)
        for j, x in enumerate(points):
            try:
                preds[None][j] = nadaraya_watson_baseline(sample, x, h)
            except EecopError:
                pass
        return preds
    cfg = (EstimatorConfig(weights_estimator="parametric_gaussian")
           if est == "eecop_param" else spec.kernel_config)
    joint = fit_joint(sample, cfg)
    for j, x in enumerate(points):
        try:
            wfn = weight_fn_for(joint, x)
            w = evaluate_weights(wfn, sample)
            for t in ts:
                if t is None:
                    preds[t][j] = solve_mean(sample.y[:, 0], w)
                else:
                    preds[t][j] = solve_quantile(sample.y[:, 0], w, t)
        except EecopError:
            continue
    return preds


def rmse_study(spec: StudySpec, threads: int = 1) -> list:
    """Run the study; one output row per (estimator, n, t) cell.

    Each row carries the RMSE pooled over reps and evaluation points, a
    Monte Carlo standard error (delta method from the spread of per-rep
    MSEs), and the count of failed (estimator, point) cells.
    """
    ts = spec.t_values if spec.family == "quantile" else (None,)

    def run_rep(n: int, r: int) -> dict:
        sample = generate(DgpSpec(kind=spec.dgp, n=n, p=spec.p,
                                  seed=[spec.seed, n, r]))
        points = draw_eval_points(spec.dgp, spec.p, spec.eval_points,
                                  seed=[spec.seed, n, r, 7])
        truths = _truths(spec, points)
        out = {}
        for est in spec.estimators:
            preds = _predict_rep(spec, est, sample, points, truths)
            out[est] = {t: preds[t] - truths[t] for t in ts}
        return out

    rows = []
    for n in spec.n_values:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                futures = [pool.submit(run_rep, n, r) for r in range(spec.reps)]
                rep_errors = [f.result() for f in futures]
        else:
            rep_errors = [run_rep(n, r) for r in range(spec.reps)]
        for est in spec.estimators:
            for t in ts:
                per_rep_mse = []
                n_failed = 0
                for rep in rep_errors:
                    err = rep[est][t]
                    n_failed += int(np.sum(~np.isfinite(err)))
                    good = err[np.isfinite(err)]
                    if good.size:
                        per_rep_mse.append(float(np.mean(np.square(good))))
                if not per_rep_mse:
                    rows.append({"estimator": est, "n": n, "p": spec.p,
                                 "t": t, "rmse": float("nan"),
                                 "mc_se": float("nan"), "reps": spec.reps,
                                 "n_failed": n_failed})
                    continue
                mse = float(np.mean(per_rep_mse))
                rmse = float(np.sqrt(mse))
                if len(per_rep_mse) > 1 and rmse > 0.0:
                    se_mse = float(np.std(per_rep_mse, ddof=1)
                                   / np.sqrt(len(per_rep_mse)))
                    mc_se = se_mse / (2.0 * rmse)
                else:
                    mc_se = 0.0
                rows.append({"estimator": est, "n": n, "p": spec.p, "t": t,
                             "rmse": rmse, "mc_se": mc_se, "reps": spec.reps,
                             "n_failed": n_failed})
    return rows


def save_rmse_table(rows, path) -> None:
    """Tidy CSV: estimator, n, p, t, rmse, mc_se, reps, n_failed."""
    fields = ["estimator", "n", "p", "t", "rmse", "mc_se", "reps", "n_failed"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            out = dict(row)
            if out.get("t") is None:
                out["t"] = ""
            writer.writerow(out)
