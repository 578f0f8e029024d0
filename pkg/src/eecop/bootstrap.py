"""Multiplier bootstrap of the full estimation pipeline and confidence bands.

Each replicate draws i.i.d. positive multipliers xi_i (standard exponential
by default, which gives the Bayesian bootstrap), self-normalizes them to
m_i = xi_i / mean(xi), and re-runs the entire pipeline — margin fits, copula
fit, weight function, estimating equation — under those observation weights.

Bands come from empirical quantiles of (mu/sigma) * (theta_tilde - theta_hat)
(type-7 linear interpolation of order statistics).  The normalizing rate of
the asymptotic theory cancels in this construction, so it never needs to be
known.  The bias of the weight estimator is not corrected; bands are centered
at the point estimate.

Replicate b draws its multipliers from an independent PCG64 stream seeded by
(seed, b), so results are identical regardless of worker count or
scheduling.
"""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .data import EstimateResult, Sample
from .errors import ConfigError, EecopError, SolverError
from .families import Family
from .pipeline import EstimatorConfig, estimate
from .solver import DEFAULT_CONFIG, SolverConfig

# name -> (mean, sd, sampler); positive distributions with finite 2+eps
# moments only.
MULTIPLIER_DISTRIBUTIONS = {
    "exponential": (1.0, 1.0, lambda rng, n: rng.exponential(1.0, n)),
}


@dataclass(frozen=True)
class MultiplierSpec:
    """Multiplier distribution, replicate count and seed."""

    B: int
    seed: int = 0
    distribution: str = "exponential"

    def __post_init__(self):
        if self.distribution not in MULTIPLIER_DISTRIBUTIONS:
            raise ConfigError(
                "config.unknown_multiplier",
                f"unknown multiplier distribution {self.distribution!r}")
        if self.B < 1:
            raise ConfigError("config.B_positive",
                              "replicate count B must be >= 1")

    @property
    def mu(self) -> float:
        return MULTIPLIER_DISTRIBUTIONS[self.distribution][0]

    @property
    def sigma(self) -> float:
        return MULTIPLIER_DISTRIBUTIONS[self.distribution][1]


class MultiplierDraw(NamedTuple):
    xi: np.ndarray          # raw positive draws
    normalized: np.ndarray  # m_i = xi_i / mean(xi), averaging 1


def draw_multipliers(spec: MultiplierSpec, n: int,
                     replicate: int | None = None) -> MultiplierDraw:
    """Draw n multipliers from the stream for (seed, replicate)."""
    if n < 2:
        raise ConfigError("config.too_few_observations",
                          "need at least 2 observations to bootstrap")
    seed = [spec.seed] if replicate is None else [spec.seed, replicate]
    rng = np.random.default_rng(seed)
    xi = MULTIPLIER_DISTRIBUTIONS[spec.distribution][2](rng, n)
    return MultiplierDraw(xi=xi, normalized=xi / xi.mean())


def bootstrap_replicate(sample: Sample, x0, family: Family,
                        estimator_config: EstimatorConfig, m,
                        solver_cfg: SolverConfig = DEFAULT_CONFIG) -> np.ndarray:
    """One bootstrap solve: the whole pipeline re-run under multipliers m."""
    result = estimate(sample, x0, family, estimator_config,
                      solver_cfg=solver_cfg, multipliers=m)
    return result.theta


@dataclass
class BandResult:
    """Pointwise and uniform (sup-norm) confidence bands over the grid.

    For the IV family the band axis runs over the K coefficients instead of
    the (singleton) index grid.  By construction each band contains the point
    estimate and the uniform band contains the pointwise band.
    """

    alpha: float
    pointwise_lower: np.ndarray
    pointwise_upper: np.ndarray
    uniform_lower: np.ndarray
    uniform_upper: np.ndarray
    replicates: np.ndarray
    n_failed: int = 0


def confidence_bands(theta_hat, replicates, alpha: float,
                     mu_over_sigma: float = 1.0) -> BandResult:
    """Quantile bands from replicate deviations.

    Pointwise: theta_hat + [q_{a/2}, q_{1-a/2}] of D_bt = (mu/sigma) *
    (theta_tilde_bt - theta_hat_t).  Uniform: theta_hat +/- q_{1-a} of
    sup_t |D_bt|, widened where needed to contain the pointwise band.
    Quantiles interpolate order statistics linearly (type 7).  Replicate rows
    containing non-finite values are excluded and counted.
    """
    if not (0.0 < alpha < 1.0):
        raise ConfigError("config.bad_alpha", "alpha must be in (0, 1)")
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float)).reshape(-1)
    reps = np.asarray(replicates, dtype=float)
    if reps.ndim == 1:
        reps = reps[:, None]
    reps = reps.reshape(reps.shape[0], -1)
    if reps.shape[1] != theta_hat.size:
        raise ConfigError("config.band_shape",
                          "replicate columns must match theta_hat length")
    ok = np.all(np.isfinite(reps), axis=1)
    n_failed = int(np.sum(~ok))
    valid = reps[ok]
    if valid.shape[0] == 0:
        raise SolverError("bootstrap.all_failed", "every replicate failed")
    if valid.shape[0] < 50 and alpha <= 0.1:
        warnings.warn(
            f"only {valid.shape[0]} valid replicates for alpha={alpha}; "
            f"band quantiles will be noisy", stacklevel=2)
    delta = mu_over_sigma * (valid - theta_hat[None, :])
    q_lo = np.quantile(delta, alpha / 2.0, axis=0, method="linear")
    q_hi = np.quantile(delta, 1.0 - alpha / 2.0, axis=0, method="linear")
    pw_lo = theta_hat + np.minimum(q_lo, 0.0)
    pw_hi = theta_hat + np.maximum(q_hi, 0.0)
    sup = np.max(np.abs(delta), axis=1)
    crit = float(np.quantile(sup, 1.0 - alpha, method="linear"))
    un_lo = np.minimum(pw_lo, theta_hat - crit)
    un_hi = np.maximum(pw_hi, theta_hat + crit)
    return BandResult(alpha=alpha, pointwise_lower=pw_lo, pointwise_upper=pw_hi,
                      uniform_lower=un_lo, uniform_upper=un_hi,
                      replicates=reps, n_failed=n_failed)


def run_bootstrap(sample: Sample, x0, family: Family,
                  estimator_config: EstimatorConfig, spec: MultiplierSpec,
                  alpha: float = 0.1,
                  solver_cfg: SolverConfig = DEFAULT_CONFIG,
                  threads: int = 1) -> EstimateResult:
    """Point estimate plus B replicate solves and confidence bands.

    Failed replicates (degenerate weights under an extreme multiplier draw,
    solver failures) become NaN rows, are excluded from the bands, and are
    counted in the diagnostics; more than 10% failures raises a warning.
    """
    point = estimate(sample, x0, family, estimator_config,
                     solver_cfg=solver_cfg)
    flat = np.atleast_1d(point.theta).reshape(-1)
    draws = np.full((spec.B, flat.size), np.nan)
    failures: list = []

    def one(b: int):
        m = draw_multipliers(spec, sample.n, replicate=b).normalized
        return bootstrap_replicate(sample, x0, family, estimator_config, m,
                                   solver_cfg=solver_cfg).reshape(-1)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {b: pool.submit(one, b) for b in range(spec.B)}
            for b, fut in futures.items():
                try:
                    draws[b] = fut.result()
                except EecopError as err:
                    failures.append((b, err.code))
    else:
        for b in range(spec.B):
            try:
                draws[b] = one(b)
            except EecopError as err:
                failures.append((b, err.code))

    if len(failures) > 0.1 * spec.B:
        warnings.warn(f"{len(failures)} of {spec.B} bootstrap replicates "
                      f"failed", stacklevel=2)
    bands = confidence_bands(flat, draws, alpha,
                             mu_over_sigma=spec.mu / spec.sigma)
    diagnostics = dict(point.diagnostics)
    diagnostics["bootstrap"] = {
        "B": spec.B,
        "seed": spec.seed,
        "distribution": spec.distribution,
        "failed_replicates": len(failures),
        "failures": failures,
    }
    return EstimateResult(x0=point.x0, t_grid=point.t_grid, theta=point.theta,
                          derivatives=point.derivatives,
                          diagnostics=diagnostics, boot_draws=draws,
                          bands=bands)


def save_replicates(draws: np.ndarray, path, labels=None) -> None:
    """Dump the replicate matrix to CSV for external analysis."""
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    if labels is None:
        labels = [f"c{j + 1}" for j in range(draws.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["replicate", *labels])
        for b, row in enumerate(draws):
            writer.writerow([b, *[repr(float(v)) for v in row]])
