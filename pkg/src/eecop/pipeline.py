"""End-to-end estimation pipeline: margins -> PIT -> copula -> weights -> solve.

The same path serves the point estimate and every bootstrap replicate; a
replicate simply passes observation multipliers through each stage.  With
unit multipliers the replicate reproduces the point estimate bit for bit
because there is only one code path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .copula import fit_gaussian_copula, fit_kernel_copula
from .data import EstimateResult, PseudoSample, Sample, pit
from .errors import ConfigError
from .families import Family
from .margins import fit_gaussian_margin, fit_kernel_margin
from .solver import DEFAULT_CONFIG, SolverConfig, solve_path
from .weights import WeightFn, build_weight_fn

WEIGHT_ESTIMATORS = ("parametric_gaussian", "kernel")


@dataclass(frozen=True)
class EstimatorConfig:
    """Which weight estimator to use and its bandwidth overrides.

    ``parametric_gaussian``: Gaussian margins + Gaussian copula, both by
    weighted maximum likelihood.  ``kernel``: integrated-kernel margins +
    product-kernel copula density.  Bandwidths accept the named rules of the
    margin/copula modules or a fixed positive number.
    """

    weights_estimator: str = "parametric_gaussian"
    margin_bandwidth: object = "normal_reference"
    copula_bandwidth: object = "paper_rate"

    def __post_init__(self):
        if self.weights_estimator not in WEIGHT_ESTIMATORS:
            raise ConfigError(
                "config.unknown_weights_estimator",
                f"weights estimator must be one of {WEIGHT_ESTIMATORS}, "
                f"got {self.weights_estimator!r}")


@dataclass(frozen=True)
class FittedJoint:
    """Fitted margins and copulas, reusable across conditioning points."""

    margins: tuple
    copula: object
    y_copula: object | None
    pseudo: PseudoSample
    q: int
    p: int


def fit_joint(sample: Sample, cfg: EstimatorConfig,
              multipliers=None) -> FittedJoint:
    """Fit all margins and the copula(s), optionally multiplier-weighted."""
    cols = sample.columns()
    if cfg.weights_estimator == "parametric_gaussian":
        margins = tuple(fit_gaussian_margin(cols[:, j], m=multipliers)
                        for j in range(cols.shape[1]))
    else:
        margins = tuple(
            fit_kernel_margin(cols[:, j], cfg.margin_bandwidth, m=multipliers)
            for j in range(cols.shape[1]))
    pseudo = pit(sample, margins)
    if cfg.weights_estimator == "parametric_gaussian":
        copula = fit_gaussian_copula(pseudo, m=multipliers)
        y_copula = (copula.marginal(range(sample.q))
                    if sample.q >= 2 and sample.p >= 1 else None)
    else:
        copula = fit_kernel_copula(pseudo, cfg.copula_bandwidth, m=multipliers)
        if sample.q >= 2 and sample.p >= 1:
            y_copula = fit_kernel_copula(
                PseudoSample(u=pseudo.u[:, :sample.q]),
                cfg.copula_bandwidth, m=multipliers)
        else:
            y_copula = None
    return FittedJoint(margins=margins, copula=copula, y_copula=y_copula,
                       pseudo=pseudo, q=sample.q, p=sample.p)


def weight_fn_for(joint: FittedJoint, x0) -> WeightFn:
    """Weight function at one conditioning point from a fitted joint model."""
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (joint.p,):
        raise ConfigError("config.bad_x0",
                          f"x0 must have length p = {joint.p}")
    return build_weight_fn(joint.margins, joint.copula, x0,
                           y_copula=joint.y_copula)


def fit_weight_fn(sample: Sample, x0, cfg: EstimatorConfig,
                  multipliers=None) -> WeightFn:
    return weight_fn_for(fit_joint(sample, cfg, multipliers=multipliers), x0)


def estimate(sample: Sample, x0, family: Family, cfg: EstimatorConfig,
             solver_cfg: SolverConfig = DEFAULT_CONFIG,
             multipliers=None) -> EstimateResult:
    """Full pipeline solve at one conditioning point.

    With ``multipliers`` given, every stage (margin fits, copula fit, weight
    evaluation, estimating equation) is reweighted — this is one bootstrap
    replicate.
    """
    wfn = fit_weight_fn(sample, x0, cfg, multipliers=multipliers)
    return solve_path(family, sample, wfn, multipliers=multipliers,
                      cfg=solver_cfg)
