"""Conditional functionals via copula-weighted estimating equations.

The conditional estimating equation E{psi_theta(Y) | X = x} = 0 is replaced
by the unconditional weighted equation E{psi_theta(Y) w_x(Y)} = 0, where the
weight is a ratio of copula densities evaluated at probability-integral
transforms.  The library fits the weight (parametric Gaussian or kernel),
solves the weighted equation for mean, quantile, expectile,
exponential-family, and instrumental-variable targets, and quantifies
uncertainty with a multiplier bootstrap that refits the whole pipeline under
random observation weights.
"""

from .bootstrap import (BandResult, MultiplierSpec, bootstrap_replicate,
                        confidence_bands, draw_multipliers, run_bootstrap)
from .copula import (GaussianCopula, KernelCopula, fit_gaussian_copula,
                     fit_kernel_copula, gaussian_copula_density,
                     kernel_copula_density)
from .data import (EstimateResult, IndexGrid, PseudoSample, Sample,
                   load_sample, pit, rank_pseudo_sample, save_sample)
from .errors import ConfigError, DataError, EecopError, FitError, SolverError
from .families import (DerivativeInfo, ExpFamSpec, Family, PolynomialBasis,
                       estimate_V, expectile_family, expfam_family,
                       get_expfam, iv_family, mean_family, psi,
                       quantile_family)
from .margins import (GaussianMargin, KernelMargin, fit_gaussian_margin,
                      fit_kernel_margin, margin_quantile)
from .pipeline import EstimatorConfig, estimate, fit_joint, fit_weight_fn, weight_fn_for
from .simulate import (DgpSpec, StudySpec, generate, nadaraya_watson_baseline,
                       ols_baseline, rmse_study, true_conditional_mean,
                       true_conditional_quantile)
from .solver import (SolverConfig, equation_value, solve_expectile,
                     solve_expfam, solve_iv, solve_mean, solve_path,
                     solve_quantile)
from .weights import (WeightFn, build_weight_fn, effective_sample_size,
                      evaluate_weights)

__version__ = "0.1.0"

__all__ = [
    "BandResult", "ConfigError", "DataError", "DerivativeInfo", "DgpSpec",
    "EecopError", "EstimateResult", "EstimatorConfig", "ExpFamSpec", "Family",
    "FitError", "GaussianCopula", "GaussianMargin", "IndexGrid",
    "KernelCopula", "KernelMargin", "MultiplierSpec", "PolynomialBasis",
    "PseudoSample", "Sample", "SolverConfig", "SolverError", "StudySpec",
    "WeightFn", "bootstrap_replicate", "build_weight_fn", "confidence_bands",
    "draw_multipliers", "effective_sample_size", "equation_value", "estimate",
    "estimate_V", "evaluate_weights", "expectile_family", "expfam_family",
    "fit_gaussian_copula", "fit_gaussian_margin", "fit_joint",
    "fit_kernel_copula", "fit_kernel_margin", "fit_weight_fn", "generate",
    "gaussian_copula_density", "get_expfam", "iv_family",
    "kernel_copula_density", "load_sample", "margin_quantile", "mean_family",
    "nadaraya_watson_baseline", "ols_baseline", "pit", "psi",
    "quantile_family", "rank_pseudo_sample", "rmse_study", "run_bootstrap",
    "save_sample", "solve_expectile", "solve_expfam", "solve_iv",
    "solve_mean", "solve_path", "solve_quantile", "true_conditional_mean",
    "true_conditional_quantile", "weight_fn_for",
]
