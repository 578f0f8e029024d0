"""One-dimensional marginal models: parametric Gaussian and integrated-kernel.

Both models expose ``cdf``, ``pdf`` and work with :func:`margin_quantile`.
Fits accept optional per-observation multipliers so the bootstrap can reuse
the same code path; a fit with unit multipliers is bit-identical to the
unweighted fit because there is only one code path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import FitError

_SQRT_2PI = np.sqrt(2.0 * np.pi)

# Kernel CDF/PDF evaluations build an (m, n) matrix of standardized
# differences; chunk the query axis to bound peak memory.
_CHUNK = 4096


def _norm_pdf(z):
    return np.exp(-0.5 * np.square(z)) / _SQRT_2PI


def _check_multipliers(n: int, m) -> np.ndarray | None:
    if m is None:
        return None
    m = np.asarray(m, dtype=float)
    if m.shape != (n,):
        raise FitError("margins.multiplier_length",
                       f"multipliers must have length {n}")
    if np.any(m < 0.0) or not np.all(np.isfinite(m)):
        raise FitError("margins.multiplier_negative",
                       "multipliers must be finite and nonnegative")
    if m.sum() <= 0.0:
        raise FitError("margins.multiplier_zero_sum",
                       "multipliers must have positive sum")
    return m


def _weighted_moments(z: np.ndarray, m: np.ndarray | None):
    """Weighted mean and MLE variance (1/n denominator, matching ML fits).

    m = None takes the same code path as unit multipliers so that
    multiplier-weighted refits with m = 1 are bit-identical to plain fits.
    """
    if m is None:
        m = np.ones(z.size)
    w = m / m.sum()
    mu = float(w @ z)
    var = float(w @ np.square(z - mu))
    return mu, var


@dataclass(frozen=True)
class GaussianMargin:
    """Normal distribution N(mu, sigma^2) fitted by maximum likelihood."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not (self.sigma > 0.0 and np.isfinite(self.sigma)):
            raise FitError("margins.bad_sigma", "sigma must be positive and finite")

    def cdf(self, y):
        return ndtr((np.asarray(y, dtype=float) - self.mu) / self.sigma)

    def pdf(self, y):
        z = (np.asarray(y, dtype=float) - self.mu) / self.sigma
        return _norm_pdf(z) / self.sigma

    def quantile(self, t: float) -> float:
        return self.mu + self.sigma * float(ndtri(t))


@dataclass(frozen=True)
class KernelMargin:
    """Gaussian-kernel estimate of a univariate CDF/density.

    CDF(y)  = sum_i m_i Phi((y - z_i)/b) / sum_i m_i
    pdf(y)  = sum_i m_i phi((y - z_i)/b) / (b sum_i m_i)
    """

    centers: np.ndarray
    b: float
    multipliers: np.ndarray | None = None

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=float)
        object.__setattr__(self, "centers", centers)
        if centers.ndim != 1 or centers.size < 2:
            raise FitError("margins.too_few_points",
                           "kernel margin needs at least 2 data points")
        if not (self.b > 0.0 and np.isfinite(self.b)):
            raise FitError("margins.bad_bandwidth", "bandwidth must be positive")
        m = _check_multipliers(centers.size, self.multipliers)
        object.__setattr__(self, "multipliers", m)
        centers.setflags(write=False)
        if m is not None:
            m.setflags(write=False)

    def _weights(self) -> tuple[np.ndarray, float]:
        # None takes the unit-multiplier path so m = 1 refits are bit-identical
        m = self.multipliers
        if m is None:
            m = np.ones(self.centers.size)
        return m, float(m.sum())

    def cdf(self, y):
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        m, total = self._weights()
        out = np.empty_like(y_arr)
        for lo in range(0, y_arr.size, _CHUNK):
            block = y_arr[lo:lo + _CHUNK, None]
            terms = ndtr((block - self.centers[None, :]) / self.b)
            out[lo:lo + _CHUNK] = (terms @ m) / total
        return out if np.ndim(y) else float(out[0])

    def pdf(self, y):
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        m, total = self._weights()
        out = np.empty_like(y_arr)
        for lo in range(0, y_arr.size, _CHUNK):
            block = y_arr[lo:lo + _CHUNK, None]
            terms = _norm_pdf((block - self.centers[None, :]) / self.b)
            out[lo:lo + _CHUNK] = (terms @ m) / (self.b * total)
        return out if np.ndim(y) else float(out[0])

    def quantile(self, t: float) -> float:
        return margin_quantile(self, t)


def fit_gaussian_margin(z, m=None) -> GaussianMargin:
    """Weighted maximum-likelihood normal fit (variance denominator 1/n)."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size < 2:
        raise FitError("margins.too_few_points", "need at least 2 data points")
    m = _check_multipliers(z.size, m)
    mu, var = _weighted_moments(z, m)
    if var <= 0.0:
        raise FitError("margins.degenerate",
                       "all observations identical; margin is degenerate")
    return GaussianMargin(mu=mu, sigma=float(np.sqrt(var)))


def normal_reference_bandwidth(z, m=None) -> float:
    """Normal-reference rule 1.06 * sigma_hat * n^(-1/5).

    sigma_hat is the weighted MLE standard deviation so multiplier-weighted
    refits reuse the same rule.
    """
    z = np.asarray(z, dtype=float)
    _, var = _weighted_moments(z, _check_multipliers(z.size, m))
    if var <= 0.0:
        raise FitError("margins.degenerate", "degenerate data; no bandwidth")
    return 1.06 * float(np.sqrt(var)) * z.size ** (-0.2)


def fit_kernel_margin(z, bandwidth_rule="normal_reference", m=None) -> KernelMargin:
    """Gaussian-kernel CDF fit.

    ``bandwidth_rule`` is either the string ``"normal_reference"`` or a fixed
    positive bandwidth.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.size < 2:
        raise FitError("margins.too_few_points", "need at least 2 data points")
    m = _check_multipliers(z.size, m)
    if isinstance(bandwidth_rule, str):
        if bandwidth_rule != "normal_reference":
            raise FitError("margins.unknown_bandwidth_rule",
                           f"unknown bandwidth rule {bandwidth_rule!r}")
        b = normal_reference_bandwidth(z, m)
    else:
        b = float(bandwidth_rule)
        if b <= 0.0:
            raise FitError("margins.bad_bandwidth",
                           "fixed bandwidth must be positive")
        if np.ptp(z) == 0.0:
            raise FitError("margins.degenerate",
                           "all observations identical; margin is degenerate")
    return KernelMargin(centers=z, b=b, multipliers=m)


def margin_quantile(model, t: float) -> float:
    """Invert a marginal CDF at level t in (0, 1).

    Gaussian margins invert in closed form; kernel margins bisect the CDF to
    |F(y) - t| <= 1e-10 on a bracket expanded geometrically from the data
    range.
    """
    if not (0.0 < t < 1.0):
        raise FitError("margins.bad_level", "quantile level must be in (0, 1)")
    if isinstance(model, GaussianMargin):
        return model.quantile(t)
    if not isinstance(model, KernelMargin):
        raise FitError("margins.unknown_model",
                       f"cannot invert {type(model).__name__}")
    lo = float(np.min(model.centers))
    hi = float(np.max(model.centers))
    step = max(hi - lo, model.b, 1.0)
    while model.cdf(lo) > t:
        lo -= step
        step *= 2.0
    step = max(hi - lo, model.b, 1.0)
    while model.cdf(hi) < t:
        hi += step
        step *= 2.0
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        f = model.cdf(mid)
        if abs(f - t) <= 1e-10:
            return mid
        if f < t:
            lo = mid
        else:
            hi = mid
    raise FitError("margins.quantile_no_convergence",
                   f"bisection did not reach |F - t| <= 1e-10 at t={t}")
