"""Copula density models on the uniform scale.

Two families: a Gaussian copula parameterized by a correlation matrix and
fitted by normal-scores correlation (the one-step version of two-step
maximum likelihood), and a product-Gaussian-kernel copula density over
pseudo-observations.  Both fits accept optional observation multipliers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .data import PseudoSample
from .errors import FitError
from .margins import _check_multipliers

_LOG_2PI = np.log(2.0 * np.pi)

# Kernel density evaluation materializes an (m, n) distance matrix; chunk the
# query axis to bound memory.
_CHUNK = 1024

_EIG_FLOOR = 1e-8


def _project_correlation(S: np.ndarray, floor: float = _EIG_FLOOR) -> np.ndarray:
    """Nearest-ish valid correlation matrix: eigenvalue clip + diagonal rescale.

    Alternates the two repairs a few times; multiplier-weighted correlations
    can leave the PSD cone, and rescaling the diagonal after a clip can push
    the smallest eigenvalue slightly below the floor again.
    """
    R = 0.5 * (S + S.T)
    np.fill_diagonal(R, 1.0)
    for _ in range(20):
        w, V = np.linalg.eigh(R)
        if w.min() >= floor * (1.0 - 1e-9):
            break
        w = np.clip(w, floor, None)
        R = (V * w) @ V.T
        d = np.sqrt(np.diag(R))
        R = R / np.outer(d, d)
        R = 0.5 * (R + R.T)
        np.fill_diagonal(R, 1.0)
    return R


@dataclass(frozen=True)
class GaussianCopula:
    """Gaussian copula with correlation matrix R (d = q + p)."""

    R: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        object.__setattr__(self, "R", R)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise FitError("copula.bad_shape", "R must be square")
        if not np.allclose(R, R.T, atol=1e-10):
            raise FitError("copula.not_symmetric", "R must be symmetric")
        if not np.allclose(np.diag(R), 1.0, atol=1e-10):
            raise FitError("copula.bad_diagonal", "R must have unit diagonal")
        eigvals = np.linalg.eigvalsh(R)
        if eigvals.min() < 0.99 * _EIG_FLOOR:
            raise FitError("copula.not_psd",
                           "R has an eigenvalue below the 1e-8 floor; "
                           "project it first")
        if np.array_equal(R, np.eye(R.shape[0])):
            # Independence copula: density is exactly 1 everywhere.
            prec  = np.zeros_like(R)
            log_c = 0.0
        else:
            prec = np.linalg.inv(R) - np.eye(R.shape[0])
            sign, logdet = np.linalg.slogdet(R)
            if sign <= 0:
                raise FitError("copula.not_psd", "R is numerically singular")
            log_c = -0.5 * logdet
        object.__setattr__(self, "_prec", prec)
        object.__setattr__(self, "_log_const", log_c)
        R.setflags(write=False)

    @property
    def d(self) -> int:
        return self.R.shape[0]

    def density(self, u):
        """Copula density at interior point(s) u: (d,) or (m, d)."""
        u_arr = np.asarray(u, dtype=float)
        single = u_arr.ndim == 1
        u_arr = np.atleast_2d(u_arr)
        if u_arr.shape[1] != self.d:
            raise FitError("copula.dim_mismatch",
                           f"expected dimension {self.d}, got {u_arr.shape[1]}")
        if not np.all((u_arr > 0.0) & (u_arr < 1.0)):
            raise FitError("copula.point_out_of_range",
                           "density requires points strictly inside (0, 1)^d")
        z = ndtri(u_arr)
        quad = np.einsum("ij,jk,ik->i", z, self._prec, z)
        out = np.exp(self._log_const - 0.5 * quad)
        return float(out[0]) if single else out

    def marginal(self, idx) -> "GaussianCopula":
        """Copula of a sub-block of coordinates (exact for the Gaussian family)."""
        idx = np.asarray(idx, dtype=int)
        return GaussianCopula(R=self.R[np.ix_(idx, idx)])


@dataclass(frozen=True)
class KernelCopula:
    """Product-Gaussian-kernel copula density over pseudo-observations.

    ``h`` is a scalar bandwidth or a length-d vector (diagonal bandwidth).
    """

    pseudo_obs: np.ndarray
    h: np.ndarray
    multipliers: np.ndarray | None = None

    def __post_init__(self):
        P = np.asarray(self.pseudo_obs, dtype=float)
        object.__setattr__(self, "pseudo_obs", P)
        if P.ndim != 2:
            raise FitError("copula.bad_shape", "pseudo_obs must be a matrix")
        if not np.all((P > 0.0) & (P < 1.0)):
            raise FitError("copula.pseudo_out_of_range",
                           "pseudo-observations must lie in (0, 1)")
        h = np.atleast_1d(np.asarray(self.h, dtype=float))
        if h.size == 1:
            h = np.full(P.shape[1], float(h[0]))
        if h.shape != (P.shape[1],):
            raise FitError("copula.bad_bandwidth",
                           "bandwidth must be scalar or one value per dimension")
        if not np.all(h > 0.0):
            raise FitError("copula.bad_bandwidth", "bandwidths must be positive")
        object.__setattr__(self, "h", h)
        m = _check_multipliers(P.shape[0], self.multipliers)
        object.__setattr__(self, "multipliers", m)
        P.setflags(write=False)
        h.setflags(write=False)
        if m is not None:
            m.setflags(write=False)

    @property
    def d(self) -> int:
        return self.pseudo_obs.shape[1]

    @property
    def n(self) -> int:
        return self.pseudo_obs.shape[0]

    def density(self, u):
        """Weighted product-kernel density at point(s) u: (d,) or (m, d)."""
        u_arr = np.asarray(u, dtype=float)
        single = u_arr.ndim == 1
        u_arr = np.atleast_2d(u_arr)
        if u_arr.shape[1] != self.d:
            raise FitError("copula.dim_mismatch",
                           f"expected dimension {self.d}, got {u_arr.shape[1]}")
        if not np.all((u_arr > 0.0) & (u_arr < 1.0)):
            raise FitError("copula.point_out_of_range",
                           "density requires points strictly inside (0, 1)^d")
        # None takes the unit-multiplier path so m = 1 refits are bit-identical
        m = self.multipliers
        if m is None:
            m = np.ones(self.n)
        # log normalizer: (2 pi)^(d/2) * prod(h) * sum(m)
        norm = np.exp(0.5 * self.d * _LOG_2PI + np.log(self.h).sum()) * float(m.sum())
        B = self.pseudo_obs / self.h
        b_sq = np.einsum("ij,ij->i", B, B)
        out = np.empty(u_arr.shape[0])
        for lo in range(0, u_arr.shape[0], _CHUNK):
            A = u_arr[lo:lo + _CHUNK] / self.h
            sqdist = (np.einsum("ij,ij->i", A, A)[:, None] + b_sq[None, :]
                      - 2.0 * A @ B.T)
            np.clip(sqdist, 0.0, None, out=sqdist)
            K = np.exp(-0.5 * sqdist)
            out[lo:lo + _CHUNK] = (K @ m) / norm
        return float(out[0]) if single else out

    def marginal(self, idx) -> "KernelCopula":
        """Kernel fit restricted to a coordinate sub-block (same h, multipliers)."""
        idx = np.asarray(idx, dtype=int)
        return KernelCopula(pseudo_obs=self.pseudo_obs[:, idx],
                            h=self.h[idx], multipliers=self.multipliers)


def fit_gaussian_copula(u: PseudoSample, m=None) -> GaussianCopula:
    """Normal-scores correlation fit on pseudo-observations.

    z = Phi^{-1}(u) columnwise; R is the multiplier-weighted sample
    correlation of z, projected back to a valid correlation matrix.
    """
    z = ndtri(u.u)
    n, d = z.shape
    m = _check_multipliers(n, m)
    if m is None:
        m = np.ones(n)
    w = m / m.sum()
    mean = w @ z
    zc = z - mean
    cov = (zc * w[:, None]).T @ zc
    sd = np.sqrt(np.diag(cov))
    if np.any(sd <= 0.0) or not np.all(np.isfinite(sd)):
        raise FitError("copula.constant_column",
                       "a pseudo-observation column is constant")
    corr = cov / np.outer(sd, sd)
    return GaussianCopula(R=_project_correlation(corr))


def gaussian_copula_density(c: GaussianCopula, u):
    """det(R)^(-1/2) exp(-z' (R^{-1} - I) z / 2) with z = Phi^{-1}(u)."""
    return c.density(u)


def paper_rate_bandwidth(n: int, d: int) -> float:
    """Scalar rate n^(-1/(4 + d - 1)): with a univariate response this is the
    n^(-1/(4+p)) rate of the (1+p)-dimensional weight estimator."""
    return float(n) ** (-1.0 / (3.0 + d))


def fit_kernel_copula(u: PseudoSample, bandwidth_rule="paper_rate",
                      m=None) -> KernelCopula:
    """Kernel copula fit on pseudo-observations.

    ``bandwidth_rule`` is one of

    - ``"paper_rate"``: scalar h = n^(-1/(4 + d - 1)),
    - ``"diagonal_rate"``: per-coordinate h_j = n^(-1/(4 + d - 1)) * sd_j,
      with sd_j the (weighted) standard deviation of pseudo-observation
      column j — the diagonal version of the covariance-scaled bandwidth,
    - a fixed positive scalar, or a fixed vector with one value per
      coordinate.
    """
    n, d = u.u.shape
    m = _check_multipliers(n, m)
    if isinstance(bandwidth_rule, str):
        if bandwidth_rule == "paper_rate":
            h = paper_rate_bandwidth(n, d)
        elif bandwidth_rule == "diagonal_rate":
            mw = np.ones(n) if m is None else m
            w = mw / mw.sum()
            mean = w @ u.u
            sd = np.sqrt(w @ np.square(u.u - mean))
            if np.any(sd <= 0.0):
                raise FitError("copula.constant_column",
                               "a pseudo-observation column is constant")
            h = paper_rate_bandwidth(n, d) * sd
        else:
            raise FitError("copula.unknown_bandwidth_rule",
                           f"unknown bandwidth rule {bandwidth_rule!r}")
    else:
        h = np.atleast_1d(np.asarray(bandwidth_rule, dtype=float))
        if np.any(h <= 0.0):
            raise FitError("copula.bad_bandwidth",
                           "fixed bandwidth must be positive")
    return KernelCopula(pseudo_obs=u.u, h=h, multipliers=m)


def kernel_copula_density(c: KernelCopula, u):
    """sum_i m_i prod_j phi((u_j - U_ij)/h_j) / (prod_j h_j * sum_i m_i)."""
    return c.density(u)
