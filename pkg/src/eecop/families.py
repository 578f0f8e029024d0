"""Identifying functions psi and their derivative maps.

Five families are built in:

- ``mean``:      psi(y) = y - theta
- ``quantile``:  psi(y) = t 1(y >= theta) - (1 - t) 1(y < theta)
- ``expectile``: psi(y) = t (y - theta) 1(y >= theta) - (1 - t)(theta - y) 1(y < theta)
- ``expfam``:    psi(y) = a(y) - b'(theta) for a one-parameter exponential
  family with sufficient statistic a and log-partition b
- ``iv_linear``: psi(y1, y2, y3) = b(y3) (y1 - theta' b(y2)) for a polynomial
  basis b; y2 is the treatment, y3 the instrument

The quantile indicator uses the >=/< convention throughout; the two
conventions differ only on exact data ties and the weighted-quantile scan in
the solver is stated for >=/<.

Derivative estimates are plug-ins with self-normalized weights.  They feed
diagnostics and the machinery is never on the critical path of the solvers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import IndexGrid
from .errors import ConfigError, SolverError
from .margins import fit_kernel_margin

IV_MAX_CONDITION = 1e12


@dataclass(frozen=True)
class ExpFamSpec:
    """One-parameter exponential family in canonical form.

    ``mean_range`` is the open range of b'; the estimating equation is only
    solvable when the weighted mean of a(y) falls inside it.
    """

    name: str
    a: Callable
    b_prime: Callable
    b_double_prime: Callable
    mean_range: tuple


def _logistic(t):
    return 1.0 / (1.0 + np.exp(-t))


EXPFAM_REGISTRY = {
    "gaussian": ExpFamSpec(
        name="gaussian",
        a=lambda y: y,
        b_prime=lambda t: t,
        b_double_prime=lambda t: np.ones_like(np.asarray(t, dtype=float)),
        mean_range=(-np.inf, np.inf),
    ),
    "poisson": ExpFamSpec(
        name="poisson",
        a=lambda y: y,
        b_prime=np.exp,
        b_double_prime=np.exp,
        mean_range=(0.0, np.inf),
    ),
    "bernoulli": ExpFamSpec(
        name="bernoulli",
        a=lambda y: y,
        b_prime=_logistic,
        b_double_prime=lambda t: _logistic(t) * (1.0 - _logistic(t)),
        mean_range=(0.0, 1.0),
    ),
}


def get_expfam(name: str) -> ExpFamSpec:
    try:
        return EXPFAM_REGISTRY[name]
    except KeyError:
        raise ConfigError(
            "config.unknown_expfam",
            f"unknown exponential family {name!r}; "
            f"choose from {sorted(EXPFAM_REGISTRY)}") from None


@dataclass(frozen=True)
class PolynomialBasis:
    """b(y) = (1, y, ..., y^degree)."""

    degree: int

    def __post_init__(self):
        if self.degree < 0:
            raise ConfigError("config.bad_basis", "basis degree must be >= 0")

    @property
    def k(self) -> int:
        return self.degree + 1

    def __call__(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        return np.vander(y, self.k, increasing=True)


@dataclass(frozen=True)
class Family:
    """An identifying-function family together with its index grid."""

    kind: str
    t_grid: IndexGrid
    expfam: ExpFamSpec | None = None
    basis: PolynomialBasis | None = None

    @property
    def indexed(self) -> bool:
        return self.kind in ("quantile", "expectile")

    @property
    def response_dim(self) -> int:
        return 3 if self.kind == "iv_linear" else 1

    @property
    def theta_dim(self) -> int:
        return self.basis.k if self.kind == "iv_linear" else 1


def mean_family() -> Family:
    return Family(kind="mean", t_grid=IndexGrid.unindexed())


def quantile_family(t_values) -> Family:
    return Family(kind="quantile", t_grid=IndexGrid(tuple(t_values)))


def expectile_family(t_values) -> Family:
    return Family(kind="expectile", t_grid=IndexGrid(tuple(t_values)))


def expfam_family(spec) -> Family:
    if isinstance(spec, str):
        spec = get_expfam(spec)
    return Family(kind="expfam", t_grid=IndexGrid.unindexed(), expfam=spec)


def iv_family(degree: int = 1) -> Family:
    return Family(kind="iv_linear", t_grid=IndexGrid.unindexed(),
                  basis=PolynomialBasis(degree))


def psi(family: Family, theta, t: float, y):
    """Evaluate the identifying function at (theta, t) on response value(s) y.

    Returns an array of shape (n,) for scalar families and (n, K) for the IV
    family (or the unbatched equivalent for a single point).
    """
    kind = family.kind
    if kind == "iv_linear":
        y_arr = np.atleast_2d(np.asarray(y, dtype=float))
        theta = np.asarray(theta, dtype=float).reshape(-1)
        b2 = family.basis(y_arr[:, 1])
        b3 = family.basis(y_arr[:, 2])
        resid = y_arr[:, 0] - b2 @ theta
        out = b3 * resid[:, None]
        return out[0] if np.asarray(y).ndim == 1 else out
    y_arr = np.asarray(y, dtype=float)
    theta = float(theta)
    if kind == "mean":
        return y_arr - theta
    if kind == "quantile":
        return np.where(y_arr >= theta, t, -(1.0 - t))
    if kind == "expectile":
        slope = np.where(y_arr >= theta, t, 1.0 - t)
        return slope * (y_arr - theta)
    if kind == "expfam":
        return family.expfam.a(y_arr) - family.expfam.b_prime(theta)
    raise ConfigError("config.unknown_family", f"unknown family kind {kind!r}")


@dataclass(frozen=True)
class DerivativeInfo:
    """Estimated derivative of theta -> E{psi_(theta,t)(Y) w_x(Y)} at theta-hat.

    Scalar for scalar families, K x K for the IV family.  The theory requires
    it nonsingular; the expectile version is always < 0.
    """

    V: object


def estimate_V(family: Family, theta, t: float, y, w) -> DerivativeInfo:
    """Empirical plug-in derivative with self-normalized weights.

    mean: -1 (the t = 1/2 expectile embedding gives -1/2; the sign and scale
    are immaterial to the solvers, which never divide by V).
    quantile: minus a weighted kernel density of y at theta-hat.
    expectile: (2t - 1) F-hat - t with F-hat the weighted CDF at theta-hat.
    expfam: -b''(theta-hat).
    iv: -sum_i w_i b(y3_i) b(y2_i)'.
    """
    w = np.asarray(w, dtype=float)
    wn = w / w.sum()
    if family.kind == "mean":
        return DerivativeInfo(V=-1.0)
    if family.kind == "quantile":
        y_arr = np.asarray(y, dtype=float)
        km = fit_kernel_margin(y_arr, "normal_reference", m=wn * y_arr.size)
        return DerivativeInfo(V=-float(km.pdf(float(theta))))
    if family.kind == "expectile":
        y_arr = np.asarray(y, dtype=float)
        f_hat = float(wn @ (y_arr <= float(theta)))
        return DerivativeInfo(V=(2.0 * t - 1.0) * f_hat - t)
    if family.kind == "expfam":
        return DerivativeInfo(V=-float(family.expfam.b_double_prime(float(theta))))
    if family.kind == "iv_linear":
        y_arr = np.atleast_2d(np.asarray(y, dtype=float))
        b2 = family.basis(y_arr[:, 1])
        b3 = family.basis(y_arr[:, 2])
        V = -(b3 * wn[:, None]).T @ b2
        cond = np.linalg.cond(V)
        if not np.isfinite(cond) or cond >= IV_MAX_CONDITION:
            raise SolverError(
                "solver.singular_iv",
                f"instrument-treatment moment matrix is ill-conditioned "
                f"(condition number {cond:.3e})")
        return DerivativeInfo(V=V)
    raise ConfigError("config.unknown_family",
                      f"unknown family kind {family.kind!r}")
