"""Weight functions: the copula-density ratio that converts a conditional
estimating equation at X = x into an unconditional weighted one.

For a response block y and conditioning point x0,

    w_x0(y) = c_{Y,X}(F_Y1(y_1), ..., F_Xp(x0_p)) / c_Y(F_Y1(y_1), ..., F_Yq(y_q)),

with the denominator identically 1 for a univariate response.  The covariate
copula density c_X(u_x) is deliberately not divided out: it is a positive
constant in y and has no effect on the root of the estimating equation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PIT_EPS, Sample
from .errors import FitError

# Below this total mass the estimating equation has no usable support.
DEGENERATE_WEIGHT_SUM = 1e-300


@dataclass(frozen=True)
class WeightFn:
    """Evaluable map y -> w_x0(y) >= 0 for a fixed conditioning point x0.

    Defined up to a positive constant; solvers normalize it away.  With
    ``p == 0`` the weight is identically one (unconditional estimation) and
    no copula is evaluated.
    """

    margins: tuple
    copula: object
    y_copula: object | None
    x0: np.ndarray
    u_x: np.ndarray

    @property
    def p(self) -> int:
        return self.x0.shape[0]

    @property
    def q(self) -> int:
        return len(self.margins) - self.p

    def evaluate(self, y):
        """Weights at response value(s) y: (q,) or (m, q) -> float or (m,)."""
        y_arr = np.asarray(y, dtype=float)
        single = y_arr.ndim <= 1 and self.q == 1 and y_arr.size == 1
        if y_arr.ndim == 0:
            y_arr = y_arr.reshape(1, 1)
        elif y_arr.ndim == 1:
            y_arr = y_arr[:, None] if self.q == 1 else y_arr[None, :]
        if y_arr.shape[1] != self.q:
            raise FitError("weights.bad_response_dim",
                           f"expected {self.q} response columns")
        if self.p == 0:
            out = np.ones(y_arr.shape[0])
            return float(out[0]) if single else out
        u_y = np.empty_like(y_arr)
        for j in range(self.q):
            u_y[:, j] = self.margins[j].cdf(y_arr[:, j])
        np.clip(u_y, PIT_EPS, 1.0 - PIT_EPS, out=u_y)
        pts = np.hstack([u_y, np.broadcast_to(self.u_x, (u_y.shape[0], self.p))])
        numer = self.copula.density(pts)
        if self.q == 1:
            out = np.atleast_1d(numer)
        else:
            out = np.atleast_1d(numer) / np.atleast_1d(self.y_copula.density(u_y))
        return float(out[0]) if single else out


def build_weight_fn(margins, copula, x0, y_copula=None) -> WeightFn:
    """Assemble a weight function from fitted margins and copulas.

    ``margins`` holds q response margins followed by p covariate margins;
    ``y_copula`` (the copula of the response block alone) is required exactly
    when q >= 2 and p >= 1.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    p = x0.shape[0]
    d = len(margins)
    q = d - p
    if q < 1:
        raise FitError("weights.bad_dimensions",
                       f"{d} margins with p={p} covariates leaves no response")
    if p > 0 and copula.d != d:
        raise FitError("weights.copula_dim",
                       f"copula dimension {copula.d} != q + p = {d}")
    if q >= 2 and p >= 1 and y_copula is None:
        raise FitError("weights.y_copula_required",
                       "q >= 2 requires the copula of the response block")
    if q == 1 and y_copula is not None:
        raise FitError("weights.y_copula_forbidden",
                       "the weight denominator is identically 1 for q = 1")
    if y_copula is not None and y_copula.d != q:
        raise FitError("weights.y_copula_dim",
                       f"response copula dimension {y_copula.d} != q = {q}")
    if p > 0:
        u_x = np.array([margins[q + k].cdf(x0[k]) for k in range(p)])
        u_x = np.clip(u_x, PIT_EPS, 1.0 - PIT_EPS)
    else:
        u_x = np.empty(0)
    u_x.setflags(write=False)
    x0.setflags(write=False)
    return WeightFn(margins=tuple(margins), copula=copula,
                    y_copula=y_copula, x0=x0, u_x=u_x)


def evaluate_weights(w: WeightFn, sample: Sample) -> np.ndarray:
    """Weights at every sample response, with a degeneracy guard."""
    out = np.atleast_1d(w.evaluate(sample.y))
    if not np.all(np.isfinite(out)) or np.any(out < 0.0):
        raise FitError("weights.invalid", "weights must be finite and >= 0")
    if out.sum() < DEGENERATE_WEIGHT_SUM:
        raise FitError("weights.degenerate",
                       "weight vector is numerically zero; the estimating "
                       "equation has no support at this conditioning point")
    return out


def effective_sample_size(w: np.ndarray) -> float:
    """(sum w)^2 / sum w^2 — how many equally-weighted points w is worth."""
    w = np.asarray(w, dtype=float)
    denom = float(np.sum(np.square(w)))
    if denom == 0.0:
        return 0.0
    return float(np.sum(w)) ** 2 / denom
