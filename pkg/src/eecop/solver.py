"""Solvers for the weighted estimating equation sum_i w_i psi_theta(y_i) = 0.

Every solver is scale-free in the weights: tolerances apply to the
self-normalized equation value |sum w psi| / sum w, and closed forms divide
the weights out exactly.  Combined weights are the elementwise product of
bootstrap multipliers (if any) and the copula weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import EstimateResult, Sample
from .errors import ConfigError, SolverError
from .families import Family, estimate_V, psi
from .weights import WeightFn, effective_sample_size, evaluate_weights


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances for the iterative solvers.

    ``abs_tol`` applies to the normalized equation value, making it free of
    both the response units' scale ambiguity in the weights and the weight
    scale itself.
    """

    abs_tol: float = 1e-9
    max_iter: int = 200
    bracket_expansion: float = 2.0

    def __post_init__(self):
        if not self.abs_tol > 0.0:
            raise ConfigError("config.bad_tolerance", "abs_tol must be > 0")
        if self.max_iter < 1:
            raise ConfigError("config.bad_max_iter", "max_iter must be >= 1")


DEFAULT_CONFIG = SolverConfig()


def _check_weights(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)) or np.any(w < 0.0):
        raise SolverError("solver.invalid_weights",
                          "weights must be finite and nonnegative")
    if w.sum() <= 0.0:
        raise SolverError("solver.degenerate_weights",
                          "weights sum to zero; equation has no support")
    return w


def equation_value(family: Family, theta, t: float, y, w) -> float:
    """Normalized equation value |sum_i w_i psi(y_i)| / sum_i w_i.

    For the IV family this is the largest absolute component.
    """
    w = np.asarray(w, dtype=float)
    values = psi(family, theta, t, y)
    if values.ndim == 2:
        return float(np.max(np.abs(w @ values)) / w.sum())
    return float(abs(w @ values) / w.sum())


def solve_mean(y, w) -> float:
    """Closed form: weighted mean."""
    y = np.asarray(y, dtype=float)
    w = _check_weights(w)
    return float((w @ y) / w.sum())


def solve_quantile(y, w, t: float) -> float:
    """Weighted quantile by cumulative-weight scan.

    Sort y carrying its weights and return the first order statistic whose
    cumulative weight fraction reaches t.  Under the >=/< indicator
    convention this point is where sum w psi changes sign; when the
    cumulative weight hits t exactly, the lower point is returned.
    """
    y = np.asarray(y, dtype=float)
    w = _check_weights(w)
    if not (0.0 < t < 1.0):
        raise SolverError("solver.bad_level", "quantile level must be in (0, 1)")
    order = np.argsort(y, kind="stable")
    cumfrac = np.cumsum(w[order])
    cumfrac /= cumfrac[-1]
    k = int(np.searchsorted(cumfrac, t, side="left"))
    k = min(k, y.size - 1)
    return float(y[order[k]])


def _expectile_residual(y, w, t, theta) -> float:
    upper = y >= theta
    g = t * (w @ np.where(upper, y - theta, 0.0)) \
        + (1.0 - t) * (w @ np.where(upper, 0.0, y - theta))
    return float(g)


def _solve_expectile(y, w, t, cfg: SolverConfig):
    y = np.asarray(y, dtype=float)
    w = _check_weights(w)
    if not (0.0 < t < 1.0):
        raise SolverError("solver.bad_level", "expectile level must be in (0, 1)")
    total = float(w.sum())
    theta = float((w @ y) / total)
    iters = 0
    for _ in range(cfg.max_iter):
        if abs(_expectile_residual(y, w, t, theta)) / total <= cfg.abs_tol:
            return theta, iters
        upper = y >= theta
        wu = np.where(upper, w, 0.0)
        wl = w - wu
        num = t * (wu @ y) + (1.0 - t) * (wl @ y)
        den = t * wu.sum() + (1.0 - t) * wl.sum()
        theta = float(num / den)
        iters += 1
    # Fixed point stalled; the equation is continuous and strictly
    # decreasing in theta, so bisection on the data range is safe.
    lo, hi = float(np.min(y)), float(np.max(y))
    for _ in range(200):
        theta = 0.5 * (lo + hi)
        g = _expectile_residual(y, w, t, theta)
        if abs(g) / total <= cfg.abs_tol:
            return theta, iters
        if g > 0.0:
            lo = theta
        else:
            hi = theta
        iters += 1
    resid = abs(_expectile_residual(y, w, t, theta)) / total
    raise SolverError("solver.no_convergence",
                      f"expectile solve stalled with residual {resid:.3e}")


def solve_expectile(y, w, t: float, cfg: SolverConfig = DEFAULT_CONFIG) -> float:
    """Fixed-point iteration from the weighted mean, bisection fallback."""
    return _solve_expectile(y, w, t, cfg)[0]


def _solve_expfam(y, w, spec, cfg: SolverConfig):
    y = np.asarray(y, dtype=float)
    w = _check_weights(w)
    target = float((w @ spec.a(y)) / w.sum())
    lo, hi = spec.mean_range
    if not (lo < target < hi):
        raise SolverError(
            "solver.expfam_range",
            f"weighted mean of a(y) = {target:.6g} is outside the open range "
            f"({lo}, {hi}) of b' for family {spec.name!r}")
    theta = 0.0
    resid = float(spec.b_prime(theta)) - target
    for it in range(cfg.max_iter):
        if abs(resid) <= cfg.abs_tol:
            return theta, it
        curv = float(spec.b_double_prime(theta))
        if not (np.isfinite(curv) and curv > 0.0):
            raise SolverError("solver.expfam_curvature",
                              f"b'' must be positive, got {curv} at theta={theta}")
        step = -resid / curv
        # an aggressive step may overflow b'; backtracking recovers
        with np.errstate(over="ignore"):
            new = theta + step
            new_resid = float(spec.b_prime(new)) - target
            halvings = 0
            while (not np.isfinite(new_resid) or abs(new_resid) >= abs(resid)) \
                    and halvings < 60:
                step *= 0.5
                new = theta + step
                new_resid = float(spec.b_prime(new)) - target
                halvings += 1
        if halvings >= 60:
            raise SolverError("solver.no_convergence",
                              f"damped Newton stalled at residual {resid:.3e}")
        theta, resid = new, new_resid
    raise SolverError("solver.no_convergence",
                      f"expfam solve did not converge; residual {resid:.3e}")


def solve_expfam(y, w, spec, cfg: SolverConfig = DEFAULT_CONFIG) -> float:
    """Damped Newton for b'(theta) = weighted mean of a(y)."""
    return _solve_expfam(y, w, spec, cfg)[0]


def solve_iv(y1, y2, y3, w, basis) -> np.ndarray:
    """theta = [sum w b(y3) b(y2)']^{-1} sum w b(y3) y1."""
    y1 = np.asarray(y1, dtype=float)
    w = _check_weights(w)
    b2 = basis(y2)
    b3 = basis(y3)
    A = (b3 * w[:, None]).T @ b2
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond >= 1e12:
        raise SolverError(
            "solver.singular_iv",
            f"instrument-treatment moment matrix is ill-conditioned "
            f"(condition number {cond:.3e})")
    rhs = b3.T @ (w * y1)
    return np.linalg.solve(A, rhs)


def solve_path(family: Family, sample: Sample, weightfn: WeightFn,
               multipliers=None,
               cfg: SolverConfig = DEFAULT_CONFIG) -> EstimateResult:
    """Solve the weighted estimating equation at every level of the grid.

    The combined weights m_i * w_x(y_i) are computed once and shared across
    levels; per-level solves are independent.  The quantile path is
    re-sorted to be nondecreasing — a documented no-op guard, since the
    cumulative-weight scan on a common weight vector is already monotone.
    """
    if sample.q != family.response_dim:
        raise ConfigError(
            "config.family_response_dim",
            f"family {family.kind!r} needs q = {family.response_dim} "
            f"response columns, sample has q = {sample.q}")
    base = evaluate_weights(weightfn, sample)
    if multipliers is not None:
        m = np.asarray(multipliers, dtype=float)
        if m.shape != (sample.n,):
            raise SolverError("solver.multiplier_length",
                              f"multipliers must have length {sample.n}")
        combined = m * base
    else:
        combined = base
    combined = _check_weights(combined)

    t_values = family.t_grid.values
    iterations: dict = {}
    thetas = []
    y_scalar = sample.y[:, 0] if family.kind != "iv_linear" else None
    for t in t_values:
        try:
            if family.kind == "mean":
                theta, iters = solve_mean(y_scalar, combined), 0
            elif family.kind == "quantile":
                theta, iters = solve_quantile(y_scalar, combined, t), 0
            elif family.kind == "expectile":
                theta, iters = _solve_expectile(y_scalar, combined, t, cfg)
            elif family.kind == "expfam":
                theta, iters = _solve_expfam(y_scalar, combined, family.expfam, cfg)
            elif family.kind == "iv_linear":
                theta, iters = solve_iv(sample.y[:, 0], sample.y[:, 1],
                                        sample.y[:, 2], combined,
                                        family.basis), 0
            else:
                raise ConfigError("config.unknown_family",
                                  f"unknown family kind {family.kind!r}")
        except SolverError as err:
            raise SolverError(err.code, f"{err.message} (at t={t})") from err
        thetas.append(theta)
        iterations[t] = iters

    theta_arr = np.asarray(thetas)
    if family.kind == "quantile":
        theta_arr = np.maximum.accumulate(theta_arr)

    derivatives = []
    y_for_v = sample.y if family.kind == "iv_linear" else y_scalar
    for t, theta in zip(t_values, theta_arr):
        derivatives.append(estimate_V(family, theta, t, y_for_v, combined))

    diagnostics = {
        "ess": effective_sample_size(base),
        "weight_sum": float(base.sum()),
        "combined_weight_sum": float(combined.sum()),
        "iterations": iterations,
        "residuals": {
            t: equation_value(family, theta, t, y_for_v, combined)
            for t, theta in zip(t_values, theta_arr)
        },
    }
    if family.kind == "iv_linear":
        diagnostics["coefficient_norm"] = float(np.linalg.norm(theta_arr[0]))
    return EstimateResult(x0=weightfn.x0, t_grid=family.t_grid,
                          theta=theta_arr, derivatives=derivatives,
                          diagnostics=diagnostics)
