"""Batch command-line front end.

Three subcommands::

    eecop fit       --data d.csv --response y --covariates x1,x2 \
                    --family quantile --t 0.25,0.5,0.75 --x0 0,0 \
                    --weights kernel --out result.json
    eecop bootstrap ...fit flags... --B 200 --alpha 0.10 --seed 7
    eecop simulate  --dgp linear_gaussian --n 400,1600 --p 3 \
                    --estimators ols,eecop_param --reps 200 --out table.csv

Options may also come from a flat ``key = value`` config file passed with
``--config``; command-line flags win over file values.  ``--x0`` accepts an
inline vector ("0.1,-0.2") or a path to a CSV of conditioning points (header
row, one point per data row).

``fit`` and ``bootstrap`` write a versioned JSON document (``"schema":
"eecop/1"``); ``simulate`` writes the tidy CSV of the study harness.  Output
is byte-identical for identical config and seed.  On error, a JSON object
``{"schema": "eecop/1", "error": {"code": ..., "message": ...}}`` is printed
and the exit status is 2 for usage/config problems or 3 for numeric
failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .bootstrap import MultiplierSpec, run_bootstrap, save_replicates
from .data import load_sample
from .errors import ConfigError, DataError, EecopError
from .families import (expectile_family, expfam_family, iv_family,
                       mean_family, quantile_family)
from .pipeline import EstimatorConfig, estimate
from .simulate import StudySpec, rmse_study, save_rmse_table

SCHEMA = "eecop/1"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eecop",
        description="Conditional functionals via copula-weighted "
                    "estimating equations")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out", default=None, help="output path (default stdout)")

    def add_fit_flags(p):
        p.add_argument("--data", default=None, help="input CSV")
        p.add_argument("--response", default=None,
                       help="comma-separated response column names")
        p.add_argument("--covariates", default=None,
                       help="comma-separated covariate column names")
        p.add_argument("--family", default=None,
                       help="mean | quantile | expectile | expfam:<name> | iv:<degree>")
        p.add_argument("--t", default=None,
                       help="comma-separated index levels in (0,1)")
        p.add_argument("--x0", default=None,
                       help="inline conditioning point or CSV of points")
        p.add_argument("--weights", default=None,
                       help="parametric_gaussian | kernel")
        p.add_argument("--bandwidth", default=None,
                       help="copula bandwidth: paper_rate | diagonal_rate | number")

    p_fit = sub.add_parser("fit", help="solve the weighted estimating equation")
    add_fit_flags(p_fit)
    add_common(p_fit)

    p_boot = sub.add_parser("bootstrap", help="fit plus multiplier bootstrap bands")
    add_fit_flags(p_boot)
    p_boot.add_argument("--B", type=int, default=None, help="replicate count")
    p_boot.add_argument("--alpha", type=float, default=None, help="band level")
    p_boot.add_argument("--dump-replicates", default=None,
                        help="also write the replicate matrix to this CSV")
    add_common(p_boot)

    p_sim = sub.add_parser("simulate", help="RMSE study on a synthetic generator")
    p_sim.add_argument("--dgp", default=None,
                       help="linear_gaussian | mean_shift | variance_shift")
    p_sim.add_argument("--n", default=None, help="comma-separated sample sizes")
    p_sim.add_argument("--p", type=int, default=None, help="covariate dimension")
    p_sim.add_argument("--estimators", default=None,
                       help="comma-separated: oracle,ols,nw,eecop_param,eecop_kernel")
    p_sim.add_argument("--reps", type=int, default=None)
    p_sim.add_argument("--eval-points", type=int, default=None)
    p_sim.add_argument("--family", default=None, help="mean | quantile")
    p_sim.add_argument("--t", default=None)
    p_sim.add_argument("--bandwidth", default=None)
    add_common(p_sim)
    return parser


def _read_config_file(path) -> dict:
    if not os.path.exists(path):
        raise ConfigError("config.file_missing", f"config file {path!r} not found")
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError("config.bad_line",
                                  f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            out[key.strip().replace("-", "_")] = value.strip()
    return out


def _merge(args: argparse.Namespace) -> dict:
    """File values first, then non-None flags on top (flags win)."""
    cfg = {}
    if getattr(args, "config", None):
        cfg.update(_read_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("config", "command"):
            continue
        if value is not None:
            cfg[key] = value
    return cfg


def _names(value: str) -> list:
    return [v.strip() for v in str(value).split(",") if v.strip() != ""]


def _floats(value, what: str) -> list:
    try:
        return [float(v) for v in _names(value)]
    except ValueError:
        raise ConfigError("config.bad_number",
                          f"could not parse {what} from {value!r}") from None


def _parse_family(cfg: dict):
    kind = str(cfg.get("family", "mean"))
    t_raw = cfg.get("t")
    option = None
    if ":" in kind:
        kind, _, option = kind.partition(":")
    if kind in ("quantile", "expectile"):
        if not t_raw:
            raise ConfigError("config.t_required",
                              f"family {kind!r} needs --t levels")
        ts = _floats(t_raw, "--t")
        return quantile_family(ts) if kind == "quantile" else expectile_family(ts)
    if t_raw:
        raise ConfigError("config.t_forbidden",
                          f"family {kind!r} takes no --t levels")
    if kind == "mean":
        return mean_family()
    if kind == "expfam":
        if not option:
            raise ConfigError("config.expfam_required",
                              "use --family expfam:<gaussian|poisson|bernoulli>")
        return expfam_family(option)
    if kind == "iv":
        degree = 1
        if option:
            try:
                degree = int(option)
            except ValueError:
                raise ConfigError("config.bad_basis",
                                  f"bad iv basis degree {option!r}") from None
        return iv_family(degree)
    raise ConfigError("config.unknown_family", f"unknown family {kind!r}")


def _parse_bandwidth(value, default):
    if value is None:
        return default
    text = str(value)
    if text in ("paper_rate", "diagonal_rate", "normal_reference"):
        return text
    try:
        return float(text)
    except ValueError:
        raise ConfigError("config.bad_bandwidth",
                          f"bad bandwidth {value!r}") from None


def _parse_estimator(cfg: dict) -> EstimatorConfig:
    name = str(cfg.get("weights", "parametric_gaussian"))
    if name not in ("parametric_gaussian", "kernel"):
        raise ConfigError("config.unknown_weights_estimator",
                          f"unknown weights estimator {name!r}")
    return EstimatorConfig(
        weights_estimator=name,
        margin_bandwidth=_parse_bandwidth(cfg.get("margin_bandwidth"),
                                          "normal_reference"),
        copula_bandwidth=_parse_bandwidth(cfg.get("bandwidth",
                                                  cfg.get("copula_bandwidth")),
                                          "paper_rate"),
    )


def _parse_x0(cfg: dict, p: int) -> np.ndarray:
    """Conditioning points as an (m, p) array."""
    raw = cfg.get("x0")
    if p == 0:
        return np.zeros((1, 0))
    if raw is None:
        raise ConfigError("config.x0_required",
                          "conditioning point --x0 is required when p > 0")
    text = str(raw)
    if os.path.exists(text):
        import csv as _csv
        with open(text, newline="", encoding="utf-8") as fh:
            rows = [r for r in _csv.reader(fh) if any(c.strip() for c in r)]
        if len(rows) < 2:
            raise ConfigError("config.bad_x0", f"{text}: no conditioning points")
        try:
            pts = np.asarray([[float(c) for c in row] for row in rows[1:]])
        except ValueError:
            raise ConfigError("config.bad_x0",
                              f"{text}: non-numeric conditioning point") from None
    else:
        pts = np.asarray([_floats(text, "--x0")])
    if pts.ndim != 2 or pts.shape[1] != p:
        raise ConfigError("config.bad_x0",
                          f"conditioning points must have {p} columns")
    return pts


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _estimates_block(family, result):
    out = []
    theta = np.atleast_1d(result.theta)
    for i, t in enumerate(result.t_grid.values):
        entry = {
            "t": t if family.indexed else None,
            "theta": _jsonable(theta[i]),
            "V": _jsonable(result.derivatives[i].V),
            "residual": result.diagnostics["residuals"][t],
        }
        out.append(entry)
    return out


def _bands_block(family, result) -> dict:
    bands = result.bands
    labels = []
    if family.kind == "iv_linear":
        labels = [{"component": j} for j in range(len(bands.pointwise_lower))]
    else:
        for t in result.t_grid.values:
            labels.append({"t": t if family.indexed else None})
    pw = [dict(lab, lower=float(lo), upper=float(hi))
          for lab, lo, hi in zip(labels, bands.pointwise_lower,
                                 bands.pointwise_upper)]
    un = [dict(lab, lower=float(lo), upper=float(hi))
          for lab, lo, hi in zip(labels, bands.uniform_lower,
                                 bands.uniform_upper)]
    return {"alpha": bands.alpha,
            "B": int(result.boot_draws.shape[0]),
            "failed_replicates": bands.n_failed,
            "pointwise": pw,
            "uniform": un}


def _load_inputs(cfg: dict):
    if "data" not in cfg:
        raise ConfigError("config.data_required", "--data is required")
    if "response" not in cfg:
        raise ConfigError("config.response_required", "--response is required")
    response = _names(cfg["response"])
    covariates = _names(cfg.get("covariates", ""))
    sample = load_sample(cfg["data"], response, covariates)
    family = _parse_family(cfg)
    est = _parse_estimator(cfg)
    points = _parse_x0(cfg, sample.p)
    return sample, family, est, points


def cmd_fit(cfg: dict) -> dict:
    sample, family, est, points = _load_inputs(cfg)
    results = []
    for x0 in points:
        res = estimate(sample, x0, family, est)
        results.append({
            "x0": _jsonable(res.x0),
            "estimates": _estimates_block(family, res),
            "diagnostics": _jsonable({k: v for k, v in res.diagnostics.items()
                                      if k != "residuals"}),
        })
    return {
        "schema": SCHEMA,
        "command": "fit",
        "n": sample.n, "q": sample.q, "p": sample.p,
        "family": {"kind": family.kind,
                   "t": list(family.t_grid.values) if family.indexed else None},
        "weights": {"estimator": est.weights_estimator,
                    "margin_bandwidth": _jsonable(est.margin_bandwidth),
                    "copula_bandwidth": _jsonable(est.copula_bandwidth)},
        "results": results,
    }


def cmd_bootstrap(cfg: dict) -> dict:
    sample, family, est, points = _load_inputs(cfg)
    b = int(cfg.get("B", 200))
    if b < 1:
        raise ConfigError("config.B_positive", "replicate count B must be >= 1")
    alpha = float(cfg.get("alpha", 0.1))
    seed = int(cfg.get("seed", 0))
    threads = int(cfg.get("threads", 1))
    spec = MultiplierSpec(B=b, seed=seed)
    results = []
    for idx, x0 in enumerate(points):
        res = run_bootstrap(sample, x0, family, est, spec, alpha=alpha,
                            threads=threads)
        dump = cfg.get("dump_replicates")
        if dump:
            path = dump if len(points) == 1 else f"{dump}.{idx}"
            save_replicates(res.boot_draws, path)
        diag = {k: v for k, v in res.diagnostics.items() if k != "residuals"}
        diag["bootstrap"] = {k: v for k, v in diag["bootstrap"].items()
                             if k != "failures"}
        results.append({
            "x0": _jsonable(res.x0),
            "estimates": _estimates_block(family, res),
            "bands": _bands_block(family, res),
            "diagnostics": _jsonable(diag),
        })
    return {
        "schema": SCHEMA,
        "command": "bootstrap",
        "n": sample.n, "q": sample.q, "p": sample.p,
        "family": {"kind": family.kind,
                   "t": list(family.t_grid.values) if family.indexed else None},
        "weights": {"estimator": est.weights_estimator,
                    "margin_bandwidth": _jsonable(est.margin_bandwidth),
                    "copula_bandwidth": _jsonable(est.copula_bandwidth)},
        "bootstrap": {"B": b, "alpha": alpha, "seed": seed},
        "results": results,
    }


def cmd_simulate(cfg: dict) -> str:
    if "dgp" not in cfg:
        raise ConfigError("config.dgp_required", "--dgp is required")
    if "n" not in cfg:
        raise ConfigError("config.n_required", "--n is required")
    family = str(cfg.get("family", "mean"))
    ts = tuple(_floats(cfg["t"], "--t")) if cfg.get("t") else ()
    kernel_cfg = EstimatorConfig(
        weights_estimator="kernel",
        copula_bandwidth=_parse_bandwidth(cfg.get("bandwidth"), "paper_rate"))
    spec = StudySpec(
        dgp=str(cfg["dgp"]),
        n_values=tuple(int(v) for v in _names(cfg["n"])),
        p=int(cfg.get("p", 1)),
        estimators=tuple(_names(cfg.get("estimators", "ols,eecop_param"))),
        reps=int(cfg.get("reps", 100)),
        eval_points=int(cfg.get("eval_points", 10)),
        family=family,
        t_values=ts,
        seed=int(cfg.get("seed", 0)),
        kernel_config=kernel_cfg,
    )
    rows = rmse_study(spec, threads=int(cfg.get("threads", 1)))
    import io
    buf = io.StringIO()
    fields = ["estimator", "n", "p", "t", "rmse", "mc_se", "reps", "n_failed"]
    import csv as _csv
    writer = _csv.DictWriter(buf, fieldnames=fields)
    writer.writeheader()
    for row in rows:
        out = dict(row)
        if out.get("t") is None:
            out["t"] = ""
        writer.writerow(out)
    return buf.getvalue()


def _emit(text: str, out_path) -> None:
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _merge(args)
        if args.command == "fit":
            payload = cmd_fit(cfg)
            text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        elif args.command == "bootstrap":
            payload = cmd_bootstrap(cfg)
            text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        else:
            text = cmd_simulate(cfg)
        _emit(text, cfg.get("out"))
        return 0
    except (ConfigError, DataError) as err:
        _emit(json.dumps({"schema": SCHEMA,
                          "error": {"code": err.code, "message": err.message}},
                         indent=2, sort_keys=True) + "\n",
              getattr(args, "out", None))
        return 2
    except EecopError as err:
        _emit(json.dumps({"schema": SCHEMA,
                          "error": {"code": err.code, "message": err.message}},
                         indent=2, sort_keys=True) + "\n",
              getattr(args, "out", None))
        return 3


if __name__ == "__main__":
    sys.exit(main())
