"""Command-line front end: ``approx``, ``fit``, ``rates`` and ``leverage``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 partial experiment failure (fewer than 80% of rate cells succeeded).

Every option can also be given in a plain ``key = value`` config file
passed with ``--config``; flags override file keys and unknown keys are
rejected. The merged configuration is echoed to ``<out>.config.json``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import ConfigurationError, DomainError, NumericalError, RFRidgeError
from .feature_maps import (
    Family,
    FeatureMapSpec,
    approx_error_report,
    coordinate_features,
    kernel_matrix,
    sample_features,
)
from .ridge_solvers import Dataset, empirical_risk, fit_krr, fit_rf_ridge, predict
from .seeding import derive_seed, rng_for
from .spectral import empirical_effective_dimension, leverage_scores
from .spline_lab import SplineExperimentConfig, run_rate_experiment

log = logging.getLogger("rfridge")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PARTIAL = 0, 2, 3, 4
MIN_SUCCESS_FRACTION = 0.8

MAP_NAMES = {
    "rff": Family.RFF,
    "gaussian": Family.RFF,
    "gaussian_taylor": Family.GAUSSIAN_TAYLOR,
    "dot_product": Family.DOT_PRODUCT,
    "arc_cosine": Family.ARC_COSINE,
    "sign_sketch": Family.SIGN_SKETCH,
    "linear_sketch": Family.LINEAR_SKETCH,
    "laplace": Family.LAPLACE_SEMIGROUP,
    "homogeneous_additive": Family.HOMOGENEOUS_ADDITIVE,
    "spline": Family.SPLINE,
    "linear": None,  # exact identity feature map
}


# ---------------------------------------------------------------------------
# formatting and file helpers
# ---------------------------------------------------------------------------


def fmt(value) -> str:
    """17 significant digits for floats; plain text otherwise."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        return "%.17g" % value
    return str(value)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def atomic_write(path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_dataset(path) -> Dataset:
    """Read a CSV with header ``x1,...,xd,y``."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigurationError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        d = len(header) - 1
        if d < 1 or header[-1] != "y" or header[:-1] != [f"x{i + 1}" for i in range(d)]:
            raise ConfigurationError(f"{path}: header must be x1,...,xd,y")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise ConfigurationError(f"{path}: line {lineno}: expected {d + 1} fields, got {len(row)}")
            try:
                vals = [float(v) for v in row]
            except ValueError:
                raise ConfigurationError(f"{path}: line {lineno}: non-numeric field") from None
            if not all(math.isfinite(v) for v in vals):
                raise ConfigurationError(f"{path}: line {lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise ConfigurationError(f"{path}: no data rows")
    arr = np.array(rows)
    return Dataset(arr[:, :-1], arr[:, -1])


def write_dataset(path, data: Dataset) -> None:
    header = [f"x{i + 1}" for i in range(data.d)] + ["y"]
    atomic_write(path, csv_text(header, np.column_stack([data.X, data.y]).tolist()))


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file {path} does not exist")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + path.read_text(encoding="utf-8"))
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from None
    return {k.strip().replace("-", "_"): v.strip() for k, v in parser["config"].items()}


def merge_config(args: argparse.Namespace, keys) -> dict:
    """Config-file values overridden by explicitly given flags."""
    merged = {}
    if getattr(args, "config", None):
        merged.update(load_config_file(args.config))
    unknown = sorted(set(merged) - set(keys))
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _float(cfg, key, default=None):
    v = cfg.get(key, default)
    if v is None:
        return None
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key} must be a number, got {v!r}") from None


def _int(cfg, key, default=None):
    v = cfg.get(key, default)
    if v is None:
        return None
    try:
        f = float(v)
    except (TypeError, ValueError):
        raise ConfigurationError(f"{key} must be an integer, got {v!r}") from None
    if not f.is_integer():
        raise ConfigurationError(f"{key} must be an integer, got {v!r}")
    return int(f)


def _list(cfg, key, cast=float, default=None):
    v = cfg.get(key, default)
    if v is None:
        return None
    if isinstance(v, (list, tuple)):
        return [cast(x) for x in v]
    try:
        return [cast(float(x)) if cast is int else cast(x) for x in str(v).split(",") if x.strip()]
    except ValueError:
        raise ConfigurationError(f"{key} must be a comma-separated list, got {v!r}") from None


MAP_KEYS = ("map", "dim", "sigma", "coeffs", "tau", "radius", "p_max", "degree", "q", "k_max")


def build_spec(cfg: dict, dim: int | None = None) -> FeatureMapSpec | None:
    name = cfg.get("map")
    if not name:
        raise ConfigurationError("--map is required")
    if name not in MAP_NAMES:
        raise ConfigurationError(f"unknown map {name!r}; choose from {', '.join(MAP_NAMES)}")
    family = MAP_NAMES[name]
    if family is None:
        return None
    dim = _int(cfg, "dim", dim if dim is not None else 1)
    kw = dict(dim=dim)
    if "sigma" in cfg:
        kw["sigma"] = _float(cfg, "sigma")
    if "coeffs" in cfg:
        kw["coeffs"] = tuple(_list(cfg, "coeffs"))
    for key in ("tau", "radius", "q"):
        if key in cfg:
            kw[key] = _float(cfg, key)
    for key in ("p_max", "degree", "k_max"):
        if key in cfg:
            kw[key] = _int(cfg, key)
    if family == Family.SPLINE:
        kw["dim"] = 1
    try:
        return FeatureMapSpec(family, **kw)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


def _write_sidecar(out, cfg: dict) -> None:
    clean = {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(cfg.items())}
    atomic_write(str(out) + ".config.json", json.dumps(clean, indent=2, sort_keys=True, default=str) + "\n")


def _check_out(path) -> Path:
    if path is None:
        raise ConfigurationError("--out is required")
    path = Path(path)
    if not path.parent.exists():
        raise ConfigurationError(f"output directory {path.parent} does not exist")
    return path


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_approx(args) -> int:
    keys = MAP_KEYS + ("M", "pairs", "seed", "out")
    cfg = merge_config(args, keys)
    out = _check_out(cfg.get("out"))
    spec = build_spec(cfg)
    if spec is None:
        raise ConfigurationError("approx needs a random feature map")
    M_list = _list(cfg, "M", int, "100,400,1600")
    if not M_list or any(m < 1 for m in M_list):
        raise ConfigurationError("M must list positive integers")
    pairs = _int(cfg, "pairs", 200)
    seed = _int(cfg, "seed", 0)
    if pairs < 1:
        raise ConfigurationError("pairs must be positive")
    rows = approx_error_report(spec, M_list, pairs, seed)
    atomic_write(out, csv_text(["M", "mean_err", "max_err"], rows))
    _write_sidecar(out, cfg)
    return EXIT_OK


def cmd_fit(args) -> int:
    keys = MAP_KEYS + ("data", "M", "exact", "lam", "holdout", "seed", "out", "predictions")
    cfg = merge_config(args, keys)
    out = _check_out(cfg.get("out"))
    pred_path = cfg.get("predictions")
    if pred_path is not None:
        pred_path = _check_out(pred_path)
    if not cfg.get("data"):
        raise ConfigurationError("--data is required")
    if not Path(cfg["data"]).is_file():
        raise ConfigurationError(f"data file {cfg['data']} does not exist")
    lam = _float(cfg, "lam", 1e-3)
    holdout = _float(cfg, "holdout", 0.0)
    seed = _int(cfg, "seed", 0)
    exact = str(cfg.get("exact", "false")).lower() in ("1", "true", "yes")
    if not 0 <= holdout < 1:
        raise ConfigurationError("holdout must lie in [0, 1)")
    if not lam > 0:
        raise ConfigurationError("lambda must be positive")
    data = read_dataset(cfg["data"])
    spec = build_spec(cfg, dim=data.d)
    M = _int(cfg, "M", 100)
    if M < 1:
        raise ConfigurationError("M must be positive")

    train, test = data, None
    if holdout > 0:
        perm = rng_for(seed, "holdout").permutation(data.n)
        n_test = int(round(holdout * data.n))
        if n_test < 1 or n_test >= data.n:
            raise ConfigurationError("holdout leaves an empty split")
        te, tr = np.sort(perm[:n_test]), np.sort(perm[n_test:])
        train, test = Dataset(data.X[tr], data.y[tr]), Dataset(data.X[te], data.y[te])

    if spec is None:
        sf = coordinate_features(data.d)
        model, estimator, size = fit_rf_ridge(train, sf, lam), "linear", data.d
    elif exact:
        model, estimator, size = fit_krr(train, spec, lam), "krr", train.n
    else:
        sf = sample_features(spec, M, derive_seed(seed, "fit"))
        model, estimator, size = fit_rf_ridge(train, sf, lam), "rf", M
    train_mse = empirical_risk(model, train)
    test_mse = empirical_risk(model, test) if test is not None else math.nan
    rows = [(lam, estimator, size, train.n, train_mse, test_mse, model.info.jitter)]
    summary = csv_text(["lambda", "estimator", "size", "n_train", "train_mse", "test_mse", "jitter"], rows)
    pred_text = None
    if pred_path is not None:
        yhat = predict(model, data.X)
        pred_text = csv_text(["index", "y", "prediction"], zip(range(data.n), data.y, yhat))
    atomic_write(out, summary)
    if pred_text is not None:
        atomic_write(pred_path, pred_text)
    _write_sidecar(out, cfg)
    return EXIT_OK


RATE_KEYS = ("gamma", "r", "epsilon", "x0", "sigma_noise", "K_max", "n_grid", "reps",
             "lambda_grid_size", "risk_tolerance", "sampling", "master_seed", "redraws",
             "m_start", "pool_factor", "saturation_factor")


def rates_config(cfg: dict) -> SplineExperimentConfig:
    kw = {}
    for key in ("gamma", "r", "epsilon", "x0", "sigma_noise", "risk_tolerance"):
        if key in cfg:
            kw[key] = _float(cfg, key)
    for key in ("K_max", "reps", "lambda_grid_size", "master_seed", "redraws", "m_start",
                "pool_factor", "saturation_factor"):
        if key in cfg:
            kw[key] = _int(cfg, key)
    if "n_grid" in cfg:
        kw["n_grid"] = tuple(_list(cfg, "n_grid", int))
    if "sampling" in cfg:
        if cfg["sampling"] not in ("plain", "leverage"):
            raise ConfigurationError("sampling must be plain or leverage")
        kw["sampling"] = cfg["sampling"]
    return SplineExperimentConfig(**kw)


def rows_csv(result) -> str:
    header = ["n", "rep", "lambda_star", "krr_risk", "m_star", "rf_risk", "status"]
    rows = [(r.n, r.rep, r.lambda_star, r.krr_risk, r.m_star, r.rf_risk, r.status) for r in result.rows]
    return csv_text(header, rows)


def summary_csv(result) -> str:
    rows = []
    for name in ("risk", "lambda", "m"):
        slope, se = result.slopes.get(name, (math.nan, math.nan))
        rows.append((name, slope, se, result.predicted[name]))
    return csv_text(["quantity", "fitted_slope", "stderr", "predicted_exp"], rows)


def _threads() -> int:
    raw = os.environ.get("RFRIDGE_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"RFRIDGE_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigurationError("RFRIDGE_THREADS must be nonnegative")
    return n or (os.cpu_count() or 1)


def cmd_rates(args) -> int:
    cfg = merge_config(args, RATE_KEYS + ("out", "summary"))
    out = _check_out(cfg.get("out"))
    summary_path = _check_out(cfg.get("summary") or str(out.with_suffix("")) + "_summary.csv")
    exp_cfg = rates_config(cfg)
    workers = min(_threads(), len(exp_cfg.n_grid) * exp_cfg.reps)

    def progress(row):
        log.info("n=%d rep=%d status=%s m_star=%d", row.n, row.rep, row.status, row.m_star)

    result = run_rate_experiment(exp_cfg, workers=workers, progress=progress)
    atomic_write(out, rows_csv(result))
    atomic_write(summary_path, summary_csv(result))
    _write_sidecar(out, exp_cfg.to_dict())
    ok = len(result.rows) - result.failures
    if ok < MIN_SUCCESS_FRACTION * len(result.rows):
        log.error("only %d of %d cells succeeded", ok, len(result.rows))
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_leverage(args) -> int:
    keys = MAP_KEYS + ("data", "n", "lam", "pool", "seed", "out")
    cfg = merge_config(args, keys)
    out = _check_out(cfg.get("out"))
    cfg.setdefault("map", "spline")
    if cfg["map"] == "spline":
        cfg.setdefault("q", "8")
    seed = _int(cfg, "seed", 0)
    if cfg.get("data"):
        if not Path(cfg["data"]).is_file():
            raise ConfigurationError(f"data file {cfg['data']} does not exist")
        data = read_dataset(cfg["data"])
        spec = build_spec(cfg, dim=data.d)
    else:
        spec = build_spec(cfg)
        if spec is None:
            raise ConfigurationError("leverage needs a random feature map")
        n = _int(cfg, "n", 2000)
        if n < 1:
            raise ConfigurationError("n must be positive")
        from .feature_maps import sample_domain

        X = sample_domain(spec, n, rng_for(seed, "leverage-data"))
        data = Dataset(X, np.zeros(n))
    if spec is None:
        raise ConfigurationError("leverage needs a random feature map")
    lams = _list(cfg, "lam", float, "0.01")
    if not lams or any(not l > 0 for l in lams):
        raise ConfigurationError("lambda values must be positive")
    pool_size = _int(cfg, "pool", 500)
    if pool_size < 1:
        raise ConfigurationError("pool must be positive")
    K = kernel_matrix(spec, data.X)
    pool = sample_features(spec, pool_size, derive_seed(seed, "pool"))
    rows = []
    for lam in lams:
        scores = leverage_scores(pool.omegas, data, spec, lam, K=K)
        rows.extend((lam, i, s) for i, s in enumerate(scores))
        rows.append((lam, "n_eff", empirical_effective_dimension(K, lam)))
        rows.append((lam, "f_inf_hat", float(scores[int(np.argmax(scores))])))
    atomic_write(out, csv_text(["lambda", "pool_index", "score"], rows))
    _write_sidecar(out, cfg)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_map_args(p):
    p.add_argument("--map", choices=sorted(MAP_NAMES), default=None)
    p.add_argument("--dim", type=int, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--coeffs", default=None, help="comma-separated dot-product coefficients")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--p-max", dest="p_max", type=int, default=None)
    p.add_argument("--degree", type=int, default=None, help="arc-cosine degree")
    p.add_argument("--q", type=float, default=None, help="spline kernel order")
    p.add_argument("--k-max", dest="k_max", type=int, default=None)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigurationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rfridge", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("approx", help="kernel approximation error versus M")
    p.add_argument("--config")
    _add_map_args(p)
    p.add_argument("--M", default=None, help="comma-separated feature counts")
    p.add_argument("--pairs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("fit", help="fit random-features ridge or exact KRR on a CSV dataset")
    p.add_argument("--config")
    _add_map_args(p)
    p.add_argument("--data")
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--exact", action="store_const", const="true", default=None)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--holdout", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.add_argument("--predictions")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("rates", help="spline-kernel rate experiment")
    p.add_argument("--config")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--r", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--x0", type=float, default=None)
    p.add_argument("--sigma-noise", dest="sigma_noise", type=float, default=None)
    p.add_argument("--K-max", dest="K_max", type=int, default=None)
    p.add_argument("--n-grid", dest="n_grid", default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--lambda-grid-size", dest="lambda_grid_size", type=int, default=None)
    p.add_argument("--risk-tolerance", dest="risk_tolerance", type=float, default=None)
    p.add_argument("--sampling", choices=["plain", "leverage"], default=None)
    p.add_argument("--seed", dest="master_seed", type=int, default=None)
    p.add_argument("--redraws", type=int, default=None)
    p.add_argument("--m-start", dest="m_start", type=int, default=None)
    p.add_argument("--pool-factor", dest="pool_factor", type=int, default=None)
    p.add_argument("--saturation-factor", dest="saturation_factor", type=int, default=None)
    p.add_argument("--out")
    p.add_argument("--summary")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("leverage", help="random-features leverage scores over a candidate pool")
    p.add_argument("--config")
    _add_map_args(p)
    p.add_argument("--data")
    p.add_argument("--n", type=int, default=None, help="synthetic inputs when --data is absent")
    p.add_argument("--lambda", dest="lam", default=None, help="comma-separated lambda values")
    p.add_argument("--pool", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_leverage)
    return parser


def _thread_limit(command: str):
    # Rate cells run one BLAS thread each so results do not depend on the worker count.
    return threadpool_limits(1 if command == "rates" else _threads())


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            log.setLevel(logging.INFO)
        with _thread_limit(args.command):
            return args.func(args)
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"rfridge: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, DomainError, RFRidgeError) as exc:
        print(f"rfridge: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
