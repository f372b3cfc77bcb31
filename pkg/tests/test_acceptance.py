"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Rate experiments run through the ``rates`` command so that the determinism
check compares the actual CSV bytes a user would get. The full suite takes
about 35 minutes on one core; select it with ``pytest tests/test_acceptance.py``.
"""

import csv
import time

import numpy as np
import pytest

from rfridge import spline
from rfridge.cli import csv_text, main
from rfridge.feature_maps import (
    FeatureMapSpec,
    approx_error_report,
    coordinate_features,
    feature_matrix,
    kernel_matrix,
    psi_matrix,
    sample_domain,
    sample_features,
)
from rfridge.ridge_solvers import Dataset, fit_krr, fit_rf_ridge, predict
from rfridge.seeding import derive_seed, rng_for
from rfridge.spectral import (
    empirical_effective_dimension,
    leverage_resample,
    leverage_scores,
    monte_carlo_effective_dimension,
    spectral_report,
    spline_effective_dimension,
)
from rfridge.spline_lab import SplineExperimentConfig, run_cell

pytestmark = pytest.mark.acceptance

SLOPE_TOL = 0.15
RATE_BUDGET = 15 * 60.0


# -- 1. kernel approximation rate ------------------------------------------------


def test_kernel_approximation_rate(report):
    start = time.perf_counter()
    spec = FeatureMapSpec.rff(sigma=1.0, dim=5)
    rng = rng_for(1, "acceptance-pairs")
    pairs = (sample_domain(spec, 200, rng), sample_domain(spec, 200, rng))
    errs = {1600: [], 6400: []}
    for seed in range(20):
        for M, mean_err, _ in approx_error_report(spec, [1600, 6400], 200, seed, pairs=pairs):
            errs[M].append(mean_err)
    e1, e2 = np.mean(errs[1600]), np.mean(errs[6400])
    elapsed = time.perf_counter() - start
    ok = e2 <= 0.55 * e1 and elapsed < 30
    report("1 kernel approximation rate", ok,
           f"err(1600)={e1:.4g} err(6400)={e2:.4g} ratio={e2 / e1:.3f} (<=0.55) time={elapsed:.1f}s (<30)")
    assert ok


# -- 2. spline closed forms ------------------------------------------------------


def test_spline_closed_forms(report):
    start = time.perf_counter()
    rng = rng_for(2024, "pairs")
    x, xp = rng.random(100), rng.random(100)
    d = np.abs(x - xp)
    bern = 2 * np.pi**2 * (d**2 - d + 1 / 6)
    k_max = 10_000
    err_default = np.max(np.abs(spline.spline_kernel(x - xp, 2.0, k_max) - bern))
    err_series = np.max(np.abs(spline.spline_kernel(x - xp, 2.0, k_max, method="series") - bern))

    z = np.linspace(0.0, 1.0, 2049)
    conv_err = 0.0
    for a, b in zip(x[:10], xp[:10]):
        integral = np.trapezoid(spline.spline_kernel(a - z, 2.0, k_max) * spline.spline_kernel(b - z, 2.0, k_max), z)
        conv_err = max(conv_err, abs(integral - spline.spline_kernel(a - b, 4.0, k_max)))
    elapsed = time.perf_counter() - start
    ok = err_default <= 1e-6 and err_series <= 1e-6 and conv_err <= 1e-4 and elapsed < 5
    report("2 spline closed forms", ok,
           f"max|L2-2pi^2 B2|={err_default:.2e} (series {err_series:.2e}) (<=1e-6) "
           f"convolution err={conv_err:.2e} (<=1e-4) time={elapsed:.2f}s (<5)")
    assert ok


# -- 3. solver equivalence ---------------------------------------------------------


def test_solver_equivalence(report):
    start = time.perf_counter()
    rng = rng_for(3, "solver")
    n, d = 100, 5
    X = rng.standard_normal((n, d))
    data = Dataset(X, X @ rng.standard_normal(d) + 0.1 * rng.standard_normal(n))
    lam = 1e-3
    rf = fit_rf_ridge(data, coordinate_features(d), lam)
    krr = fit_krr(data, FeatureMapSpec.linear_sketch(dim=d), lam)
    Xt = rng.standard_normal((50, d))
    p_rf, p_krr = predict(rf, Xt), predict(krr, Xt)
    rel = np.linalg.norm(p_rf - p_krr) / np.linalg.norm(p_krr)
    elapsed = time.perf_counter() - start
    ok = rel <= 1e-6 and elapsed < 1
    report("3 solver equivalence", ok, f"relative prediction gap={rel:.2e} (<=1e-6) time={elapsed:.3f}s (<1)")
    assert ok


# -- 4. effective dimension consistency ----------------------------------------------


def test_effective_dimension_consistency(report):
    start = time.perf_counter()
    lam, q = 1e-2, 8.0
    spec = FeatureMapSpec.spline(q=q)
    data = Dataset(rng_for(0, "effdim-data").random(2000), np.zeros(2000))
    K = kernel_matrix(spec, data.X)
    emp = empirical_effective_dimension(K, lam)
    ana = spline_effective_dimension(lam, q)
    mc, se = monte_carlo_effective_dimension(spec, lam, 500, data, seed=0, K=K, return_stderr=True)
    elapsed = time.perf_counter() - start
    rel = abs(emp - ana) / ana
    z_emp, z_ana = abs(mc - emp) / se, abs(mc - ana) / se
    ok = rel <= 0.02 and z_emp <= 3 and z_ana <= 3 and elapsed < 60
    report("4 effective dimension", ok,
           f"plug-in={emp:.5f} analytic={ana:.5f} rel={rel:.2e} (<=0.02) MC={mc:.5f}+-{se:.1e} "
           f"z(plug-in)={z_emp:.2f} z(analytic)={z_ana:.2f} (<=3) time={elapsed:.1f}s (<60)")
    assert ok


# -- 5. leverage constancy and unbiasedness -------------------------------------------


def _resampled_gram_z(spec, X, pool_size, lam, seed):
    data = Dataset(X, np.zeros(len(X)))
    pool = sample_features(spec, pool_size, derive_seed(seed, "pool"))
    scores = leverage_scores(pool.omegas, data, spec, lam)
    P = psi_matrix(spec, pool.omegas, X)
    target = P @ P.T / pool.M
    grams = []
    for r in range(20):
        A = feature_matrix(leverage_resample(pool, scores, pool_size, derive_seed(seed, "draw", r)), X)
        grams.append(A @ A.T)
    grams = np.array(grams)
    se = grams.std(axis=0, ddof=1) / np.sqrt(len(grams))
    gap = np.abs(grams.mean(axis=0) - target)
    return float(np.max(gap / np.maximum(se, 1e-300)))


def test_leverage_constancy_and_unbiasedness(report):
    start = time.perf_counter()
    spec = FeatureMapSpec.spline(q=8.0)
    data = Dataset(rng_for(5, "leverage-data").random(2000), np.zeros(2000))
    rep = spectral_report(data, spec, 1e-2, 500, seed=5)
    spread = rep.leverage.max() / rep.leverage.min()

    X = rng_for(5, "gram-points").random((50, 1))
    z_spline = _resampled_gram_z(spec, X, 500, 1e-2, seed=5)
    z_rff = _resampled_gram_z(FeatureMapSpec.rff(sigma=0.5), X, 500, 1e-2, seed=5)
    elapsed = time.perf_counter() - start
    ok = spread <= 1.05 and z_spline <= 3 and z_rff <= 3 and elapsed < 60
    report("5 leverage constancy/unbiasedness", ok,
           f"max/min score={spread:.4f} (<=1.05) max entrywise z: spline={z_spline:.2f} rff={z_rff:.2f} (<=3) "
           f"time={elapsed:.1f}s (<60)")
    assert ok


# -- 6-9. rate experiments ----------------------------------------------------------------


def _read(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _run_rates(tmp, tag, gamma, r):
    out, summary = tmp / f"{tag}_rows.csv", tmp / f"{tag}_summary.csv"
    start = time.perf_counter()
    code = main(["rates", "--gamma", repr(gamma), "--r", repr(r), "--sampling", "leverage",
                 "--out", str(out), "--summary", str(summary)])
    return code, time.perf_counter() - start, out, summary


def _plain_at_2000(tmp, tag):
    cfg = SplineExperimentConfig.config_a(sampling="plain")
    i = cfg.n_grid.index(2000)
    rows = [run_cell(cfg, i, rep) for rep in range(cfg.reps)]
    out = tmp / f"{tag}_plain2000.csv"
    out.write_text(csv_text(["n", "rep", "lambda_star", "krr_risk", "m_star", "rf_risk", "status"],
                            [(r.n, r.rep, r.lambda_star, r.krr_risk, r.m_star, r.rf_risk, r.status) for r in rows]),
                   encoding="utf-8")
    return out


@pytest.fixture(scope="module")
def rate_runs(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("rates")
    runs = {
        "A": _run_rates(tmp, "A", 1 / 8, 11 / 16),
        "B": _run_rates(tmp, "B", 1 / 4, 7 / 8),
    }
    runs["plain"] = _plain_at_2000(tmp, "first")
    return tmp, runs


def _check_rates(report, name, run, predicted):
    code, elapsed, out, summary = run
    table = {row["quantity"]: row for row in _read(summary)}
    parts, ok = [], code == 0 and elapsed < RATE_BUDGET
    for qty, target in zip(("risk", "lambda", "m"), predicted):
        slope = float(table[qty]["fitted_slope"])
        good = abs(slope - target) <= SLOPE_TOL
        ok &= good
        parts.append(f"{qty} slope={slope:+.3f} (target {target:+.3f}{'' if good else ' MISS'})")
    rows = _read(out)
    n_ok = sum(r["status"] == "ok" for r in rows)
    report(name, ok, "; ".join(parts) + f"; cells ok={n_ok}/{len(rows)} exit={code} "
           f"time={elapsed / 60:.1f}min (<15)")
    return ok


def test_rates_config_a(report, rate_runs):
    _, runs = rate_runs
    assert _check_rates(report, "6 rates config A", runs["A"], (-11 / 12, -2 / 3, 1 / 3))


def test_rates_config_b(report, rate_runs):
    _, runs = rate_runs
    assert _check_rates(report, "7 rates config B", runs["B"], (-7 / 8, -1 / 2, 1 / 2))


def test_sampling_scheme_separation(report, rate_runs):
    _, runs = rate_runs
    lev = [r for r in _read(runs["A"][2]) if r["n"] == "2000" and r["status"] == "ok"]
    plain = [r for r in _read(runs["plain"]) if r["status"] == "ok"]
    m_lev = float(np.median([int(r["m_star"]) for r in lev]))
    m_plain = float(np.median([int(r["m_star"]) for r in plain]))
    ok = m_lev < m_plain
    report("8 leverage vs plain", ok,
           f"median m_star leverage={m_lev:g} plain={m_plain:g} at n=2000 "
           f"(ok cells {len(lev)}/{len(plain)})")
    assert ok


def test_determinism(report, rate_runs):
    tmp, runs = rate_runs
    again = {
        "A": _run_rates(tmp, "A2", 1 / 8, 11 / 16),
        "B": _run_rates(tmp, "B2", 1 / 4, 7 / 8),
    }
    plain2 = _plain_at_2000(tmp, "second")
    same = []
    for key in ("A", "B"):
        for idx in (2, 3):
            same.append(runs[key][idx].read_bytes() == again[key][idx].read_bytes())
    same.append(runs["plain"].read_bytes() == plain2.read_bytes())
    ok = all(same)
    report("9 determinism", ok, f"{sum(same)}/{len(same)} CSV files byte-identical on rerun")
    assert ok
