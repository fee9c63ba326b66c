"""Acceptance criteria, one test each.

Every test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line with the measured
value and the threshold. The lines are also collected and repeated in the
pytest terminal summary. Run directly with ``python3 tests/test_acceptance.py``
to get only the PASS/FAIL lines.
"""

import time
import warnings
from functools import lru_cache

import numpy as np
import pytest

from latcorr import SampleMatrix, cross_products, derive_unique_sets, estimate_direct, estimate_sigma, infer_all
from latcorr.inference import pairwise_delta2
from latcorr.simulation import StudyConfig, generate_data, generate_truth, run_study
from test_aggregators import identity_errors, simulated_datasets
from test_direct import identifiability_error
from test_moments import max_oracle_error
from test_shrinkage import proportionality_error

RESULTS = {}

BASELINES_FNE = ("MUV", "MAV", "TMP_ALL", "TMP_UNI", "SVD_ALL", "SVD_UNI", "STI", "MT50")


def report(number, name, passed, detail):
    line = f"ACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}  {name}: {detail}"
    RESULTS[number] = line
    print(line)
    return passed


@lru_cache(maxsize=None)
def fne_study():
    cfg = StudyConfig(p=50, q=300, n=30, reps=100, diag=2.5, seed=2024,
                      methods=("DIR", "DIR_SH") + BASELINES_FNE)
    t0 = time.perf_counter()
    rep = run_study(cfg)
    return rep, time.perf_counter() - t0


@lru_cache(maxsize=None)
def inference_study():
    cfg = StudyConfig(p=20, q=150, n=200, reps=200, xi=0.1, alpha=0.05, diag=1.5, seed=2025,
                      methods=("DIR", "DIR_SH", "SUV", "MUV", "SAV", "MAV", "TMP_UNI", "SVD_UNI", "MT50"))
    return run_study(cfg)


@lru_cache(maxsize=None)
def risk_study():
    cfg = StudyConfig(p=20, q=150, n=100, reps=200, diag=1.5, seed=2026, methods=("DIR_SH",))
    return run_study(cfg)


def test_1_oracle_equivalence():
    t0 = time.perf_counter()
    err = max_oracle_error(count=200, seed=11)
    dt = time.perf_counter() - t0
    ok = report(1, "quad_form vs materialized V", err <= 1e-9 and dt < 10,
                f"max rel err {err:.2e} (tol 1e-9), {dt:.1f} s (limit 10 s), 200 instances")
    assert ok


def test_2_identifiability():
    err = identifiability_error(count=100, seed=21)
    assert report(2, "population C recovers Sigma", err <= 1e-12, f"max abs err {err:.2e} (tol 1e-12), 100 instances")


def test_3_unbiasedness():
    t0 = time.perf_counter()
    truth = generate_truth(5, 40, diag_value=1.5, seed=np.random.SeedSequence(3))
    sets = derive_unique_sets(truth.binding)
    est = np.empty((2000, 5, 5))
    for b in range(2000):
        z = generate_data(truth, 200, seed=np.random.SeedSequence(3, spawn_key=(b,)))
        # default pipeline: centered data, n - 1 denominator
        x = SampleMatrix.from_array(z.values, center=True)
        est[b] = estimate_sigma(cross_products(x.values).c_hat, sets)
    dt = time.perf_counter() - t0
    se = est.std(axis=0, ddof=1) / np.sqrt(len(est))
    worst = float(np.max(np.abs(est.mean(axis=0) - truth.sigma) / se))
    ok = report(3, "mean sigma_hat vs sigma", worst <= 3 and dt < 120,
                f"worst |bias|/SE {worst:.2f} (limit 3), {dt:.1f} s (limit 120 s), p=5 n=200 2000 reps")
    assert ok


@pytest.mark.slow
def test_4_fne_ordering():
    rep, dt = fne_study()
    med = {m: rep.median_fne(m) for m in ("DIR", "DIR_SH") + BASELINES_FNE}
    beaten = [m for m in BASELINES_FNE if not med["DIR"] < med[m]]
    ok = med["DIR_SH"] < med["DIR"] and not beaten and dt < 900
    detail = ", ".join(f"{m} {v:.3f}" for m, v in med.items())
    if beaten:
        detail += f"; DIR not below {', '.join(beaten)}"
    assert report(4, "median FNE ordering", ok, f"{detail}; {dt:.0f} s (limit 900 s)")


@pytest.mark.slow
def test_5_type1():
    rep = inference_study()
    t1 = {m: rep.type1_rate(m) for m in ("DIR", "MAV", "SAV", "MT50")}
    ok = t1["DIR"] <= 0.08 and all(t1[m] >= 0.5 for m in ("MAV", "SAV", "MT50"))
    detail = ", ".join(f"{m} {v:.3f}" for m, v in t1.items())
    assert report(5, "type-I rates", ok, f"{detail} (DIR <= 0.08; MAV/SAV/MT50 >= 0.5)")


@pytest.mark.slow
def test_6_power():
    rep = inference_study()
    pw = {m: rep.power(m) for m in ("DIR", "MUV", "SUV", "TMP_UNI", "SVD_UNI")}
    ok = all(pw["DIR"] >= pw[m] for m in ("MUV", "SUV", "TMP_UNI", "SVD_UNI"))
    assert report(6, "power", ok, ", ".join(f"{m} {v:.3f}" for m, v in pw.items()) + " (DIR >= each)")


@pytest.mark.slow
def test_7_pd_audit():
    audits = [a for rep in (fne_study()[0], inference_study(), risk_study()) for a in rep.pd_audit if a]
    indefinite = [a for a in audits if a["lambda_min_dir"] < 0]
    bad = sum(1 for a in indefinite for lam in a["grid_lambda_min_sh"] if not lam > 0)
    ok = bad == 0 and len(indefinite) > 0
    assert report(7, "shrinkage PD over kappa grid", ok,
                  f"{bad} violations over {len(indefinite)} indefinite replications of {len(audits)}")


@pytest.mark.slow
def test_8_risk_improvement():
    rep = risk_study()
    risk = [a for a in rep.pd_audit if a and a["branch"] == "risk"]
    sh = float(np.mean([a["sigma_sh_sqerr"] for a in risk])) if risk else np.nan
    dr = float(np.mean([a["sigma_dir_sqerr"] for a in risk])) if risk else np.nan
    ok = bool(risk) and sh < dr
    assert report(8, "shrinkage risk vs direct", ok,
                  f"mean sq err shrunk {sh:.4f} vs direct {dr:.4f} over {len(risk)} risk-branch replications")


def test_9_proportionality():
    err = proportionality_error(count=100, seed=31)
    assert report(9, "R_sh = (1 - rho) R_dir off-diagonal", err <= 1e-12, f"max abs err {err:.2e} (tol 1e-12)")


@pytest.mark.slow
def test_10_coverage():
    truth = generate_truth(10, 75, diag_value=1.5, seed=np.random.SeedSequence(10))
    sets = derive_unique_sets(truth.binding)
    iu = np.triu_indices(10, 1)
    r_true = truth.r[iu]
    hits = total = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for b in range(1000):
            z = generate_data(truth, 500, seed=np.random.SeedSequence(10, spawn_key=(b,)))
            cov = estimate_direct(z, sets)
            d2 = pairwise_delta2(z, sets, cov)[iu]
            r = cov.r_hat[iu]
            ok = np.isfinite(r) & (d2 > 0)
            half = 1.96 * np.sqrt(d2[ok] / 500)
            hits += int(np.sum(np.abs(r[ok] - r_true[ok]) <= half))
            total += int(ok.sum())
    cover = hits / total
    assert report(10, "Wald interval coverage", 0.92 <= cover <= 0.97,
                  f"{cover:.4f} over {total} intervals (band [0.92, 0.97])")


def timed_pipeline(n, q, p, seed):
    truth = generate_truth(p, q, diag_value=0.12 * p, seed=seed)
    z = generate_data(truth, n, seed=seed + 1)
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        sets = derive_unique_sets(truth.binding)
        cov = estimate_direct(z, sets)
        res = infer_all(z, sets, cov, xi=0.1)
    return time.perf_counter() - t0, len(res.records) + len(res.skipped)


def test_11_performance():
    dt1, m1 = timed_pipeline(227, 1031, 175, 0)
    dt2, m2 = timed_pipeline(278, 2787, 109, 10)
    ok = dt1 < 60 and dt2 < 300 and m1 == 175 * 174 // 2 and m2 == 109 * 108 // 2
    assert report(11, "estimation + all-pair p-values", ok,
                  f"n=227 q=1031 p=175: {dt1:.2f} s (limit 60 s); n=278 q=2787 p=109: {dt2:.2f} s (limit 300 s)")


def test_12_baseline_identities():
    err = identity_errors(simulated_datasets(count=10))
    assert report(12, "corr(SUV)=corr(MUV), corr(SAV)=corr(MAV)", err <= 1e-12, f"max abs diff {err:.2e} (tol 1e-12)")


if __name__ == "__main__":
    for name, fn in sorted(((k, v) for k, v in dict(globals()).items() if k.startswith("test_")),
                           key=lambda kv: int(kv[0].split("_")[1])):
        try:
            fn()
        except AssertionError:
            pass
