import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import make_sets
from scipy.stats import false_discovery_control

from latcorr import CovEstimate, PairIndexSet, cross_products, estimate_direct, infer_all, quad_form
from latcorr import test_pair as run_test_pair
from latcorr.inference import _scales, delta2, normal_sf, pairwise_delta2, theta_entry, upsilon

# 2 * P(Z > 4), evaluated with 30-digit mpmath
P_WALD_4 = 6.3342483666239842e-05


def small_problem(seed, p=2, lo=2, hi=3, n=10):
    rng = np.random.default_rng(seed)
    a = oracles.random_map(rng, p, lo, hi, n_shared=1)
    _, sets = make_sets(a)
    x = rng.normal(size=(n, p)) @ np.linalg.cholesky(0.6 * np.eye(p) + 0.4).T
    z = x @ a.T + 0.5 * rng.normal(size=(n, a.shape[0]))
    return z, sets


def test_wald_example():
    res = run_test_pair(0, 1, 0.5, 1.0, 100, 0.1)
    assert res.t_plus == pytest.approx(4.0, rel=1e-14)
    assert res.t_minus == 0
    assert res.p_value == pytest.approx(P_WALD_4, rel=1e-12)


def test_zero_estimate_gives_p_one():
    for xi in (0.0, 0.1, 0.7):
        res = run_test_pair(0, 1, 0.0, 0.3, 50, xi)
        assert (res.t_plus, res.t_minus, res.p_value) == (0.0, 0.0, 1.0)


def test_sign_symmetry():
    a = run_test_pair(0, 1, 0.5, 0.7, 80, 0.1)
    b = run_test_pair(0, 1, -0.5, 0.7, 80, 0.1)
    assert a.p_value == b.p_value
    assert a.t_plus == -b.t_minus


def test_degenerate_variance():
    with pytest.warns(RuntimeWarning):
        res = run_test_pair(0, 1, 0.5, 0.0, 50, 0.1)
    assert res.p_value == 0 and "degenerate-variance" in res.flags
    assert run_test_pair(0, 1, 0.05, 0.0, 50, 0.1).p_value == 1


def test_underflow_flag():
    res = run_test_pair(0, 1, 0.9, 1e-6, 10_000, 0.0)
    assert res.p_value == 0 and "p-underflow" in res.flags


def test_xi_zero_is_conventional_two_sided():
    rng = np.random.default_rng(0)
    for _ in range(50):
        r, d2, n = rng.uniform(-1, 1), rng.uniform(0.1, 3), int(rng.integers(10, 500))
        res = run_test_pair(0, 1, r, d2, n, 0.0)
        assert res.p_value == pytest.approx(2 * normal_sf(abs(np.sqrt(n) * r / np.sqrt(d2))), rel=1e-12)


@given(st.floats(-1.5, 1.5), st.floats(0.01, 5), st.integers(2, 1000), st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=200, deadline=None)
def test_p_nondecreasing_in_xi(r, d2, n, xi1, xi2):
    lo, hi = sorted((xi1, xi2))
    a = run_test_pair(0, 1, r, d2, n, lo)
    b = run_test_pair(0, 1, r, d2, n, hi)
    assert a.p_value <= b.p_value
    for res, xi in ((a, lo), (b, hi)):
        assert 0 <= res.p_value <= 1 and res.t_plus >= 0 >= res.t_minus
        if abs(r) <= xi:
            assert (res.t_plus, res.t_minus, res.p_value) == (0.0, 0.0, 1.0)


def test_upsilon_matches_oracle():
    z, sets = small_problem(1)
    c = cross_products(z)
    ups = upsilon(0, 1, z, c, sets)
    np.testing.assert_allclose(ups, ups.T, rtol=0, atol=0)
    s0, s1 = [s.tolist() for s in sets.sets]
    keys = [oracles.off_pairs(s0, s1), oracles.diag_pairs(s0), oracles.diag_pairs(s1)]
    sc = _scales(len(s0), len(s1))
    scale = np.array([[sc[0], sc[1], sc[2]], [sc[1], sc[3], sc[4]], [sc[2], sc[4], sc[5]]])
    want = np.array([[oracles.naive_quad(z, a, b) for b in keys] for a in keys]) / scale
    np.testing.assert_allclose(ups, want, rtol=1e-10, atol=1e-12)


def test_upsilon_zero_data():
    _, sets = make_sets([[1, 0], [1, 0], [0, 1], [0, 1]])
    z = np.zeros((6, 4))
    assert not upsilon(0, 1, z, cross_products(z), sets).any()


def test_delta2_reductions():
    z, sets = small_problem(2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cov = estimate_direct(z, sets)
    assert delta2(0, 1, cov, np.zeros((3, 3))) == 0
    sig = np.array([[2.0, 0.0], [0.0, 3.0]])
    c0 = CovEstimate(sig, np.eye(2), 10, np.array([True, True]))
    ups = np.arange(9.0).reshape(3, 3) + 1
    ups = ups + ups.T
    assert delta2(0, 1, c0, ups) == pytest.approx(ups[0, 0] / 6.0)


def test_delta2_matches_delta_method_oracle():
    checked = 0
    for seed in range(10):
        z, sets = small_problem(seed + 10, p=3, n=15)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            cov = estimate_direct(z, sets)
        c = cross_products(z)
        sl = [s.tolist() for s in sets.sets]
        for l, k in ((0, 1), (0, 2), (1, 2)):
            if not (cov.diag_valid[l] and cov.diag_valid[k]):
                continue
            got = delta2(l, k, cov, upsilon(l, k, z, c, sets))
            assert got == pytest.approx(oracles.naive_delta2(z, sl, l, k), rel=1e-9)
            checked += 1
    assert checked > 10


def test_theta_entries_match_oracle():
    z, sets = small_problem(3, p=3, n=12)
    c = cross_products(z)
    theta = oracles.naive_theta(z, [s.tolist() for s in sets.sets])
    p = sets.p
    for r in range(p * p):
        for s in range(p * p):
            assert theta_entry(r, s, z, c, sets) == pytest.approx(theta[r, s], rel=1e-9, abs=1e-12)
    # case 1 with l1 = l2
    d = PairIndexSet.diag(sets, 1)
    m = len(sets.sets[1])
    assert theta_entry(1 + p, 1 + p, z, c, sets) == pytest.approx(
        quad_form(z, c, d) / (m**2 * (m - 1) ** 2), rel=1e-14
    )
    assert theta_entry(0, 4, np.zeros_like(z), cross_products(np.zeros_like(z)), sets) == 0


def test_pairwise_matches_per_pair():
    rng = np.random.default_rng(4)
    a = oracles.random_map(rng, 5, 2, 4)
    _, sets = make_sets(a)
    z = rng.normal(size=(40, 5)) @ np.linalg.cholesky(np.eye(5) * 0.6 + 0.4).T @ a.T + rng.normal(size=(40, a.shape[0]))
    cov = estimate_direct(z, sets)
    c = cross_products(z)
    d2 = pairwise_delta2(z, sets, cov)
    for l in range(5):
        for k in range(5):
            if l != k:
                assert d2[l, k] == pytest.approx(delta2(l, k, cov, upsilon(l, k, z, c, sets)), rel=1e-9)
    res = infer_all(z, sets, cov, xi=0.1)
    assert [(r.l, r.k) for r in res.records] == [(l, k) for l in range(5) for k in range(l + 1, 5)]
    for rec in res.records:
        single = run_test_pair(rec.l, rec.k, rec.r_hat, rec.delta2_hat, cov.n, 0.1)
        assert rec.p_value == pytest.approx(single.p_value, rel=1e-12, abs=1e-300)
    np.testing.assert_allclose(res.p_bh, false_discovery_control(res.p_values()))


def test_infer_all_examples():
    _, sets = make_sets([[1, 0], [1, 0], [0, 1], [0, 1]])
    rng = np.random.default_rng(5)
    z = rng.normal(size=(20, 4)) + rng.normal(size=(20, 1))
    res = infer_all(z, sets, estimate_direct(z, sets))
    assert len(res.records) + len(res.skipped) == 1

    _, sets3 = make_sets([[1, 0, 0], [1, 0, 0], [0, 1, 0], [0, 1, 0], [0, 0, 1], [0, 0, 1]])
    zero = np.zeros((10, 6))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = infer_all(zero, sets3, estimate_direct(zero, sets3), xi=0.0)
    assert len(res.records) == 3 and not res.skipped
    assert all(rec.p_value == 1 for rec in res.records)


def test_invalid_pairs_are_skipped_not_fatal():
    _, sets = make_sets([[1, 0, 0], [1, 0, 0], [0, 1, 0], [0, 1, 0], [0, 0, 1], [0, 0, 1]])
    rng = np.random.default_rng(6)
    z = rng.normal(size=(12, 6))
    z[:, 1] = -0.5 * z[:, 0]  # forces a negative variance estimate for the first variable
    with pytest.warns(RuntimeWarning):
        cov = estimate_direct(z, sets)
    res = infer_all(z, sets, cov)
    assert [(l, k) for l, k, _ in res.skipped] == [(0, 1), (0, 2)]
    assert [(r.l, r.k) for r in res.records] == [(1, 2)]
    rows = list(res.rows())
    assert len(rows) == 3 and np.isnan(rows[-1]["p_value"])
