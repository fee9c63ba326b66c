"""Brute-force reference implementations used only by the tests.

Everything here materialises the objects the library avoids: the full
q^2 x q^2 fourth-moment matrix, the p^2 x q^2 linear map from vec(C) to
vec(Sigma), and explicit loops over index pairs.  Vectorisation is
column-major throughout: entry (i, j) of a q x q matrix sits at i + j*q.
"""

import numpy as np


def vec(m):
    return np.asarray(m, dtype=float).flatten(order="F")


def naive_c(z):
    z = np.asarray(z, dtype=float)
    n, q = z.shape
    c = np.zeros((q, q))
    for i in range(n):
        c += np.outer(z[i], z[i])
    return c / (n - 1)


def naive_v(z, uniform_n=False):
    """``n^-1 sum_i (z_i z_i') kron (z_i z_i') - vec(C) vec(C)'``."""
    z = np.asarray(z, dtype=float)
    n, q = z.shape
    v = np.zeros((q * q, q * q))
    for i in range(n):
        zz = np.outer(z[i], z[i])
        v += np.kron(zz, zz)
    v /= n
    c = naive_c(z)
    if uniform_n:
        c = c * (n - 1) / n
    return v - np.outer(vec(c), vec(c))


def indicator(pairs, q):
    m = np.zeros(q * q)
    for i, j in pairs:
        m[i + j * q] += 1.0
    return m


def naive_quad(z, pairs_a, pairs_b=None, uniform_n=False):
    q = np.asarray(z).shape[1]
    pairs_b = pairs_a if pairs_b is None else pairs_b
    return float(indicator(pairs_a, q) @ naive_v(z, uniform_n) @ indicator(pairs_b, q))


def diag_pairs(s):
    return [(i, j) for i in s for j in s if i != j]


def off_pairs(s, t):
    return [(i, j) for i in s for j in t]


def j_matrix(sets_list, q):
    """Linear map taking vec(C) to vec(Sigma_hat) under the estimating equations."""
    p = len(sets_list)
    jm = np.zeros((p * p, q * q))
    for l in range(p):
        for k in range(p):
            pairs = diag_pairs(sets_list[l]) if l == k else off_pairs(sets_list[l], sets_list[k])
            jm[l + k * p] = indicator(pairs, q) / len(pairs)
    return jm


def naive_sigma(c, sets_list):
    """Loop evaluation of the estimating equations."""
    c = np.asarray(c, dtype=float)
    p = len(sets_list)
    out = np.zeros((p, p))
    for l in range(p):
        for k in range(p):
            pairs = diag_pairs(sets_list[l]) if l == k else off_pairs(sets_list[l], sets_list[k])
            out[l, k] = sum(c[i, j] for i, j in pairs) / len(pairs)
    return out


def naive_theta(z, sets_list, uniform_n=False):
    """Asymptotic covariance of sqrt(n) vec(Sigma_hat) with V replaced by its plug-in."""
    q = np.asarray(z).shape[1]
    jm = j_matrix(sets_list, q)
    return jm @ naive_v(z, uniform_n) @ jm.T


def naive_delta2(z, sets_list, l, k):
    """Delta-method variance of r_lk from the three relevant Theta entries."""
    p = len(sets_list)
    theta = naive_theta(z, sets_list)
    sig = naive_sigma(naive_c(z), sets_list)
    idx = [l + k * p, l + l * p, k + k * p]
    sub = theta[np.ix_(idx, idx)]
    s_ll, s_kk = sig[l, l], sig[k, k]
    r = sig[l, k] / np.sqrt(s_ll * s_kk)
    f = np.array([1 / np.sqrt(s_ll * s_kk), -r / (2 * s_ll), -r / (2 * s_kk)])
    return float(f @ sub @ f)


def random_map(rng, p, min_unique=2, max_unique=4, n_shared=None):
    """Random binding matrix with ``min_unique..max_unique`` unique members per column."""
    cols = []
    for l in range(p):
        for _ in range(rng.integers(min_unique, max_unique + 1)):
            row = np.zeros(p, dtype=int)
            row[l] = 1
            cols.append(row)
    if n_shared is None:
        n_shared = rng.integers(0, 3) if p > 1 else 0
    for _ in range(n_shared):
        row = np.zeros(p, dtype=int)
        row[rng.choice(p, size=min(p, 2), replace=False)] = 1
        cols.append(row)
    a = np.array(cols)
    return a[rng.permutation(a.shape[0])]
