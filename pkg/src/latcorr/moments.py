"""Sample cross-products and fourth-moment quadratic forms.

The asymptotic variances need quadratic forms ``m_a' V m_b`` of the
q^2 x q^2 fourth-moment matrix

    V_hat = n^-1 sum_i (z_i z_i') kron (z_i z_i') - vec(C_hat) vec(C_hat)'

where ``m_a`` is the 0/1 indicator of a set of index pairs.  Since
``m_a' vec(z z') = sum_{(i,j) in a} z_i z_j =: g_a(z)``, every such form
reduces to a product moment of two scalars per sample,

    m_a' V_hat m_b = n^-1 sum_i g_a(z_i) g_b(z_i) - G_a G_b,

with ``G_a = m_a' vec(C_hat)``.  ``V_hat`` itself is never formed.

Note the mixed denominators: ``C_hat`` divides by ``n - 1`` and the first
term of ``V_hat`` by ``n``.  ``v_denominator="uniform-n"`` replaces the
``C_hat`` in the subtracted term by its ``n``-denominator version.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import PairIndexSet, SampleMatrix, UniqueSets

__all__ = [
    "CrossProducts",
    "cross_products",
    "pair_sum",
    "quad_form",
    "quad_form_batch",
    "UniqueMoments",
    "V_DENOMINATORS",
]

V_DENOMINATORS = ("mixed", "uniform-n")


def _values(z) -> np.ndarray:
    return z.values if isinstance(z, SampleMatrix) else np.asarray(z, dtype=float)


def _check_vden(v_denominator):
    if v_denominator not in V_DENOMINATORS:
        raise ValueError(f"v_denominator must be one of {V_DENOMINATORS}, got {v_denominator!r}")


@dataclass(frozen=True, eq=False)
class CrossProducts:
    """``c_hat[j, k] = (n - 1)^-1 sum_i z_ij z_ik``."""

    c_hat: np.ndarray
    n: int


def cross_products(z) -> CrossProducts:
    x = _values(z)
    n = x.shape[0]
    if n < 2:
        raise ValueError("cross products need n >= 2")
    c = x.T @ x / (n - 1)
    c = (c + c.T) / 2
    return CrossProducts(c, n)


def pair_sum(c: CrossProducts | np.ndarray, s: PairIndexSet) -> float:
    """Sum of ``c_hat[i, j]`` over the pairs in ``s``."""
    cm = c.c_hat if isinstance(c, CrossProducts) else np.asarray(c, dtype=float)
    if s.kind == "explicit":
        return float(cm[s.left, s.right].sum())
    block = cm[np.ix_(s.left, s.right)]
    total = block.sum()
    if s.kind == "diag":
        total -= np.trace(block)
    return float(total)


def _g(x: np.ndarray, s: PairIndexSet, cache=None) -> np.ndarray:
    """Per-sample ``g_s(z_i) = sum_{(a,b) in s} z_ia z_ib``."""
    if s.kind == "explicit":
        return np.einsum("ij,ij->i", x[:, s.left], x[:, s.right])

    def sums(idx):
        key = idx.tobytes()
        if cache is not None and key in cache:
            return cache[key]
        sub = x[:, idx]
        out = (sub.sum(axis=1), (sub * sub).sum(axis=1))
        if cache is not None:
            cache[key] = out
        return out

    t_left, sq_left = sums(s.left)
    if s.kind == "diag":
        return t_left * t_left - sq_left
    t_right, _ = sums(s.right)
    return t_left * t_right


def _center_term(c, s, n, v_denominator):
    g = pair_sum(c, s)
    return g if v_denominator == "mixed" else g * (n - 1) / n


def quad_form(z, c: CrossProducts, a: PairIndexSet, b: PairIndexSet | None = None,
              v_denominator: str = "mixed") -> float:
    """``m_a' V_hat m_b`` by streaming over samples (``b`` defaults to ``a``)."""
    _check_vden(v_denominator)
    b = a if b is None else b
    x = _values(z)
    n = x.shape[0]
    ga = _g(x, a)
    gb = ga if b is a else _g(x, b)
    return float(np.dot(ga, gb) / n - _center_term(c, a, n, v_denominator) * _center_term(c, b, n, v_denominator))


def quad_form_batch(z, c: CrossProducts, keys, v_denominator: str = "mixed") -> list[float]:
    """Evaluate ``quad_form`` for every ``(a, b)`` in ``keys``.

    Group sums and square sums of each distinct index set are computed once
    and reused, so every key costs O(n) after an O(n q) precompute.
    """
    _check_vden(v_denominator)
    x = _values(z)
    n = x.shape[0]
    cache: dict = {}
    gcache: dict = {}
    centers: dict = {}

    def g(s):
        k = id(s)
        if k not in gcache:
            gcache[k] = _g(x, s, cache)
            centers[k] = _center_term(c, s, n, v_denominator)
        return gcache[k], centers[k]

    out = []
    for a, b in keys:
        ga, Ga = g(a)
        gb, Gb = g(b)
        out.append(float(np.dot(ga, gb) / n - Ga * Gb))
    return out


class UniqueMoments:
    """Per-sample unique-group statistics shared by all pairs of a problem.

    ``T[i, l]`` is the sum of sample ``i`` over ``S_l`` and ``D[i, l]`` is
    ``T[i, l]**2`` minus the matching sum of squares, i.e. ``g`` for the
    diagonal set of ``l``.  From these every quadratic form needed for the
    variances of the whole p x p estimate is an O(n p^2) matrix product.
    """

    def __init__(self, z, sets: UniqueSets, v_denominator: str = "mixed"):
        _check_vden(v_denominator)
        x = _values(z)
        self.n = n = x.shape[0]
        self.sizes = sets.sizes.astype(float)
        self.v_denominator = v_denominator
        u = sets.indicator()
        self.T = x @ u
        self.D = self.T**2 - (x * x) @ u
        den = (n - 1) if v_denominator == "mixed" else n
        self.G_diag = self.D.sum(axis=0) / den
        self.G_off = self.T.T @ self.T / den

    def pair_sums(self):
        """Pair sums with the ``n - 1`` denominator: (diagonal sets, p x p off-diagonal sets)."""
        n = self.n
        return self.D.sum(axis=0) / (n - 1), self.T.T @ self.T / (n - 1)

    def diag_diag(self) -> np.ndarray:
        """``[l, k] -> m_ll' V m_kk``."""
        return self.D.T @ self.D / self.n - np.outer(self.G_diag, self.G_diag)

    def off_diag(self) -> np.ndarray:
        """``[l, k] -> m_lk' V m_ll``."""
        return (self.T * self.D).T @ self.T / self.n - self.G_off * self.G_diag[:, None]

    def off_off(self) -> np.ndarray:
        """``[l, k] -> m_lk' V m_lk``."""
        t2 = self.T**2
        return t2.T @ t2 / self.n - self.G_off**2
