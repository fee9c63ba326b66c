"""Asymptotic variances and boundary-null tests for direct correlations.

For a pair ``(l, k)`` the estimate ``r_hat = s_lk / sqrt(s_ll s_kk)`` is a
smooth function of three covariance estimates, so its variance follows from
the 3 x 3 asymptotic covariance ``Upsilon`` of ``(s_lk, s_ll, s_kk)`` by the
delta method.  The test of ``H0: |r| <= xi`` is calibrated at ``|r| = xi``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats

from .data import PairIndexSet, UniqueSets
from .direct import CovEstimate
from .errors import UVCError
from .moments import CrossProducts, UniqueMoments, quad_form_batch

__all__ = [
    "PairInference",
    "InferenceResult",
    "normal_sf",
    "upsilon",
    "delta2",
    "test_pair",
    "theta_entry",
    "infer_all",
    "pairwise_delta2",
]

P_FLOOR = 1e-300


def normal_sf(x):
    """Upper tail ``P(Z > x)`` of the standard normal via ``erfc``."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / np.sqrt(2.0))


@dataclass(frozen=True)
class PairInference:
    l: int
    k: int
    r_hat: float
    delta2_hat: float
    t_plus: float
    t_minus: float
    p_value: float
    xi: float
    flags: tuple = ()

    @property
    def delta_hat(self) -> float:
        return float(np.sqrt(self.delta2_hat))


def _scales(sl, sk):
    """Printed normalising constants of the six distinct Upsilon entries."""
    return (
        sl**2 * sk**2,
        sl**2 * sk * (sl - 1),
        sk**2 * sl * (sk - 1),
        sl**2 * (sl - 1) ** 2,
        sl * sk * (sl - 1) * (sk - 1),
        sk**2 * (sk - 1) ** 2,
    )


def upsilon(l, k, z, c: CrossProducts, sets: UniqueSets, v_denominator="mixed") -> np.ndarray:
    """3 x 3 asymptotic covariance of ``(s_lk, s_ll, s_kk)`` with ``V`` replaced by ``V_hat``."""
    if l == k:
        raise ValueError("upsilon needs l != k")
    if min(len(sets.sets[l]), len(sets.sets[k])) < 2:
        raise UVCError([sets.binding.higher_names[i] for i in (l, k) if len(sets.sets[i]) < 2])
    off = PairIndexSet.offdiag(sets, l, k)
    dl = PairIndexSet.diag(sets, l)
    dk = PairIndexSet.diag(sets, k)
    q = quad_form_batch(
        z, c, [(off, off), (off, dl), (off, dk), (dl, dl), (dl, dk), (dk, dk)], v_denominator
    )
    sl, sk = float(len(dl.left)), float(len(dk.left))
    s = _scales(sl, sk)
    u00, u01, u02, u11, u12, u22 = (qv / sv for qv, sv in zip(q, s))
    return np.array([[u00, u01, u02], [u01, u11, u12], [u02, u12, u22]])


def _f_vectors(s_ll, s_kk, r):
    return (
        1.0 / np.sqrt(s_ll * s_kk),
        -r / (2.0 * s_ll),
        -r / (2.0 * s_kk),
    )


def delta2(l, k, cov: CovEstimate, ups: np.ndarray) -> float:
    """Plug-in ``f' Upsilon f``; NaN when either variance estimate is not positive."""
    s_ll, s_kk = cov.sigma_hat[l, l], cov.sigma_hat[k, k]
    if not (s_ll > 0 and s_kk > 0):
        return float("nan")
    f = np.array(_f_vectors(s_ll, s_kk, cov.r_hat[l, k]))
    d2 = float(f @ ups @ f)
    if d2 < 0:
        warnings.warn(f"negative variance estimate {d2:.3g} for pair ({l}, {k}) set to 0", RuntimeWarning, stacklevel=2)
        d2 = 0.0
    return d2


def _test_arrays(r, d2, n, xi):
    r = np.asarray(r, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    if xi < 0:
        raise ValueError("xi must be >= 0")
    hi = np.maximum(r - xi, 0.0)
    lo = np.minimum(r + xi, 0.0)
    sd = np.sqrt(d2)
    rootn = np.sqrt(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        tp = np.where(hi > 0, rootn * hi / sd, 0.0)
        tm = np.where(lo < 0, rootn * lo / sd, 0.0)
    stat = np.maximum(np.abs(tp), np.abs(tm))
    p = np.minimum(2.0 * normal_sf(stat), 1.0)
    degenerate = (d2 == 0) & ((hi > 0) | (lo < 0))
    underflow = (p < P_FLOOR) & ~degenerate
    p = np.where(p < P_FLOOR, 0.0, p)
    return tp, tm, p, degenerate, underflow


def test_pair(l, k, r_hat, delta2_hat, n, xi=0.0) -> PairInference:
    """Two-sided test of ``|r_lk| <= xi`` from an estimate and its variance."""
    if n < 2:
        raise ValueError("n must be >= 2")
    tp, tm, p, degenerate, underflow = _test_arrays(r_hat, delta2_hat, n, xi)
    flags = []
    if degenerate:
        warnings.warn(f"zero variance estimate for pair ({l}, {k})", RuntimeWarning, stacklevel=2)
        flags.append("degenerate-variance")
    if underflow:
        flags.append("p-underflow")
    if abs(r_hat) > 1:
        flags.append("r-out-of-range")
    return PairInference(int(l), int(k), float(r_hat), float(delta2_hat), float(tp), float(tm), float(p), float(xi), tuple(flags))


test_pair.__test__ = False  # not a pytest test


def theta_entry(r_index, s_index, z, c: CrossProducts, sets: UniqueSets, v_denominator="mixed") -> float:
    """Entry of the p^2 x p^2 asymptotic covariance of ``vec(Sigma_hat)``.

    Indices are column-major: ``r = l1 + k1 * p`` addresses ``(l1, k1)``.
    """
    p = sets.p
    l1, k1 = r_index % p, r_index // p
    l2, k2 = s_index % p, s_index // p
    sizes = sets.sizes.astype(float)

    def key(l, k):
        if l == k:
            return PairIndexSet.diag(sets, l), sizes[l] * (sizes[l] - 1)
        return PairIndexSet.offdiag(sets, l, k), sizes[l] * sizes[k]

    a, na = key(l1, k1)
    b, nb = key(l2, k2)
    (qv,) = quad_form_batch(z, c, [(a, b)], v_denominator)
    return qv / (na * nb)


@dataclass
class InferenceResult:
    """All-pairs test results for one threshold ``xi``.

    ``records`` holds one :class:`PairInference` per pair ``l < k`` with
    positive variance estimates, ordered lexicographically.  Pairs with an
    invalid variance are in ``skipped`` as ``(l, k, reason)``.
    """

    records: list
    skipped: list
    xi: float
    n: int
    names: tuple = ()
    p_bh: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.p_bh is None:
            pv = np.array([rec.p_value for rec in self.records])
            self.p_bh = stats.false_discovery_control(pv) if pv.size else pv

    def p_values(self) -> np.ndarray:
        return np.array([rec.p_value for rec in self.records])

    def rows(self):
        """Long-format rows for output tables."""
        names = self.names or tuple(str(i) for i in range(1 + max([r.k for r in self.records], default=0)))
        for rec, pbh in zip(self.records, self.p_bh):
            yield {
                "higher_l": names[rec.l],
                "higher_k": names[rec.k],
                "r_hat": rec.r_hat,
                "delta_hat": rec.delta_hat,
                "t_plus": rec.t_plus,
                "t_minus": rec.t_minus,
                "p_value": rec.p_value,
                "p_bh": float(pbh),
                "flags": ";".join(rec.flags),
            }
        for l, k, reason in self.skipped:
            yield {
                "higher_l": names[l],
                "higher_k": names[k],
                "r_hat": float("nan"),
                "delta_hat": float("nan"),
                "t_plus": float("nan"),
                "t_minus": float("nan"),
                "p_value": float("nan"),
                "p_bh": float("nan"),
                "flags": reason,
            }


def pairwise_delta2(z, sets: UniqueSets, cov: CovEstimate, v_denominator="mixed",
                    moments: UniqueMoments | None = None) -> np.ndarray:
    """p x p matrix of plug-in variances ``delta2[l, k]`` (NaN on the diagonal and invalid pairs).

    Uses six O(n p^2) matrix products instead of per-pair loops.
    """
    um = moments if moments is not None else UniqueMoments(z, sets, v_denominator)
    s = um.sizes
    sl, sk = s[:, None], s[None, :]
    oo = um.off_off()
    od = um.off_diag()  # [l, k] -> (lk, ll)
    dd = um.diag_diag()
    sc = _scales(sl, sk)
    u00 = oo / sc[0]
    u01 = od / sc[1]
    u02 = od.T / sc[2]
    u11 = np.diag(dd)[:, None] / sc[3]
    u12 = dd / sc[4]
    u22 = np.diag(dd)[None, :] / sc[5]

    sig = cov.sigma_hat
    d = np.diag(sig)
    with np.errstate(divide="ignore", invalid="ignore"):
        f0, f1, f2 = _f_vectors(d[:, None], d[None, :], cov.r_hat)
        out = (
            f0 * f0 * u00 + f1 * f1 * u11 + f2 * f2 * u22
            + 2 * (f0 * f1 * u01 + f0 * f2 * u02 + f1 * f2 * u12)
        )
    valid = (d[:, None] > 0) & (d[None, :] > 0)
    out = np.where(valid, out, np.nan)
    out[np.diag_indices_from(out)] = np.nan
    return out


def infer_all(z, sets: UniqueSets, cov: CovEstimate, xi: float = 0.0, c: CrossProducts | None = None,
              v_denominator="mixed", moments: UniqueMoments | None = None) -> InferenceResult:
    """Test ``|r_lk| <= xi`` for every pair ``l < k``.

    ``c`` is accepted for interface symmetry; the all-pairs path works from
    per-sample group sums and does not need ``C_hat``.
    """
    d2 = pairwise_delta2(z, sets, cov, v_denominator, moments)
    p = cov.p
    iu, ju = np.triu_indices(p, 1)
    valid = cov.diag_valid[iu] & cov.diag_valid[ju]
    # an exactly zero covariance estimate is no evidence against |r| <= xi,
    # whatever the variances; such pairs get p = 1 instead of being skipped
    null = ~valid & (cov.sigma_hat[iu, ju] == 0)
    skip = ~valid & ~null
    skipped = [(int(a), int(b), "non-positive-variance") for a, b in zip(iu[skip], ju[skip])]
    li, ki = iu[valid], ju[valid]
    dv = d2[li, ki]
    neg = dv < 0
    if neg.any():
        warnings.warn(f"{int(neg.sum())} negative variance estimate(s) set to 0", RuntimeWarning, stacklevel=2)
        dv = np.where(neg, 0.0, dv)
    r = cov.r_hat[li, ki]
    tp, tm, pv, degenerate, underflow = _test_arrays(r, dv, cov.n, xi)
    if degenerate.any():
        warnings.warn(f"{int(degenerate.sum())} pair(s) with zero variance estimate", RuntimeWarning, stacklevel=2)
    records = []
    for idx in range(li.size):
        flags = []
        if neg[idx]:
            flags.append("negative-variance-clamped")
        if degenerate[idx]:
            flags.append("degenerate-variance")
        if underflow[idx]:
            flags.append("p-underflow")
        if abs(r[idx]) > 1:
            flags.append("r-out-of-range")
        records.append(
            PairInference(int(li[idx]), int(ki[idx]), float(r[idx]), float(dv[idx]), float(tp[idx]),
                          float(tm[idx]), float(pv[idx]), float(xi), tuple(flags))
        )
    for a, b in zip(iu[null], ju[null]):
        records.append(
            PairInference(int(a), int(b), float("nan"), float("nan"), 0.0, 0.0, 1.0, float(xi),
                          ("non-positive-variance", "zero-covariance"))
        )
    records.sort(key=lambda rec: (rec.l, rec.k))
    return InferenceResult(records, skipped, float(xi), cov.n, tuple(cov.names))
