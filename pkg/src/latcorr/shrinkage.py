"""Shrinkage of the direct estimate toward its diagonal.

``Sigma_sh = rho * diag(Sigma_hat) + (1 - rho) * Sigma_hat``.  The weight is
the larger of the risk-minimising weight and the smallest weight that keeps
the shrunken correlation matrix positive definite with margin ``kappa``.
Off-diagonal correlations all scale by ``1 - rho``, so their ratios are
unchanged.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import UniqueSets
from .direct import CovEstimate, estimate_correlation, estimate_direct, estimate_sigma
from .errors import NumericalError, ValidationError
from .moments import UniqueMoments, _values, cross_products

__all__ = [
    "DEFAULT_KAPPA_GRID",
    "PSD_TOL",
    "RiskComponents",
    "ShrinkageResult",
    "CvReport",
    "risk_components",
    "min_eigenvalue",
    "rho_of_kappa",
    "shrink",
    "cross_validate_kappa",
    "shrink_estimate",
]

DEFAULT_KAPPA_GRID = (0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0)
PSD_TOL = 1e-10


@dataclass(frozen=True)
class RiskComponents:
    alpha2: float
    beta2: float
    gamma2: float


@dataclass
class CvReport:
    grid: tuple
    scores: np.ndarray
    B: int
    split: tuple
    chosen_kappa: float
    skipped_splits: int = 0

    def rows(self):
        for k, s in zip(self.grid, self.scores):
            yield {"kappa": float(k), "cv_score": float(s)}


@dataclass
class ShrinkageResult:
    kappa: float
    rho: float
    alpha2: float
    beta2: float
    gamma2: float
    lambda_min_dir: float
    lambda_min_sh: float
    sigma_sh: np.ndarray
    r_sh: np.ndarray
    binding: str
    cv: CvReport | None = field(default=None)


def risk_components(z, sets: UniqueSets, cov: CovEstimate, c=None, v_denominator="mixed",
                    moments: UniqueMoments | None = None) -> RiskComponents:
    """Plug-in estimates of the three risk terms that set the shrinkage weight.

    ``beta2`` estimates the summed variance of the diagonal entries,
    ``gamma2`` the summed variance of all p^2 entries (trace of the
    asymptotic covariance over n) and ``alpha2`` the expected squared
    distance between ``Sigma`` and ``diag(Sigma_hat)``.  ``c`` is unused.
    """
    um = moments if moments is not None else UniqueMoments(z, sets, v_denominator)
    n = um.n
    s = um.sizes
    diag_scale = s**2 * (s - 1) ** 2
    dd = np.diag(um.diag_diag())
    beta2 = float(np.sum(dd / diag_scale) / n)

    oo = um.off_off() / np.outer(s**2, s**2)
    np.fill_diagonal(oo, 0.0)
    gamma2 = float((np.sum(dd / diag_scale) + oo.sum()) / n)

    sig = cov.sigma_hat
    d = np.diag(sig)
    alpha2 = float(np.sum(sig**2) - 2 * np.trace(sig @ np.diag(d)) + np.sum(d**2) + beta2)
    return RiskComponents(alpha2, beta2, gamma2)


def min_eigenvalue(r: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix."""
    r = np.asarray(r, dtype=float)
    return float(np.linalg.eigvalsh((r + r.T) / 2)[0])


def rho_of_kappa(alpha2, beta2, gamma2, lambda_min, kappa) -> tuple[float, str]:
    """Shrinkage weight and which bound is active (``"risk"`` or ``"eigenvalue"``).

    A ``lambda_min`` above ``-PSD_TOL`` counts as positive semidefinite and
    leaves only the risk bound.
    """
    if not kappa > 0:
        raise ValueError("kappa must be > 0")
    den = alpha2 + gamma2 - 2 * beta2
    if not (alpha2 > beta2 and gamma2 > beta2):
        warnings.warn(
            "risk components violate alpha2 > beta2 < gamma2; risk weight clamped", RuntimeWarning, stacklevel=2
        )
    risk = (gamma2 - beta2) / den if den > 0 else 0.0
    risk = float(min(max(risk, 0.0), np.nextafter(1.0, 0.0)))
    lam = 0.0 if lambda_min > -PSD_TOL else abs(lambda_min)
    a = (1 + kappa) * lam
    eig = a / (1 + a)
    if eig > risk:
        return float(eig), "eigenvalue"
    return risk, "risk"


def shrink(cov: CovEstimate | np.ndarray, rho: float) -> tuple[np.ndarray, np.ndarray]:
    """Convex combination of the covariance estimate and its diagonal."""
    sigma = cov.sigma_hat if isinstance(cov, CovEstimate) else np.asarray(cov, dtype=float)
    if not 0 <= rho < 1:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    d = np.diag(sigma)
    if np.any(d <= 0):
        raise NumericalError(
            f"shrinkage needs positive variance estimates; non-positive at indices {np.flatnonzero(d <= 0).tolist()}"
        )
    sigma_sh = (1 - rho) * sigma
    sigma_sh[np.diag_indices_from(sigma_sh)] = d
    r_sh, _ = estimate_correlation(sigma_sh)
    return sigma_sh, r_sh


def _split_sizes(n, split_ratio):
    if not 0 < split_ratio < 1:
        raise ValueError("split_ratio must lie in (0, 1)")
    n1 = int(round(n * split_ratio))
    n2 = n - n1
    if n1 < 2 or n2 < 2:
        raise ValidationError(f"cross-validation split ({n1}, {n2}) leaves a part with fewer than 2 samples")
    return n1, n2


def cross_validate_kappa(z, sets: UniqueSets, grid=DEFAULT_KAPPA_GRID, B: int = 20, split_ratio: float = 0.5,
                         seed=0, v_denominator="mixed") -> CvReport:
    """Choose ``kappa`` by repeated random two-way splits.

    For each split the first part is shrunk (weights from its own plug-in
    estimates) and compared in squared Frobenius norm with the unshrunk
    estimate from the second part.  Splits whose first part has a
    non-positive variance estimate cannot be shrunk and are skipped.
    """
    grid = tuple(float(k) for k in grid)
    if not grid:
        raise ValueError("kappa grid is empty")
    if B < 1:
        raise ValueError("B must be >= 1")
    x = _values(z)
    n = x.shape[0]
    n1, n2 = _split_sizes(n, split_ratio)
    rng = np.random.default_rng(seed)
    total = np.zeros(len(grid))
    used = 0
    for _ in range(B):
        perm = rng.permutation(n)
        x1, x2 = x[perm[:n1]], x[perm[n1:]]
        sigma2 = estimate_sigma(cross_products(x2), sets)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            cov1 = estimate_direct(x1, sets)
            if not cov1.diag_valid.all():
                continue
            rc = risk_components(x1, sets, cov1, v_denominator=v_denominator)
            lam = min_eigenvalue(cov1.r_hat)
            for g, kappa in enumerate(grid):
                rho, _ = rho_of_kappa(rc.alpha2, rc.beta2, rc.gamma2, lam, kappa)
                s1, _ = shrink(cov1, rho)
                total[g] += np.sum((s1 - sigma2) ** 2)
        used += 1
    if used == 0:
        raise NumericalError("every cross-validation split had a non-positive variance estimate")
    scores = total / used
    best = scores.min()
    chosen = min(k for k, s in zip(grid, scores) if s == best)
    return CvReport(grid, scores, B, (n1, n2), chosen, B - used)


def shrink_estimate(z, sets: UniqueSets, cov: CovEstimate | None = None, kappa="cv", grid=DEFAULT_KAPPA_GRID,
                    B: int = 20, split_ratio: float = 0.5, seed=0, v_denominator="mixed") -> ShrinkageResult:
    """Full shrinkage pipeline on one data set.

    ``kappa`` is a positive number or ``"cv"`` for cross-validation over
    ``grid``.
    """
    if cov is None:
        cov = estimate_direct(z, sets)
    if not cov.diag_valid.all():
        bad = [cov.names[l] if cov.names else str(l) for l in np.flatnonzero(~cov.diag_valid)]
        raise NumericalError(f"shrinkage needs positive variance estimates; drop: {', '.join(bad)}")
    report = None
    if kappa == "cv":
        report = cross_validate_kappa(z, sets, grid, B, split_ratio, seed, v_denominator)
        kappa = report.chosen_kappa
    kappa = float(kappa)
    rc = risk_components(z, sets, cov, v_denominator=v_denominator)
    lam = min_eigenvalue(cov.r_hat)
    rho, branch = rho_of_kappa(rc.alpha2, rc.beta2, rc.gamma2, lam, kappa)
    sigma_sh, r_sh = shrink(cov, rho)
    return ShrinkageResult(
        kappa, rho, rc.alpha2, rc.beta2, rc.gamma2, lam, min_eigenvalue(r_sh), sigma_sh, r_sh, branch, report
    )
