"""Direct covariance and correlation estimator.

The covariance of higher-level variables ``l`` and ``k`` is the average of
the lower-level cross-products between their unique members; the variance of
``l`` is the average over distinct pairs within ``S_l``.  Noise variances sit
only on the diagonal of ``C`` and never enter.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import SampleMatrix, UniqueSets
from .errors import UVCError
from .moments import CrossProducts, cross_products

__all__ = [
    "CovEstimate",
    "estimate_sigma",
    "estimate_correlation",
    "estimate_direct",
]


@dataclass(frozen=True, eq=False)
class CovEstimate:
    """Direct estimate of the higher-level covariance and correlation.

    ``r_hat`` is NaN in every row and column whose variance estimate is not
    positive; those variables have ``diag_valid`` False.  Off-diagonal
    correlations outside [-1, 1] are kept as computed and listed in
    ``out_of_range``.
    """

    sigma_hat: np.ndarray
    r_hat: np.ndarray
    n: int
    diag_valid: np.ndarray
    names: tuple = ()
    out_of_range: list = field(default_factory=list)

    @property
    def p(self) -> int:
        return self.sigma_hat.shape[0]

    def undefined_entries(self) -> list[tuple[int, int]]:
        rows, cols = np.triu_indices(self.p)
        bad = np.isnan(self.r_hat[rows, cols])
        return [(int(a), int(b)) for a, b in zip(rows[bad], cols[bad])]


def estimate_sigma(c: CrossProducts | np.ndarray, sets: UniqueSets) -> np.ndarray:
    """Plug ``C_hat`` into the identification equations.

    Accepts a population ``C`` as well, in which case it returns ``Sigma``.
    """
    if not sets.satisfies_uvc():
        raise UVCError([sets.binding.higher_names[l] for l in np.flatnonzero(sets.sizes < 2)])
    cm = c.c_hat if isinstance(c, CrossProducts) else np.asarray(c, dtype=float)
    u = sets.indicator()
    block = u.T @ cm @ u
    block[np.diag_indices_from(block)] -= u.T @ np.diag(cm)
    s = sets.sizes.astype(float)
    counts = np.outer(s, s)
    counts[np.diag_indices_from(counts)] = s * (s - 1)
    sigma = block / counts
    return (sigma + sigma.T) / 2


def estimate_correlation(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalise a covariance estimate to a correlation estimate.

    Returns ``(r_hat, diag_valid)``.  No clipping to [-1, 1] is done.
    """
    sigma = np.asarray(sigma, dtype=float)
    d = np.diag(sigma).copy()
    valid = d > 0
    dd = np.where(valid, d, np.nan)
    r = sigma / np.sqrt(np.outer(dd, dd))
    r[np.diag_indices_from(r)] = np.where(valid, 1.0, np.nan)
    return r, valid


def estimate_direct(z, sets: UniqueSets, c: CrossProducts | None = None) -> CovEstimate:
    """Direct estimate from samples already aligned to ``sets.binding``."""
    if c is None:
        c = cross_products(z)
    sigma = estimate_sigma(c, sets)
    r, valid = estimate_correlation(sigma)
    names = sets.binding.higher_names
    iu = np.triu_indices_from(r, 1)
    off = np.abs(r[iu]) > 1
    out = [(int(a), int(b), float(r[a, b])) for a, b in zip(iu[0][off], iu[1][off])]
    if not valid.all():
        bad = [names[l] for l in np.flatnonzero(~valid)]
        warnings.warn(f"non-positive variance estimate for: {', '.join(bad)}", RuntimeWarning, stacklevel=2)
    if out:
        warnings.warn(f"{len(out)} correlation estimate(s) outside [-1, 1]", RuntimeWarning, stacklevel=2)
    n = z.n if isinstance(z, SampleMatrix) else c.n
    return CovEstimate(sigma, r, n, valid, tuple(names), out)
