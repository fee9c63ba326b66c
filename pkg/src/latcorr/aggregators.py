"""Aggregation baselines.

Each method compresses the lower-level members of every higher-level
variable into one score per sample; correlations are then taken between
score columns and tested with the Fisher transform.  These are the
comparators for the direct estimator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .data import BindingMap, SampleMatrix, UniqueSets
from .inference import normal_sf

__all__ = [
    "METHODS",
    "AggregateScores",
    "MedianPolish",
    "median_polish",
    "aggregate",
    "baseline_correlation",
    "fisher_test",
]

METHODS = ("SUV", "MUV", "SAV", "MAV", "TMP_ALL", "TMP_UNI", "SVD_ALL", "SVD_UNI", "STI", "MT50")

_UNIQUE_ONLY = {"SUV", "MUV", "TMP_UNI", "SVD_UNI", "STI"}
_MIN_MEMBERS = {"STI": 3}


@dataclass
class AggregateScores:
    """n x p' matrix of per-sample scores; ``skipped`` maps name -> reason."""

    method: str
    scores: np.ndarray
    names: tuple
    skipped: dict = field(default_factory=dict)


@dataclass
class MedianPolish:
    overall: float
    row: np.ndarray
    col: np.ndarray
    residuals: np.ndarray
    converged: bool
    sweeps: int


def median_polish(x, max_sweeps: int = 10, tol: float = 1e-6) -> MedianPolish:
    """Tukey's two-way median polish, rows first.

    Stops when a full sweep changes no residual by ``tol`` or more.
    """
    r = np.array(x, dtype=float, copy=True)
    nr, nc = r.shape
    overall = 0.0
    row = np.zeros(nr)
    col = np.zeros(nc)
    converged = False
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        rdelta = np.median(r, axis=1)
        r -= rdelta[:, None]
        row += rdelta
        delta = np.median(col)
        col -= delta
        overall += delta

        cdelta = np.median(r, axis=0)
        r -= cdelta[None, :]
        col += cdelta
        delta = np.median(row)
        row -= delta
        overall += delta

        change = max(np.max(np.abs(rdelta)), np.max(np.abs(cdelta)))
        if change < tol:
            converged = True
            break
    return MedianPolish(overall, row, col, r, converged, sweeps)


def _first_direction(sub: np.ndarray) -> np.ndarray:
    """Leading right singular vector of the column-centred ``sub`` with a fixed sign."""
    centred = sub - sub.mean(axis=0)
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    v = vt[0]
    s = v.sum()
    if s < 0:
        v = -v
    elif s == 0:
        nz = np.flatnonzero(v)
        if nz.size and v[nz[0]] < 0:
            v = -v
    return centred @ v


def _top_by_mean(idx: np.ndarray, means: np.ndarray, m: int) -> np.ndarray:
    # stable sort on -mean keeps lower column index first among ties
    order = np.argsort(-means[idx], kind="stable")
    return idx[order[:m]]


def _score(method: str, x: np.ndarray, members: np.ndarray, means: np.ndarray) -> np.ndarray:
    sub = x[:, members]
    if method in ("SUV", "SAV"):
        return sub.sum(axis=1)
    if method in ("MUV", "MAV"):
        return sub.mean(axis=1)
    if method in ("TMP_ALL", "TMP_UNI"):
        mp = median_polish(sub.T)
        return mp.overall + mp.col
    if method in ("SVD_ALL", "SVD_UNI"):
        return _first_direction(sub)
    if method == "STI":
        return x[:, _top_by_mean(members, means, 3)].sum(axis=1)
    if method == "MT50":
        m = math.ceil(len(members) / 2)
        return x[:, _top_by_mean(members, means, m)].mean(axis=1)
    raise ValueError(f"unknown aggregation method {method!r}")


def aggregate(z: SampleMatrix, bmap: BindingMap, sets: UniqueSets, method: str) -> AggregateScores:
    """Per-sample scores of every higher-level variable under ``method``.

    Intensity ranking (STI, MT50) uses the raw column means recorded before
    any centering.
    """
    method = method.upper().replace("-", "_")
    if method not in METHODS:
        raise ValueError(f"unknown aggregation method {method!r}; choose from {', '.join(METHODS)}")
    x = z.values
    means = z.raw_means
    need = _MIN_MEMBERS.get(method, 1)
    cols, names, skipped = [], [], {}
    for l, name in enumerate(bmap.higher_names):
        members = sets.sets[l] if method in _UNIQUE_ONLY else bmap.members(l)
        if len(members) < need:
            kind = "unique members" if method in _UNIQUE_ONLY else "members"
            skipped[name] = f"{method} needs >= {need} {kind}, found {len(members)}"
            continue
        cols.append(_score(method, x, np.asarray(members), means))
        names.append(name)
    scores = np.column_stack(cols) if cols else np.empty((z.n, 0))
    return AggregateScores(method, scores, tuple(names), skipped)


def baseline_correlation(scores: AggregateScores | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pearson correlation of score columns; returns ``(r, valid)``.

    Columns with zero sample variance give NaN rows and columns.
    """
    s = scores.scores if isinstance(scores, AggregateScores) else np.asarray(scores, dtype=float)
    centred = s - s.mean(axis=0)
    ss = np.sqrt(np.sum(centred**2, axis=0))
    valid = ss > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(valid, centred / np.where(valid, ss, 1.0), np.nan)
    r = u.T @ u
    r[np.diag_indices_from(r)] = np.where(valid, 1.0, np.nan)
    return r, valid


def fisher_test(r_hat, n: int, xi: float = 0.0):
    """p-value for ``|r| <= xi`` from the Fisher z-transform with ``n - 3`` degrees.

    Works elementwise on arrays.  ``|r| = 1`` gives p = 0.
    """
    if n < 4:
        raise ValueError("Fisher test needs n >= 4")
    if xi < 0 or xi >= 1:
        raise ValueError("xi must lie in [0, 1)")
    r = np.abs(np.asarray(r_hat, dtype=float))
    if np.any(r >= 1):
        warnings.warn("|r| = 1 in Fisher test; p-value set to 0", RuntimeWarning, stacklevel=2)
    with np.errstate(divide="ignore"):
        zr = np.arctanh(np.minimum(r, 1.0))
    stat = math.sqrt(n - 3) * np.maximum(zr - math.atanh(xi), 0.0)
    p = np.minimum(2.0 * normal_sf(stat), 1.0)
    p = np.where(r >= 1, 0.0, p)
    return float(p) if p.ndim == 0 else p
