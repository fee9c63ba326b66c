"""Binding maps, unique-variable sets and sample matrices.

A binding map is a q x p 0/1 matrix ``A`` whose entry ``A[j, l]`` is 1 when
lower-level variable ``j`` (a peptide, a gene) belongs to higher-level
variable ``l`` (a protein, a pathway).  Lower-level variables that belong to
exactly one higher-level variable are *unique*; the rest are *shared*.
Estimation needs at least two unique members per higher-level variable.

All indices in this module are 0-based.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ParseError, UVCError, ValidationError

__all__ = [
    "BindingMap",
    "UniqueSets",
    "SampleMatrix",
    "PairIndexSet",
    "read_table",
    "load_binding_map",
    "write_sparse_map",
    "write_dense_map",
    "derive_unique_sets",
    "check_uvc",
    "load_samples",
]


def _readonly(a):
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# delimiter-separated input
# ---------------------------------------------------------------------------


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        try:
            with open(source, encoding="utf-8", newline="") as fh:
                return fh.read()
        except OSError as exc:
            raise ParseError(f"cannot read {source}: {exc}") from exc
        except UnicodeDecodeError as exc:
            raise ParseError(f"{source} is not UTF-8 text: {exc}") from exc
    if hasattr(source, "read"):
        text = source.read()
        return text.decode("utf-8") if isinstance(text, bytes) else text
    raise TypeError(f"unsupported source type {type(source).__name__}")


def read_table(source):
    """Read a comma- or tab-separated table.

    The delimiter is whichever of tab and comma occurs more often in the
    first non-empty line.  Blank lines are skipped.

    Returns
    -------
    header : list of str
    rows : list of (line_number, list of str)
        Line numbers are 1-based and refer to the original text.
    """
    text = _open_text(source)
    if text.startswith("﻿"):
        text = text[1:]
    lines = text.splitlines()
    first = next((ln for ln in lines if ln.strip()), None)
    if first is None:
        raise ParseError("empty table")
    delim = "\t" if first.count("\t") >= first.count(",") and "\t" in first else ","

    header = None
    rows = []
    reader = csv.reader(io.StringIO(text), delimiter=delim)
    for cells in reader:
        lineno = reader.line_num
        if not cells or all(not c.strip() for c in cells):
            continue
        cells = [c.strip() for c in cells]
        if header is None:
            header = cells
            continue
        if len(cells) != len(header):
            raise ParseError(
                f"line {lineno}: expected {len(header)} fields, found {len(cells)}"
            )
        rows.append((lineno, cells))
    return header, rows


def _check_unique_names(names, what):
    seen = set()
    dups = []
    for nm in names:
        if nm == "":
            raise ValidationError(f"empty {what} name")
        if nm in seen:
            dups.append(nm)
        seen.add(nm)
    if dups:
        raise ValidationError(f"duplicate {what} names: {', '.join(sorted(set(dups)))}")


# ---------------------------------------------------------------------------
# binding map
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BindingMap:
    """Validated q x p binary membership matrix with row and column labels."""

    matrix: np.ndarray
    lower_names: tuple[str, ...]
    higher_names: tuple[str, ...]

    def __post_init__(self):
        a = np.asarray(self.matrix)
        if a.ndim != 2:
            raise ValidationError("binding matrix must be two-dimensional")
        if a.size and not np.all((a == 0) | (a == 1)):
            raise ValidationError("binding matrix entries must be 0 or 1")
        a = _readonly(a.astype(np.int8))
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "lower_names", tuple(str(s) for s in self.lower_names))
        object.__setattr__(self, "higher_names", tuple(str(s) for s in self.higher_names))
        q, p = a.shape
        if len(self.lower_names) != q or len(self.higher_names) != p:
            raise ValidationError(
                f"label counts ({len(self.lower_names)}, {len(self.higher_names)}) "
                f"do not match matrix shape {a.shape}"
            )
        _check_unique_names(self.lower_names, "lower-level")
        _check_unique_names(self.higher_names, "higher-level")
        orphans = [self.lower_names[j] for j in np.flatnonzero(a.sum(axis=1) == 0)]
        if orphans:
            raise ValidationError(f"orphan lower-level variable(s): {', '.join(orphans)}")
        empty = [self.higher_names[l] for l in np.flatnonzero(a.sum(axis=0) == 0)]
        if empty:
            raise ValidationError(f"higher-level variable(s) with no members: {', '.join(empty)}")

    @property
    def q(self) -> int:
        return self.matrix.shape[0]

    @property
    def p(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "BindingMap":
        """Build a map from (lower, higher) membership pairs.

        Names are ordered by first appearance.
        """
        lower: dict[str, int] = {}
        higher: dict[str, int] = {}
        entries = []
        for lo, hi in pairs:
            lo, hi = str(lo), str(hi)
            if lo == "" or hi == "":
                raise ValidationError("empty name in membership list")
            j = lower.setdefault(lo, len(lower))
            l = higher.setdefault(hi, len(higher))
            entries.append((j, l))
        a = np.zeros((len(lower), len(higher)), dtype=np.int8)
        for j, l in entries:
            a[j, l] = 1
        return cls(a, tuple(lower), tuple(higher))

    def to_pairs(self) -> list[tuple[str, str]]:
        return [
            (self.lower_names[j], self.higher_names[l])
            for j, l in zip(*np.nonzero(self.matrix))
        ]

    def members(self, l: int) -> np.ndarray:
        """Indices of all lower-level members of higher variable ``l``."""
        return np.flatnonzero(self.matrix[:, l])

    def subset(self, higher: Sequence[int], lower: Sequence[int]) -> "BindingMap":
        higher = list(higher)
        lower = list(lower)
        return BindingMap(
            self.matrix[np.ix_(lower, higher)],
            tuple(self.lower_names[j] for j in lower),
            tuple(self.higher_names[l] for l in higher),
        )

    def __eq__(self, other):
        """Maps are equal when they encode the same labelled memberships.

        Row and column order is ignored, so a dense table and its sparse
        listing compare equal even when the listing reorders names.
        """
        if not isinstance(other, BindingMap):
            return NotImplemented
        return (
            set(self.lower_names) == set(other.lower_names)
            and set(self.higher_names) == set(other.higher_names)
            and set(self.to_pairs()) == set(other.to_pairs())
        )

    def __hash__(self):
        return hash((frozenset(self.lower_names), frozenset(self.higher_names), frozenset(self.to_pairs())))

    def __repr__(self):
        return f"BindingMap(q={self.q}, p={self.p})"


def load_binding_map(source) -> BindingMap:
    """Load a binding map from a dense 0/1 table or a sparse membership list.

    The sparse form has the header ``lower,higher`` and one row per
    membership.  The dense form has higher-level names in the header and
    lower-level names in the first column.
    """
    header, rows = read_table(source)
    if [h.lower() for h in header] == ["lower", "higher"]:
        seen = set()
        pairs = []
        for lineno, (lo, hi) in rows:
            if not lo or not hi:
                raise ParseError(f"line {lineno}: empty name in membership list")
            if (lo, hi) in seen:
                continue
            seen.add((lo, hi))
            pairs.append((lo, hi))
        if not pairs:
            raise ParseError("membership list has no rows")
        return BindingMap.from_pairs(pairs)

    if len(header) < 2:
        raise ParseError("dense binding table needs a label column and at least one higher-level column")
    if not rows:
        raise ParseError("dense binding table has no rows")
    higher = header[1:]
    lower = []
    a = np.zeros((len(rows), len(higher)), dtype=np.int8)
    for i, (lineno, cells) in enumerate(rows):
        lower.append(cells[0])
        for l, cell in enumerate(cells[1:]):
            if cell not in ("0", "1"):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"line {lineno}: non-numeric entry {cell!r}") from None
                if v not in (0.0, 1.0):
                    raise ValidationError(f"line {lineno}: non-binary entry {cell!r}")
                cell = str(int(v))
            a[i, l] = int(cell)
        if not a[i].any():
            raise ValidationError(f"line {lineno}: orphan lower-level variable {cells[0]!r}")
    return BindingMap(a, tuple(lower), tuple(higher))


def write_sparse_map(bmap: BindingMap, path, delimiter=",") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(["lower", "higher"])
        w.writerows(bmap.to_pairs())


def write_dense_map(bmap: BindingMap, path, delimiter=",") -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow([""] + list(bmap.higher_names))
        for name, row in zip(bmap.lower_names, bmap.matrix):
            w.writerow([name] + [int(v) for v in row])


# ---------------------------------------------------------------------------
# unique-variable sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class UniqueSets:
    """Unique members ``S_l`` of every higher-level variable.

    Attributes
    ----------
    binding : BindingMap
        The map the sets were derived from.
    sets : tuple of ndarray
        ``sets[l]`` holds the sorted indices of lower-level variables whose
        only parent is ``l``.
    shared : ndarray
        Indices of lower-level variables with two or more parents.
    dropped : tuple of str
        Higher-level names removed by :func:`check_uvc` with ``policy="drop"``.
    """

    binding: BindingMap
    sets: tuple
    shared: np.ndarray
    dropped: tuple = field(default=())

    @property
    def p(self) -> int:
        return len(self.sets)

    @property
    def q(self) -> int:
        return self.binding.q

    @property
    def sizes(self) -> np.ndarray:
        return np.array([len(s) for s in self.sets], dtype=np.int64)

    def indicator(self) -> np.ndarray:
        """q x p 0/1 matrix with a 1 where row ``j`` is a unique member of ``l``."""
        u = np.zeros((self.q, self.p))
        for l, s in enumerate(self.sets):
            u[s, l] = 1.0
        return u

    def satisfies_uvc(self) -> bool:
        return bool(self.p == 0 or self.sizes.min() >= 2)

    def __repr__(self):
        return f"UniqueSets(p={self.p}, sizes={self.sizes.tolist()}, shared={len(self.shared)})"


def derive_unique_sets(bmap: BindingMap) -> UniqueSets:
    a = bmap.matrix
    rowsum = a.sum(axis=1)
    sets = tuple(
        _readonly(np.flatnonzero((a[:, l] == 1) & (rowsum == 1))) for l in range(bmap.p)
    )
    return UniqueSets(bmap, sets, _readonly(np.flatnonzero(rowsum >= 2)))


def check_uvc(sets: UniqueSets, policy: str = "strict") -> UniqueSets:
    """Enforce the unique-variable condition.

    ``strict`` raises :class:`UVCError` naming every higher-level variable
    with fewer than two unique members.  ``drop`` removes those variables
    and returns the sets of the reduced map; see the notes for which
    lower-level rows are removed with them.

    Notes
    -----
    Under ``drop``, a lower-level variable is removed when it belonged to any
    dropped higher-level variable.  This covers rows that would be orphaned,
    and also shared rows that would otherwise turn "unique" for a surviving
    parent while still carrying signal from the dropped one.  The unique sets
    of the surviving variables are therefore unchanged.
    """
    if policy not in ("strict", "drop"):
        raise ValueError(f"unknown UVC policy {policy!r}")
    bad = np.flatnonzero(sets.sizes < 2)
    if bad.size == 0:
        return sets
    names = [sets.binding.higher_names[l] for l in bad]
    if policy == "strict":
        raise UVCError(names)

    bmap = sets.binding
    keep_higher = np.setdiff1d(np.arange(bmap.p), bad)
    if keep_higher.size == 0:
        raise UVCError(names)
    touches_dropped = bmap.matrix[:, bad].any(axis=1)
    keep_lower = np.flatnonzero(~touches_dropped)
    reduced = derive_unique_sets(bmap.subset(keep_higher, keep_lower))
    return UniqueSets(
        reduced.binding, reduced.sets, reduced.shared, dropped=tuple(sets.dropped) + tuple(names)
    )


# ---------------------------------------------------------------------------
# index sets over pairs of lower-level variables
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PairIndexSet:
    """Set of ordered index pairs ``(i, j)`` selecting entries of ``C``.

    ``kind == "diag"`` is ``{(i, j): i, j in S_l, i != j}``;
    ``kind == "offdiag"`` is ``{(i, j): i in S_l, j in S_k}``;
    ``kind == "explicit"`` lists its pairs as ``zip(left, right)``.
    The diag and offdiag pairs are never listed unless :meth:`pairs` is
    called.
    """

    kind: str
    left: np.ndarray
    right: np.ndarray
    label: tuple

    @classmethod
    def diag(cls, sets: UniqueSets, l: int) -> "PairIndexSet":
        s = sets.sets[l]
        return cls("diag", s, s, (l, l))

    @classmethod
    def offdiag(cls, sets: UniqueSets, l: int, k: int) -> "PairIndexSet":
        if l == k:
            raise ValueError("offdiag set needs l != k")
        return cls("offdiag", sets.sets[l], sets.sets[k], (l, k))

    @classmethod
    def explicit(cls, pairs) -> "PairIndexSet":
        pairs = list(pairs)
        left = np.array([i for i, _ in pairs], dtype=np.int64)
        right = np.array([j for _, j in pairs], dtype=np.int64)
        return cls("explicit", left, right, tuple(pairs))

    def __len__(self):
        a, b = len(self.left), len(self.right)
        if self.kind == "explicit":
            return a
        return a * (a - 1) if self.kind == "diag" else a * b

    def pairs(self) -> list[tuple[int, int]]:
        if self.kind == "explicit":
            return [(int(i), int(j)) for i, j in zip(self.left, self.right)]
        if self.kind == "diag":
            return [(int(i), int(j)) for i in self.left for j in self.left if i != j]
        return [(int(i), int(j)) for i in self.left for j in self.right]

    def __repr__(self):
        return f"PairIndexSet({self.kind}{self.label})"


# ---------------------------------------------------------------------------
# samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """n x q matrix of lower-level measurements.

    ``raw_means`` keeps the column means before any centering; intensity
    based baselines rank variables by them.
    """

    values: np.ndarray
    lower_names: tuple[str, ...]
    centered: bool = False
    raw_means: np.ndarray | None = None
    sample_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValidationError("sample matrix must be two-dimensional")
        if v.shape[0] < 2:
            raise ValidationError(f"need at least 2 samples, got {v.shape[0]}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("sample matrix contains non-finite values")
        if len(self.lower_names) != v.shape[1]:
            raise ValidationError("column label count does not match sample matrix")
        object.__setattr__(self, "values", _readonly(v))
        object.__setattr__(self, "lower_names", tuple(str(s) for s in self.lower_names))
        rm = v.mean(axis=0) if self.raw_means is None else np.asarray(self.raw_means, float)
        object.__setattr__(self, "raw_means", _readonly(rm))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def q(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_array(cls, values, lower_names=None, center=False, sample_ids=None):
        v = np.asarray(values, dtype=float)
        if lower_names is None:
            lower_names = tuple(f"v{j + 1}" for j in range(v.shape[1]))
        raw_means = v.mean(axis=0) if v.ndim == 2 else None
        if center and v.ndim == 2:
            v = v - raw_means
        return cls(v, tuple(lower_names), bool(center), raw_means, sample_ids)

    def select(self, names: Sequence[str]) -> "SampleMatrix":
        """Reorder/subset columns by name."""
        index = {nm: j for j, nm in enumerate(self.lower_names)}
        missing = [nm for nm in names if nm not in index]
        if missing:
            raise ValidationError(f"sample columns missing: {', '.join(missing)}")
        cols = [index[nm] for nm in names]
        return SampleMatrix(
            self.values[:, cols], tuple(names), self.centered, self.raw_means[cols], self.sample_ids
        )

    def align(self, bmap: BindingMap) -> "SampleMatrix":
        """Reindex columns to ``bmap.lower_names``; extra columns are an error."""
        extra = sorted(set(self.lower_names) - set(bmap.lower_names))
        if extra:
            raise ValidationError(f"sample columns not in binding map: {', '.join(extra)}")
        return self.select(bmap.lower_names)


def load_samples(source, bmap: BindingMap | None = None, center: bool = True) -> SampleMatrix:
    """Read an n x q sample table and optionally center its columns.

    The header holds lower-level names; an optional first column named
    ``sample_id`` is kept as row labels.  With ``bmap`` given, columns are
    reindexed by name to the map's lower-level order and must match it
    exactly.
    """
    header, rows = read_table(source)
    ids = None
    if header and header[0].lower() == "sample_id":
        ids = tuple(cells[0] for _, cells in rows)
        header = header[1:]
        rows = [(ln, cells[1:]) for ln, cells in rows]
    _check_unique_names(header, "sample column")
    values = np.empty((len(rows), len(header)))
    for i, (lineno, cells) in enumerate(rows):
        for j, cell in enumerate(cells):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise ParseError(
                    f"line {lineno}: non-numeric value {cell!r} in column {header[j]!r}"
                ) from None
    if len(rows) < 2:
        raise ValidationError(f"need at least 2 samples, got {len(rows)}")
    if not np.all(np.isfinite(values)):
        raise ValidationError("sample table contains non-finite values")
    if bmap is not None:
        missing = [nm for nm in bmap.lower_names if nm not in set(header)]
        extra = [nm for nm in header if nm not in set(bmap.lower_names)]
        if missing or extra:
            parts = []
            if extra:
                parts.append(f"columns not in binding map: {', '.join(extra)}")
            if missing:
                parts.append(f"binding-map variables missing from samples: {', '.join(missing)}")
            raise ValidationError("; ".join(parts))
        index = {nm: j for j, nm in enumerate(header)}
        cols = [index[nm] for nm in bmap.lower_names]
        values = values[:, cols]
        header = list(bmap.lower_names)
    return SampleMatrix.from_array(values, tuple(header), center=center, sample_ids=ids)
