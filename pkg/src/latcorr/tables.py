"""Delimiter-separated output with JSON sidecars."""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

from . import __version__


def fmt(x) -> str:
    """17 significant digits for floats so that tables round-trip exactly."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "NA"
        return "%.17g" % x
    return str(x)


def write_matrix(path, mat, row_names, col_names=None, delimiter="\t") -> None:
    col_names = row_names if col_names is None else col_names
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow([""] + list(col_names))
        for name, row in zip(row_names, np.asarray(mat)):
            w.writerow([name] + [fmt(v) for v in row])


def read_matrix(path, delimiter="\t"):
    """Inverse of :func:`write_matrix`; returns ``(matrix, row_names, col_names)``."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    cols = rows[0][1:]
    names = [r[0] for r in rows[1:]]
    mat = np.array([[float("nan") if v == "NA" else float(v) for v in r[1:]] for r in rows[1:]])
    return mat, names, cols


def write_rows(path, rows, columns=None, delimiter="\t") -> None:
    rows = list(rows)
    if columns is None:
        columns = list(rows[0]) if rows else []
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([fmt(r.get(c, "")) for c in columns])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if math.isnan(x) or math.isinf(x) else x
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    if isinstance(obj, os.PathLike):
        return os.fspath(obj)
    return str(obj)


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_sidecar(path, command, config, timings, warnings_list) -> str:
    side = os.path.splitext(os.fspath(path))[0] + ".meta.json"
    write_json(side, {
        "version": __version__,
        "command": command,
        "config": config,
        "timings": timings,
        "warnings": list(warnings_list),
    })
    return side
