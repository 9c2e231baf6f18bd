"""CSV and report serialisation.

All floats are written with 17 significant digits so values survive a
write/read cycle bit-for-bit; a missing value is an empty field.
"""
import csv
import math
import os

import numpy as np

from .gp import FieldPosterior, VelocityDataset, z_values

DATASET_COLUMNS = ("id", "time", "lon", "lat", "u", "v")
GRID_COLUMNS = ("x1", "x2", "mean_u", "mean_v", "var_u", "var_v",
                "mean_div", "var_div", "z_div", "mean_vort", "var_vort", "z_vort",
                "truth_u", "truth_v", "truth_div", "truth_vort")
TRACE_COLUMNS = ("iter", "lml")


def fmt(x):
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _parse(text):
    return None if text == "" else float(text)


def write_dataset(data, path):
    """Dataset CSV (``id,time,lon,lat,u,v``) readable by :func:`helmgp.ingest.read_drifters`.

    Missing ids become ``"0"``; missing times become the row index, which
    keeps the row order through the ingest sort.
    """
    M = len(data)
    ids = data.ids if data.ids is not None else ["0"] * M
    times = data.times if data.times is not None else np.arange(M, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATASET_COLUMNS)
        for i in range(M):
            (x, y), (u, v) = data.locations[i], data.velocities[i]
            w.writerow([ids[i], fmt(times[i]), fmt(x), fmt(y), fmt(u), fmt(v)])
    return path


def emit_grid(post, path, truth=None):
    """Write the grid CSV; every column is always present.

    ``truth`` is an optional :class:`helmgp.fields.FieldValues` on the same grid.
    """
    N = len(post)
    cols = {"x1": post.grid[:, 0], "x2": post.grid[:, 1]}
    for name in GRID_COLUMNS[2:12]:
        if name.startswith("z_"):
            f = name[2:]
            have = post.mean(f) is not None and post.var(f) is not None
            cols[name] = z_values(post, f) if have else None
        else:
            cols[name] = getattr(post, name)
    if truth is not None:
        cols["truth_u"] = truth.velocity[:, 0]
        cols["truth_v"] = truth.velocity[:, 1]
        cols["truth_div"] = truth.div
        cols["truth_vort"] = truth.vort
    for name, col in cols.items():
        if col is not None and len(col) != N:
            raise ValueError(f"column {name} has {len(col)} values for {N} grid points")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(GRID_COLUMNS)
        for i in range(N):
            w.writerow([fmt(cols[c][i]) if cols.get(c) is not None else "" for c in GRID_COLUMNS])
    return path


def read_grid(path):
    """Parse a grid CSV into ``(FieldPosterior, truth_columns)``.

    A column whose values are all empty comes back as ``None``.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != GRID_COLUMNS:
        raise ValueError(f"{path}: not a grid file (unexpected header)")
    body = rows[1:]
    cols = {}
    for j, name in enumerate(GRID_COLUMNS):
        vals = [_parse(r[j]) for r in body]
        if all(v is None for v in vals):
            cols[name] = None
        elif any(v is None for v in vals):
            raise ValueError(f"{path}: column {name} is partially empty")
        else:
            cols[name] = np.array(vals, dtype=float)
    grid = np.column_stack([cols["x1"], cols["x2"]]) if body else np.empty((0, 2))
    post = FieldPosterior(grid)
    for name in ("mean_u", "mean_v", "var_u", "var_v", "mean_div", "var_div",
                 "mean_vort", "var_vort"):
        setattr(post, name, cols[name])
    extra = {k: cols[k] for k in ("z_div", "z_vort", "truth_u", "truth_v", "truth_div", "truth_vort")}
    return post, extra


def write_trace(trace, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for i, v in enumerate(trace):
            w.writerow([i, fmt(v)])
    return path


def read_trace(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRACE_COLUMNS:
        raise ValueError(f"{path}: not a trace file")
    return [float(r[1]) for r in rows[1:]]


def write_report(items, path):
    """``key: value`` lines in insertion order."""
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in items.items():
            if isinstance(v, float):
                v = fmt(v)
            fh.write(f"{k}: {v}\n")
    return path


def read_report(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            k, sep, v = line.partition(": ")
            if not sep:
                raise ValueError(f"{path}: malformed report line {line!r}")
            out[k] = v
    return out


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def dataset_from_csv(path):
    """Read a dataset CSV written by :func:`write_dataset`."""
    from .ingest import IngestFilter, apply_filter, read_drifters
    records, _ = read_drifters(path)
    d = apply_filter(records, IngestFilter())
    return VelocityDataset(d.locations, d.velocities, d.ids,
                           np.array([r.timestamp for r in records]))
