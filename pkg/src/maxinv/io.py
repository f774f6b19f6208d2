"""Field and trace files.

Fields go to legacy ASCII VTK (``DATASET STRUCTURED_POINTS``, one
``SCALARS`` block per named array, x1 varying fastest) or to CSV with one
``i,j,k,x1,x2,x3,value`` row per node in C order.  Numbers are written
with 17 significant digits, so a read-back is bit-exact.  Traces are
``.npz`` archives holding the data array and its metadata.
"""
import csv
import json

import numpy as np

from .errors import IoError, ShapeMismatch
from .fields import ObservationTrace

FORMATS = ("vtk", "csv")
CSV_HEADER = ("i", "j", "k", "x1", "x2", "x3", "value")


def _num(x):
    return f"{x:.17g}"


def _as_named(field):
    if isinstance(field, dict):
        return dict(field)
    return {"value": field}


def write_field(field, grid, path, fmt="vtk"):
    """Write one or more nodal scalars on ``grid``.

    Parameters
    ----------
    field : ndarray or dict of str to ndarray
        Arrays shaped like ``grid.shape``.  A dict gives one VTK dataset per
        entry; CSV takes a single array.
    grid : Grid3
    path : str or Path
    fmt : {"vtk", "csv"}
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    named = {k: np.asarray(v, dtype=float) for k, v in _as_named(field).items()}
    for name, arr in named.items():
        if arr.shape != tuple(grid.shape):
            raise ShapeMismatch(f"{name}: {arr.shape} vs grid {grid.shape}")
    try:
        with open(path, "w", newline="") as fh:
            if fmt == "vtk":
                _write_vtk(fh, named, grid)
            else:
                if len(named) != 1:
                    raise ValueError("CSV output takes a single array")
                _write_csv(fh, next(iter(named.values())), grid)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _write_vtk(fh, named, grid):
    n1, n2, n3 = grid.shape
    lo = grid.lower
    fh.write("# vtk DataFile Version 3.0\n")
    fh.write("maxinv coefficient field\n")
    fh.write("ASCII\n")
    fh.write("DATASET STRUCTURED_POINTS\n")
    fh.write(f"DIMENSIONS {n1} {n2} {n3}\n")
    fh.write(f"ORIGIN {_num(lo[0])} {_num(lo[1])} {_num(lo[2])}\n")
    fh.write(f"SPACING {_num(grid.h)} {_num(grid.h)} {_num(grid.h)}\n")
    fh.write(f"POINT_DATA {grid.size}\n")
    for name, arr in named.items():
        fh.write(f"SCALARS {name} double 1\n")
        fh.write("LOOKUP_TABLE default\n")
        flat = arr.ravel(order="F")
        for start in range(0, flat.size, 6):
            fh.write(" ".join(_num(v) for v in flat[start:start + 6]) + "\n")


def _write_csv(fh, arr, grid):
    wr = csv.writer(fh, lineterminator="\n")
    wr.writerow(CSV_HEADER)
    x = [grid.axis_coords(a) for a in range(3)]
    for (i, j, k), v in np.ndenumerate(arr):
        wr.writerow((i, j, k, _num(x[0][i]), _num(x[1][j]), _num(x[2][k]), _num(v)))


def read_field_csv(path, shape):
    """Inverse of the CSV writer; returns an array of ``shape``."""
    out = np.full(shape, np.nan)
    try:
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            if tuple(next(rd)) != CSV_HEADER:
                raise IoError(f"{path}: unexpected header")
            for row in rd:
                out[int(row[0]), int(row[1]), int(row[2])] = float(row[6])
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if np.isnan(out).any():
        raise IoError(f"{path}: not every node of {shape} is present")
    return out


def read_vtk_header(path):
    """The ``DIMENSIONS``, ``ORIGIN``, ``SPACING`` lines and dataset names of a VTK file."""
    head = {"scalars": []}
    try:
        with open(path) as fh:
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                if parts[0] == "DIMENSIONS":
                    head["dimensions"] = tuple(int(p) for p in parts[1:4])
                elif parts[0] in ("ORIGIN", "SPACING"):
                    head[parts[0].lower()] = tuple(float(p) for p in parts[1:4])
                elif parts[0] == "SCALARS":
                    head["scalars"].append(parts[1])
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return head


def save_trace(obs, path):
    meta = {"tau": obs.tau, "T": obs.T, "omega": obs.omega, "noise_level": obs.noise_level,
            "seed": obs.seed, "meta": obs.meta}
    try:
        np.savez(path, data=obs.data, meta=np.array(json.dumps(meta, sort_keys=True)))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_trace(path):
    try:
        with np.load(path) as z:
            data = z["data"]
            meta = json.loads(str(z["meta"]))
    except (OSError, KeyError, ValueError) as exc:
        raise IoError(f"cannot read trace {path}: {exc}") from exc
    return ObservationTrace(data, meta["tau"], meta["T"], omega=meta["omega"],
                            noise_level=meta["noise_level"], seed=meta["seed"],
                            meta=meta["meta"])
