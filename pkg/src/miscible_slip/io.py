"""Serialization of run results: CSV time series, legacy VTK snapshots, JSON summaries."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .diagnostics import CSV_FIELDS


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return repr(float(v))


def write_timeseries(records, path) -> Path:
    """One row per record with the fixed header; floats in shortest round-trip form."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in records:
            w.writerow([_fmt(v) for v in r.row()])
    return path


def read_timeseries(path) -> dict:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {h: np.array([float(r[i]) for r in body]) for i, h in enumerate(header)}


def vertex_fields(state, spaces) -> dict:
    """Velocity, zero-mean pressure and concentration at mesh vertices."""
    nv, N = spaces.n_vertices, spaces.n_nodes
    # vertex dofs come first, so nodal values are the point values
    u = np.column_stack([state.u[:nv], state.u[N:N + nv]])
    p = state.p - spaces.pressure_mean(state.p)
    return {"velocity": u, "pressure": p, "concentration": state.C[:nv]}


def write_snapshot(state, spaces, path) -> Path:
    """Legacy ASCII VTK unstructured grid of the mesh triangles with point data."""
    path = Path(path)
    mesh = spaces.mesh
    f = vertex_fields(state, spaces)
    nv, nt = mesh.n_vertices, mesh.n_triangles
    lines = ["# vtk DataFile Version 3.0",
             f"miscible slip flow t={_fmt(state.t)}",
             "ASCII",
             "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nv} double"]
    lines += [f"{_fmt(x)} {_fmt(y)} 0.0" for x, y in mesh.nodes]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    lines.append(f"POINT_DATA {nv}")
    lines.append("VECTORS velocity double")
    lines += [f"{_fmt(a)} {_fmt(b)} 0.0" for a, b in f["velocity"]]
    for name in ("pressure", "concentration"):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines += [_fmt(v) for v in f[name]]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def write_table(rows, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for r in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return path
