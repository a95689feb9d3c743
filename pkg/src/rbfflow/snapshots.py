"""Field snapshot writers: CSV and legacy VTK polydata."""

from __future__ import annotations

import numpy as np

from .io_utils import atomic_write_text, fmt, write_csv


def write_fields_csv(path, cloud, u, v, p, div) -> None:
    rows = ((i, cloud.points[i, 0], cloud.points[i, 1], u[i], v[i], p[i], div[i])
            for i in range(cloud.n_points))
    write_csv(path, ["id", "x", "y", "u", "v", "p", "div"], rows)


def write_fields_vtk(path, cloud, fields: dict) -> None:
    """Legacy ASCII VTK polydata with one scalar array per field."""
    n = cloud.n_points
    lines = ["# vtk DataFile Version 3.0", "rbfflow fields", "ASCII",
             "DATASET POLYDATA", f"POINTS {n} double"]
    for i in range(n):
        lines.append(f"{fmt(cloud.points[i, 0])} {fmt(cloud.points[i, 1])} 0.0")
    lines.append(f"VERTICES {n} {2 * n}")
    for i in range(n):
        lines.append(f"1 {i}")
    lines.append(f"POINT_DATA {n}")
    for name, values in fields.items():
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        values = np.asarray(values)
        for i in range(n):
            lines.append(fmt(float(values[i])))
    atomic_write_text(path, "\n".join(lines) + "\n")
