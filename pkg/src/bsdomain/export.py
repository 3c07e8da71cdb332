"""Plain-text writers: CSV with full precision, legacy ASCII VTK, JSON diagnostics."""

import json

import numpy as np


def _fmt(v):
    return f"{float(v):.17g}"


def write_field_csv(path, points, vectors, names=("ux", "uy", "uz")):
    """Columns x, y, z followed by the three vector components, 17 significant digits."""
    points = np.atleast_2d(points)
    vectors = np.atleast_2d(vectors)
    with open(path, "w") as fh:
        fh.write(",".join(("x", "y", "z") + tuple(names)) + "\n")
        for p, v in zip(points, vectors):
            fh.write(",".join(_fmt(c) for c in (*p, *v)) + "\n")


def read_points_csv(path):
    """First three numeric columns of a CSV file (a header row is skipped)."""
    rows = []
    with open(path) as fh:
        for line in fh:
            parts = [s.strip() for s in line.split(",")]
            try:
                rows.append([float(s) for s in parts])
            except ValueError:
                continue
    return np.asarray(rows, float)


def write_vtk(path, points, vectors, name="u", title="velocity"):
    """Legacy ASCII VTK polydata with one vertex per point and POINT_DATA VECTORS."""
    points = np.atleast_2d(points)
    vectors = np.atleast_2d(vectors)
    n = len(points)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\nASCII\nDATASET POLYDATA\n")
        fh.write(f"POINTS {n} double\n")
        for p in points:
            fh.write(" ".join(_fmt(c) for c in p) + "\n")
        fh.write(f"VERTICES {n} {2 * n}\n")
        for i in range(n):
            fh.write(f"1 {i}\n")
        fh.write(f"POINT_DATA {n}\nVECTORS {name} double\n")
        for v in vectors:
            fh.write(" ".join(_fmt(c) for c in v) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")
