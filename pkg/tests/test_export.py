import json

import numpy as np

from bsdomain.export import read_points_csv, write_field_csv, write_json, write_vtk


def test_csv_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(25, 3))
    vals = rng.normal(size=(25, 3)) * 1e-7
    path = tmp_path / "u.csv"
    write_field_csv(path, pts, vals)
    lines = path.read_text().splitlines()
    assert lines[0] == "x,y,z,ux,uy,uz"
    back = read_points_csv(path)
    np.testing.assert_array_equal(back[:, :3], pts)
    np.testing.assert_array_equal(back[:, 3:], vals)


def test_vtk_layout(tmp_path):
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]])
    vals = np.array([[1.0, 0.0, 0.0], [0.5, 0.25, 0.125]])
    path = tmp_path / "u.vtk"
    write_vtk(path, pts, vals)
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2:5] == ["ASCII", "DATASET POLYDATA", "POINTS 2 double"]
    assert "VERTICES 2 4" in lines
    i = lines.index("POINT_DATA 2")
    assert lines[i + 1] == "VECTORS u double"
    np.testing.assert_array_equal(np.loadtxt(lines[i + 2:i + 4]), vals)


def test_json_handles_numpy(tmp_path):
    path = tmp_path / "d.json"
    write_json(path, {"a": np.float64(1.5), "b": np.arange(3), "c": {"n": np.int64(4)}, "d": np.inf})
    data = json.loads(path.read_text())
    assert data == {"a": 1.5, "b": [0, 1, 2], "c": {"n": 4}, "d": "inf"}
