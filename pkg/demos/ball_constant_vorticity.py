"""Rigid rotation in the unit ball.

For constant vorticity z_hat the tangential solution is u = z_hat x x / 2.
The script solves on a 1280-panel icosphere, prints the error against that
field and the residual report, and writes u.csv to the working directory.
"""

import os

import numpy as np

from bsdomain import VolumeField, build_domain, build_surface, meshes, probe_points, residuals
from bsdomain import solve_tangential
from bsdomain.export import write_field_csv

model = build_domain(build_surface(*meshes.icosphere(3)), 0.05)
omega = VolumeField.constant(model, [0.0, 0.0, 1.0])
u = solve_tangential(model, omega)

pts = probe_points(model, 200)
exact = np.cross([0.0, 0.0, 1.0], pts) / 2
err = np.linalg.norm(u(pts) - exact) / np.linalg.norm(exact)
print(f"panels {model.surface.n_panels}, nodes {model.volume.n_nodes}")
print(f"relative L2 error vs z x x / 2: {err:.3e}")
for k, v in residuals(model, u, omega).items():
    print(f"  {k:18s} {v:.4g}")

out = os.path.join(os.getcwd(), "u.csv")
write_field_csv(out, pts, u(pts))
print(f"wrote {out}")
