"""Decay of the solution operator probed with a small vortex ring.

A unit-circulation ring of radius eps sits at y; the velocity it induces is
sampled along rays and 4 pi |u| is fitted against distance on log-log axes.
Along the ring's plane the field falls off close to the r^-2 rate of the
kernel bound; along its axis it falls off faster, like a dipole.
"""

import numpy as np

from bsdomain import build_domain, build_surface, meshes, probe_decay

model = build_domain(build_surface(*meshes.icosphere(3)), 0.05)
d = np.linspace(0.3, 0.78, 7)
for name, direction in (("equatorial", [1.0, 0.0, 0.0]), ("axial", [0.0, 0.0, 1.0])):
    rep = probe_decay(model, np.zeros(3), 0.08, d[:, None] * np.asarray(direction))
    print(f"{name:10s} slope {rep.fitted_slope:7.3f}")
    for dist, resp, sc in zip(rep.distances, rep.responses, rep.scaled):
        print(f"    |x - y| = {dist:.3f}   4 pi |u| = {resp:.5f}   scaled = {sc:.5f}")
