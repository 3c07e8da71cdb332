"""A radial field on a spherical shell carries flux 4 pi through the cavity.

Such a vorticity is not admissible: the solver refuses it and reports the
flux through every boundary component.
"""

import warnings

import numpy as np

from bsdomain import FluxViolation, VolumeField, build_domain, build_surface, meshes
from bsdomain import solve_tangential

warnings.simplefilter("ignore")
model = build_domain(build_surface(*meshes.concentric_shell(2)), 0.1)


def radial(p):
    p = np.atleast_2d(p)
    return p / np.linalg.norm(p, axis=1)[:, None] ** 3


try:
    solve_tangential(model, VolumeField.from_function(model, radial))
except FluxViolation as exc:
    for label, val in zip(exc.labels, exc.fluxes):
        print(f"flux[{label}] = {val:.6f}")
    print(f"4 pi = {4 * np.pi:.6f}")
