"""On a solid torus the tangential solution is unique only up to a harmonic field.

Adding multiples of R (-y, x, 0) / rho^2 leaves curl, divergence and the
normal trace unchanged; the residuals printed below should not move.
"""

import numpy as np

from bsdomain import (VolumeField, build_domain, build_surface, meshes, probe_points, residuals,
                      solve_tangential, torus_harmonic_field)

model = build_domain(build_surface(*meshes.torus()), 0.05)
print(f"genus per component {model.genus_per_component}, harmonic_dim {model.harmonic_dim}")
omega = VolumeField.constant(model, [0.0, 0.0, 1.0])
u = solve_tangential(model, omega)
pts = probe_points(model, 100)
base = residuals(model, u, omega, points=pts)
print(f"{'c':>5} {'curl_max':>10} {'div_max':>10} {'tangency_max':>13}")
for c in (-2.0, -1.0, 0.0, 1.0, 2.0):
    r = residuals(model, lambda x: u(x) + c * torus_harmonic_field(1.0, x), omega, points=pts,
                  u_scale=base["u_sup"])
    print(f"{c:5.1f} {r['curl_max']:10.3e} {r['div_max']:10.3e} {r['tangency_max']:13.3e}")
