"""Empirical probes of the solution kernel and analytic reference fields.

The solution operator is probed through its action: a small vortex ring of
unit circulation is placed at ``y`` and the decay of the resulting velocity
with the distance ``|x - y|`` is recorded and fitted on a log-log scale.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .biot_savart import VolumeField
from .divcurl import solve_tangential
from .errors import CoincidentPoints, OnAxis, TooCloseToBoundary
from .geometry import VolumeQuadrature, ell, signed_distance

# circulation of the unnormalized ring through a meridian half-plane is
# 2 int_0^eps |chi'(r)| r dr = 32 eps / 35 for chi = (1 - (r/eps)^2)^3
RING_CIRCULATION = 32.0 / 35.0


def k1_eval(x, y, w):
    """Free-space Biot-Savart kernel applied to ``w``: ``w x (x - y) / (4 pi |x - y|^3)``.

    Raises
    ------
    CoincidentPoints
        ``x`` equals ``y``.
    """
    r = np.asarray(x, float) - np.asarray(y, float)
    n = np.linalg.norm(r, axis=-1)
    if np.any(n == 0.0):
        raise CoincidentPoints("kernel is singular at x = y")
    return np.cross(np.asarray(w, float), r) / (4.0 * np.pi * n[..., None] ** 3 if r.ndim > 1
                                                  else 4.0 * np.pi * n ** 3)


def ring_vorticity(center, eps):
    """Vectorized ``curl(chi(|x - c|) z_hat) / Gamma`` for the bump ``chi = (1 - (r/eps)^2)^3``."""
    c = np.asarray(center, float)
    scale = 6.0 / (eps * eps * RING_CIRCULATION * eps)

    def func(p):
        r = np.atleast_2d(p) - c
        s2 = np.einsum("ij,ij->i", r, r) / (eps * eps)
        amp = np.where(s2 < 1.0, (1.0 - s2) ** 2, 0.0) * scale
        return np.column_stack([-r[:, 1] * amp, r[:, 0] * amp, np.zeros(len(r))])

    return func


def vortex_ring(center, eps, model=None, h=None):
    """Compactly supported, divergence-free vortex ring of unit circulation.

    Sampled on a local lattice of spacing ``min(model.h, eps/4)`` (or ``h``)
    covering the ball of radius ``eps`` around ``center``.

    Raises
    ------
    TooCloseToBoundary
        The support ball does not fit inside the domain with margin ``2h``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if h is None:
        h = 0.25 * eps if model is None else min(model.h, 0.25 * eps)
    if h > 0.25 * eps:
        raise ValueError("eps must be at least 4h")
    c = np.asarray(center, float)
    if model is not None:
        d = signed_distance(model, c)
        if d > -(eps + 2.0 * h):
            raise TooCloseToBoundary(f"ring of radius {eps:g} at distance {-d:.4g} from the boundary "
                                     f"needs margin {2.0 * h:g}")
    n = int(np.ceil(eps / h))
    g = np.arange(-n, n + 1)
    idx = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    offs = idx * h
    keep = np.einsum("ij,ij->i", offs, offs) < eps * eps
    nodes = c + offs[keep]
    quad = VolumeQuadrature(nodes=np.ascontiguousarray(nodes), weights=np.full(len(nodes), h ** 3),
                            h=float(h), index=idx[keep])
    return VolumeField.from_function(quad, ring_vorticity(c, eps))


@dataclass
class ProbeReport:
    y: np.ndarray
    distances: np.ndarray
    responses: np.ndarray
    fitted_slope: float
    ell_y: float

    @property
    def scaled(self):
        """response * distance^2 / ell(y)."""
        return self.responses * self.distances ** 2 / self.ell_y

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["distance", "response", "response_d2", "ell_y"])
            for d, r in zip(self.distances, self.responses):
                w.writerow([f"{d:.17g}", f"{r:.17g}", f"{r * d * d:.17g}", f"{self.ell_y:.17g}"])


def fit_slope(distances, responses):
    """Least-squares slope of log(response) against log(distance)."""
    return float(np.polyfit(np.log(distances), np.log(responses), 1)[0])


def probe_decay(model, y, eps, x_list, evaluator=None):
    """Velocity of a unit vortex ring at ``y`` sampled at ``x_list``.

    ``responses`` are ``4 pi |u(x)|``; distances are sorted increasingly.

    Raises
    ------
    ValueError
        ``x_list`` is empty or a point is closer than ``3 eps`` to ``y``.
    TooCloseToBoundary
        A probe point is within ``4h`` of the boundary, or the ring does not
        fit (see :func:`vortex_ring`).
    """
    x = np.atleast_2d(np.asarray(x_list, float))
    if x.size == 0:
        raise ValueError("x_list is empty")
    y = np.asarray(y, float)
    dist = np.linalg.norm(x - y, axis=1)
    if np.any(dist < 3.0 * eps):
        raise ValueError("probe points must be at least 3 eps from the ring center")
    if np.any(signed_distance(model, x) > -4.0 * model.h):
        raise TooCloseToBoundary("probe points need a boundary margin of 4h")
    order = np.argsort(dist, kind="stable")
    x, dist = x[order], dist[order]
    if np.any(np.diff(dist) <= 0):
        raise ValueError("probe distances must be distinct")
    if evaluator is None:
        evaluator = solve_tangential(model, vortex_ring(y, eps, model))
    resp = 4.0 * np.pi * np.linalg.norm(np.atleast_2d(evaluator(x)), axis=1)
    return ProbeReport(y=y, distances=dist, responses=resp, fitted_slope=fit_slope(dist, resp),
                       ell_y=float(ell(model, y)))


def torus_harmonic_field(R_major, x):
    """Tangent harmonic field of a solid torus around the z-axis.

    ``R (-x2, x1, 0) / (x1^2 + x2^2)``: unit length on the core circle of
    radius R, curl- and divergence-free off the axis.

    Raises
    ------
    OnAxis
        A point lies on the z-axis.
    """
    p = np.asarray(x, float)
    pts = np.atleast_2d(p)
    rho2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
    if np.any(rho2 == 0.0):
        raise OnAxis("the harmonic field is singular on the z-axis")
    out = float(R_major) * np.column_stack([-pts[:, 1], pts[:, 0], np.zeros(len(pts))]) / rho2[:, None]
    return out[0] if p.ndim == 1 else out
