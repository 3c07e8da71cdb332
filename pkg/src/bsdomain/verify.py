"""Property suites on reference fixtures: each check returns (name, passed, detail)."""

import numpy as np

from . import meshes
from .biot_savart import (VolumeField, bs_gradient_pv, bs_volume, curl_identity_terms,
                          curl_identity_residual)
from .divcurl import probe_points, residuals, solve_tangential
from .geometry import build_domain, build_surface, signed_distance
from .kernel_probe import torus_harmonic_field

Z_HAT = np.array([0.0, 0.0, 1.0])


def _check(name, value, bound, fmt="{:.3g}"):
    ok = bool(np.all(np.isfinite(value))) and bool(np.max(value) <= bound)
    return name, ok, f"{fmt.format(float(np.max(value)))} <= {bound:g}"


def smooth_field(seed=0):
    """A random smooth vector field built from a few low-order Fourier modes."""
    rng = np.random.default_rng(seed)
    k = rng.normal(size=(3, 3, 3))
    ph = rng.uniform(0, 2 * np.pi, size=(3, 3))
    amp = rng.normal(size=(3, 3)) / 3.0

    def func(p):
        p = np.atleast_2d(p)
        out = np.zeros((len(p), 3))
        for c in range(3):
            for m in range(3):
                out[:, c] += amp[c, m] * np.sin(p @ k[c, m] + ph[c, m])
        return out

    return func


def fd_jacobian(model, field, x, step):
    cols = [(bs_volume(model, field, x + step * e) - bs_volume(model, field, x - step * e)) / (2 * step)
            for e in np.eye(3)]
    return np.column_stack(cols)


def biot_savart_suite(model, n_points=20, seed=1):
    """Divergence-free PV Jacobian, FD consistency and curl identity on ``model``."""
    out = []
    h = model.h
    F = VolumeField.from_function(model, smooth_field(seed))
    pts = probe_points(model, n_points, margin_factor=4.0, seed=seed)
    J = bs_gradient_pv(model, F, pts)
    tr = np.abs(np.einsum("nii->n", J)) / np.linalg.norm(J, axis=(1, 2))
    out.append(_check("pv_gradient_traceless", tr, 0.03))
    worst = -np.inf
    for x, Jx in zip(pts[:5], J[:5]):
        Jfd = fd_jacobian(model, F, x, 0.25 * h)
        worst = max(worst, float(np.max(np.abs(Jx - Jfd) - (0.05 * np.abs(Jfd) + 0.02))))
    out.append(("pv_gradient_matches_fd", worst <= 0.0, f"max excess {worst:.3g} <= 0"))
    nz = model.volume.n_nodes
    for name, func, div in (("z", lambda p: np.tile(Z_HAT, (len(np.atleast_2d(p)), 1)), 0.0),
                            ("y", lambda p: np.atleast_2d(p).astype(float), 3.0),
                            ("0", lambda p: np.zeros((len(np.atleast_2d(p)), 3)), 0.0)):
        field = VolumeField.from_function(model, func)
        res = np.linalg.norm(curl_identity_residual(model, field, np.full(nz, div), pts), axis=1)
        sup = max(field.sup_norm(), 1.0 if name == "0" else 0.0)
        out.append(_check(f"curl_identity_F={name}", res / sup, 0.05))
    return out


def ball_suite(model, n_probe=200):
    """Closed-form checks on the unit ball with constant vorticity."""
    out = []
    omega = VolumeField.constant(model, Z_HAT)
    v1 = bs_volume(model, omega, [0.5, 0.0, 0.0])
    out.append(_check("v1(0.5,0,0)", np.linalg.norm(v1 - [0, 1 / 6, 0]) * 6, 0.02))
    J = bs_gradient_pv(model, omega, [0.0, 0.0, 0.0])
    exact = np.zeros((3, 3))
    exact[1, 0], exact[0, 1] = 1 / 3, -1 / 3
    out.append(_check("pv_gradient_center", np.abs(J - exact).max(), 0.03))
    t = curl_identity_terms(model, omega, np.zeros(model.volume.n_nodes), [0.0, 0.0, 0.0])
    out.append(_check("boundary_term_z/3", np.linalg.norm(t["boundary_term"][0] - Z_HAT / 3) * 3, 0.05))
    u = solve_tangential(model, omega)
    pts = probe_points(model, n_probe)
    ex = np.cross(Z_HAT, pts) / 2
    err = np.linalg.norm(u(pts) - ex) / np.linalg.norm(ex)
    out.append(_check("ball_constant_L2", err, 0.05))
    r = residuals(model, u, omega)
    for k in ("curl_max", "div_max", "tangency_max"):
        out.append(_check(f"residual_{k}", r[k], 0.05))
    return out


def torus_suite(model, n_probe=100):
    """Residuals are blind to the tangent harmonic field of the torus."""
    out = [("harmonic_dim=1", model.harmonic_dim == 1, f"harmonic_dim = {model.harmonic_dim}")]
    omega = VolumeField.constant(model, Z_HAT)
    u = solve_tangential(model, omega)
    pts = probe_points(model, n_probe)
    base = residuals(model, u, omega, points=pts)
    keys = ("curl_max", "curl_l2", "div_max", "div_l2", "tangency_max", "tangency_l2")
    worst = 0.0
    for c in (-1.0, 1.0):
        def shifted(x, c=c):
            return u(x) + c * torus_harmonic_field(1.0, x)
        r = residuals(model, shifted, omega, points=pts, u_scale=base["u_sup"])
        worst = max(worst, max(abs(r[k] - base[k]) for k in keys))
    out.append(_check("harmonic_shift_invariance", worst, 1e-3))
    return out


def reference_models(ball_level=3, ball_h=0.05, torus_h=0.05):
    ball = build_domain(build_surface(*meshes.icosphere(ball_level)), ball_h)
    torus = build_domain(build_surface(*meshes.torus()), torus_h)
    return ball, torus


def run_all(ball=None, torus=None):
    if ball is None or torus is None:
        b, t = reference_models()
        ball = ball or b
        torus = torus or t
    results = []
    results += [("ball/" + n, ok, d) for n, ok, d in ball_suite(ball)]
    results += [("ball-bs/" + n, ok, d) for n, ok, d in biot_savart_suite(ball)]
    results += [("torus/" + n, ok, d) for n, ok, d in torus_suite(torus)]
    return results


__all__ = ["ball_suite", "biot_savart_suite", "torus_suite", "run_all", "reference_models",
           "smooth_field", "fd_jacobian", "signed_distance"]
