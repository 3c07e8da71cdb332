"""Div-curl solves against closed-form fields on the ball, torus and shell."""

import numpy as np
import pytest

from bsdomain import (CompatibilityViolation, FluxViolation, VolumeField, domain_integral,
                      newton_gradient, newton_potential, probe_points, residuals, solve_general,
                      solve_tangential, torus_harmonic_field, vortex_ring)
from bsdomain.divcurl import fd_curl_div, lattice_divergence, trace_points

Z = np.array([0.0, 0.0, 1.0])


def test_ball_constant_vorticity(ball, ball_solution):
    omega, u = ball_solution
    pts = probe_points(ball, 200)
    exact = np.cross(Z, pts) / 2
    assert np.linalg.norm(u(pts) - exact) / np.linalg.norm(exact) <= 0.05
    assert u([0.2, 0.1, 0.0]).shape == (3,)


def test_ball_residuals(ball, ball_solution):
    omega, u = ball_solution
    r = residuals(ball, u, omega)
    for k in ("curl_max", "div_max", "tangency_max"):
        assert r[k] <= 0.05, k
    assert r["n_probe"] == 200
    assert r["omega_sup"] == pytest.approx(1.0)


def test_solution_diagnostics(ball_solution):
    _, u = ball_solution
    d = u.diagnostics
    assert d["f_residual"] < 1e-10
    assert d["g_residual"] < 1e-6
    np.testing.assert_allclose(d["flux"], 0.0, atol=1e-12)


def test_zero_vorticity_gives_zero_field(ball_coarse):
    u = solve_tangential(ball_coarse, VolumeField.zeros(ball_coarse))
    np.testing.assert_array_equal(u(probe_points(ball_coarse, 10)), 0.0)


def test_sampled_vorticity_matches_analytic(ball_coarse, ball_coarse_solution):
    omega, u = ball_coarse_solution
    sampled = VolumeField(ball_coarse.volume, omega.samples)
    u2 = solve_tangential(ball_coarse, sampled)
    pts = probe_points(ball_coarse, 30)
    np.testing.assert_allclose(u2(pts), u(pts), atol=5e-3)


def test_linearity_in_vorticity(ball_coarse):
    a = VolumeField.constant(ball_coarse, [0.3, -0.2, 1.0])
    # divergence-free rotation field with zero flux through the sphere
    b = VolumeField.from_function(ball_coarse, lambda p: np.cross(Z, np.atleast_2d(p)))
    pts = probe_points(ball_coarse, 40)
    ua = solve_tangential(ball_coarse, a)(pts)
    ub = solve_tangential(ball_coarse, b)(pts)
    uab = solve_tangential(ball_coarse, 2.0 * a - 3.0 * b)(pts)
    assert np.linalg.norm(uab - (2 * ua - 3 * ub)) <= 1e-8 * np.linalg.norm(uab)


def test_shell_radial_rejected(shell_model):
    def radial(p):
        p = np.atleast_2d(p)
        return p / np.linalg.norm(p, axis=1)[:, None] ** 3

    omega = VolumeField.from_function(shell_model, radial)
    with pytest.warns(UserWarning):
        with pytest.raises(FluxViolation) as err:
            solve_tangential(shell_model, omega)
    assert abs(err.value.fluxes[1]) == pytest.approx(4 * np.pi, rel=0.02)


def test_torus_solution(torus_model):
    omega = VolumeField.constant(torus_model, Z)
    u = solve_tangential(torus_model, omega)
    r = residuals(torus_model, u, omega, n_probe=100)
    assert r["curl_max"] <= 0.05 and r["div_max"] <= 0.05 and r["tangency_max"] <= 0.05


def test_harmonic_field_is_invisible_to_residuals(torus_model):
    omega = VolumeField.zeros(torus_model)
    pts = probe_points(torus_model, 50)

    def h(x):
        return torus_harmonic_field(1.0, x)

    r = residuals(torus_model, h, omega, points=pts)
    assert r["curl_max"] < 1e-3 and r["div_max"] < 1e-3
    # tangency of the exact field is limited by the polygonal boundary only
    assert r["tangency_max"] < 0.01


def test_vortex_ring_solution_is_tangent(ball):
    omega = vortex_ring([0.0, 0.0, 0.0], 0.2, ball)
    u = solve_tangential(ball, omega)
    tp = trace_points(ball)
    ub = u(tp)
    tang = np.abs(np.einsum("ij,ij->i", ub, ball.surface.normals))
    assert tang.max() <= 0.05 * np.linalg.norm(ub, axis=1).max()
    # far from the ring the field is curl- and divergence-free
    pts = np.array([[0.6, 0.0, 0.0], [0.0, 0.0, 0.6], [-0.4, 0.3, 0.2]])
    curl, div = fd_curl_div(u, pts, 0.25 * ball.h)
    assert np.abs(curl).max() <= 0.05 * np.linalg.norm(u(pts), axis=1).max() / ball.h
    assert np.abs(div).max() <= 1e-3 * np.linalg.norm(u(pts), axis=1).max() / ball.h


def test_lattice_divergence_of_linear_field(ball_coarse):
    q = ball_coarse.volume
    rows, div = lattice_divergence(q, q.nodes * [1.0, 2.0, -0.5])
    assert len(rows) > 0
    np.testing.assert_allclose(div, 2.5, rtol=1e-12)


def test_newton_potential_of_one(ball):
    pts = probe_points(ball, 20, seed=3)
    # inside a ball: N 1 = (3 - r^2) / 6 and grad N 1 = -x / 3
    g = newton_gradient(ball, 1.0, pts)
    np.testing.assert_allclose(g, -pts / 3, atol=0.01)
    n = newton_potential(ball, 1.0, pts)
    missing = (4 * np.pi / 3 - ball.volume.total_weight) / (4 * np.pi)
    np.testing.assert_allclose(n + missing, (3 - np.sum(pts ** 2, axis=1)) / 6, atol=0.01)
    assert isinstance(newton_potential(ball, 1.0, [0.0, 0.0, 0.0]), float)


def polyhedron_r2_integral(surface):
    """int r^2 dV = (1/5) int r^2 (x.nu) dS; the edge-midpoint rule is exact for quadratics."""
    tv = surface.tri_verts
    mids = 0.5 * (tv + np.roll(tv, -1, axis=1))
    r2 = np.mean(np.sum(mids ** 2, axis=2), axis=1)
    xn = np.einsum("ij,ij->i", tv[:, 0], surface.normals)
    return float(np.sum(r2 * xn * surface.areas) / 5.0)


def test_domain_integral(ball):
    assert domain_integral(ball, 1.0) == pytest.approx(ball.surface.volume, rel=1e-12)
    r2 = np.sum(ball.volume.nodes ** 2, axis=1)
    assert domain_integral(ball, r2) == pytest.approx(polyhedron_r2_integral(ball.surface), rel=0.01)


def test_general_divcurl(ball):
    omega = VolumeField.constant(ball, Z)
    v = solve_general(ball, omega, 3.0, 1.0)
    pts = probe_points(ball, 200)
    exact = pts + np.cross(Z, pts) / 2
    assert np.linalg.norm(v(pts) - exact) / np.linalg.norm(exact) <= 0.05
    parts = v.parts(pts[:3])
    assert set(parts) == {"v", "grad_phi", "grad_phi0"}
    assert abs(v.diagnostics["compat_defect"]) < 0.02


def test_general_divcurl_rejects_incompatible(ball):
    omega = VolumeField.constant(ball, Z)
    with pytest.raises(CompatibilityViolation):
        solve_general(ball, omega, 3.0, 1.1)
    with pytest.raises(CompatibilityViolation):
        solve_general(ball, omega, 3.0, 0.9)


def test_general_divcurl_callable_source(ball_coarse):
    # v = grad(x^2 / 2) has div 1 and v.nu = x nu_x
    nx = ball_coarse.surface.normals[:, 0] * ball_coarse.surface.centroids[:, 0]
    v = solve_general(ball_coarse, VolumeField.zeros(ball_coarse),
                      lambda p: np.ones(len(p)), nx)
    pts = probe_points(ball_coarse, 50)
    exact = np.column_stack([pts[:, 0], np.zeros(len(pts)), np.zeros(len(pts))])
    assert np.linalg.norm(v(pts) - exact) / np.linalg.norm(exact) <= 0.05


def test_probe_points_deterministic(ball):
    a = probe_points(ball, 50, seed=7)
    np.testing.assert_array_equal(a, probe_points(ball, 50, seed=7))
    assert np.all(ball.signed_distance(a) < -4 * ball.h)


def test_newton_potential_exterior(ball):
    # outside the support the quadrature volume acts as a point source of strength sum(w)
    n = newton_potential(ball, 1.0, [2.0, 0.0, 0.0])
    assert n == pytest.approx(ball.volume.total_weight / (8 * np.pi), rel=0.01)
    assert newton_potential(ball, 0.0, [2.0, 0.0, 0.0]) == 0.0
