import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from bsdomain import (CoincidentPoints, OnAxis, TooCloseToBoundary, k1_eval, probe_decay,
                      ring_vorticity, torus_harmonic_field, vortex_ring)
from bsdomain.kernel_probe import ProbeReport, fit_slope

vec = st.lists(st.floats(-3, 3), min_size=3, max_size=3).map(np.asarray)


@settings(max_examples=60, deadline=None)
@given(vec, vec, vec, st.floats(0.1, 10.0))
def test_k1_homogeneity_and_symmetry(x, y, w, lam):
    if np.linalg.norm(x - y) < 1e-3:
        return
    k = k1_eval(x, y, w)
    np.testing.assert_allclose(k1_eval(lam * x, lam * y, w), k / lam ** 2, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(k1_eval(y, x, w), -k, rtol=1e-12, atol=1e-15)
    assert abs(np.dot(k, w)) <= 1e-9 * (1 + np.linalg.norm(k) * np.linalg.norm(w))


def test_k1_values():
    np.testing.assert_allclose(k1_eval([1.0, 0, 0], [0, 0, 0], [0, 0, 1.0]), [0, 1 / (4 * np.pi), 0])
    out = k1_eval(np.array([[2.0, 0, 0], [0, 3.0, 0]]), np.zeros(3), [0, 0, 1.0])
    assert out.shape == (2, 3)
    with pytest.raises(CoincidentPoints):
        k1_eval([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [0, 0, 1.0])


@pytest.mark.parametrize("eps", [0.05, 0.3])
def test_ring_has_unit_circulation(eps):
    f = ring_vorticity([0.0, 0.0, 0.0], eps)

    def wy(z, x):
        return f(np.array([[x, 0.0, z]]))[0, 1]

    circ, _ = integrate.dblquad(wy, 0.0, eps, lambda x: -eps, lambda x: eps, epsabs=1e-11, epsrel=1e-10)
    assert circ == pytest.approx(1.0, rel=1e-7)


def test_ring_is_divergence_free_and_compact():
    c = np.array([0.1, -0.2, 0.3])
    f = ring_vorticity(c, 0.2)
    rng = np.random.default_rng(0)
    pts = c + rng.uniform(-0.15, 0.15, size=(20, 3))
    e = 1e-6
    div = sum((f(pts + e * d)[:, k] - f(pts - e * d)[:, k]) / (2 * e) for k, d in enumerate(np.eye(3)))
    assert np.abs(div).max() < 1e-5 * np.abs(f(pts)).max() / 0.2
    np.testing.assert_array_equal(f(c + [[0.2, 0.0, 0.01], [0.0, 0.3, 0.0]]), 0.0)


def test_vortex_ring_quadrature(ball):
    ring = vortex_ring([0.0, 0.0, 0.0], 0.08, ball)
    q = ring.quadrature
    assert q.h == pytest.approx(0.02)
    assert np.all(np.linalg.norm(q.nodes, axis=1) < 0.08)
    # total weight approaches the ball volume
    assert q.total_weight == pytest.approx(4 / 3 * np.pi * 0.08 ** 3, rel=0.1)
    with pytest.raises(TooCloseToBoundary):
        vortex_ring([0.0, 0.0, 0.9], 0.08, ball)
    with pytest.raises(ValueError):
        vortex_ring([0.0, 0.0, 0.0], -1.0)
    with pytest.raises(ValueError):
        vortex_ring([0.0, 0.0, 0.0], 0.1, h=0.05)


def test_fit_slope_power_law():
    d = np.linspace(0.3, 0.8, 6)
    assert fit_slope(d, 2.5 * d ** -2.0) == pytest.approx(-2.0, abs=1e-12)


def test_probe_decay_free_space_like(ball):
    d = np.linspace(0.3, 0.6, 5)
    x = d[:, None] * np.array([1.0, 0.0, 0.0])
    rep = probe_decay(ball, np.zeros(3), 0.08, x[::-1])
    np.testing.assert_allclose(rep.distances, d)
    assert -2.6 <= rep.fitted_slope <= -1.6
    assert rep.ell_y == pytest.approx(np.log(2 + 1 / abs(ball.signed_distance([[0, 0, 0]])[0])))
    assert np.all(rep.scaled > 0)


def test_probe_decay_errors(ball):
    with pytest.raises(ValueError):
        probe_decay(ball, np.zeros(3), 0.08, np.empty((0, 3)))
    with pytest.raises(ValueError):
        probe_decay(ball, np.zeros(3), 0.08, [[0.1, 0.0, 0.0]])
    with pytest.raises(TooCloseToBoundary):
        probe_decay(ball, np.zeros(3), 0.08, [[0.0, 0.0, 0.9]])


def test_probe_report_csv(tmp_path):
    rep = ProbeReport(y=np.zeros(3), distances=np.array([0.5, 1.0]), responses=np.array([4.0, 1.0]),
                      fitted_slope=-2.0, ell_y=1.5)
    path = tmp_path / "p.csv"
    rep.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "distance,response,response_d2,ell_y"
    assert [float(v) for v in lines[1].split(",")] == [0.5, 4.0, 1.0, 1.5]
    np.testing.assert_allclose(rep.scaled, [1 / 1.5, 1 / 1.5])


def test_torus_harmonic_field():
    rng = np.random.default_rng(2)
    theta = rng.uniform(0, 2 * np.pi, 30)
    phi = rng.uniform(0, 2 * np.pi, 30)
    R, r = 1.0, 0.4
    rho = R + r * np.cos(phi)
    surf = np.column_stack([rho * np.cos(theta), rho * np.sin(theta), r * np.sin(phi)])
    nrm = np.column_stack([np.cos(phi) * np.cos(theta), np.cos(phi) * np.sin(theta), np.sin(phi)])
    h = torus_harmonic_field(R, surf)
    np.testing.assert_allclose(np.einsum("ij,ij->i", h, nrm), 0.0, atol=1e-14)
    np.testing.assert_allclose(np.linalg.norm(torus_harmonic_field(R, [[R, 0, 0]]), axis=1), 1.0)
    assert torus_harmonic_field(2.0, [1.0, 0.0, 0.0]).shape == (3,)
    # curl and divergence vanish off the axis
    x = surf * 0.9
    e = 1e-6
    D = np.stack([(torus_harmonic_field(R, x + e * d) - torus_harmonic_field(R, x - e * d)) / (2 * e)
                  for d in np.eye(3)], axis=1)
    assert np.abs(np.einsum("naa->n", D)).max() < 1e-6
    curl = np.stack([D[:, 1, 2] - D[:, 2, 1], D[:, 2, 0] - D[:, 0, 2], D[:, 0, 1] - D[:, 1, 0]], 1)
    assert np.abs(curl).max() < 1e-6
    with pytest.raises(OnAxis):
        torus_harmonic_field(R, [0.0, 0.0, 0.3])
