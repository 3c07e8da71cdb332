"""Velocity fields with prescribed curl, divergence and normal trace.

:func:`solve_tangential` builds the divergence-free field ``u`` with
``curl u = omega`` and ``u.nu = 0``:

    f  solves (I/2 + T0) f = omega.nu
    v  = BS(omega) - BS(grad S f)
    g  solves (I/2 - T0) g = -v.nu
    u  = v - grad S g

:func:`solve_general` adds the gradient ``grad phi0`` with
``laplacian phi0 = f_src`` and ``d phi0 / d nu = g_bc``.
"""

import logging
import warnings

import numpy as np

from . import _kernels as K
from .biot_savart import NEAR_FACTOR, VolumeField, bs_sum_field
from .errors import CompatibilityViolation, SizeMismatch
from .geometry import DomainModel
from .layer_potentials import (TOL_FLUX, BoundaryDensity, as_density, check_flux, layer_eval,
                               solve_f, solve_g)

log = logging.getLogger(__name__)

TOL_DIV = 0.05
# compatibility tolerance of solve_general: polyhedral boundaries and the
# inset voxel volume make analytically compatible data disagree by O(h^2)
TOL_COMPAT = 2e-2


def trace_points(model):
    """Panel centroids moved inward by h/2 along the normal."""
    s = model.surface
    return s.centroids - 0.5 * model.h * s.normals


def normal_trace(model, values):
    """Dot each (n_panels, 3) row with its panel normal."""
    return np.einsum("ij,ij->i", values, model.surface.normals)


def lattice_divergence(quadrature, samples):
    """Central-difference divergence at nodes whose six lattice neighbours exist.

    Returns (node indices, divergence values).
    """
    idx = quadrature.index
    lookup = {tuple(r): n for n, r in enumerate(idx.tolist())}
    rows, vals = [], []
    h = quadrature.h
    for n, (i, j, k) in enumerate(idx.tolist()):
        nb = [lookup.get(t) for t in ((i + 1, j, k), (i - 1, j, k), (i, j + 1, k),
                                      (i, j - 1, k), (i, j, k + 1), (i, j, k - 1))]
        if None in nb:
            continue
        d = ((samples[nb[0], 0] - samples[nb[1], 0]) + (samples[nb[2], 1] - samples[nb[3], 1])
             + (samples[nb[4], 2] - samples[nb[5], 2])) / (2.0 * h)
        rows.append(n)
        vals.append(d)
    return np.array(rows, dtype=np.int64), np.array(vals)


class FieldEvaluator:
    """Evaluation rule ``x -> u(x)`` assembled from volume and layer terms.

    ``u = BS(omega - grad S f) - grad S g - grad N[src] + grad S q`` where the
    last two terms are present only for :func:`solve_general`. Calling the
    evaluator on one point returns a 3-vector, on (m, 3) points an (m, 3)
    array. ``diagnostics`` holds densities' norms, flux values and BIE
    residuals.
    """

    def __init__(self, model, omega, f, g, vol_field=None, source=None, q=None,
                 diagnostics=None):
        self.model = model
        self.omega = omega
        self.f = f
        self.g = g
        # samples fed to the Biot-Savart sum: omega - grad S f
        self.vol_field = omega if vol_field is None else vol_field
        self.source = source
        self.q = q
        self.diagnostics = dict(diagnostics or {})

    def parts(self, x):
        pts = np.ascontiguousarray(np.atleast_2d(np.asarray(x, float)))
        surf = self.model.surface
        v = bs_sum_field(self.vol_field.quadrature, self.vol_field.samples, pts)
        dens = [self.g.values]
        if self.q is not None:
            dens.append(self.q.values)
        _, grad = layer_eval(surf, np.column_stack(dens), pts, want_pot=False)
        out = dict(v=v, grad_phi=-grad[:, 0])
        if self.source is not None:
            q = self.model.volume
            _, gn = K.newton_sum(pts, q.nodes, self.source, q.weights, q.h, NEAR_FACTOR * q.h, True)
            out["grad_phi0"] = -gn + grad[:, 1]
        return out

    def __call__(self, x):
        p = self.parts(x)
        u = p["v"] + p["grad_phi"]
        if "grad_phi0" in p:
            u = u + p["grad_phi0"]
        return u[0] if np.asarray(x).ndim == 1 else u


def _check_divergence(omega, tol_div):
    rows, div = lattice_divergence(omega.quadrature, omega.samples)
    if len(div) == 0:
        return 0.0
    sup = omega.sup_norm()
    q = omega.quadrature
    diam = np.linalg.norm(q.nodes.max(axis=0) - q.nodes.min(axis=0)) + q.h
    worst = float(np.abs(div).max())
    if sup > 0 and worst > tol_div * sup / diam:
        warnings.warn(f"vorticity is not discretely divergence-free: max |div| = {worst:.3g}",
                      stacklevel=3)
    return worst


def solve_tangential(model, omega, tol_flux=TOL_FLUX, tol_div=TOL_DIV):
    """Divergence-free ``u`` with ``curl u = omega`` in the domain and ``u.nu = 0`` on its boundary.

    Parameters
    ----------
    omega : VolumeField
        Vorticity samples; may live on its own quadrature (e.g. a finer local
        one for compactly supported fields).

    Raises
    ------
    FluxViolation
        The flux of omega through some boundary component does not vanish.
    """
    div_max = _check_divergence(omega, tol_div)
    tp = trace_points(model)
    omega_nu = BoundaryDensity(normal_trace(model, omega.at(tp)), model.surface)
    if omega.func is not None:
        # analytic vorticity: gate on the exact boundary trace, solve with the inset one
        exact_nu = normal_trace(model, omega.at(model.surface.centroids))
        flux = check_flux(model, exact_nu, tol_flux)
        f = solve_f(model, omega_nu, np.inf)
        f.info["fluxes"] = flux
    else:
        f = solve_f(model, omega_nu, tol_flux)

    vol = omega
    if np.any(f.values):
        nodes = omega.quadrature.nodes
        _, gsf = layer_eval(model.surface, f.values, nodes, want_pot=False)
        vol = VolumeField(omega.quadrature, omega.samples - gsf[:, 0])
    v_nu = normal_trace(model, bs_sum_field(vol.quadrature, vol.samples, tp))
    g = solve_g(model, v_nu, check=False)
    diag = dict(div_max=div_max, flux=f.info.get("fluxes"), f_residual=f.info.get("residual", 0.0),
                g_residual=g.info.get("residual", 0.0), g_defect=g.info.get("defect", 0.0),
                f_l2=f.l2(), g_l2=g.l2())
    log.info("solve_tangential: |f| = %.4g, |g| = %.4g", diag["f_l2"], diag["g_l2"])
    return FieldEvaluator(model, omega, f, g, vol_field=vol, diagnostics=diag)


def _scalar_samples(model, values):
    q = model.volume
    if callable(values):
        values = values(q.nodes)
    values = np.asarray(values, float)
    if values.ndim == 0:
        values = np.full(q.n_nodes, float(values))
    if values.shape != (q.n_nodes,):
        raise SizeMismatch(f"expected {q.n_nodes} scalar samples, got {values.shape}")
    return np.ascontiguousarray(values)


def newton_potential(model, f_src, x):
    """N f(x) = int f(y) / (4 pi |x - y|) dy, so that -laplacian(N f) = f."""
    pts = np.ascontiguousarray(np.atleast_2d(np.asarray(x, float)))
    vals = _scalar_samples(model, f_src)
    q = model.volume
    pot, _ = K.newton_sum(pts, q.nodes, vals, q.weights, q.h, NEAR_FACTOR * q.h, False)
    return float(pot[0]) if np.asarray(x).ndim == 1 else pot


def newton_gradient(model, f_src, x):
    """Gradient of :func:`newton_potential`."""
    pts = np.ascontiguousarray(np.atleast_2d(np.asarray(x, float)))
    vals = _scalar_samples(model, f_src)
    q = model.volume
    _, grad = K.newton_sum(pts, q.nodes, vals, q.weights, q.h, NEAR_FACTOR * q.h, True)
    return grad[0] if np.asarray(x).ndim == 1 else grad


def domain_integral(model, values, trace_values=None):
    """Volume integral of scalar samples with the inset layer restored.

    The voxel quadrature misses a layer of mean thickness
    ``(Vol - sum w) / Area`` next to the boundary; its contribution is
    approximated with ``trace_values`` (panel samples, default: nearest node).
    """
    q = model.volume
    s = model.surface
    vals = _scalar_samples(model, values)
    if trace_values is None:
        _, idx = q.nearest(trace_points(model))
        trace_values = vals[idx]
    delta = (s.volume - q.total_weight) / s.total_area
    return float(np.dot(q.weights, vals) + delta * np.dot(s.areas, trace_values))


def solve_general(model, omega, f_src, g_bc, tol_flux=TOL_FLUX, tol_compat=TOL_COMPAT):
    """``v`` with ``curl v = omega``, ``div v = f_src`` and ``v.nu = g_bc``.

    ``v = u + grad phi0`` with ``u`` from :func:`solve_tangential` and
    ``phi0 = -N f_src + S q``, where ``q`` solves
    ``(I/2 - T0) q = -(g_bc + d(N f_src)/d nu)``.

    Parameters
    ----------
    f_src : float, callable or (n_nodes,) array
        Divergence at the volume nodes.
    g_bc : float, array or BoundaryDensity
        Normal component at the panels.

    Raises
    ------
    CompatibilityViolation
        ``int f_src`` and ``int g_bc`` differ by more than ``tol_compat``
        relative to their magnitude.
    FluxViolation
        As in :func:`solve_tangential`.
    """
    src = _scalar_samples(model, f_src)
    if np.ndim(g_bc) == 0 and not isinstance(g_bc, BoundaryDensity):
        g_bc = np.full(model.surface.n_panels, float(g_bc))
    gbc = as_density(model, g_bc)
    vol_int = domain_integral(model, src)
    bnd_int = gbc.integral()
    scale = max(abs(vol_int), gbc.l1(), np.finfo(float).tiny)
    defect = (vol_int - bnd_int) / scale
    if (abs(vol_int) > 0 or gbc.l1() > 0) and abs(defect) > tol_compat:
        raise CompatibilityViolation(
            f"int f dx = {vol_int:.6g} but int g dsigma = {bnd_int:.6g} (relative defect {defect:.3g})",
            defect=vol_int - bnd_int)

    u = solve_tangential(model, omega, tol_flux=tol_flux)
    tp = trace_points(model)
    dn_newton = normal_trace(model, newton_gradient(model, src, tp))
    q = solve_g(model, gbc.values + dn_newton, check=False)
    diag = dict(u.diagnostics, compat_defect=defect, q_residual=q.info.get("residual", 0.0),
                q_l2=q.l2())
    return FieldEvaluator(model, omega, u.f, u.g, vol_field=u.vol_field, source=src, q=q,
                          diagnostics=diag)


def probe_points(model, n=200, margin_factor=4.0, seed=0):
    """Deterministic random interior points with boundary margin ``margin_factor * h``."""
    rng = np.random.default_rng(seed)
    s = model.surface
    lo, hi = s.vertices.min(axis=0), s.vertices.max(axis=0)
    out = []
    while sum(len(o) for o in out) < n:
        cand = rng.uniform(lo, hi, size=(4 * n, 3))
        d = model.signed_distance(cand)
        out.append(cand[d < -margin_factor * model.h])
    pts = np.concatenate(out)[:n]
    if len(pts) < n:
        raise ValueError("could not place probe points")
    return pts


def fd_curl_div(evaluator, pts, step):
    """Central-difference curl and divergence of a vector field at points."""
    pts = np.atleast_2d(pts)
    e = np.eye(3)
    stencil = np.concatenate([pts[:, None, :] + s * step * e[None] for s in (1.0, -1.0)], axis=1)
    vals = np.asarray(evaluator(stencil.reshape(-1, 3))).reshape(len(pts), 2, 3, 3)
    # D[n, a, b] = d u_b / d x_a
    D = (vals[:, 0] - vals[:, 1]) / (2.0 * step)
    curl = np.stack([D[:, 1, 2] - D[:, 2, 1], D[:, 2, 0] - D[:, 0, 2], D[:, 0, 1] - D[:, 1, 0]],
                    axis=1)
    div = np.einsum("naa->n", D)
    return curl, div


def residuals(model, evaluator, omega, points=None, n_probe=200, seed=0, u_scale=None):
    """Curl, divergence and tangency residuals of a velocity field.

    Curl and divergence use central differences of step h/4 at interior
    probe points (margin 4h) and are normalized by the sup of ``|omega|``
    there (1 when omega vanishes). Tangency is ``|u.nu|`` at the inward
    trace points, normalized by ``u_scale`` (default: sup of ``|u|`` over
    probes and trace points). Raw values are reported alongside.
    """
    pts = probe_points(model, n_probe, seed=seed) if points is None else np.atleast_2d(points)
    step = 0.25 * model.h
    curl, div = fd_curl_div(evaluator, pts, step)
    w = omega.at(pts)
    u_in = np.asarray(evaluator(pts)).reshape(-1, 3)
    tp = trace_points(model)
    u_b = np.asarray(evaluator(tp)).reshape(-1, 3)
    tang = np.abs(normal_trace(model, u_b))

    cerr = np.linalg.norm(curl - w, axis=1)
    wsup = float(np.linalg.norm(w, axis=1).max())
    wscale = wsup if wsup > 0 else 1.0
    usup = max(float(np.linalg.norm(u_in, axis=1).max()), float(np.linalg.norm(u_b, axis=1).max()))
    uscale = u_scale if u_scale is not None else (usup if usup > 0 else 1.0)
    return dict(
        curl_max=float(cerr.max()) / wscale,
        curl_l2=float(np.sqrt(np.mean(cerr ** 2))) / wscale,
        div_max=float(np.abs(div).max()) / wscale,
        div_l2=float(np.sqrt(np.mean(div ** 2))) / wscale,
        tangency_max=float(tang.max()) / uscale,
        tangency_l2=float(np.sqrt(np.sum(tang ** 2 * model.surface.areas) / model.surface.total_area)) / uscale,
        raw_curl_max=float(cerr.max()),
        raw_div_max=float(np.abs(div).max()),
        raw_tangency_max=float(tang.max()),
        omega_sup=wsup,
        u_sup=usup,
        n_probe=len(pts),
    )
