"""Free-space Biot-Savart integrals over the voxelized domain.

``w(x) = int_Omega F(y) x (x - y) / (4 pi |x - y|^3) dy`` is summed over the
volume quadrature. Nodes closer than ``2h`` to the target are integrated
exactly over their voxel (a uniform cube), which keeps the sum smooth in
``x`` and well defined at the nodes themselves.
"""

import numpy as np

from . import _kernels as K
from .errors import SizeMismatch, TooCloseToBoundary
from .geometry import DomainModel, VolumeQuadrature
from .layer_potentials import layer_eval

NEAR_FACTOR = 2.0
LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_i, _j, _k] = 1.0
    LEVI_CIVITA[_i, _k, _j] = -1.0


class VolumeField:
    """Vector samples at the nodes of a volume quadrature.

    Parameters
    ----------
    quadrature : VolumeQuadrature
    samples : (n, 3) array
    func : callable, optional
        Vectorized analytic form ``(m, 3) -> (m, 3)``. When present it is used
        for off-node evaluation; otherwise the nearest node's sample is used
        (zero farther than ``3h`` from every node).
    """

    def __init__(self, quadrature, samples, func=None):
        samples = np.ascontiguousarray(np.asarray(samples, float))
        if samples.shape != (quadrature.n_nodes, 3):
            raise SizeMismatch(f"expected ({quadrature.n_nodes}, 3) samples, got {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("field samples must be finite")
        self.quadrature = quadrature
        self.samples = samples
        self.func = func

    @classmethod
    def from_function(cls, quadrature, func):
        if isinstance(quadrature, DomainModel):
            quadrature = quadrature.volume
        return cls(quadrature, func(quadrature.nodes), func)

    @classmethod
    def constant(cls, quadrature, vec):
        vec = np.asarray(vec, float)
        return cls.from_function(quadrature, lambda p: np.tile(vec, (len(np.atleast_2d(p)), 1)))

    @classmethod
    def zeros(cls, quadrature):
        return cls.constant(quadrature, np.zeros(3))

    def at(self, points):
        """Field values at arbitrary points, shape (m, 3)."""
        pts = np.atleast_2d(np.asarray(points, float))
        if self.func is not None:
            return np.asarray(self.func(pts), float).reshape(len(pts), 3)
        dist, idx = self.quadrature.nearest(pts)
        out = self.samples[idx].copy()
        out[dist > 3.0 * self.quadrature.h] = 0.0
        return out

    def sup_norm(self):
        return float(np.linalg.norm(self.samples, axis=1).max()) if len(self.samples) else 0.0

    def _combine(self, other, a, b):
        if other.quadrature is not self.quadrature:
            raise SizeMismatch("fields live on different quadratures")
        func = None
        if self.func is not None and other.func is not None:
            f1, f2 = self.func, other.func

            def func(p):
                return a * f1(p) + b * f2(p)
        return VolumeField(self.quadrature, a * self.samples + b * other.samples, func)

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def __mul__(self, c):
        c = float(c)
        f = self.func
        return VolumeField(self.quadrature, c * self.samples,
                           None if f is None else (lambda p: c * f(p)))

    __rmul__ = __mul__


def _points(x):
    x = np.asarray(x, float)
    return np.ascontiguousarray(np.atleast_2d(x)), x.ndim == 1


def _check_margin(model, pts, margin, what):
    if not isinstance(model, DomainModel):
        return
    d = model.signed_distance(pts)
    bad = d > -margin
    if np.any(bad):
        raise TooCloseToBoundary(f"{what} needs a boundary margin of {margin:g}; "
                                 f"{int(bad.sum())} point(s) violate it")


def bs_sum_field(quadrature, samples, x):
    """Raw Biot-Savart sum of node samples at points ``x`` (m, 3)."""
    q = quadrature
    return K.bs_sum(np.ascontiguousarray(x), q.nodes, np.ascontiguousarray(samples), q.weights,
                    q.h, NEAR_FACTOR * q.h)


def bs_volume(model, field, x):
    """w(x) = int F(y) x (x - y) / (4 pi |x - y|^3) dy over the field's quadrature.

    ``x`` may lie anywhere; a single point returns a 3-vector, an (m, 3)
    array returns (m, 3).
    """
    pts, single = _points(x)
    w = bs_sum_field(field.quadrature, field.samples, pts)
    return w[0] if single else w


def a_field(model, x, j):
    """A^j(x) = int nu_j(y) (x - y) / (4 pi |x - y|^3) dsigma(y), with j in {1, 2, 3}.

    Raises
    ------
    TooCloseToBoundary
        ``x`` is closer than h/2 to the boundary.
    """
    if isinstance(j, bool) or j not in (1, 2, 3):
        raise ValueError(f"axis index must be 1, 2 or 3, got {j!r}")
    pts, single = _points(x)
    _check_margin(model, pts, 0.5 * model.h, "a_field")
    surf = model.surface
    _, grad = layer_eval(surf, surf.normals[:, j - 1], pts, want_pot=False)
    return grad[0, 0] if single else grad[:, 0]


def a_fields(model, pts):
    """All three A^j at once: array (m, 3 [j], 3 [component])."""
    surf = model.surface
    _, grad = layer_eval(surf, np.ascontiguousarray(surf.normals), pts, want_pot=False)
    return grad


def bs_gradient_pv(model, field, x):
    """Jacobian ``J[k, j] = d w_k / d x_j`` of the Biot-Savart field at interior x.

    Realizes ``eps_klm [int (F_l(y) - F_l(x)) K_jm(x - y) dy - F_l(x) A^j_m(x)]``
    with ``K_jm(r) = (|r|^2 delta_jm - 3 r_j r_m) / (4 pi |r|^5)``. Nodes inside
    the ball ``|x - y| < 2h`` are excluded; the constant part ``F(x)`` is
    carried entirely by the boundary field A^j.

    Raises
    ------
    TooCloseToBoundary
        ``x`` is closer than 2h to the boundary.
    """
    pts, single = _points(x)
    h = field.quadrature.h
    _check_margin(model, pts, 2.0 * model.h, "bs_gradient_pv")
    fx = field.at(pts)
    A = a_fields(model, pts)
    q = field.quadrature
    out = np.empty((len(pts), 3, 3))
    for n, p in enumerate(pts):
        T = K.pv_fluctuation(p, fx[n], q.nodes, field.samples, q.weights, 2.0 * h)
        # T[l, j, m] - F_l A[j, m]
        G = T - fx[n][:, None, None] * A[n][None, :, :]
        out[n] = np.einsum("klm,ljm->kj", LEVI_CIVITA, G)
    return out[0] if single else out


def curl_from_jacobian(J):
    """(curl w)_i = eps_ijk J[k, j]."""
    return np.einsum("ijk,...kj->...i", LEVI_CIVITA, J)


def _boundary_normal_trace(model, field):
    surf = model.surface
    pts = surf.centroids - 0.5 * model.h * surf.normals
    return np.einsum("ij,ij->i", field.at(pts), surf.normals)


def curl_identity_terms(model, field, div_field, x, step=None):
    """Each term of ``curl w = F + grad N[div F] - grad int F.nu / (4 pi |x - y|)``.

    Returns a dict of (m, 3) arrays: ``curl_w`` (from :func:`bs_gradient_pv`),
    ``F``, ``volume_term`` = grad int div F(y) / (4 pi |x - y|) dy and
    ``boundary_term`` = grad int F.nu(y) / (4 pi |x - y|) dsigma(y), both
    gradients by central differences of step ``h/4``.
    """
    pts, _ = _points(x)
    h = model.h
    step = 0.25 * h if step is None else step
    _check_margin(model, pts, 2.0 * h, "curl_identity_residual")
    q = field.quadrature
    div_field = np.asarray(div_field, float)
    if div_field.shape != (q.n_nodes,):
        raise SizeMismatch(f"expected {q.n_nodes} divergence samples, got {div_field.shape}")
    J = bs_gradient_pv(model, field, pts)
    fnu = _boundary_normal_trace(model, field)

    stencil = np.concatenate([pts[:, None, :] + step * s * np.eye(3)[None] for s in (1.0, -1.0)],
                             axis=1).reshape(-1, 3)
    vol, _ = K.newton_sum(np.ascontiguousarray(stencil), q.nodes, div_field, q.weights, q.h,
                          NEAR_FACTOR * q.h, False)
    # int F.nu / (4 pi r) = -S[F.nu]
    spot, _ = layer_eval(model.surface, fnu, stencil, want_grad=False)
    bnd = -spot[:, 0]

    def central(vals):
        v = vals.reshape(len(pts), 2, 3)
        return (v[:, 0] - v[:, 1]) / (2.0 * step)

    return dict(curl_w=curl_from_jacobian(J), F=field.at(pts), volume_term=central(vol),
                boundary_term=central(bnd))


def curl_identity_residual(model, field, div_field, x):
    """curl w(x) minus the right-hand side of the curl identity, per point.

    Raises
    ------
    TooCloseToBoundary
        ``x`` is closer than 2h to the boundary.
    """
    t = curl_identity_terms(model, field, div_field, x)
    res = t["curl_w"] - (t["F"] + t["volume_term"] - t["boundary_term"])
    return res[0] if np.asarray(x).ndim == 1 else res
