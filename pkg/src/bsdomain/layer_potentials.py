"""Single-layer potentials on piecewise-constant panel densities.

Conventions
-----------
The single layer carries a leading minus sign,

    S f(x) = -int f(y) / (4 pi |x - y|) dsigma(y),

so that ``grad S f(x) = int f(y) (x - y) / (4 pi |x - y|^3) dsigma(y)``. The
boundary operator ``T0`` is the normal derivative of that kernel taken at
the collocation point, ``T0 f(x) = int (x - y).nu(x) / (4 pi |x - y|^3) f(y)``.
With these signs the exterior-type equation is ``(I/2 + T0) f = omega.nu``
and the interior Neumann equation is ``(I/2 - T0) g = -v.nu``.
"""

import logging
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla

from . import _kernels as K
from .errors import (CompatibilityViolation, FluxViolation, IllConditioned,
                     SizeMismatch, TooCloseToBoundary)
from .geometry import DomainModel, SurfaceMesh

log = logging.getLogger(__name__)

TOL_FLUX = 1e-6
TOL_PANEL = 1e-7
MAX_COND = 1e12
# panels farther than this many diameters use the 7-point rule
FAR_RATIO = 3.0


def _surface(model):
    return model.surface if isinstance(model, DomainModel) else model


@dataclass(frozen=True, eq=False)
class BoundaryDensity:
    """One scalar per panel of ``surface``.

    ``info`` carries solver diagnostics when the density came out of a solve.
    """
    values: np.ndarray
    surface: SurfaceMesh
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, float))
        if v.shape != (self.surface.n_panels,):
            raise SizeMismatch(f"density has shape {v.shape}, expected ({self.surface.n_panels},)")
        if not np.all(np.isfinite(v)):
            raise ValueError("density values must be finite")
        object.__setattr__(self, "values", v)

    def l1(self):
        return float(np.sum(np.abs(self.values) * self.surface.areas))

    def l2(self):
        return float(np.sqrt(np.sum(self.values ** 2 * self.surface.areas)))

    def integral(self):
        return float(np.sum(self.values * self.surface.areas))

    def component_integrals(self):
        return np.bincount(self.surface.component_id, weights=self.values * self.surface.areas,
                           minlength=self.surface.n_components)

    def __add__(self, other):
        return BoundaryDensity(self.values + _values(other), self.surface)

    def __sub__(self, other):
        return BoundaryDensity(self.values - _values(other), self.surface)

    def __mul__(self, c):
        return BoundaryDensity(self.values * float(c), self.surface)

    __rmul__ = __mul__

    def __neg__(self):
        return BoundaryDensity(-self.values, self.surface)


def _values(d):
    return d.values if isinstance(d, BoundaryDensity) else np.asarray(d, float)


def as_density(model, values):
    if isinstance(values, BoundaryDensity):
        return values
    return BoundaryDensity(np.asarray(values, float), _surface(model))


class LayerOperator:
    """Dense collocation matrix of T0 with cached factorizations of I/2 +- T0."""

    def __init__(self, matrix, surface, method="analytic"):
        self.matrix = np.ascontiguousarray(matrix)
        self.matrix.setflags(write=False)
        self.surface = surface
        self.method = method
        self._factors = {}

    @property
    def n(self):
        return self.matrix.shape[0]

    def system(self, sign):
        """The matrix I/2 + sign * T0."""
        return 0.5 * np.eye(self.n) + sign * self.matrix

    def nullity(self, sign):
        """Expected kernel dimension of I/2 + sign * T0 from the boundary topology.

        I/2 + T0 loses one dimension per cavity (odd nesting depth), I/2 - T0
        one per connected piece of the domain (outer boundary components).
        """
        depth = self.surface.component_depth
        return int(np.sum(depth % 2 == 1)) if sign > 0 else int(np.sum(depth % 2 == 0))

    def factor(self, sign):
        if sign in self._factors:
            return self._factors[sign]
        A = self.system(sign)
        k = self.nullity(sign)
        if k == 0:
            lu, piv = sla.lu_factor(A, check_finite=False)
            anorm = np.abs(A).sum(axis=0).max()
            rcond, _ = sla.lapack.dgecon(lu, anorm, norm="1")
            cond = np.inf if rcond == 0 else 1.0 / rcond
            fac = dict(kind="lu", lu=(lu, piv), cond=cond, nullity=0, gap=np.inf,
                       smallest_dropped=None)
        else:
            U, s, Vt = sla.svd(A, check_finite=False)
            keep = self.n - k
            cond = s[0] / s[keep - 1]
            gap = s[keep - 1] / max(s[keep], np.finfo(float).tiny)
            fac = dict(kind="svd", usv=(U[:, :keep], s[:keep], Vt[:keep]), cond=cond,
                       nullity=k, gap=gap, smallest_dropped=float(s[keep]),
                       dropped_rel=float(s[keep] / s[0]))
            if gap < 10:
                log.warning("weak singular-value gap %.3g when dropping %d values of I/2%+gT0",
                            gap, k, sign)
        if fac["cond"] > MAX_COND:
            raise IllConditioned(f"condition estimate {fac['cond']:.3g} exceeds {MAX_COND:g}")
        self._factors[sign] = fac
        return fac

    def solve(self, sign, rhs):
        """Minimum-norm least-squares solve of (I/2 + sign T0) x = rhs."""
        fac = self.factor(sign)
        rhs = np.asarray(rhs, float)
        if fac["kind"] == "lu":
            x = sla.lu_solve(fac["lu"], rhs, check_finite=False)
        else:
            U, s, Vt = fac["usv"]
            x = Vt.T @ ((U.T @ rhs) / (s if rhs.ndim == 1 else s[:, None]))
        A = self.system(sign)
        bn = np.linalg.norm(rhs)
        resid = float(np.linalg.norm(A @ x - rhs) / bn) if bn > 0 else 0.0
        return x, dict(residual=resid, cond=float(fac["cond"]), nullity=fac["nullity"],
                       gap=float(fac["gap"]))

    def row_sums(self):
        return self.matrix.sum(axis=1)

    def dump(self, path):
        """Write the matrix as two little-endian uint64 dims then float64 row-major."""
        with open(path, "wb") as fh:
            fh.write(struct.pack("<QQ", *self.matrix.shape))
            fh.write(np.ascontiguousarray(self.matrix, dtype="<f8").tobytes())


def load_matrix(path):
    """Read a matrix written by :meth:`LayerOperator.dump`."""
    with open(path, "rb") as fh:
        rows, cols = struct.unpack("<QQ", fh.read(16))
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} entries, found {data.size}")
    return data.reshape(rows, cols).astype(float)


def self_term(surface):
    """Leading curvature contribution of each panel to its own T0 entry.

    Near the collocation point ``(x - y).nu(x) ~ kappa |x - y|^2 / 2`` with
    ``kappa`` the normal curvature in the direction of ``y``; averaging over
    directions gives ``H * int dS/|x - y| / (8 pi)``.
    """
    ipot = K.self_potentials(surface.tri_verts, surface.centroids, surface.normals)
    return surface.mean_curvature * ipot / (2.0 * K.FOUR_PI)


def assemble_T0(model, method="solid_angle", tol_panel=TOL_PANEL, max_depth=5,
                diagonal="curvature"):
    """Dense discretization of T0 on piecewise-constant panel densities.

    Parameters
    ----------
    method : {"solid_angle", "analytic", "adaptive"}
        ``"solid_angle"`` builds the flat-panel double layer ``D`` exactly
        (solid angles seen from centroids) and returns its area-weighted
        adjoint ``T0[i, j] = D[j, i] * area[j] / area[i]``. The discrete Gauss
        identities then hold to rounding, so the kernels of ``I/2 +- T0`` on
        multi-component boundaries are sharp.
        ``"analytic"`` and ``"adaptive"`` collocate the kernel at panel
        centroids, integrating near panels in closed form or by 4-way
        subdivision of a 7-point rule (relative change below ``tol_panel``,
        at most ``max_depth`` levels). Panels beyond three diameters use the
        7-point rule in both.
    diagonal : {"curvature", "flat"}
        Collocation methods only. On a flat panel ``(x - y).nu(x)`` vanishes,
        so the ``"flat"`` diagonal is 0; ``"curvature"`` adds the O(h) term of
        the smooth surface the mesh approximates (see :func:`self_term`).
    """
    surf = _surface(model)
    self_idx = np.arange(surf.n_panels, dtype=np.int64)
    if method == "solid_angle":
        D = K.double_layer_matrix(surf.centroids, surf.tri_verts, self_idx)
        M = D.T * surf.areas[None, :] / surf.areas[:, None]
        return LayerOperator(M, surf, method)
    if method == "analytic":
        M = K.normal_derivative_matrix(surf.centroids, surf.normals, surf.tri_verts, surf.normals,
                                       surf.centroids, surf.areas, surf.diameters, self_idx,
                                       FAR_RATIO)
    elif method == "adaptive":
        M = K.normal_derivative_matrix_adaptive(surf.centroids, surf.normals, surf.tri_verts,
                                                surf.centroids, surf.areas, surf.diameters,
                                                self_idx, FAR_RATIO, tol_panel, max_depth)
    else:
        raise ValueError(f"unknown method {method!r}")
    if diagonal == "curvature":
        np.fill_diagonal(M, self_term(surf))
    elif diagonal == "flat":
        np.fill_diagonal(M, 0.0)
    else:
        raise ValueError(f"unknown diagonal rule {diagonal!r}")
    return LayerOperator(M, surf, method)


def _operator(model):
    if isinstance(model, DomainModel):
        return model.layer_operator
    return assemble_T0(model)


def _check_margin(model, x):
    if not isinstance(model, DomainModel):
        return
    d = model.signed_distance(x)
    bad = d > -0.5 * model.h
    if np.any(bad):
        raise TooCloseToBoundary(
            f"{int(bad.sum())} point(s) closer than h/2 = {0.5 * model.h:g} to the boundary "
            "or outside the domain")


def layer_eval(surface, dens, x, want_pot=True, want_grad=True, far_ratio=4.0):
    """Raw evaluation of S and grad S for one or several densities.

    ``dens`` is (n_panels,) or (n_panels, k). Returns potentials of shape
    (m, k) and gradients (m, k, 3); no margin checks.
    """
    x = np.ascontiguousarray(np.atleast_2d(np.asarray(x, float)))
    d = np.asarray(dens, float)
    d2 = np.ascontiguousarray(d[:, None] if d.ndim == 1 else d)
    self_idx = -np.ones(len(x), dtype=np.int64)
    pot, grad = K.layer_apply(x, surface.tri_verts, surface.normals, surface.centroids,
                              surface.areas, surface.diameters, d2, self_idx, far_ratio,
                              want_pot, want_grad)
    return -pot / K.FOUR_PI, -grad / K.FOUR_PI


def single_layer(model, density, x):
    """S f(x) = -int f(y) / (4 pi |x - y|) dsigma(y) at interior points.

    Raises
    ------
    TooCloseToBoundary
        A point lies closer than h/2 to the boundary (checked when ``model``
        is a DomainModel).
    """
    surf = _surface(model)
    dens = as_density(surf, density)
    x = np.asarray(x, float)
    _check_margin(model, x)
    pot, _ = layer_eval(surf, dens.values, x, want_grad=False)
    return float(pot[0, 0]) if x.ndim == 1 else pot[:, 0]


def grad_single_layer(model, density, x):
    """grad S f(x) = int f(y) (x - y) / (4 pi |x - y|^3) dsigma(y)."""
    surf = _surface(model)
    dens = as_density(surf, density)
    x = np.asarray(x, float)
    _check_margin(model, x)
    _, grad = layer_eval(surf, dens.values, x, want_pot=False)
    return grad[0, 0] if x.ndim == 1 else grad[:, 0]


def check_flux(model, omega_nu, tol_flux=TOL_FLUX):
    """Per-component fluxes of a normal trace; FluxViolation if any exceeds tol."""
    dens = as_density(model, omega_nu)
    flux = dens.component_integrals()
    scale = dens.l1()
    bad = np.abs(flux) > tol_flux * scale
    if scale > 0 and np.any(bad):
        depth = dens.surface.component_depth
        labels = [f"{j} ({'cavity' if depth[j] % 2 else 'outer'})" for j in range(len(flux))]
        lines = ", ".join(f"flux[{lab}] = {val:.10g}" for lab, val in zip(labels, flux))
        raise FluxViolation(f"vorticity flux does not vanish on every boundary component: {lines}",
                            fluxes=flux, labels=labels)
    return flux


def solve_f(model, omega_nu, tol_flux=TOL_FLUX):
    """Solve (I/2 + T0) f = omega.nu with the minimum-norm representative.

    Raises
    ------
    FluxViolation
        Some boundary component carries a net flux above ``tol_flux`` times
        the L1 norm of the data.
    IllConditioned
        The retained part of the system has condition number above 1e12.
    """
    dens = as_density(model, omega_nu)
    flux = check_flux(model, dens, tol_flux)
    if not np.any(dens.values):
        return BoundaryDensity(np.zeros_like(dens.values), dens.surface,
                               info=dict(residual=0.0, fluxes=flux))
    x, info = _operator(model).solve(+1, dens.values)
    info["fluxes"] = flux
    return BoundaryDensity(x, dens.surface, info=info)


def solve_g(model, v_nu, tol_compat=TOL_FLUX, check=True):
    """Solve (I/2 - T0) g = -v.nu with the minimum-norm representative.

    ``check=False`` skips the compatibility gate (the defect is still
    reported in ``info``); used internally where the data are compatible
    only up to discretization error.

    Raises
    ------
    CompatibilityViolation
        The total boundary flux of ``v_nu`` exceeds ``tol_compat`` times its
        L1 norm.
    """
    dens = as_density(model, v_nu)
    defect = dens.integral()
    scale = dens.l1()
    if check and scale > 0 and abs(defect) > tol_compat * scale:
        raise CompatibilityViolation(
            f"boundary data have net flux {defect:.6g} (relative {defect / scale:.3g})",
            defect=defect)
    if not np.any(dens.values):
        return BoundaryDensity(np.zeros_like(dens.values), dens.surface,
                               info=dict(residual=0.0, defect=0.0))
    x, info = _operator(model).solve(-1, -dens.values)
    info["defect"] = defect
    info["defect_rel"] = defect / scale
    return BoundaryDensity(x, dens.surface, info=info)
