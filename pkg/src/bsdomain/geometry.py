"""Closed triangulated boundaries and the discrete domain built on them.

A :class:`SurfaceMesh` is a validated, consistently and outwardly oriented
triangle mesh whose panels carry centroid, area, unit normal and a
connected-component label. A :class:`DomainModel` adds the interior voxel
quadrature and the topological data (genus per component) that decide how
many tangent harmonic fields the domain carries.
"""

import logging
import warnings
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels as K
from .errors import (DegeneratePanel, EmptyQuadrature, NonManifold,
                     OpenSurface, OutsideDomain, SizeMismatch)
from .meshes import read_mesh

log = logging.getLogger(__name__)

EPS_CLOSURE = 1e-8


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    centroids: np.ndarray
    areas: np.ndarray
    normals: np.ndarray
    component_id: np.ndarray
    # nesting depth of each component inside the others; odd means the
    # component bounds a cavity of the domain
    component_depth: np.ndarray

    @property
    def n_panels(self):
        return len(self.triangles)

    @property
    def n_components(self):
        return len(self.component_depth)

    @cached_property
    def tri_verts(self):
        return np.ascontiguousarray(self.vertices[self.triangles])

    @cached_property
    def diameters(self):
        tv = self.tri_verts
        e = np.stack([tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 1], tv[:, 0] - tv[:, 2]], axis=1)
        return np.linalg.norm(e, axis=2).max(axis=1)

    @property
    def mesh_size(self):
        return float(self.diameters.max())

    @property
    def total_area(self):
        return float(self.areas.sum())

    @property
    def volume(self):
        """Enclosed volume from the divergence theorem."""
        return float(np.sum(np.einsum("ij,ij->i", self.centroids, self.normals) * self.areas) / 3.0)

    @property
    def diameter(self):
        lo, hi = self.vertices.min(axis=0), self.vertices.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    @cached_property
    def vertex_normals(self):
        """Angle-weighted average of incident panel normals."""
        tv = self.tri_verts
        acc = np.zeros_like(self.vertices)
        for k in range(3):
            a = tv[:, (k + 1) % 3] - tv[:, k]
            b = tv[:, (k + 2) % 3] - tv[:, k]
            cosang = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            ang = np.arccos(np.clip(cosang, -1.0, 1.0))
            np.add.at(acc, self.triangles[:, k], ang[:, None] * self.normals)
        return acc / np.linalg.norm(acc, axis=1)[:, None]

    @cached_property
    def mean_curvature(self):
        """Per-panel mean curvature (positive where convex), from vertex normals.

        Fits the 2x2 shape operator that maps each edge vector to the change
        of vertex normal along it, in least squares, and returns half its trace.
        """
        tv = self.tri_verts
        vn = self.vertex_normals[self.triangles]
        nrm = self.normals
        u = tv[:, 1] - tv[:, 0]
        u /= np.linalg.norm(u, axis=1)[:, None]
        v = np.cross(nrm, u)
        rows = []
        rhs = []
        for k in range(3):
            e = tv[:, (k + 1) % 3] - tv[:, k]
            dn = vn[:, (k + 1) % 3] - vn[:, k]
            eu, ev = np.einsum("ij,ij->i", e, u), np.einsum("ij,ij->i", e, v)
            zero = np.zeros_like(eu)
            # unknowns (a, b, c) of the symmetric operator [[a, b], [b, c]]
            rows += [np.stack([eu, ev, zero], 1), np.stack([zero, eu, ev], 1)]
            rhs += [np.einsum("ij,ij->i", dn, u), np.einsum("ij,ij->i", dn, v)]
        A = np.stack(rows, axis=1)
        b = np.stack(rhs, axis=1)
        sol = np.linalg.solve(np.einsum("nki,nkj->nij", A, A), np.einsum("nki,nk->ni", A, b)[..., None])[..., 0]
        return 0.5 * (sol[:, 0] + sol[:, 2])

    def closure_residuals(self):
        """||sum of normal * area|| / total area, per component."""
        out = []
        for j in range(self.n_components):
            sel = self.component_id == j
            vec = (self.normals[sel] * self.areas[sel, None]).sum(axis=0)
            out.append(float(np.linalg.norm(vec) / self.areas[sel].sum()))
        return np.array(out)

    def cavity_components(self):
        return np.nonzero(self.component_depth % 2 == 1)[0]

    def signed_distance(self, points):
        pts = np.atleast_2d(np.asarray(points, float))
        return K.signed_distance_brute(np.ascontiguousarray(pts), self.vertices, self.triangles)


def _edge_table(tris):
    e = np.stack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]], axis=1).reshape(-1, 2)
    key = np.sort(e, axis=1)
    uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return uniq, inverse.reshape(-1), counts


def _orient_components(tris, inverse, counts):
    """Breadth-first labeling over shared edges with consistent winding."""
    n = len(tris)
    # faces incident to each unique edge, and the local edge slot used
    order = np.argsort(inverse, kind="stable")
    edge_of_slot = inverse[order]
    starts = np.searchsorted(edge_of_slot, np.arange(len(counts)))
    comp = -np.ones(n, dtype=np.int64)
    flip = np.zeros(n, dtype=bool)
    label = 0
    for seed in range(n):
        if comp[seed] >= 0:
            continue
        comp[seed] = label
        queue = deque([seed])
        while queue:
            f = queue.popleft()
            for slot in range(3):
                e = inverse[3 * f + slot]
                s = starts[e]
                a, b = tris[f, slot], tris[f, (slot + 1) % 3]
                if flip[f]:
                    a, b = b, a
                for g_slot in order[s:s + 2]:
                    g, gs = divmod(int(g_slot), 3)
                    if g == f:
                        continue
                    ga = tris[g, gs]
                    # consistent winding traverses the shared edge in opposite directions
                    want_flip = (ga == a)
                    if comp[g] < 0:
                        comp[g] = label
                        flip[g] = want_flip
                        queue.append(g)
                    elif flip[g] != want_flip:
                        raise NonManifold("surface is not orientable")
        label += 1
    return comp, flip


def build_surface(vertices, triangles):
    """Validate a closed triangle mesh and orient every panel outward of the domain.

    Raises
    ------
    OpenSurface
        An edge belongs to a single triangle.
    NonManifold
        An edge belongs to more than two triangles, or winding cannot be made
        consistent.
    DegeneratePanel
        A triangle has area below 1e-14 of the mean area.
    """
    verts = np.ascontiguousarray(np.asarray(vertices, float))
    tris = np.ascontiguousarray(np.asarray(triangles, dtype=np.int64))
    if tris.ndim != 2 or tris.shape[1] != 3 or len(tris) == 0:
        raise ValueError("triangles must be an (n, 3) index array")
    uniq, inverse, counts = _edge_table(tris)
    if np.any(counts == 1):
        i, j = uniq[np.argmax(counts == 1)]
        raise OpenSurface(f"boundary edge ({i}, {j}) belongs to a single triangle")
    if np.any(counts > 2):
        i, j = uniq[np.argmax(counts > 2)]
        raise NonManifold(f"edge ({i}, {j}) is shared by {counts.max()} triangles")

    cross = np.cross(verts[tris[:, 1]] - verts[tris[:, 0]], verts[tris[:, 2]] - verts[tris[:, 0]])
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    bad = areas < 1e-14 * areas.mean()
    if np.any(bad):
        raise DegeneratePanel(f"triangle {int(np.argmax(bad))} has (near) zero area")

    comp, flip = _orient_components(tris, inverse, counts)
    tris = tris.copy()
    tris[flip] = tris[flip][:, ::-1]
    ncomp = int(comp.max()) + 1

    cent = verts[tris].mean(axis=1)

    def normals_of(t):
        c = np.cross(verts[t[:, 1]] - verts[t[:, 0]], verts[t[:, 2]] - verts[t[:, 0]])
        return c / np.linalg.norm(c, axis=1)[:, None]

    nrm = normals_of(tris)
    # each component positively oriented on its own
    for j in range(ncomp):
        sel = comp == j
        vol = np.sum(np.einsum("ij,ij->i", cent[sel], nrm[sel]) * areas[sel])
        if vol < 0:
            tris[sel] = tris[sel][:, ::-1]
    nrm = normals_of(tris)

    # nesting depth decides which components bound cavities
    depth = np.zeros(ncomp, dtype=np.int64)
    if ncomp > 1:
        probes = np.array([verts[tris[comp == j][0, 0]] for j in range(ncomp)])
        for k in range(ncomp):
            wk = K.winding_numbers(probes, verts, np.ascontiguousarray(tris[comp == k]))
            for j in range(ncomp):
                if j != k and wk[j] > 0.5:
                    depth[j] += 1
        for j in np.nonzero(depth % 2 == 1)[0]:
            sel = comp == j
            tris[sel] = tris[sel][:, ::-1]
        nrm = normals_of(tris)

    return SurfaceMesh(vertices=verts, triangles=np.ascontiguousarray(tris), centroids=cent,
                       areas=areas, normals=nrm, component_id=comp, component_depth=depth)


def load_surface(path):
    """Read an OFF or OBJ file and return a validated :class:`SurfaceMesh`."""
    verts, tris = read_mesh(path)
    return build_surface(verts, tris)


def component_genus(surface):
    """Genus of each connected component via its Euler characteristic."""
    out = []
    for j in range(surface.n_components):
        t = surface.triangles[surface.component_id == j]
        nv = len(np.unique(t))
        ne = len(np.unique(np.sort(t[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1), axis=0))
        chi = nv - ne + len(t)
        if chi % 2:
            raise NonManifold(f"component {j} has odd Euler characteristic {chi}")
        out.append((2 - chi) // 2)
    return out


@dataclass(frozen=True, eq=False)
class VolumeQuadrature:
    nodes: np.ndarray
    weights: np.ndarray
    h: float
    # integer lattice coordinates of each node (node = h * index)
    index: np.ndarray = field(repr=False)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def total_weight(self):
        return float(self.weights.sum())

    @cached_property
    def _tree(self):
        return cKDTree(self.nodes)

    def nearest(self, points):
        """Distance to and index of the nearest node for each point."""
        return self._tree.query(np.atleast_2d(points))

    @classmethod
    def from_nodes(cls, nodes, h):
        nodes = np.ascontiguousarray(np.asarray(nodes, float))
        idx = np.rint(nodes / h).astype(np.int64)
        return cls(nodes=nodes, weights=np.full(len(nodes), h ** 3), h=float(h), index=idx)


def voxelize(surface, h):
    """Midpoint voxel quadrature of the interior with a half-cell inset.

    Nodes sit on the lattice ``h * Z^3``; a node is kept iff its signed
    distance to the surface is strictly below ``-h/2``. Every weight is h^3.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    lo = np.floor(surface.vertices.min(axis=0) / h).astype(int) - 1
    hi = np.ceil(surface.vertices.max(axis=0) / h).astype(int) + 1
    shape = hi - lo + 1
    x0, y0, z0 = lo * h
    nx, ny, nz = (int(s) for s in shape)
    inside = K.column_inside_mask(surface.vertices, surface.triangles, x0, y0, z0, h,
                                  nx, ny, nz, h * 1.2345678e-7 * np.sqrt(2), h * 9.8765432e-8 * np.sqrt(3))
    dist = K.band_distance(surface.vertices, surface.triangles, x0, y0, z0, h, nx, ny, nz, 0.5 * h)
    keep = inside & (dist > 0.5 * h)
    idx = np.argwhere(keep)
    if len(idx) == 0:
        raise EmptyQuadrature(f"no interior nodes at h={h}")
    if len(idx) < 1000:
        warnings.warn(f"voxel quadrature has only {len(idx)} nodes; h={h} may be too coarse",
                      stacklevel=2)
    idx = idx + lo
    return VolumeQuadrature(nodes=idx * h, weights=np.full(len(idx), h ** 3), h=float(h), index=idx)


@dataclass(frozen=True, eq=False)
class DomainModel:
    surface: SurfaceMesh
    volume: VolumeQuadrature
    genus_per_component: list
    harmonic_dim: int
    t0_method: str = "solid_angle"

    @property
    def h(self):
        return self.volume.h

    @cached_property
    def layer_operator(self):
        from .layer_potentials import assemble_T0
        return assemble_T0(self, method=self.t0_method)

    def signed_distance(self, points):
        return self.surface.signed_distance(points)


def build_domain(surface, h, t0_method="solid_angle"):
    """Assemble a :class:`DomainModel` from a surface (or a mesh path) and a voxel size."""
    if not isinstance(surface, SurfaceMesh):
        surface = load_surface(surface)
    genus = component_genus(surface)
    vol = voxelize(surface, h)
    log.info("domain: %d panels, %d components, %d volume nodes (h=%g)",
             surface.n_panels, surface.n_components, vol.n_nodes, h)
    return DomainModel(surface=surface, volume=vol, genus_per_component=genus,
                       harmonic_dim=int(sum(genus)), t0_method=t0_method)


def _surface_of(model):
    return model.surface if isinstance(model, DomainModel) else model


def signed_distance(model, x):
    """Signed distance to the boundary: negative inside, positive outside.

    Accepts a single point or an (n, 3) array; returns a float or an array.
    """
    x = np.asarray(x, float)
    d = _surface_of(model).signed_distance(x)
    return float(d[0]) if x.ndim == 1 else d


def ell(model, y):
    """log(2 + 1/dist(y, boundary)) for an interior point y."""
    d = signed_distance(model, y)
    if np.any(np.asarray(d) >= 0):
        raise OutsideDomain("ell is only defined strictly inside the domain")
    return np.log(2.0 + 1.0 / np.abs(d))


def component_flux(model, field):
    """Flux of panel-wise vector samples through each boundary component."""
    surf = _surface_of(model)
    field = np.asarray(field, float)
    if field.shape != (surf.n_panels, 3):
        raise SizeMismatch(f"expected ({surf.n_panels}, 3) panel samples, got {field.shape}")
    per_panel = np.einsum("ij,ij->i", field, surf.normals) * surf.areas
    return np.bincount(surf.component_id, weights=per_panel, minlength=surf.n_components)


def scalar_component_integral(model, values):
    """Integral of panel-wise scalar samples over each boundary component."""
    surf = _surface_of(model)
    values = np.asarray(values, float)
    if values.shape != (surf.n_panels,):
        raise SizeMismatch(f"expected {surf.n_panels} panel values, got {values.shape}")
    return np.bincount(surf.component_id, weights=values * surf.areas, minlength=surf.n_components)
