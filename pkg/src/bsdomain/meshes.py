"""Mesh generators and OFF/OBJ readers and writers.

The generators return plain ``(vertices, triangles)`` arrays; use
:func:`bsdomain.geometry.build_surface` to validate and orient them.
"""

import numpy as np


def icosphere(level=3, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Subdivided icosahedron projected onto a sphere.

    ``level=3`` gives 642 vertices and 1280 triangles.
    """
    t = (1.0 + 5.0 ** 0.5) / 2.0
    verts = [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, float) / np.linalg.norm(v) for v in verts]
    for _ in range(level):
        cache = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.asarray(verts) * radius + np.asarray(center, float)
    return v, np.asarray(faces, dtype=np.int64)


def torus(r_major=1.0, r_minor=0.4, n_around=48, n_tube=16):
    """Solid-torus boundary around the z-axis with staggered vertex rings.

    Ring ``j`` of the tube is rotated by half an azimuthal step relative to
    ring ``j - 1``, so every triangle is mirror-symmetric about the meridian
    plane through its centroid. Its normal therefore has no azimuthal
    component. ``n_tube`` must be even for the stagger to close up.
    """
    if n_tube % 2:
        raise ValueError("n_tube must be even")
    dphi = 2 * np.pi / n_around
    verts = np.empty((n_tube * n_around, 3))
    for j in range(n_tube):
        theta = 2 * np.pi * j / n_tube
        rho = r_major + r_minor * np.cos(theta)
        phi = (np.arange(n_around) + 0.5 * (j % 2)) * dphi
        verts[j * n_around:(j + 1) * n_around] = np.column_stack(
            [rho * np.cos(phi), rho * np.sin(phi), np.full(n_around, r_minor * np.sin(theta))])

    def vid(j, i):
        return (j % n_tube) * n_around + (i % n_around)

    faces = []
    for j in range(n_tube):
        for i in range(n_around):
            if j % 2 == 0:
                # next ring is shifted by +dphi/2
                faces.append((vid(j, i), vid(j, i + 1), vid(j + 1, i)))
                faces.append((vid(j, i + 1), vid(j + 1, i + 1), vid(j + 1, i)))
            else:
                # next ring is shifted by -dphi/2 relative to this one
                faces.append((vid(j, i), vid(j, i + 1), vid(j + 1, i + 1)))
                faces.append((vid(j, i), vid(j + 1, i + 1), vid(j + 1, i)))
    return verts, np.asarray(faces, dtype=np.int64)


def concentric_shell(level=2, r_inner=1.0, r_outer=2.0, flip_inner=True):
    """Two concentric icospheres bounding the shell r_inner < |x| < r_outer.

    With ``flip_inner=True`` the inner sphere is written with the same
    winding as the outer one (normals pointing away from the center), which
    is the wrong orientation for the shell domain; loading must fix it.
    """
    vo, fo = icosphere(level, r_outer)
    vi, fi = icosphere(level, r_inner)
    if not flip_inner:
        fi = fi[:, ::-1]
    return np.vstack([vo, vi]), np.vstack([fo, fi + len(vo)])


def voxel_surface(mask, h=1.0, origin=(0.0, 0.0, 0.0)):
    """Boundary of a union of unit voxels, two triangles per exposed face.

    ``mask`` is a boolean 3-D array; cell (i, j, k) occupies
    ``origin + h * [i, i+1] x [j, j+1] x [k, k+1]``.
    """
    mask = np.asarray(mask, bool)
    padded = np.pad(mask, 1)
    index = {}
    verts = []
    faces = []

    def vid(p):
        if p not in index:
            index[p] = len(verts)
            verts.append(p)
        return index[p]

    # (axis, direction) -> quad corners as offsets, counter-clockwise seen from outside
    quads = {
        (0, 1): [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)],
        (0, -1): [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)],
        (1, 1): [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)],
        (1, -1): [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)],
        (2, 1): [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],
        (2, -1): [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)],
    }
    for i, j, k in zip(*np.nonzero(mask)):
        for (axis, direction), corners in quads.items():
            nb = [i + 1, j + 1, k + 1]
            nb[axis] += direction
            if padded[tuple(nb)]:
                continue
            ids = [vid((i + a, j + b, k + c)) for a, b, c in corners]
            faces.append((ids[0], ids[1], ids[2]))
            faces.append((ids[0], ids[2], ids[3]))
    v = np.asarray(verts, float) * h + np.asarray(origin, float)
    return v, np.asarray(faces, dtype=np.int64)


def double_torus_block():
    """A 5x3x1 slab with two square through-holes: a genus-2 surface."""
    mask = np.ones((5, 3, 1), bool)
    mask[1, 1, 0] = False
    mask[3, 1, 0] = False
    return voxel_surface(mask, h=0.2, origin=(-0.5, -0.3, -0.1))


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------

def _strip(line):
    return line.split("#", 1)[0].strip()


def read_off(path):
    with open(path) as fh:
        lines = [s for s in (_strip(l) for l in fh) if s]
    header = lines[0]
    if header.startswith("OFF") and len(header.split()) > 1:
        counts = header[3:].split()
        body = lines[1:]
    elif header.startswith("OFF"):
        counts = lines[1].split()
        body = lines[2:]
    else:
        raise ValueError(f"{path}: missing OFF header")
    nv, nf = int(counts[0]), int(counts[1])
    verts = np.array([[float(x) for x in body[i].split()[:3]] for i in range(nv)])
    faces = []
    for line in body[nv:nv + nf]:
        parts = line.split()
        if int(parts[0]) != 3:
            raise ValueError(f"{path}: only triangle faces are supported")
        faces.append([int(p) for p in parts[1:4]])
    return verts, np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def read_obj(path):
    verts, faces = [], []
    with open(path) as fh:
        for raw in fh:
            line = _strip(raw)
            if not line:
                continue
            parts = line.split()
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                if len(idx) != 3:
                    raise ValueError(f"{path}: only triangle faces are supported")
                faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
    return np.asarray(verts, float), np.asarray(faces, dtype=np.int64).reshape(-1, 3)


def read_mesh(path):
    path = str(path)
    if path.lower().endswith(".off"):
        return read_off(path)
    if path.lower().endswith(".obj"):
        return read_obj(path)
    raise ValueError(f"unsupported mesh format: {path}")


def write_off(path, verts, faces):
    with open(path, "w") as fh:
        fh.write(f"OFF\n{len(verts)} {len(faces)} 0\n")
        for v in verts:
            fh.write("%.17g %.17g %.17g\n" % tuple(v))
        for f in faces:
            fh.write("3 %d %d %d\n" % tuple(f))


def write_obj(path, verts, faces):
    with open(path, "w") as fh:
        for v in verts:
            fh.write("v %.17g %.17g %.17g\n" % tuple(v))
        for f in faces:
            fh.write("f %d %d %d\n" % tuple(np.asarray(f) + 1))
