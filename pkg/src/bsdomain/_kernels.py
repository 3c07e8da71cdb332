# Low-level numba kernels shared by the geometry, layer-potential and
# volume-integral modules. Everything here works on plain float64 arrays.

import math

import numpy as np
from numba import njit

FOUR_PI = 4.0 * math.pi

# Degree-5 seven-point rule on the reference triangle (barycentric, weights sum to 1).
_DUN_A1 = 0.059715871789770
_DUN_B1 = 0.470142064105115
_DUN_A2 = 0.797426985353087
_DUN_B2 = 0.101286507323456
DUNAVANT7_BARY = np.array([
    [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
    [_DUN_A1, _DUN_B1, _DUN_B1],
    [_DUN_B1, _DUN_A1, _DUN_B1],
    [_DUN_B1, _DUN_B1, _DUN_A1],
    [_DUN_A2, _DUN_B2, _DUN_B2],
    [_DUN_B2, _DUN_A2, _DUN_B2],
    [_DUN_B2, _DUN_B2, _DUN_A2],
])
DUNAVANT7_W = np.array([
    0.225,
    0.132394152788506, 0.132394152788506, 0.132394152788506,
    0.125939180544827, 0.125939180544827, 0.125939180544827,
])


# ---------------------------------------------------------------------------
# point / triangle geometry
# ---------------------------------------------------------------------------

@njit(cache=True)
def _dot(ax, ay, az, bx, by, bz):
    return ax * bx + ay * by + az * bz


@njit(cache=True)
def point_triangle_dist2(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Squared distance from p to triangle abc (Ericson, closest point)."""
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = _dot(abx, aby, abz, apx, apy, apz)
    d2 = _dot(acx, acy, acz, apx, apy, apz)
    if d1 <= 0.0 and d2 <= 0.0:
        qx, qy, qz = ax, ay, az
    else:
        bpx, bpy, bpz = px - bx, py - by, pz - bz
        d3 = _dot(abx, aby, abz, bpx, bpy, bpz)
        d4 = _dot(acx, acy, acz, bpx, bpy, bpz)
        vc = d1 * d4 - d3 * d2
        if d3 >= 0.0 and d4 <= d3:
            qx, qy, qz = bx, by, bz
        elif vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
            v = d1 / (d1 - d3)
            qx, qy, qz = ax + v * abx, ay + v * aby, az + v * abz
        else:
            cpx, cpy, cpz = px - cx, py - cy, pz - cz
            d5 = _dot(abx, aby, abz, cpx, cpy, cpz)
            d6 = _dot(acx, acy, acz, cpx, cpy, cpz)
            vb = d5 * d2 - d1 * d6
            if d6 >= 0.0 and d5 <= d6:
                qx, qy, qz = cx, cy, cz
            elif vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
                w = d2 / (d2 - d6)
                qx, qy, qz = ax + w * acx, ay + w * acy, az + w * acz
            else:
                va = d3 * d6 - d5 * d4
                if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
                    w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
                    qx = bx + w * (cx - bx)
                    qy = by + w * (cy - by)
                    qz = bz + w * (cz - bz)
                else:
                    denom = 1.0 / (va + vb + vc)
                    v = vb * denom
                    w = vc * denom
                    qx = ax + abx * v + acx * w
                    qy = ay + aby * v + acy * w
                    qz = az + abz * v + acz * w
    dx, dy, dz = px - qx, py - qy, pz - qz
    return dx * dx + dy * dy + dz * dz


@njit(cache=True)
def solid_angle(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Signed solid angle of triangle abc seen from p (Van Oosterom-Strackee)."""
    ax, ay, az = ax - px, ay - py, az - pz
    bx, by, bz = bx - px, by - py, bz - pz
    cx, cy, cz = cx - px, cy - py, cz - pz
    la = math.sqrt(ax * ax + ay * ay + az * az)
    lb = math.sqrt(bx * bx + by * by + bz * bz)
    lc = math.sqrt(cx * cx + cy * cy + cz * cz)
    det = (ax * (by * cz - bz * cy) - ay * (bx * cz - bz * cx)
           + az * (bx * cy - by * cx))
    den = (la * lb * lc + _dot(ax, ay, az, bx, by, bz) * lc
           + _dot(ax, ay, az, cx, cy, cz) * lb + _dot(bx, by, bz, cx, cy, cz) * la)
    return 2.0 * math.atan2(det, den)


@njit(cache=True)
def signed_distance_brute(points, verts, tris):
    """Exact distance to the triangle soup, signed by the winding number."""
    n = points.shape[0]
    out = np.empty(n)
    for i in range(n):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        best = np.inf
        wind = 0.0
        for t in range(tris.shape[0]):
            a = verts[tris[t, 0]]
            b = verts[tris[t, 1]]
            c = verts[tris[t, 2]]
            d2 = point_triangle_dist2(px, py, pz, a[0], a[1], a[2],
                                      b[0], b[1], b[2], c[0], c[1], c[2])
            if d2 < best:
                best = d2
            wind += solid_angle(px, py, pz, a[0], a[1], a[2],
                                b[0], b[1], b[2], c[0], c[1], c[2])
        d = math.sqrt(best)
        out[i] = -d if wind > 2.0 * math.pi else d
    return out


@njit(cache=True)
def winding_numbers(points, verts, tris):
    n = points.shape[0]
    out = np.empty(n)
    for i in range(n):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        wind = 0.0
        for t in range(tris.shape[0]):
            a = verts[tris[t, 0]]
            b = verts[tris[t, 1]]
            c = verts[tris[t, 2]]
            wind += solid_angle(px, py, pz, a[0], a[1], a[2],
                                b[0], b[1], b[2], c[0], c[1], c[2])
        out[i] = wind / FOUR_PI
    return out


# ---------------------------------------------------------------------------
# voxelization: z-column parity + band-limited exact distance
# ---------------------------------------------------------------------------

@njit(cache=True)
def _column_pass(verts, tris, x0, y0, h, nx, ny, jx, jy, counts, zs, fill, record):
    for t in range(tris.shape[0]):
        a = verts[tris[t, 0]]
        b = verts[tris[t, 1]]
        c = verts[tris[t, 2]]
        det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
        if det == 0.0:
            continue
        xmin = min(a[0], b[0], c[0])
        xmax = max(a[0], b[0], c[0])
        ymin = min(a[1], b[1], c[1])
        ymax = max(a[1], b[1], c[1])
        i0 = max(0, int(math.floor((xmin - jx - x0) / h)))
        i1 = min(nx - 1, int(math.ceil((xmax - jx - x0) / h)))
        k0 = max(0, int(math.floor((ymin - jy - y0) / h)))
        k1 = min(ny - 1, int(math.ceil((ymax - jy - y0) / h)))
        for i in range(i0, i1 + 1):
            px = x0 + i * h + jx
            for k in range(k0, k1 + 1):
                py = y0 + k * h + jy
                l1 = ((b[0] - px) * (c[1] - py) - (c[0] - px) * (b[1] - py)) / det
                l2 = ((c[0] - px) * (a[1] - py) - (a[0] - px) * (c[1] - py)) / det
                l3 = 1.0 - l1 - l2
                if l1 < 0.0 or l2 < 0.0 or l3 < 0.0:
                    continue
                col = i * ny + k
                if record:
                    zs[fill[col]] = l1 * a[2] + l2 * b[2] + l3 * c[2]
                    fill[col] += 1
                else:
                    counts[col] += 1


@njit(cache=True)
def column_inside_mask(verts, tris, x0, y0, z0, h, nx, ny, nz, jx, jy):
    """Inside mask of grid nodes by ray parity along +z.

    Columns are shifted by (jx, jy), a tiny deterministic offset, so rays
    never pass exactly through mesh vertices or edges.
    """
    ncol = nx * ny
    counts = np.zeros(ncol, dtype=np.int64)
    dummy_z = np.empty(0)
    dummy_f = np.empty(0, dtype=np.int64)
    _column_pass(verts, tris, x0, y0, h, nx, ny, jx, jy, counts, dummy_z, dummy_f, False)
    starts = np.zeros(ncol + 1, dtype=np.int64)
    for c in range(ncol):
        starts[c + 1] = starts[c] + counts[c]
    zs = np.empty(starts[ncol])
    fill = starts[:-1].copy()
    _column_pass(verts, tris, x0, y0, h, nx, ny, jx, jy, counts, zs, fill, True)
    inside = np.zeros((nx, ny, nz), dtype=np.bool_)
    for i in range(nx):
        for k in range(ny):
            col = i * ny + k
            s, e = starts[col], starts[col + 1]
            if e - s < 2:
                continue
            zc = np.sort(zs[s:e])
            for q in range(0, (e - s) - 1, 2):
                lo = int(math.ceil((zc[q] - z0) / h))
                hi = int(math.floor((zc[q + 1] - z0) / h))
                for m in range(max(lo, 0), min(hi, nz - 1) + 1):
                    zm = z0 + m * h
                    if zc[q] < zm < zc[q + 1]:
                        inside[i, k, m] = True
    return inside


@njit(cache=True)
def band_distance(verts, tris, x0, y0, z0, h, nx, ny, nz, radius):
    """Per-cell distance to the surface, exact wherever it is <= radius."""
    dist = np.full((nx, ny, nz), np.inf)
    for t in range(tris.shape[0]):
        a = verts[tris[t, 0]]
        b = verts[tris[t, 1]]
        c = verts[tris[t, 2]]
        lo = np.empty(3)
        hi = np.empty(3)
        for ax in range(3):
            lo[ax] = min(a[ax], b[ax], c[ax]) - radius
            hi[ax] = max(a[ax], b[ax], c[ax]) + radius
        i0 = max(0, int(math.floor((lo[0] - x0) / h)))
        i1 = min(nx - 1, int(math.ceil((hi[0] - x0) / h)))
        j0 = max(0, int(math.floor((lo[1] - y0) / h)))
        j1 = min(ny - 1, int(math.ceil((hi[1] - y0) / h)))
        k0 = max(0, int(math.floor((lo[2] - z0) / h)))
        k1 = min(nz - 1, int(math.ceil((hi[2] - z0) / h)))
        for i in range(i0, i1 + 1):
            px = x0 + i * h
            for j in range(j0, j1 + 1):
                py = y0 + j * h
                for k in range(k0, k1 + 1):
                    pz = z0 + k * h
                    d2 = point_triangle_dist2(px, py, pz, a[0], a[1], a[2],
                                              b[0], b[1], b[2], c[0], c[1], c[2])
                    d = math.sqrt(d2)
                    if d < dist[i, j, k]:
                        dist[i, j, k] = d
    return dist


# ---------------------------------------------------------------------------
# flat-triangle integrals of 1/R and its gradient (closed form)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _log_ratio(Rp, lp, Rm, lm, R02):
    # ln((Rp + lp) / (Rm + lm)), evaluated without cancellation
    if lp + lm >= 0.0:
        num = Rp + lp if lp > 0.0 else R02 / (Rp - lp)
        den = Rm + lm if lm > 0.0 else R02 / (Rm - lm)
        return math.log(num / den)
    num = Rm - lm if lm < 0.0 else R02 / (Rm + lm)
    den = Rp - lp if lp < 0.0 else R02 / (Rp + lp)
    return math.log(num / den)


@njit(cache=True)
def tri_potential_grad(px, py, pz, tv, nx_, ny_, nz_, on_plane):
    """I = int_T dS/|p-y| and grad_p I over flat triangle tv (3x3).

    The triangle must be counter-clockwise about its unit normal n.
    If on_plane is True, the height above the plane is forced to zero so
    the normal (solid-angle) part of the gradient drops out; this is the
    principal-value self term for collocation at the panel's own centroid.
    """
    d = (px - tv[0, 0]) * nx_ + (py - tv[0, 1]) * ny_ + (pz - tv[0, 2]) * nz_
    if on_plane:
        d = 0.0
    ad = abs(d)
    R = np.empty(3)
    for k in range(3):
        ex, ey, ez = tv[k, 0] - px, tv[k, 1] - py, tv[k, 2] - pz
        R[k] = math.sqrt(ex * ex + ey * ey + ez * ez)
    pot = 0.0
    gx = 0.0
    gy = 0.0
    gz = 0.0
    beta = 0.0
    for e in range(3):
        ia = e
        ib = (e + 1) % 3
        sx = tv[ib, 0] - tv[ia, 0]
        sy = tv[ib, 1] - tv[ia, 1]
        sz = tv[ib, 2] - tv[ia, 2]
        L = math.sqrt(sx * sx + sy * sy + sz * sz)
        sx /= L
        sy /= L
        sz /= L
        # outward in-plane edge normal m = s x n
        mx = sy * nz_ - sz * ny_
        my = sz * nx_ - sx * nz_
        mz = sx * ny_ - sy * nx_
        ax = tv[ia, 0] - px
        ay = tv[ia, 1] - py
        az = tv[ia, 2] - pz
        lm = ax * sx + ay * sy + az * sz
        lp = lm + L
        t0 = ax * mx + ay * my + az * mz
        R02 = t0 * t0 + d * d
        Rp = R[ib]
        Rm = R[ia]
        if R02 <= 1e-300 and lm <= 0.0 <= lp:
            continue  # point on the edge itself; measure-zero, skip
        f = _log_ratio(Rp, lp, Rm, lm, R02)
        pot += t0 * f
        gx -= mx * f
        gy -= my * f
        gz -= mz * f
        if R02 > 1e-300:
            beta += (math.atan(t0 * lp / (R02 + ad * Rp))
                     - math.atan(t0 * lm / (R02 + ad * Rm)))
    pot -= ad * beta
    if d > 0.0:
        gx -= nx_ * beta
        gy -= ny_ * beta
        gz -= nz_ * beta
    elif d < 0.0:
        gx += nx_ * beta
        gy += ny_ * beta
        gz += nz_ * beta
    return pot, gx, gy, gz


@njit(cache=True)
def _far_potential_grad(px, py, pz, tv, area):
    pot = 0.0
    gx = 0.0
    gy = 0.0
    gz = 0.0
    for q in range(7):
        b0 = DUNAVANT7_BARY[q, 0]
        b1 = DUNAVANT7_BARY[q, 1]
        b2 = DUNAVANT7_BARY[q, 2]
        rx = px - (b0 * tv[0, 0] + b1 * tv[1, 0] + b2 * tv[2, 0])
        ry = py - (b0 * tv[0, 1] + b1 * tv[1, 1] + b2 * tv[2, 1])
        rz = pz - (b0 * tv[0, 2] + b1 * tv[1, 2] + b2 * tv[2, 2])
        inv = 1.0 / math.sqrt(rx * rx + ry * ry + rz * rz)
        w = DUNAVANT7_W[q] * area
        pot += w * inv
        inv3 = w * inv * inv * inv
        gx -= rx * inv3
        gy -= ry * inv3
        gz -= rz * inv3
    return pot, gx, gy, gz


@njit(cache=True)
def layer_apply(targets, tri_verts, normals, centroids, areas, diam, dens,
                self_idx, far_ratio, want_pot, want_grad):
    """Sum_j dens[j, :] * (I_j(x), grad I_j(x)) for every target x.

    Returns pot (m, k) and grad (m, k, 3); I_j = int_{panel j} dS/|x - y|.
    Panels farther than far_ratio * diameter use the 7-point rule.
    """
    m = targets.shape[0]
    npan = tri_verts.shape[0]
    k = dens.shape[1]
    pot = np.zeros((m, k))
    grad = np.zeros((m, k, 3))
    for i in range(m):
        px, py, pz = targets[i, 0], targets[i, 1], targets[i, 2]
        si = self_idx[i]
        for j in range(npan):
            cx = px - centroids[j, 0]
            cy = py - centroids[j, 1]
            cz = pz - centroids[j, 2]
            lim = far_ratio * diam[j]
            if far_ratio > 0.0 and cx * cx + cy * cy + cz * cz > lim * lim:
                p, gx, gy, gz = _far_potential_grad(px, py, pz, tri_verts[j], areas[j])
            else:
                p, gx, gy, gz = tri_potential_grad(
                    px, py, pz, tri_verts[j], normals[j, 0], normals[j, 1],
                    normals[j, 2], si == j)
            for c in range(k):
                dj = dens[j, c]
                if dj == 0.0:
                    continue
                if want_pot:
                    pot[i, c] += dj * p
                if want_grad:
                    grad[i, c, 0] += dj * gx
                    grad[i, c, 1] += dj * gy
                    grad[i, c, 2] += dj * gz
    return pot, grad


@njit(cache=True)
def normal_derivative_matrix(targets, target_normals, tri_verts, normals,
                             centroids, areas, diam, self_idx, far_ratio):
    """M[i, j] = n_i . int_{panel j} (x_i - y) / (4 pi |x_i - y|^3) dS(y)."""
    m = targets.shape[0]
    npan = tri_verts.shape[0]
    out = np.empty((m, npan))
    for i in range(m):
        px, py, pz = targets[i, 0], targets[i, 1], targets[i, 2]
        tnx, tny, tnz = target_normals[i, 0], target_normals[i, 1], target_normals[i, 2]
        si = self_idx[i]
        for j in range(npan):
            cx = px - centroids[j, 0]
            cy = py - centroids[j, 1]
            cz = pz - centroids[j, 2]
            lim = far_ratio * diam[j]
            if far_ratio > 0.0 and cx * cx + cy * cy + cz * cz > lim * lim:
                p, gx, gy, gz = _far_potential_grad(px, py, pz, tri_verts[j], areas[j])
            else:
                p, gx, gy, gz = tri_potential_grad(
                    px, py, pz, tri_verts[j], normals[j, 0], normals[j, 1],
                    normals[j, 2], si == j)
            # int (x - y)/|x - y|^3 dS = -grad I
            out[i, j] = -(tnx * gx + tny * gy + tnz * gz) / FOUR_PI
    return out


# ---------------------------------------------------------------------------
# uniform-cube volume integrals (near field of the voxel quadrature)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _xlog_sum(coef, t, r, q2):
    # coef * ln(t + r) with r = sqrt(t^2 + q2); zero when coef == 0
    if coef == 0.0:
        return 0.0
    if t >= 0.0:
        return coef * math.log(t + r)
    return coef * math.log(q2 / (r - t))


@njit(cache=True)
def _rect_inv_r(p, s, t):
    # antiderivative of 1/sqrt(p^2 + s^2 + t^2) in (s, t)
    r = math.sqrt(p * p + s * s + t * t)
    val = _xlog_sum(s, t, r, s * s + p * p) + _xlog_sum(t, s, r, t * t + p * p)
    if p != 0.0 and r > 0.0:
        val -= p * math.atan(s * t / (p * r))
    return val


@njit(cache=True)
def _rect_integral(p, s0, s1, t0, t1):
    return (_rect_inv_r(p, s1, t1) - _rect_inv_r(p, s0, t1)
            - _rect_inv_r(p, s1, t0) + _rect_inv_r(p, s0, t0))


@njit(cache=True)
def cube_field(rx, ry, rz, a):
    """int over the cube [-a, a]^3 of (r - y)/|r - y|^3 dy, r = x - center."""
    lx0, lx1 = rx - a, rx + a
    ly0, ly1 = ry - a, ry + a
    lz0, lz1 = rz - a, rz + a
    gx = _rect_integral(lx0, ly0, ly1, lz0, lz1) - _rect_integral(lx1, ly0, ly1, lz0, lz1)
    gy = _rect_integral(ly0, lz0, lz1, lx0, lx1) - _rect_integral(ly1, lz0, lz1, lx0, lx1)
    gz = _rect_integral(lz0, lx0, lx1, ly0, ly1) - _rect_integral(lz1, lx0, lx1, ly0, ly1)
    return gx, gy, gz


@njit(cache=True)
def _box_inv_r_corner(x, y, z):
    r = math.sqrt(x * x + y * y + z * z)
    val = (_xlog_sum(x * y, z, r, x * x + y * y)
           + _xlog_sum(y * z, x, r, y * y + z * z)
           + _xlog_sum(z * x, y, r, z * z + x * x))
    if r > 0.0:
        if z != 0.0:
            val -= 0.5 * z * z * math.atan(x * y / (z * r))
        if x != 0.0:
            val -= 0.5 * x * x * math.atan(y * z / (x * r))
        if y != 0.0:
            val -= 0.5 * y * y * math.atan(z * x / (y * r))
    return val


@njit(cache=True)
def cube_potential(rx, ry, rz, a):
    """int over the cube [-a, a]^3 of 1/|r - y| dy."""
    xs = (rx - a, rx + a)
    ys = (ry - a, ry + a)
    zs = (rz - a, rz + a)
    total = 0.0
    for i in range(2):
        for j in range(2):
            for k in range(2):
                sgn = 1.0 if (i + j + k) % 2 == 1 else -1.0
                total += sgn * _box_inv_r_corner(xs[i], ys[j], zs[k])
    return total


# ---------------------------------------------------------------------------
# volume sums over voxel quadratures
# ---------------------------------------------------------------------------

@njit(cache=True)
def node_kernel(rx, ry, rz, h, near, want_pot):
    """Potential and field of one voxel of unit density seen from offset r.

    Returns ``(phi, gx, gy, gz)`` with phi = int 1/|r - y| dy and
    g = int (r - y)/|r - y|^3 dy = -grad phi over the cube of side h. The
    cube is integrated exactly within ``near``, as a point beyond
    ``near + h``, and in between the two potentials are blended with a C2
    step so that g stays an exact gradient.
    """
    r2 = rx * rx + ry * ry + rz * rz
    far = near + h
    h3 = h * h * h
    if r2 >= far * far:
        inv = 1.0 / math.sqrt(r2)
        s = h3 * inv * inv * inv
        phi = h3 * inv if want_pot else 0.0
        return phi, rx * s, ry * s, rz * s
    a = 0.5 * h
    gx, gy, gz = cube_field(rx, ry, rz, a)
    if r2 <= near * near:
        phi = cube_potential(rx, ry, rz, a) if want_pot else 0.0
        return phi, gx, gy, gz
    r = math.sqrt(r2)
    inv = 1.0 / r
    phic = cube_potential(rx, ry, rz, a)
    phim = h3 * inv
    s = h3 * inv * inv * inv
    t = (far - r) / h
    psi = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    dpsi = -30.0 * t * t * (1.0 - t) * (1.0 - t) / h
    dphi = phic - phim
    # g = -grad(psi phic + (1 - psi) phim)
    bx = psi * gx + (1.0 - psi) * rx * s - dphi * dpsi * rx * inv
    by = psi * gy + (1.0 - psi) * ry * s - dphi * dpsi * ry * inv
    bz = psi * gz + (1.0 - psi) * rz * s - dphi * dpsi * rz * inv
    return phim + psi * dphi, bx, by, bz


@njit(cache=True)
def bs_sum(targets, nodes, field, weights, h, near):
    """Sum of w F(y) x (x - y)/(4 pi |x - y|^3), voxel-exact near x."""
    m = targets.shape[0]
    out = np.zeros((m, 3))
    h3 = h * h * h
    for i in range(m):
        px, py, pz = targets[i, 0], targets[i, 1], targets[i, 2]
        sx = 0.0
        sy = 0.0
        sz = 0.0
        for j in range(nodes.shape[0]):
            _, gx, gy, gz = node_kernel(px - nodes[j, 0], py - nodes[j, 1], pz - nodes[j, 2],
                                        h, near, False)
            s = weights[j] / h3
            fx, fy, fz = field[j, 0] * s, field[j, 1] * s, field[j, 2] * s
            sx += fy * gz - fz * gy
            sy += fz * gx - fx * gz
            sz += fx * gy - fy * gx
        out[i, 0] = sx / FOUR_PI
        out[i, 1] = sy / FOUR_PI
        out[i, 2] = sz / FOUR_PI
    return out


@njit(cache=True)
def newton_sum(targets, nodes, values, weights, h, near, want_grad):
    """Sum of w f(y)/(4 pi |x - y|) and its x-gradient, voxel-exact near x."""
    m = targets.shape[0]
    pot = np.zeros(m)
    grad = np.zeros((m, 3))
    h3 = h * h * h
    for i in range(m):
        px, py, pz = targets[i, 0], targets[i, 1], targets[i, 2]
        acc = 0.0
        gxs = 0.0
        gys = 0.0
        gzs = 0.0
        for j in range(nodes.shape[0]):
            s = values[j] * weights[j] / h3
            if s == 0.0:
                continue
            phi, gx, gy, gz = node_kernel(px - nodes[j, 0], py - nodes[j, 1], pz - nodes[j, 2],
                                          h, near, True)
            acc += s * phi
            gxs -= s * gx
            gys -= s * gy
            gzs -= s * gz
        pot[i] = acc / FOUR_PI
        grad[i, 0] = gxs / FOUR_PI
        grad[i, 1] = gys / FOUR_PI
        grad[i, 2] = gzs / FOUR_PI
    return pot, grad


@njit(cache=True)
def pv_fluctuation(x, fx, nodes, field, weights, excl):
    """T[l, j, m] = sum over |x - y| >= excl of w (F_l(y) - F_l(x)) K_jm(x - y).

    K_jm(r) = (|r|^2 delta_jm - 3 r_j r_m) / (4 pi |r|^5).
    """
    T = np.zeros((3, 3, 3))
    excl2 = excl * excl
    r = np.empty(3)
    for n in range(nodes.shape[0]):
        r[0] = x[0] - nodes[n, 0]
        r[1] = x[1] - nodes[n, 1]
        r[2] = x[2] - nodes[n, 2]
        r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2]
        if r2 < excl2:
            continue
        inv5 = weights[n] / (FOUR_PI * r2 * r2 * math.sqrt(r2))
        for l in range(3):
            df = field[n, l] - fx[l]
            if df == 0.0:
                continue
            c = df * inv5
            for j in range(3):
                for m in range(3):
                    kk = -3.0 * r[j] * r[m]
                    if j == m:
                        kk += r2
                    T[l, j, m] += c * kk
    return T


# ---------------------------------------------------------------------------
# adaptive panel quadrature (independent route to the layer integrals)
# ---------------------------------------------------------------------------

@njit(cache=True)
def _tri_area(tv):
    ux = tv[1, 0] - tv[0, 0]
    uy = tv[1, 1] - tv[0, 1]
    uz = tv[1, 2] - tv[0, 2]
    vx = tv[2, 0] - tv[0, 0]
    vy = tv[2, 1] - tv[0, 1]
    vz = tv[2, 2] - tv[0, 2]
    cx = uy * vz - uz * vy
    cy = uz * vx - ux * vz
    cz = ux * vy - uy * vx
    return 0.5 * math.sqrt(cx * cx + cy * cy + cz * cz)


@njit(cache=True)
def _split4(tv, out):
    # out[c] holds the four children of tv
    m01 = 0.5 * (tv[0] + tv[1])
    m12 = 0.5 * (tv[1] + tv[2])
    m20 = 0.5 * (tv[2] + tv[0])
    out[0, 0] = tv[0]
    out[0, 1] = m01
    out[0, 2] = m20
    out[1, 0] = m01
    out[1, 1] = tv[1]
    out[1, 2] = m12
    out[2, 0] = m20
    out[2, 1] = m12
    out[2, 2] = tv[2]
    out[3, 0] = m01
    out[3, 1] = m12
    out[3, 2] = m20


@njit(cache=True)
def adaptive_potential_grad(px, py, pz, tv, tol, max_depth):
    """(I, grad I) over one panel by 4-way subdivision of the 7-point rule.

    A sub-triangle is accepted once its children change the estimate by less
    than ``tol`` relative, or at ``max_depth``.
    """
    cap = 4 * (max_depth + 1) + 4
    stack = np.empty((cap, 3, 3))
    depth = np.empty(cap, dtype=np.int64)
    kids = np.empty((4, 3, 3))
    stack[0] = tv
    depth[0] = 0
    top = 1
    pot = 0.0
    gx = 0.0
    gy = 0.0
    gz = 0.0
    while top > 0:
        top -= 1
        t = stack[top].copy()
        d = depth[top]
        p0, x0, y0, z0 = _far_potential_grad(px, py, pz, t, _tri_area(t))
        _split4(t, kids)
        p1 = 0.0
        x1 = 0.0
        y1 = 0.0
        z1 = 0.0
        for c in range(4):
            a, b, e, f = _far_potential_grad(px, py, pz, kids[c], _tri_area(kids[c]))
            p1 += a
            x1 += b
            y1 += e
            z1 += f
        err = abs(p1 - p0) + abs(x1 - x0) + abs(y1 - y0) + abs(z1 - z0)
        scale = abs(p1) + abs(x1) + abs(y1) + abs(z1)
        if d + 1 >= max_depth or err <= tol * scale:
            pot += p1
            gx += x1
            gy += y1
            gz += z1
        else:
            for c in range(4):
                stack[top] = kids[c]
                depth[top] = d + 1
                top += 1
    return pot, gx, gy, gz


@njit(cache=True)
def normal_derivative_matrix_adaptive(targets, target_normals, tri_verts, centroids,
                                      areas, diam, self_idx, near_ratio, tol, max_depth):
    """Same entries as normal_derivative_matrix with adaptive near-panel quadrature."""
    m = targets.shape[0]
    npan = tri_verts.shape[0]
    out = np.empty((m, npan))
    for i in range(m):
        px, py, pz = targets[i, 0], targets[i, 1], targets[i, 2]
        tnx, tny, tnz = target_normals[i, 0], target_normals[i, 1], target_normals[i, 2]
        for j in range(npan):
            if self_idx[i] == j:
                out[i, j] = 0.0
                continue
            cx = px - centroids[j, 0]
            cy = py - centroids[j, 1]
            cz = pz - centroids[j, 2]
            lim = near_ratio * diam[j]
            if cx * cx + cy * cy + cz * cz > lim * lim:
                p, gx, gy, gz = _far_potential_grad(px, py, pz, tri_verts[j], areas[j])
            else:
                p, gx, gy, gz = adaptive_potential_grad(px, py, pz, tri_verts[j], tol, max_depth)
            out[i, j] = -(tnx * gx + tny * gy + tnz * gz) / FOUR_PI
    return out


@njit(cache=True)
def self_potentials(tri_verts, centroids, normals):
    """int_{panel i} dS / |c_i - y| at each panel's own centroid."""
    n = tri_verts.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = tri_potential_grad(centroids[i, 0], centroids[i, 1], centroids[i, 2],
                                    tri_verts[i], normals[i, 0], normals[i, 1],
                                    normals[i, 2], True)[0]
    return out


@njit(cache=True)
def double_layer_matrix(targets, tri_verts, self_idx):
    """D[i, j] = solid angle of panel j seen from target i, over 4 pi.

    Equals int_{panel j} (y - x_i).nu(y) / (4 pi |x_i - y|^3) dS(y) exactly for
    flat panels; the entry of a panel containing its own target is 0.
    """
    m = targets.shape[0]
    npan = tri_verts.shape[0]
    out = np.empty((m, npan))
    for i in range(m):
        px, py, pz = targets[i, 0], targets[i, 1], targets[i, 2]
        for j in range(npan):
            if self_idx[i] == j:
                out[i, j] = 0.0
                continue
            t = tri_verts[j]
            out[i, j] = solid_angle(px, py, pz, t[0, 0], t[0, 1], t[0, 2], t[1, 0], t[1, 1],
                                    t[1, 2], t[2, 0], t[2, 1], t[2, 2]) / FOUR_PI
    return out
