"""Compiled data-parallel kernels for the MLS-MPM pipeline.

Layout conventions:
  - particle state is SoA float64: x/v (n,3), F/C (n,3,3), mass/vol0 (n,)
  - grid arrays are C-ordered (nx, ny, nz, ...) with node i at position i*dx
  - colliders are packed into flat arrays (see ``collision.pack_colliders``)

Parallel accumulation is deterministic by construction: particles are split
into a fixed number of contiguous chunks, each chunk scatters into a private
grid buffer, and the reduction sums chunks in index order. Results are
therefore bitwise reproducible for a fixed chunk count regardless of thread
scheduling. fastmath stays off so IEEE semantics hold everywhere.
"""

import numpy as np
from numba import njit, prange

BIG_DISTANCE = 1.0e30

COLLIDER_BOX = 0
COLLIDER_BAKED = 1
MODE_COULOMB = 0
MODE_STICKY = 1


# ---------------------------------------------------------------------------
# collider sampling
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _box_signed_distance(px, py, pz, hx, hy, hz):
    qx = abs(px) - hx
    qy = abs(py) - hy
    qz = abs(pz) - hz
    ox = qx if qx > 0.0 else 0.0
    oy = qy if qy > 0.0 else 0.0
    oz = qz if qz > 0.0 else 0.0
    outside = np.sqrt(ox * ox + oy * oy + oz * oz)
    qmax = qx
    if qy > qmax:
        qmax = qy
    if qz > qmax:
        qmax = qz
    inside = qmax if qmax < 0.0 else 0.0
    return outside + inside


@njit(cache=True, inline="always")
def _sample_baked(sdf_vals, off, rx, ry, rz, bx, by, bz, ext, px, py, pz):
    # trilinear over cell centers; queries outside the lattice clamp to the
    # boundary sample (positive by construction: bakes pad the mesh bounds)
    cx = (px - bx) / ext * rx - 0.5
    cy = (py - by) / ext * ry - 0.5
    cz = (pz - bz) / ext * rz - 0.5
    if cx < 0.0:
        cx = 0.0
    if cy < 0.0:
        cy = 0.0
    if cz < 0.0:
        cz = 0.0
    if cx > rx - 1.0:
        cx = rx - 1.0
    if cy > ry - 1.0:
        cy = ry - 1.0
    if cz > rz - 1.0:
        cz = rz - 1.0
    ix = int(cx)
    iy = int(cy)
    iz = int(cz)
    if ix > rx - 2:
        ix = rx - 2
    if iy > ry - 2:
        iy = ry - 2
    if iz > rz - 2:
        iz = rz - 2
    fx = cx - ix
    fy = cy - iy
    fz = cz - iz
    s = 0.0
    for a in range(2):
        wa = fx if a == 1 else 1.0 - fx
        for b in range(2):
            wb = fy if b == 1 else 1.0 - fy
            for c in range(2):
                wc = fz if c == 1 else 1.0 - fz
                idx = off + (ix + a) + rx * ((iy + b) + ry * (iz + c))
                s += wa * wb * wc * sdf_vals[idx]
    return s * ext


@njit(cache=True, inline="always")
def _collider_local_distance(ci, kind, half, sdf_vals, sdf_off, sdf_res,
                             sdf_bmin, sdf_ext, px, py, pz):
    if kind[ci] == COLLIDER_BOX:
        return _box_signed_distance(px, py, pz, half[ci, 0], half[ci, 1], half[ci, 2])
    return _sample_baked(sdf_vals, sdf_off[ci],
                         sdf_res[ci, 0], sdf_res[ci, 1], sdf_res[ci, 2],
                         sdf_bmin[ci, 0], sdf_bmin[ci, 1], sdf_bmin[ci, 2],
                         sdf_ext[ci], px, py, pz)


@njit(cache=True, inline="always")
def _collider_world_distance(ci, kind, half, R, T, sdf_vals, sdf_off, sdf_res,
                             sdf_bmin, sdf_ext, wx, wy, wz):
    # x_ref = R^T (x - T)
    dx0 = wx - T[ci, 0]
    dx1 = wy - T[ci, 1]
    dx2 = wz - T[ci, 2]
    px = R[ci, 0, 0] * dx0 + R[ci, 1, 0] * dx1 + R[ci, 2, 0] * dx2
    py = R[ci, 0, 1] * dx0 + R[ci, 1, 1] * dx1 + R[ci, 2, 1] * dx2
    pz = R[ci, 0, 2] * dx0 + R[ci, 1, 2] * dx1 + R[ci, 2, 2] * dx2
    return _collider_local_distance(ci, kind, half, sdf_vals, sdf_off, sdf_res,
                                    sdf_bmin, sdf_ext, px, py, pz)


@njit(cache=True, inline="always")
def _collider_world_normal(ci, kind, half, R, T, sdf_vals, sdf_off, sdf_res,
                           sdf_bmin, sdf_ext, wx, wy, wz):
    """Central-difference normal of the local distance field, in world frame."""
    dx0 = wx - T[ci, 0]
    dx1 = wy - T[ci, 1]
    dx2 = wz - T[ci, 2]
    px = R[ci, 0, 0] * dx0 + R[ci, 1, 0] * dx1 + R[ci, 2, 0] * dx2
    py = R[ci, 0, 1] * dx0 + R[ci, 1, 1] * dx1 + R[ci, 2, 1] * dx2
    pz = R[ci, 0, 2] * dx0 + R[ci, 1, 2] * dx1 + R[ci, 2, 2] * dx2
    if kind[ci] == COLLIDER_BOX:
        h = half[ci, 0]
        if half[ci, 1] < h:
            h = half[ci, 1]
        if half[ci, 2] < h:
            h = half[ci, 2]
        h = max(1.0e-3 * h, 1.0e-6)
    else:
        h = sdf_ext[ci] / sdf_res[ci, 0]
    nx = (_collider_local_distance(ci, kind, half, sdf_vals, sdf_off, sdf_res, sdf_bmin, sdf_ext, px + h, py, pz)
          - _collider_local_distance(ci, kind, half, sdf_vals, sdf_off, sdf_res, sdf_bmin, sdf_ext, px - h, py, pz))
    ny = (_collider_local_distance(ci, kind, half, sdf_vals, sdf_off, sdf_res, sdf_bmin, sdf_ext, px, py + h, pz)
          - _collider_local_distance(ci, kind, half, sdf_vals, sdf_off, sdf_res, sdf_bmin, sdf_ext, px, py - h, pz))
    nz = (_collider_local_distance(ci, kind, half, sdf_vals, sdf_off, sdf_res, sdf_bmin, sdf_ext, px, py, pz + h)
          - _collider_local_distance(ci, kind, half, sdf_vals, sdf_off, sdf_res, sdf_bmin, sdf_ext, px, py, pz - h))
    norm = np.sqrt(nx * nx + ny * ny + nz * nz)
    if norm < 1.0e-12:
        # medial-axis fallback: point away from the collider origin
        fx = wx - T[ci, 0]
        fy = wy - T[ci, 1]
        fz = wz - T[ci, 2]
        fn = np.sqrt(fx * fx + fy * fy + fz * fz)
        if fn < 1.0e-12:
            return 0.0, 1.0, 0.0
        return fx / fn, fy / fn, fz / fn
    nx /= norm
    ny /= norm
    nz /= norm
    # rotate to world: n_world = R n_ref
    wnx = R[ci, 0, 0] * nx + R[ci, 0, 1] * ny + R[ci, 0, 2] * nz
    wny = R[ci, 1, 0] * nx + R[ci, 1, 1] * ny + R[ci, 1, 2] * nz
    wnz = R[ci, 2, 0] * nx + R[ci, 2, 1] * ny + R[ci, 2, 2] * nz
    return wnx, wny, wnz


@njit(cache=True, parallel=True)
def build_collision_field(dx, dist, obj, cap,
                          kind, half, R, T,
                          sdf_vals, sdf_off, sdf_res, sdf_bmin, sdf_ext):
    """Merged min-distance field and nearest-collider table over all nodes.

    Ties go to the lowest collider index; nodes at least ``cap`` away from
    every collider get the sentinel id -1.
    """
    nxg, nyg, nzg = dist.shape
    ncol = kind.shape[0]
    for node in prange(nxg * nyg * nzg):
        ix = node // (nyg * nzg)
        rem = node - ix * (nyg * nzg)
        iy = rem // nzg
        iz = rem - iy * nzg
        wx = ix * dx
        wy = iy * dx
        wz = iz * dx
        best = BIG_DISTANCE
        best_id = -1
        for ci in range(ncol):
            d = _collider_world_distance(ci, kind, half, R, T, sdf_vals, sdf_off,
                                         sdf_res, sdf_bmin, sdf_ext, wx, wy, wz)
            if d < best:
                best = d
                best_id = ci
        dist[ix, iy, iz] = best
        if best >= cap:
            best_id = -1
        obj[ix, iy, iz] = best_id


# ---------------------------------------------------------------------------
# particle -> grid
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def p2g_scatter(x, v, F, C, mass, vol0, mat_id, mu_arr, lam_arr,
                dt, dx, nyg, nzg, buf, nchunks, inverted_counts):
    """Scatter momentum/mass into per-chunk grid buffers; updates F in place.

    buf has shape (nchunks, nx*ny*nz, 4) holding (momentum xyz, mass).
    """
    n = x.shape[0]
    inv_dx = 1.0 / dx
    stress_coef = -4.0 * dt * inv_dx * inv_dx
    for c in prange(nchunks):
        lo = c * n // nchunks
        hi = (c + 1) * n // nchunks
        inverted = 0
        for p in range(lo, hi):
            # F <- (I + dt C) F
            f00 = F[p, 0, 0] + dt * (C[p, 0, 0] * F[p, 0, 0] + C[p, 0, 1] * F[p, 1, 0] + C[p, 0, 2] * F[p, 2, 0])
            f01 = F[p, 0, 1] + dt * (C[p, 0, 0] * F[p, 0, 1] + C[p, 0, 1] * F[p, 1, 1] + C[p, 0, 2] * F[p, 2, 1])
            f02 = F[p, 0, 2] + dt * (C[p, 0, 0] * F[p, 0, 2] + C[p, 0, 1] * F[p, 1, 2] + C[p, 0, 2] * F[p, 2, 2])
            f10 = F[p, 1, 0] + dt * (C[p, 1, 0] * F[p, 0, 0] + C[p, 1, 1] * F[p, 1, 0] + C[p, 1, 2] * F[p, 2, 0])
            f11 = F[p, 1, 1] + dt * (C[p, 1, 0] * F[p, 0, 1] + C[p, 1, 1] * F[p, 1, 1] + C[p, 1, 2] * F[p, 2, 1])
            f12 = F[p, 1, 2] + dt * (C[p, 1, 0] * F[p, 0, 2] + C[p, 1, 1] * F[p, 1, 2] + C[p, 1, 2] * F[p, 2, 2])
            f20 = F[p, 2, 0] + dt * (C[p, 2, 0] * F[p, 0, 0] + C[p, 2, 1] * F[p, 1, 0] + C[p, 2, 2] * F[p, 2, 0])
            f21 = F[p, 2, 1] + dt * (C[p, 2, 0] * F[p, 0, 1] + C[p, 2, 1] * F[p, 1, 1] + C[p, 2, 2] * F[p, 2, 1])
            f22 = F[p, 2, 2] + dt * (C[p, 2, 0] * F[p, 0, 2] + C[p, 2, 1] * F[p, 1, 2] + C[p, 2, 2] * F[p, 2, 2])
            F[p, 0, 0] = f00
            F[p, 0, 1] = f01
            F[p, 0, 2] = f02
            F[p, 1, 0] = f10
            F[p, 1, 1] = f11
            F[p, 1, 2] = f12
            F[p, 2, 0] = f20
            F[p, 2, 1] = f21
            F[p, 2, 2] = f22

            c00 = f11 * f22 - f12 * f21
            c01 = f12 * f20 - f10 * f22
            c02 = f10 * f21 - f11 * f20
            det = f00 * c00 + f01 * c01 + f02 * c02
            if det <= 0.0:
                inverted += 1
            # cofactor matrix: det * F^-T
            c10 = f02 * f21 - f01 * f22
            c11 = f00 * f22 - f02 * f20
            c12 = f01 * f20 - f00 * f21
            c20 = f01 * f12 - f02 * f11
            c21 = f02 * f10 - f00 * f12
            c22 = f00 * f11 - f01 * f10

            mu = mu_arr[mat_id[p]]
            lam = lam_arr[mat_id[p]]
            j_safe = det if det > 1.0e-6 else 1.0e-6
            log_j = np.log(j_safe)
            # P = mu (F - F^-T) + lam log(J) F^-T, with F^-T = cof(F)/det
            inv_det = 1.0 / det if det != 0.0 else 0.0
            g = (lam * log_j - mu) * inv_det
            p00 = mu * f00 + g * c00
            p01 = mu * f01 + g * c10
            p02 = mu * f02 + g * c20
            p10 = mu * f10 + g * c01
            p11 = mu * f11 + g * c11
            p12 = mu * f12 + g * c21
            p20 = mu * f20 + g * c02
            p21 = mu * f21 + g * c12
            p22 = mu * f22 + g * c22

            m = mass[p]
            k = stress_coef * vol0[p]
            # affine = m C + k P F^T
            a00 = m * C[p, 0, 0] + k * (p00 * f00 + p01 * f01 + p02 * f02)
            a01 = m * C[p, 0, 1] + k * (p00 * f10 + p01 * f11 + p02 * f12)
            a02 = m * C[p, 0, 2] + k * (p00 * f20 + p01 * f21 + p02 * f22)
            a10 = m * C[p, 1, 0] + k * (p10 * f00 + p11 * f01 + p12 * f02)
            a11 = m * C[p, 1, 1] + k * (p10 * f10 + p11 * f11 + p12 * f12)
            a12 = m * C[p, 1, 2] + k * (p10 * f20 + p11 * f21 + p12 * f22)
            a20 = m * C[p, 2, 0] + k * (p20 * f00 + p21 * f01 + p22 * f02)
            a21 = m * C[p, 2, 1] + k * (p20 * f10 + p21 * f11 + p22 * f12)
            a22 = m * C[p, 2, 2] + k * (p20 * f20 + p21 * f21 + p22 * f22)

            xg = x[p, 0] * inv_dx
            yg = x[p, 1] * inv_dx
            zg = x[p, 2] * inv_dx
            bx = int(np.floor(xg - 0.5))
            by = int(np.floor(yg - 0.5))
            bz = int(np.floor(zg - 0.5))
            fx = xg - bx
            fy = yg - by
            fz = zg - bz
            wx0 = 0.5 * (1.5 - fx) ** 2
            wx1 = 0.75 - (fx - 1.0) ** 2
            wx2 = 0.5 * (fx - 0.5) ** 2
            wy0 = 0.5 * (1.5 - fy) ** 2
            wy1 = 0.75 - (fy - 1.0) ** 2
            wy2 = 0.5 * (fy - 0.5) ** 2
            wz0 = 0.5 * (1.5 - fz) ** 2
            wz1 = 0.75 - (fz - 1.0) ** 2
            wz2 = 0.5 * (fz - 0.5) ** 2

            mv0 = m * v[p, 0]
            mv1 = m * v[p, 1]
            mv2 = m * v[p, 2]
            for i in range(3):
                wi = wx0 if i == 0 else (wx1 if i == 1 else wx2)
                dp0 = (i - fx) * dx
                for j in range(3):
                    wij = wi * (wy0 if j == 0 else (wy1 if j == 1 else wy2))
                    dp1 = (j - fy) * dx
                    row = ((bx + i) * nyg + (by + j)) * nzg + bz
                    for kk in range(3):
                        wt = wij * (wz0 if kk == 0 else (wz1 if kk == 1 else wz2))
                        dp2 = (kk - fz) * dx
                        node = row + kk
                        buf[c, node, 0] += wt * (mv0 + a00 * dp0 + a01 * dp1 + a02 * dp2)
                        buf[c, node, 1] += wt * (mv1 + a10 * dp0 + a11 * dp1 + a12 * dp2)
                        buf[c, node, 2] += wt * (mv2 + a20 * dp0 + a21 * dp1 + a22 * dp2)
                        buf[c, node, 3] += wt * m
        inverted_counts[c] = inverted


@njit(cache=True, parallel=True)
def p2g_reduce(buf, grid_mv, grid_m, nchunks):
    """Sum chunk buffers into the grid in fixed chunk order, clearing them."""
    nn = grid_m.size
    mv = grid_mv.reshape(nn, 3)
    gm = grid_m.reshape(nn)
    for node in prange(nn):
        s0 = 0.0
        s1 = 0.0
        s2 = 0.0
        s3 = 0.0
        for c in range(nchunks):
            s0 += buf[c, node, 0]
            s1 += buf[c, node, 1]
            s2 += buf[c, node, 2]
            s3 += buf[c, node, 3]
            buf[c, node, 0] = 0.0
            buf[c, node, 1] = 0.0
            buf[c, node, 2] = 0.0
            buf[c, node, 3] = 0.0
        mv[node, 0] = s0
        mv[node, 1] = s1
        mv[node, 2] = s2
        gm[node] = s3


# ---------------------------------------------------------------------------
# grid update
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def grid_update(grid_mv, grid_m, dt, gx, gy, gz, dx, bwidth, stick,
                theta, col_dist, col_obj,
                kind, half, R, T, lin_vel, ang_vel, fric, mode,
                sdf_vals, sdf_off, sdf_res, sdf_bmin, sdf_ext):
    """Momentum -> velocity, gravity, collision resolution, domain boundary.

    grid_mv holds momentum on entry and velocity on exit. Zero-mass nodes are
    skipped entirely. theta < 0 disables collision handling.
    """
    nxg, nyg, nzg = grid_m.shape
    for node in prange(nxg * nyg * nzg):
        ix = node // (nyg * nzg)
        rem = node - ix * (nyg * nzg)
        iy = rem // nzg
        iz = rem - iy * nzg
        m = grid_m[ix, iy, iz]
        if m <= 0.0:
            continue
        inv_m = 1.0 / m
        v0 = grid_mv[ix, iy, iz, 0] * inv_m + dt * gx
        v1 = grid_mv[ix, iy, iz, 1] * inv_m + dt * gy
        v2 = grid_mv[ix, iy, iz, 2] * inv_m + dt * gz

        if theta >= 0.0 and col_dist[ix, iy, iz] < theta:
            ci = col_obj[ix, iy, iz]
            if ci >= 0:
                wx = ix * dx
                wy = iy * dx
                wz = iz * dx
                # rigid-body point velocity of the collider at this node
                rx = wx - T[ci, 0]
                ry = wy - T[ci, 1]
                rz = wz - T[ci, 2]
                co0 = lin_vel[ci, 0] + ang_vel[ci, 1] * rz - ang_vel[ci, 2] * ry
                co1 = lin_vel[ci, 1] + ang_vel[ci, 2] * rx - ang_vel[ci, 0] * rz
                co2 = lin_vel[ci, 2] + ang_vel[ci, 0] * ry - ang_vel[ci, 1] * rx
                r0 = v0 - co0
                r1 = v1 - co1
                r2 = v2 - co2
                n0, n1, n2 = _collider_world_normal(ci, kind, half, R, T, sdf_vals,
                                                    sdf_off, sdf_res, sdf_bmin,
                                                    sdf_ext, wx, wy, wz)
                vn = r0 * n0 + r1 * n1 + r2 * n2
                if vn < 0.0:
                    if mode[ci] == MODE_STICKY:
                        v0 = co0
                        v1 = co1
                        v2 = co2
                    else:
                        t0 = r0 - vn * n0
                        t1 = r1 - vn * n1
                        t2 = r2 - vn * n2
                        tnorm = np.sqrt(t0 * t0 + t1 * t1 + t2 * t2)
                        mu_f = fric[ci]
                        if tnorm <= mu_f * (-vn):
                            # Coulomb cone swallows all sliding: full stick
                            v0 = co0
                            v1 = co1
                            v2 = co2
                        else:
                            scale = 1.0 + mu_f * vn / tnorm
                            v0 = t0 * scale + co0
                            v1 = t1 * scale + co1
                            v2 = t2 * scale + co2

        if stick:
            if (ix < bwidth or ix >= nxg - bwidth or iy < bwidth or
                    iy >= nyg - bwidth or iz < bwidth or iz >= nzg - bwidth):
                v0 = 0.0
                v1 = 0.0
                v2 = 0.0
        else:
            # separating boundary: clamp only the outward normal component
            if ix < bwidth and v0 < 0.0:
                v0 = 0.0
            if ix >= nxg - bwidth and v0 > 0.0:
                v0 = 0.0
            if iy < bwidth and v1 < 0.0:
                v1 = 0.0
            if iy >= nyg - bwidth and v1 > 0.0:
                v1 = 0.0
            if iz < bwidth and v2 < 0.0:
                v2 = 0.0
            if iz >= nzg - bwidth and v2 > 0.0:
                v2 = 0.0

        grid_mv[ix, iy, iz, 0] = v0
        grid_mv[ix, iy, iz, 1] = v1
        grid_mv[ix, iy, iz, 2] = v2


# ---------------------------------------------------------------------------
# grid -> particle
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def g2p_advect(x, v, C, grid_v, dt, dx, hi_x, hi_y, hi_z):
    """Gather velocities, rebuild the affine matrix C, advect, clamp margins."""
    n = x.shape[0]
    inv_dx = 1.0 / dx
    coef = 4.0 * inv_dx * inv_dx
    lo = 1.5 * dx
    for p in prange(n):
        xg = x[p, 0] * inv_dx
        yg = x[p, 1] * inv_dx
        zg = x[p, 2] * inv_dx
        bx = int(np.floor(xg - 0.5))
        by = int(np.floor(yg - 0.5))
        bz = int(np.floor(zg - 0.5))
        fx = xg - bx
        fy = yg - by
        fz = zg - bz
        wx0 = 0.5 * (1.5 - fx) ** 2
        wx1 = 0.75 - (fx - 1.0) ** 2
        wx2 = 0.5 * (fx - 0.5) ** 2
        wy0 = 0.5 * (1.5 - fy) ** 2
        wy1 = 0.75 - (fy - 1.0) ** 2
        wy2 = 0.5 * (fy - 0.5) ** 2
        wz0 = 0.5 * (1.5 - fz) ** 2
        wz1 = 0.75 - (fz - 1.0) ** 2
        wz2 = 0.5 * (fz - 0.5) ** 2
        nv0 = 0.0
        nv1 = 0.0
        nv2 = 0.0
        c00 = 0.0
        c01 = 0.0
        c02 = 0.0
        c10 = 0.0
        c11 = 0.0
        c12 = 0.0
        c20 = 0.0
        c21 = 0.0
        c22 = 0.0
        for i in range(3):
            wi = wx0 if i == 0 else (wx1 if i == 1 else wx2)
            dp0 = (i - fx) * dx
            for j in range(3):
                wij = wi * (wy0 if j == 0 else (wy1 if j == 1 else wy2))
                dp1 = (j - fy) * dx
                for kk in range(3):
                    wt = wij * (wz0 if kk == 0 else (wz1 if kk == 1 else wz2))
                    dp2 = (kk - fz) * dx
                    gv0 = grid_v[bx + i, by + j, bz + kk, 0]
                    gv1 = grid_v[bx + i, by + j, bz + kk, 1]
                    gv2 = grid_v[bx + i, by + j, bz + kk, 2]
                    nv0 += wt * gv0
                    nv1 += wt * gv1
                    nv2 += wt * gv2
                    c00 += coef * wt * gv0 * dp0
                    c01 += coef * wt * gv0 * dp1
                    c02 += coef * wt * gv0 * dp2
                    c10 += coef * wt * gv1 * dp0
                    c11 += coef * wt * gv1 * dp1
                    c12 += coef * wt * gv1 * dp2
                    c20 += coef * wt * gv2 * dp0
                    c21 += coef * wt * gv2 * dp1
                    c22 += coef * wt * gv2 * dp2
        v[p, 0] = nv0
        v[p, 1] = nv1
        v[p, 2] = nv2
        C[p, 0, 0] = c00
        C[p, 0, 1] = c01
        C[p, 0, 2] = c02
        C[p, 1, 0] = c10
        C[p, 1, 1] = c11
        C[p, 1, 2] = c12
        C[p, 2, 0] = c20
        C[p, 2, 1] = c21
        C[p, 2, 2] = c22
        px = x[p, 0] + dt * nv0
        py = x[p, 1] + dt * nv1
        pz = x[p, 2] + dt * nv2
        if px < lo:
            px = lo
        if py < lo:
            py = lo
        if pz < lo:
            pz = lo
        if px > hi_x:
            px = hi_x
        if py > hi_y:
            py = hi_y
        if pz > hi_z:
            pz = hi_z
        x[p, 0] = px
        x[p, 1] = py
        x[p, 2] = pz


# ---------------------------------------------------------------------------
# density splat (surfacing input)
# ---------------------------------------------------------------------------

@njit(cache=True, parallel=True)
def splat_mass(x, mass, dx, nyg, nzg, buf, nchunks):
    """Chunked B-spline mass deposit; same determinism scheme as p2g."""
    n = x.shape[0]
    inv_dx = 1.0 / dx
    for c in prange(nchunks):
        lo = c * n // nchunks
        hi = (c + 1) * n // nchunks
        for p in range(lo, hi):
            xg = x[p, 0] * inv_dx
            yg = x[p, 1] * inv_dx
            zg = x[p, 2] * inv_dx
            bx = int(np.floor(xg - 0.5))
            by = int(np.floor(yg - 0.5))
            bz = int(np.floor(zg - 0.5))
            fx = xg - bx
            fy = yg - by
            fz = zg - bz
            wx0 = 0.5 * (1.5 - fx) ** 2
            wx1 = 0.75 - (fx - 1.0) ** 2
            wx2 = 0.5 * (fx - 0.5) ** 2
            wy0 = 0.5 * (1.5 - fy) ** 2
            wy1 = 0.75 - (fy - 1.0) ** 2
            wy2 = 0.5 * (fy - 0.5) ** 2
            wz0 = 0.5 * (1.5 - fz) ** 2
            wz1 = 0.75 - (fz - 1.0) ** 2
            wz2 = 0.5 * (fz - 0.5) ** 2
            m = mass[p]
            for i in range(3):
                wi = wx0 if i == 0 else (wx1 if i == 1 else wx2)
                for j in range(3):
                    wij = wi * (wy0 if j == 0 else (wy1 if j == 1 else wy2))
                    row = ((bx + i) * nyg + (by + j)) * nzg + bz
                    for kk in range(3):
                        wt = wij * (wz0 if kk == 0 else (wz1 if kk == 1 else wz2))
                        buf[c, row + kk] += wt * m


@njit(cache=True, parallel=True)
def splat_reduce(buf, out, nchunks, inv_cell_volume):
    nn = out.size
    flat = out.reshape(nn)
    for node in prange(nn):
        s = 0.0
        for c in range(nchunks):
            s += buf[c, node]
            buf[c, node] = 0.0
        flat[node] = s * inv_cell_volume
