"""Naive single-threaded reference substep.

This is the correctness oracle for the optimized parallel kernels: one plain
loop nest per stage, scattering straight into the grid in particle order, no
buffering, no tricks. It covers the collider-free pipeline (transfers,
gravity, domain boundary); collision handling has its own brute-force oracles
in the test suite. Keep this file boring.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def reference_substep(x, v, F, C, mass, vol0, mat_id, mu_arr, lam_arr,
                      grid_mv, grid_m, dt, dx, gx, gy, gz, bwidth, stick,
                      hi_x, hi_y, hi_z):
    n = x.shape[0]
    nxg, nyg, nzg = grid_m.shape
    inv_dx = 1.0 / dx
    grid_mv[:, :, :, :] = 0.0
    grid_m[:, :, :] = 0.0

    wx = np.empty(3)
    wy = np.empty(3)
    wz = np.empty(3)
    Fn = np.empty((3, 3))
    P = np.empty((3, 3))
    Finv_t = np.empty((3, 3))
    A = np.empty((3, 3))

    # ---- particle to grid ----
    for p in range(n):
        for i in range(3):
            for j in range(3):
                s = F[p, i, j]
                for k in range(3):
                    s += dt * C[p, i, k] * F[p, k, j]
                Fn[i, j] = s
        for i in range(3):
            for j in range(3):
                F[p, i, j] = Fn[i, j]

        det = (Fn[0, 0] * (Fn[1, 1] * Fn[2, 2] - Fn[1, 2] * Fn[2, 1])
               - Fn[0, 1] * (Fn[1, 0] * Fn[2, 2] - Fn[1, 2] * Fn[2, 0])
               + Fn[0, 2] * (Fn[1, 0] * Fn[2, 1] - Fn[1, 1] * Fn[2, 0]))
        inv_det = 1.0 / det
        Finv_t[0, 0] = (Fn[1, 1] * Fn[2, 2] - Fn[1, 2] * Fn[2, 1]) * inv_det
        Finv_t[0, 1] = (Fn[1, 2] * Fn[2, 0] - Fn[1, 0] * Fn[2, 2]) * inv_det
        Finv_t[0, 2] = (Fn[1, 0] * Fn[2, 1] - Fn[1, 1] * Fn[2, 0]) * inv_det
        Finv_t[1, 0] = (Fn[0, 2] * Fn[2, 1] - Fn[0, 1] * Fn[2, 2]) * inv_det
        Finv_t[1, 1] = (Fn[0, 0] * Fn[2, 2] - Fn[0, 2] * Fn[2, 0]) * inv_det
        Finv_t[1, 2] = (Fn[0, 1] * Fn[2, 0] - Fn[0, 0] * Fn[2, 1]) * inv_det
        Finv_t[2, 0] = (Fn[0, 1] * Fn[1, 2] - Fn[0, 2] * Fn[1, 1]) * inv_det
        Finv_t[2, 1] = (Fn[0, 2] * Fn[1, 0] - Fn[0, 0] * Fn[1, 2]) * inv_det
        Finv_t[2, 2] = (Fn[0, 0] * Fn[1, 1] - Fn[0, 1] * Fn[1, 0]) * inv_det

        mu = mu_arr[mat_id[p]]
        lam = lam_arr[mat_id[p]]
        j_safe = det if det > 1.0e-6 else 1.0e-6
        log_j = np.log(j_safe)
        for i in range(3):
            for j in range(3):
                P[i, j] = mu * (Fn[i, j] - Finv_t[i, j]) + lam * log_j * Finv_t[i, j]

        m = mass[p]
        coef = -4.0 * dt * inv_dx * inv_dx * vol0[p]
        for i in range(3):
            for j in range(3):
                s = 0.0
                for k in range(3):
                    s += P[i, k] * Fn[j, k]
                A[i, j] = m * C[p, i, j] + coef * s

        xg = x[p, 0] * inv_dx
        yg = x[p, 1] * inv_dx
        zg = x[p, 2] * inv_dx
        bx = int(np.floor(xg - 0.5))
        by = int(np.floor(yg - 0.5))
        bz = int(np.floor(zg - 0.5))
        fx = xg - bx
        fy = yg - by
        fz = zg - bz
        wx[0] = 0.5 * (1.5 - fx) ** 2
        wx[1] = 0.75 - (fx - 1.0) ** 2
        wx[2] = 0.5 * (fx - 0.5) ** 2
        wy[0] = 0.5 * (1.5 - fy) ** 2
        wy[1] = 0.75 - (fy - 1.0) ** 2
        wy[2] = 0.5 * (fy - 0.5) ** 2
        wz[0] = 0.5 * (1.5 - fz) ** 2
        wz[1] = 0.75 - (fz - 1.0) ** 2
        wz[2] = 0.5 * (fz - 0.5) ** 2

        for i in range(3):
            dp0 = (i - fx) * dx
            for j in range(3):
                dp1 = (j - fy) * dx
                for k in range(3):
                    dp2 = (k - fz) * dx
                    wt = wx[i] * wy[j] * wz[k]
                    gi = bx + i
                    gj = by + j
                    gk = bz + k
                    grid_mv[gi, gj, gk, 0] += wt * (m * v[p, 0] + A[0, 0] * dp0 + A[0, 1] * dp1 + A[0, 2] * dp2)
                    grid_mv[gi, gj, gk, 1] += wt * (m * v[p, 1] + A[1, 0] * dp0 + A[1, 1] * dp1 + A[1, 2] * dp2)
                    grid_mv[gi, gj, gk, 2] += wt * (m * v[p, 2] + A[2, 0] * dp0 + A[2, 1] * dp1 + A[2, 2] * dp2)
                    grid_m[gi, gj, gk] += wt * m

    # ---- grid update ----
    for gi in range(nxg):
        for gj in range(nyg):
            for gk in range(nzg):
                m = grid_m[gi, gj, gk]
                if m <= 0.0:
                    continue
                v0 = grid_mv[gi, gj, gk, 0] / m + dt * gx
                v1 = grid_mv[gi, gj, gk, 1] / m + dt * gy
                v2 = grid_mv[gi, gj, gk, 2] / m + dt * gz
                if stick:
                    if (gi < bwidth or gi >= nxg - bwidth or gj < bwidth or
                            gj >= nyg - bwidth or gk < bwidth or gk >= nzg - bwidth):
                        v0 = 0.0
                        v1 = 0.0
                        v2 = 0.0
                else:
                    if gi < bwidth and v0 < 0.0:
                        v0 = 0.0
                    if gi >= nxg - bwidth and v0 > 0.0:
                        v0 = 0.0
                    if gj < bwidth and v1 < 0.0:
                        v1 = 0.0
                    if gj >= nyg - bwidth and v1 > 0.0:
                        v1 = 0.0
                    if gk < bwidth and v2 < 0.0:
                        v2 = 0.0
                    if gk >= nzg - bwidth and v2 > 0.0:
                        v2 = 0.0
                grid_mv[gi, gj, gk, 0] = v0
                grid_mv[gi, gj, gk, 1] = v1
                grid_mv[gi, gj, gk, 2] = v2

    # ---- grid to particle + advection ----
    lo = 1.5 * dx
    for p in range(n):
        xg = x[p, 0] * inv_dx
        yg = x[p, 1] * inv_dx
        zg = x[p, 2] * inv_dx
        bx = int(np.floor(xg - 0.5))
        by = int(np.floor(yg - 0.5))
        bz = int(np.floor(zg - 0.5))
        fx = xg - bx
        fy = yg - by
        fz = zg - bz
        wx[0] = 0.5 * (1.5 - fx) ** 2
        wx[1] = 0.75 - (fx - 1.0) ** 2
        wx[2] = 0.5 * (fx - 0.5) ** 2
        wy[0] = 0.5 * (1.5 - fy) ** 2
        wy[1] = 0.75 - (fy - 1.0) ** 2
        wy[2] = 0.5 * (fy - 0.5) ** 2
        wz[0] = 0.5 * (1.5 - fz) ** 2
        wz[1] = 0.75 - (fz - 1.0) ** 2
        wz[2] = 0.5 * (fz - 0.5) ** 2
        nv0 = 0.0
        nv1 = 0.0
        nv2 = 0.0
        for i in range(3):
            for j in range(3):
                for k in range(3):
                    wt = wx[i] * wy[j] * wz[k]
                    nv0 += wt * grid_mv[bx + i, by + j, bz + k, 0]
                    nv1 += wt * grid_mv[bx + i, by + j, bz + k, 1]
                    nv2 += wt * grid_mv[bx + i, by + j, bz + k, 2]
        coef = 4.0 * inv_dx * inv_dx
        for a in range(3):
            for b in range(3):
                s = 0.0
                for i in range(3):
                    for j in range(3):
                        for k in range(3):
                            wt = wx[i] * wy[j] * wz[k]
                            gv = grid_mv[bx + i, by + j, bz + k, a]
                            if b == 0:
                                d = (i - fx) * dx
                            elif b == 1:
                                d = (j - fy) * dx
                            else:
                                d = (k - fz) * dx
                            s += coef * wt * gv * d
                C[p, a, b] = s
        v[p, 0] = nv0
        v[p, 1] = nv1
        v[p, 2] = nv2
        for a in range(3):
            nx_ = x[p, a] + dt * v[p, a]
            if nx_ < lo:
                nx_ = lo
            hi = hi_x if a == 0 else (hi_y if a == 1 else hi_z)
            if nx_ > hi:
                nx_ = hi
            x[p, a] = nx_
