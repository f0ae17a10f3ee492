"""Compiled Yee update loops for walled (non-periodic) grids.

Same arithmetic as the array path in :mod:`mwave.fdtd`, fused into single
passes. CPML memory is updated only where the profile coefficient ``c`` is
non-zero.
"""

from numba import njit


@njit(cache=True)
def update_h(ez, hx, hy, ch, psi_hx, b_hx, c_hx, psi_hy, b_hy, c_hy):
    nx, ny = ez.shape
    for i in range(nx):
        for j in range(ny - 1):
            d = ez[i, j + 1] - ez[i, j]
            cc = c_hx[j]
            if cc != 0.0:
                p = psi_hx[i, j] * b_hx[j]
                p += cc * d
                psi_hx[i, j] = p
                d += p
            hx[i, j] -= ch * d
    for i in range(nx - 1):
        cc = c_hy[i]
        bb = b_hy[i]
        for j in range(ny):
            d = ez[i + 1, j] - ez[i, j]
            if cc != 0.0:
                p = psi_hy[i, j] * bb
                p += cc * d
                psi_hy[i, j] = p
                d += p
            hy[i, j] += ch * d


@njit(cache=True)
def update_e(ez, hx, hy, ca, cb, psi_ex, b_ex, c_ex, psi_ey, b_ey, c_ey):
    nx, ny = ez.shape
    for i in range(1, nx - 1):
        cx = c_ex[i]
        bx = b_ex[i]
        for j in range(1, ny - 1):
            dy = hy[i, j] - hy[i - 1, j]
            if cx != 0.0:
                p = psi_ex[i, j] * bx
                p += cx * dy
                psi_ex[i, j] = p
                dy += p
            dx = hx[i, j] - hx[i, j - 1]
            cy = c_ey[j]
            if cy != 0.0:
                p = psi_ey[i, j] * b_ey[j]
                p += cy * dx
                psi_ey[i, j] = p
                dx += p
            dy -= dx
            ez[i, j] = ca[i, j] * ez[i, j] + cb[i, j] * dy
