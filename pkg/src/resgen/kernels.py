"""Per-voxel kernels with paired numba / numpy implementations.

Every kernel exists twice: ``*_jit`` (explicit loops, compiled with numba
when available) and ``*_np`` (vectorized numpy). The public names dispatch
on ``_accel.USE_NUMBA``. Both paths consume identical precomputed
coordinates and perform the same floating-point operations in the same
order, so their outputs agree bitwise.
"""
import numpy as np

from . import _accel
from ._accel import njit

SHAPE_BOX = 0
SHAPE_TRIANGLE = 1
SHAPE_SPHERE = 2
SHAPE_ELLIPSOID = 3


def nearest_indices(coords, origin, h, n):
    """Nearest cell index for each coordinate, clamped to ``[0, n-1]``.

    The nearest center to ``c`` is cell ``floor((c - origin) / h)``; a point
    exactly on a cell face goes to the higher cell.
    """
    idx = np.floor((np.asarray(coords, dtype=np.float64) - origin) / h)
    return np.clip(idx, 0, n - 1).astype(np.int64)


# --- fault: hanging-wall / foot-wall selection ------------------------------

@njit
def fault_select_jit(prev, src, surface, zc, ix, iy, iz):
    nx, ny, nz = prev.shape
    out = prev.copy()
    for i in range(nx):
        si = ix[i]
        for j in range(ny):
            f = surface[i, j]
            sj = iy[j]
            for k in range(nz):
                if zc[k] >= f:
                    out[i, j, k] = src[si, sj, iz[k]]
    return out


def fault_select_np(prev, src, surface, zc, ix, iy, iz):
    hanging = src[np.ix_(ix, iy, iz)]
    below = zc[None, None, :] >= surface[:, :, None]
    return np.where(below, hanging, prev)


# --- fold: column-wise vertical shear ---------------------------------------

@njit
def fold_shear_jit(prev, shift, zc, oz, h):
    nx, ny, nz = prev.shape
    out = np.empty_like(prev)
    for i in range(nx):
        for j in range(ny):
            s = shift[i, j]
            for k in range(nz):
                t = np.floor((zc[k] + s - oz) / h)
                if t < 0:
                    t = 0
                elif t > nz - 1:
                    t = nz - 1
                out[i, j, k] = prev[i, j, int(t)]
    return out


def fold_shear_np(prev, shift, zc, oz, h):
    nz = prev.shape[2]
    t = np.floor((zc[None, None, :] + shift[:, :, None] - oz) / h)
    idx = np.clip(t, 0, nz - 1).astype(np.int64)
    return np.take_along_axis(prev, idx, axis=2)


@njit
def fold_literal_jit(prev, iy, iz):
    nx, ny, nz = prev.shape
    out = np.empty_like(prev)
    for i in range(nx):
        v = prev[i, iy[i], iz[i]]
        for j in range(ny):
            for k in range(nz):
                out[i, j, k] = v
    return out


def fold_literal_np(prev, iy, iz):
    nx = prev.shape[0]
    v = prev[np.arange(nx), iy, iz]
    return np.broadcast_to(v[:, None, None], prev.shape).copy()


# --- center-in rasterization of convex bodies -------------------------------

@njit
def rasterize_jit(shape_code, xc, yc, zc, cx, cy, cz, hx, hy, hz, cos_t, sin_t):
    nx = xc.shape[0]
    ny = yc.shape[0]
    nz = zc.shape[0]
    mask = np.zeros((nx, ny, nz), dtype=np.bool_)
    for i in range(nx):
        dx = xc[i] - cx
        for j in range(ny):
            dy = yc[j] - cy
            lx = cos_t * dx + sin_t * dy
            ly = cos_t * dy - sin_t * dx
            for k in range(nz):
                lz = zc[k] - cz
                if shape_code == SHAPE_BOX:
                    inside = abs(lx) <= hx and abs(ly) <= hy and abs(lz) <= hz
                elif shape_code == SHAPE_TRIANGLE:
                    inside = (abs(lz) <= hz and ly >= -hy and ly <= hy
                              and abs(lx) * (2.0 * hy) <= hx * (hy - ly))
                elif shape_code == SHAPE_SPHERE:
                    inside = lx * lx + ly * ly + lz * lz <= hx * hx
                else:
                    u = lx / hx
                    v = ly / hy
                    w = lz / hz
                    inside = u * u + v * v + w * w <= 1.0
                mask[i, j, k] = inside
    return mask


def rasterize_np(shape_code, xc, yc, zc, cx, cy, cz, hx, hy, hz, cos_t, sin_t):
    dx = (xc - cx)[:, None, None]
    dy = (yc - cy)[None, :, None]
    lx = cos_t * dx + sin_t * dy
    ly = cos_t * dy - sin_t * dx
    lz = (zc - cz)[None, None, :]
    if shape_code == SHAPE_BOX:
        m = (np.abs(lx) <= hx) & (np.abs(ly) <= hy) & (np.abs(lz) <= hz)
    elif shape_code == SHAPE_TRIANGLE:
        m = ((np.abs(lz) <= hz) & (ly >= -hy) & (ly <= hy)
             & (np.abs(lx) * (2.0 * hy) <= hx * (hy - ly)))
    elif shape_code == SHAPE_SPHERE:
        m = lx * lx + ly * ly + lz * lz <= hx * hx
    else:
        u = lx / hx
        v = ly / hy
        w = lz / hz
        m = u * u + v * v + w * w <= 1.0
    shape = (xc.shape[0], yc.shape[0], zc.shape[0])
    return np.broadcast_to(m, shape).copy()


def _pick(jit_fn, np_fn):
    return jit_fn if _accel.USE_NUMBA else np_fn


fault_select = _pick(fault_select_jit, fault_select_np)
fold_shear = _pick(fold_shear_jit, fold_shear_np)
fold_literal = _pick(fold_literal_jit, fold_literal_np)
rasterize = _pick(rasterize_jit, rasterize_np)
