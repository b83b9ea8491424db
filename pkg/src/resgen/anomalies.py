"""Anomalous bodies: sampling, rasterization and stamping.

Rasterization uses the center-in rule: a voxel belongs to a body when its
center lies inside (boundary inclusive). Irregular bodies are grown from
smoothed lattice noise inside an ellipsoidal support.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import kernels
from .core import (LOG_RHO_MAX, AnomalyDescriptor, AnomalyKind, GridSpec, VoxelGrid,
                   clamp_resistivity, nearest_index)
from .errors import SamplingError, ValidationError

KINDS = tuple(AnomalyKind)

_SHAPE_CODES = {
    AnomalyKind.QuadrangularPrism: kernels.SHAPE_BOX,
    AnomalyKind.TriangularPrism: kernels.SHAPE_TRIANGLE,
    AnomalyKind.Sphere: kernels.SHAPE_SPHERE,
    AnomalyKind.Ellipsoid: kernels.SHAPE_ELLIPSOID,
    AnomalyKind.Irregular: kernels.SHAPE_ELLIPSOID,
}

IRREGULAR_PERCENTILE = 60.0
IRREGULAR_TAPER = 0.15
IRREGULAR_TRIES = 10


@dataclass(frozen=True)
class AnomalyRanges:
    count: tuple = (1, 5)
    half_size: tuple = (20.0, 100.0)
    contrast_floor: float = 0.3


def _local_vertices(desc: AnomalyDescriptor):
    hx, hy, _ = desc.extent
    if desc.kind is AnomalyKind.QuadrangularPrism:
        return [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)]
    return [(-hx, -hy), (hx, -hy), (0.0, hy)]


def horizontal_bounds(desc: AnomalyDescriptor) -> tuple:
    """Half-widths along x and y of the body's axis-aligned bounding box."""
    hx, hy, _ = desc.extent
    t = desc.orientation
    c, s = math.cos(t), math.sin(t)
    if desc.kind is AnomalyKind.Sphere:
        return hx, hx
    if desc.kind in (AnomalyKind.Ellipsoid, AnomalyKind.Irregular):
        return (math.sqrt((hx * c) ** 2 + (hy * s) ** 2),
                math.sqrt((hx * s) ** 2 + (hy * c) ** 2))
    # rotated polygon; local -> world is R(t)
    xs = [c * u - s * v for u, v in _local_vertices(desc)]
    ys = [s * u + c * v for u, v in _local_vertices(desc)]
    return max(abs(v) for v in xs), max(abs(v) for v in ys)


def fits_in_domain(desc: AnomalyDescriptor, spec: GridSpec) -> bool:
    """True when the body keeps a one-cell margin from every domain face."""
    h = spec.cell_size
    bx, by = horizontal_bounds(desc)
    bz = desc.extent[2] if desc.kind is not AnomalyKind.Sphere else desc.extent[0]
    lo = [o + h for o in spec.origin]
    hi = [spec.origin[0] + spec.width_x - h, spec.origin[1] + spec.width_y - h,
          spec.origin[2] + spec.total_depth - h]
    cx, cy, cz = desc.center
    return (cx - bx >= lo[0] and cx + bx <= hi[0]
            and cy - by >= lo[1] and cy + by <= hi[1]
            and cz - bz >= lo[2] and cz + bz <= hi[2])


def _index_window(c, b, origin, h, n):
    lo = max(0, int(math.floor((c - b - origin) / h - 0.5)))
    hi = min(n, int(math.ceil((c + b - origin) / h + 0.5)) + 1)
    return lo, max(lo, hi)


def _bbox(desc: AnomalyDescriptor, spec: GridSpec):
    bx, by = horizontal_bounds(desc)
    bz = desc.extent[2] if desc.kind is not AnomalyKind.Sphere else desc.extent[0]
    h = spec.cell_size
    return tuple(
        slice(*_index_window(c, b, o, h, n))
        for c, b, o, n in zip(desc.center, (bx, by, bz), spec.origin, spec.shape)
    )


def _convex_mask(desc: AnomalyDescriptor, spec: GridSpec, code: int):
    """Center-in mask restricted to the bounding box: ``(window, submask)``."""
    win = _bbox(desc, spec)
    xc = spec.centers(0)[win[0]]
    yc = spec.centers(1)[win[1]]
    zc = spec.centers(2)[win[2]]
    hx, hy, hz = desc.extent
    t = desc.orientation
    sub = kernels.rasterize(code, xc, yc, zc, *desc.center, hx, hy, hz, math.cos(t), math.sin(t))
    return win, sub


def _embed(spec: GridSpec, win, sub) -> np.ndarray:
    mask = np.zeros(spec.shape, dtype=bool)
    mask[win] = sub
    return mask


def gen_irregular_mask(desc: AnomalyDescriptor, spec: GridSpec) -> np.ndarray:
    """Deterministic organic body inside the descriptor's ellipsoidal support.

    Uniform lattice noise seeded by ``irregular_seed`` is box-smoothed over
    3 cells and lowered towards the support boundary; cells above the 60th
    percentile (within the support) are kept and reduced to their largest
    6-connected component.
    """
    if desc.kind is not AnomalyKind.Irregular:
        raise ValidationError("gen_irregular_mask needs an Irregular descriptor")
    win, support = _convex_mask(desc, spec, kernels.SHAPE_ELLIPSOID)
    if not support.any():
        raise SamplingError("irregular anomaly support contains no voxel centers")
    # normalized ellipsoidal radius^2 in the body frame
    xc = spec.centers(0)[win[0]] - desc.center[0]
    yc = spec.centers(1)[win[1]] - desc.center[1]
    zc = spec.centers(2)[win[2]] - desc.center[2]
    c, s = math.cos(desc.orientation), math.sin(desc.orientation)
    hx, hy, hz = desc.extent
    lx = (c * xc[:, None] + s * yc[None, :]) / hx
    ly = (c * yc[None, :] - s * xc[:, None]) / hy
    rad2 = lx[:, :, None] ** 2 + ly[:, :, None] ** 2 + (zc / hz)[None, None, :] ** 2
    six = ndimage.generate_binary_structure(3, 1)
    for attempt in range(IRREGULAR_TRIES):
        rng = np.random.default_rng([desc.irregular_seed, attempt])
        noise = ndimage.uniform_filter(rng.random(support.shape), size=3, mode="nearest")
        score = noise - IRREGULAR_TAPER * rad2
        threshold = np.percentile(score[support], IRREGULAR_PERCENTILE)
        cand = support & (score > threshold)
        labels, n = ndimage.label(cand, structure=six)
        if n == 0:
            continue
        sizes = np.bincount(labels.ravel())[1:]
        keep = labels == (int(np.argmax(sizes)) + 1)
        return _embed(spec, win, keep)
    raise SamplingError(f"irregular anomaly came out empty after {IRREGULAR_TRIES} tries")


def rasterize_shape(desc: AnomalyDescriptor, spec: GridSpec) -> np.ndarray:
    """Boolean mask of shape ``spec.shape`` covering the body."""
    if desc.kind is AnomalyKind.Irregular:
        return gen_irregular_mask(desc, spec)
    win, sub = _convex_mask(desc, spec, _SHAPE_CODES[desc.kind])
    return _embed(spec, win, sub)


def stamp_anomalies(grid: VoxelGrid, anomalies, masks=None) -> VoxelGrid:
    """Paint bodies into a copy of ``grid``; later bodies win on overlap."""
    anomalies = list(anomalies)
    if not anomalies:
        return grid
    if masks is None:
        masks = [rasterize_shape(a, grid.spec) for a in anomalies]
    values = grid.values.copy()
    for a, m in zip(anomalies, masks):
        values[m] = np.float32(a.resistivity)
    return VoxelGrid(grid.spec, values)


def _draw_resistivity(rng: np.random.Generator) -> float:
    r = clamp_resistivity(10.0 ** rng.uniform(0.0, LOG_RHO_MAX))
    return float(np.float32(r))


def sample_anomaly(spec: GridSpec, rng: np.random.Generator, ranges: AnomalyRanges = AnomalyRanges(),
                   host: VoxelGrid = None, max_attempts: int = 1000):
    """One body placed inside the domain, returned with its mask."""
    h = spec.cell_size
    for _ in range(max_attempts):
        kind = KINDS[int(rng.integers(len(KINDS)))]
        if kind is AnomalyKind.Sphere:
            r = rng.uniform(*ranges.half_size)
            extent = (r, r, r)
            orientation = 0.0
        else:
            extent = tuple(rng.uniform(*ranges.half_size, size=3))
            orientation = float(rng.uniform(0.0, math.pi))
        seed = int(rng.integers(0, 2**63)) if kind is AnomalyKind.Irregular else None
        probe = AnomalyDescriptor(kind, (0.0, 0.0, 0.0), extent, 1.0, orientation, seed)
        bx, by = horizontal_bounds(probe)
        bz = extent[2]
        spans = [
            (o + h + b, o + w - h - b)
            for o, w, b in zip(spec.origin, (spec.width_x, spec.width_y, spec.total_depth), (bx, by, bz))
        ]
        if any(lo > hi for lo, hi in spans):
            continue
        center = tuple(float(rng.uniform(lo, hi)) for lo, hi in spans)
        rho = _draw_resistivity(rng)
        if host is not None:
            host_rho = float(host.values[nearest_index(spec, *center)])
            for _ in range(max_attempts):
                if abs(math.log10(rho / host_rho)) >= ranges.contrast_floor:
                    break
                rho = _draw_resistivity(rng)
            else:
                raise SamplingError("could not draw an anomaly resistivity that contrasts with its host")
        desc = AnomalyDescriptor(kind, center, extent, rho, orientation, seed)
        if not fits_in_domain(desc, spec):
            continue
        mask = rasterize_shape(desc, spec)
        if mask.any():
            return desc, mask
    raise SamplingError(f"could not place an anomaly in {max_attempts} attempts")


def sample_anomaly_set(n: int, spec: GridSpec, rng: np.random.Generator,
                       ranges: AnomalyRanges = AnomalyRanges(), host: VoxelGrid = None,
                       return_masks: bool = False):
    """Draw ``n`` bodies (1..5). With ``host``, each body contrasts with the host at its center."""
    if not (isinstance(n, (int, np.integer)) and 1 <= n <= 5):
        raise ValidationError(f"anomaly count must be in [1, 5], got {n!r}")
    descs, masks = [], []
    for _ in range(int(n)):
        d, m = sample_anomaly(spec, rng, ranges, host)
        descs.append(d)
        masks.append(m)
    if return_masks:
        return descs, masks
    return descs
