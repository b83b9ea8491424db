"""Faults and folds as grid-to-grid transforms.

A fault replaces every voxel at or below a random surface ``f(x, y)``
(depth positive down) with the source model sampled at
``(a sin(2 pi k x) + s, a sin(2 pi k y) + s, z + s')``; voxels above the
surface keep the previous iterate. A fold resamples each column with a
sinusoidal vertical shear. All resampling is nearest-neighbour with
out-of-domain coordinates clamped to the boundary, so no new resistivity
values are ever created.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import GridSpec, VoxelGrid
from .errors import SamplingError, ValidationError

TWO_PI = 2.0 * math.pi


class FaultKind(enum.Enum):
    Flat = "flat"
    Curved = "curved"


class FoldMode(enum.Enum):
    Geological = "geological"
    Literal = "literal"


class HangingWallSource(enum.Enum):
    Initial = "initial"
    Previous = "previous"


@dataclass(frozen=True)
class FaultSurfaceParams:
    """``f(x, y) = c x + d y + A1 sin(w1 x + p1) + A2 cos(w2 y + p2) + e``."""

    c: float = 0.0
    d: float = 0.0
    A1: float = 0.0
    A2: float = 0.0
    omega1: float = 0.0
    omega2: float = 0.0
    phi1: float = 0.0
    phi2: float = 0.0
    e: float = 0.0

    def __post_init__(self):
        if self.A1 < 0 or self.A2 < 0:
            raise ValidationError("undulation amplitudes must be >= 0")

    @property
    def is_flat(self) -> bool:
        return self.A1 == 0.0 and self.A2 == 0.0


@dataclass(frozen=True)
class FaultWarpParams:
    a: float = 0.0
    k: float = 0.0
    s: float = 0.0
    s_prime: float = 0.0


@dataclass(frozen=True)
class FoldParams:
    a: float = 0.0
    kx: float = 0.0
    ky: float = 0.0
    phix: float = 0.0
    phiy: float = 0.0
    mode: FoldMode = FoldMode.Geological

    def __post_init__(self):
        if self.a < 0:
            raise ValidationError("fold amplitude must be >= 0")
        if not isinstance(self.mode, FoldMode):
            object.__setattr__(self, "mode", FoldMode(self.mode))


@dataclass(frozen=True)
class FaultRanges:
    """Sampling ranges for faults. Cycle counts are per domain width."""

    throw: tuple = (20.0, 80.0)
    lateral_shift: tuple = (0.0, 100.0)
    warp_amplitude: tuple = (0.0, 60.0)
    warp_cycles: tuple = (1.0, 3.0)
    dip: tuple = (-0.5, 0.5)
    depth_fraction: tuple = (0.25, 0.75)
    undulation: tuple = (10.0, 40.0)
    undulation_cycles: tuple = (1.0, 3.0)


@dataclass(frozen=True)
class FoldRanges:
    amplitude: tuple = (10.0, 50.0)
    cycles: tuple = (1.0, 3.0)


def eval_fault_surface(p: FaultSurfaceParams, x, y):
    """Depth of the fault surface at horizontal position(s) ``(x, y)``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    f = (p.c * x + p.d * y
         + p.A1 * np.sin(p.omega1 * x + p.phi1)
         + p.A2 * np.cos(p.omega2 * y + p.phi2)
         + p.e)
    return f if f.ndim else float(f)


def fault_surface_grid(p: FaultSurfaceParams, spec: GridSpec) -> np.ndarray:
    """Surface depth at every column's cell center, shape ``(nx, ny)``."""
    return eval_fault_surface(p, spec.centers(0)[:, None], spec.centers(1)[None, :])


def apply_fault(r0: VoxelGrid, r_prev: VoxelGrid, surf: FaultSurfaceParams,
                warp: FaultWarpParams) -> VoxelGrid:
    """One fault iteration: hanging wall resampled from ``r0``, foot wall kept from ``r_prev``."""
    spec = r_prev.spec
    if r0.spec != spec:
        raise ValidationError("source and previous grids have different specs")
    h = spec.cell_size
    ox, oy, oz = spec.origin
    xc, yc, zc = spec.centers(0), spec.centers(1), spec.centers(2)
    surface = fault_surface_grid(surf, spec)
    if not np.any(zc[None, None, :] >= surface[:, :, None]):
        return r_prev
    xs = warp.a * np.sin(TWO_PI * warp.k * xc) + warp.s
    ys = warp.a * np.sin(TWO_PI * warp.k * yc) + warp.s
    zs = zc + warp.s_prime
    ix = kernels.nearest_indices(xs, ox, h, spec.nx)
    iy = kernels.nearest_indices(ys, oy, h, spec.ny)
    iz = kernels.nearest_indices(zs, oz, h, spec.nz)
    out = kernels.fault_select(r_prev.values, r0.values, surface, zc, ix, iy, iz)
    return VoxelGrid(spec, out)


def apply_fold(r_prev: VoxelGrid, p: FoldParams) -> VoxelGrid:
    """Fold a grid.

    ``Geological`` shears each column vertically:
    ``out(x, y, z) = in(x, y, z + a sin(2 pi kx x + phix) + a sin(2 pi ky y + phiy))``.
    ``Literal`` substitutes ``a sin(2 pi kx x)`` for both y and z, which
    makes the result a function of x only. ``a == 0`` is the identity in
    either mode.
    """
    if p.a == 0.0:
        return r_prev
    spec = r_prev.spec
    h = spec.cell_size
    ox, oy, oz = spec.origin
    xc = spec.centers(0)
    if p.mode is FoldMode.Geological:
        yc = spec.centers(1)
        shift = (p.a * np.sin(TWO_PI * p.kx * xc + p.phix)[:, None]
                 + p.a * np.sin(TWO_PI * p.ky * yc + p.phiy)[None, :])
        out = kernels.fold_shear(r_prev.values, shift, spec.centers(2), oz, h)
    else:
        t = p.a * np.sin(TWO_PI * p.kx * xc)
        iy = kernels.nearest_indices(t, oy, h, spec.ny)
        iz = kernels.nearest_indices(t, oz, h, spec.nz)
        out = kernels.fold_literal(r_prev.values, iy, iz)
    return VoxelGrid(spec, out)


def sample_fault_params(kind: FaultKind, spec: GridSpec, rng: np.random.Generator,
                        ranges: FaultRanges = FaultRanges(), max_attempts: int = 1000):
    """Draw surface and warp parameters for one fault.

    The surface is redrawn until it crosses the domain interior (some cell
    center column above ``total_depth`` and some below the top).
    """
    kind = FaultKind(kind)
    wx, wy = spec.width_x, spec.width_y
    top = spec.origin[2]
    bottom = top + spec.total_depth
    for _ in range(max_attempts):
        if kind is FaultKind.Curved:
            a1, a2 = rng.uniform(*ranges.undulation, size=2)
        else:
            a1 = a2 = 0.0
        w1 = TWO_PI * rng.uniform(*ranges.undulation_cycles) / wx
        w2 = TWO_PI * rng.uniform(*ranges.undulation_cycles) / wy
        p1, p2 = rng.uniform(0.0, TWO_PI, size=2)
        c, d = rng.uniform(*ranges.dip, size=2)
        e = top + rng.uniform(*ranges.depth_fraction) * spec.total_depth
        surf = FaultSurfaceParams(c=float(c), d=float(d), A1=float(a1), A2=float(a2),
                                  omega1=float(w1), omega2=float(w2),
                                  phi1=float(p1), phi2=float(p2), e=float(e))
        f = fault_surface_grid(surf, spec)
        throw = rng.uniform(*ranges.throw) * (1.0 if rng.random() < 0.5 else -1.0)
        warp = FaultWarpParams(
            a=float(rng.uniform(*ranges.warp_amplitude)),
            k=float(rng.uniform(*ranges.warp_cycles) / wx),
            s=float(rng.uniform(*ranges.lateral_shift)),
            s_prime=float(throw),
        )
        if f.min() < bottom and f.max() > top and warp.s_prime != 0.0:
            return surf, warp
    raise SamplingError(f"no fault crossing the domain found in {max_attempts} attempts")


def sample_fold_params(spec: GridSpec, rng: np.random.Generator, ranges: FoldRanges = FoldRanges(),
                       mode: FoldMode = FoldMode.Geological) -> FoldParams:
    a = rng.uniform(*ranges.amplitude)
    kx = rng.uniform(*ranges.cycles) / spec.width_x
    ky = rng.uniform(*ranges.cycles) / spec.width_y
    phix, phiy = rng.uniform(0.0, TWO_PI, size=2)
    return FoldParams(a=float(a), kx=float(kx), ky=float(ky), phix=float(phix),
                      phiy=float(phiy), mode=FoldMode(mode))
