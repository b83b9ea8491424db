"""Initial flat layered models with von Karman-correlated log-resistivity."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LOG_RHO_MAX, RHO_MAX, RHO_MIN, GridSpec, VoxelGrid
from .errors import ConfigError, NumericError, SamplingError, ValidationError
from .special import VonKarmanParams, von_karman_matrix

# Affine map from a unit-variance Gaussian to log10(rho): centered on the
# middle of [0, log10 2000], +-2.5 sd spanning the full range.
LOG_MEAN = LOG_RHO_MAX / 2.0
LOG_SD = LOG_RHO_MAX / 5.0

HALFSPACE_BACKGROUNDS = tuple(float(100 * i) for i in range(1, 11))


@dataclass(frozen=True)
class LayerStack:
    n_layers: int
    interface_depths: tuple
    resistivities: tuple

    def __post_init__(self):
        object.__setattr__(self, "interface_depths", tuple(float(d) for d in self.interface_depths))
        object.__setattr__(self, "resistivities", tuple(float(r) for r in self.resistivities))
        if not 3 <= self.n_layers <= 7:
            raise ValidationError(f"n_layers must be in [3, 7], got {self.n_layers}")
        if len(self.interface_depths) != self.n_layers - 1:
            raise ValidationError("need n_layers - 1 interface depths")
        if len(self.resistivities) != self.n_layers:
            raise ValidationError("need n_layers resistivities")
        d = np.asarray(self.interface_depths)
        if np.any(np.diff(d) <= 0) or d[0] <= 0:
            raise ValidationError("interface depths must be positive and strictly increasing")
        for r in self.resistivities:
            if not RHO_MIN <= r <= RHO_MAX:
                raise ValidationError(f"layer resistivity {r} outside [1, 2000]")

    def thicknesses(self, total_depth: float) -> np.ndarray:
        edges = np.concatenate([[0.0], self.interface_depths, [total_depth]])
        return np.diff(edges)

    def mid_depths(self, total_depth: float) -> np.ndarray:
        edges = np.concatenate([[0.0], self.interface_depths, [total_depth]])
        return 0.5 * (edges[:-1] + edges[1:])


def sample_layer_interfaces(n_layers: int, total_depth: float, min_thickness: float,
                            rng: np.random.Generator) -> np.ndarray:
    """Draw ``n_layers - 1`` interface depths with every layer at least ``min_thickness`` thick.

    Sorted uniforms on the slack ``total_depth - n_layers * min_thickness``
    are shifted by multiples of ``min_thickness``. This is exactly the
    uniform distribution on the constrained set that stick-breaking with
    rejection would produce, without the rejection loop.
    """
    if not 3 <= n_layers <= 7:
        raise ConfigError(f"n_layers must be in [3, 7], got {n_layers}")
    if min_thickness <= 0:
        raise ConfigError("min_thickness must be > 0")
    slack = total_depth - n_layers * min_thickness
    if slack < 0:
        raise ConfigError(
            f"{n_layers} layers of at least {min_thickness} m do not fit in {total_depth} m")
    u = np.sort(rng.uniform(0.0, slack, size=n_layers - 1))
    return u + min_thickness * np.arange(1, n_layers)


def _cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        n = cov.shape[0]
        nugget = 1e-8 * np.trace(cov) / n
        try:
            return np.linalg.cholesky(cov + nugget * np.eye(n))
        except np.linalg.LinAlgError as exc:
            raise NumericError("covariance matrix is not positive definite") from exc


def sample_gaussian_profile(depths, p: VonKarmanParams, rng: np.random.Generator,
                            size=None) -> np.ndarray:
    """Zero-mean Gaussian draws with covariance ``von_karman_cov(|d_i - d_j|)``.

    Returns shape ``(len(depths),)`` or ``(size, len(depths))``. Coincident
    depths receive identical values.
    """
    d = np.asarray(depths, dtype=np.float64)
    if d.ndim != 1 or d.size == 0:
        raise ValidationError("depths must be a non-empty 1-D sequence")
    uniq, inverse = np.unique(d, return_inverse=True)
    chol = _cholesky(von_karman_matrix(uniq, p))
    n = uniq.size
    if size is None:
        g = chol @ rng.standard_normal(n)
        return g[inverse]
    z = rng.standard_normal((size, n))
    return (z @ chol.T)[:, inverse]


def gaussian_to_log_res(g, p: VonKarmanParams) -> np.ndarray:
    """Map raw draws to clamped log10-resistivity."""
    x = LOG_MEAN + LOG_SD * np.asarray(g, dtype=np.float64) / math.sqrt(p.variance)
    return np.clip(x, 0.0, LOG_RHO_MAX)


def sample_correlated_log_res(depths, p: VonKarmanParams, rng: np.random.Generator,
                              contrast_floor: float = 0.05, max_attempts: int = 1000) -> np.ndarray:
    """Correlated log10-resistivity at the given depths.

    The whole profile is redrawn while any two neighbours differ by less than
    ``contrast_floor`` in log10 units.
    """
    for _ in range(max_attempts):
        logs = gaussian_to_log_res(sample_gaussian_profile(depths, p, rng), p)
        if logs.size < 2 or np.min(np.abs(np.diff(logs))) >= contrast_floor:
            return logs
    raise SamplingError(f"no profile met the {contrast_floor} log10 contrast floor "
                        f"in {max_attempts} attempts")


def sample_layer_stack(n_layers: int, spec: GridSpec, p: VonKarmanParams, rng: np.random.Generator,
                       min_thickness: float = 20.0, contrast_floor: float = 0.05) -> LayerStack:
    depths = sample_layer_interfaces(n_layers, spec.total_depth, min_thickness, rng)
    edges = np.concatenate([[0.0], depths, [spec.total_depth]])
    mids = 0.5 * (edges[:-1] + edges[1:])
    logs = sample_correlated_log_res(mids, p, rng, contrast_floor)
    # round through float32 so the recorded values equal the stored voxels
    rho = np.clip(np.float32(10.0) ** logs.astype(np.float32), RHO_MIN, RHO_MAX).astype(np.float32)
    return LayerStack(n_layers, tuple(depths), tuple(float(r) for r in rho))


def build_layered_grid(stack: LayerStack, spec: GridSpec) -> VoxelGrid:
    """Laterally constant grid; a center at depth ``z >= d`` lies below interface ``d``."""
    depth = spec.centers(2) - spec.origin[2]
    layer = np.searchsorted(np.asarray(stack.interface_depths), depth, side="right")
    column = np.asarray(stack.resistivities, dtype=np.float32)[layer]
    values = np.broadcast_to(column, spec.shape).copy()
    return VoxelGrid(spec, values)


def build_halfspace_grid(background: float, spec: GridSpec) -> VoxelGrid:
    if float(background) not in HALFSPACE_BACKGROUNDS:
        raise ValidationError(f"halfspace background must be one of 100, 200, ..., 1000; got {background}")
    return VoxelGrid(spec, np.full(spec.shape, background, dtype=np.float32))
