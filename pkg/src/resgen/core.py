"""Grid and model domain types shared by every generation stage.

Axis convention: x, y horizontal, z positive downward with the surface at
z = 0 (plus ``origin[2]``). Arrays are stored C-order with shape
``(nx, ny, nz)``, so x varies slowest and z fastest.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BoundsError, ValidationError

RHO_MIN = 1.0
RHO_MAX = 2000.0
LOG_RHO_MAX = math.log10(RHO_MAX)


@dataclass(frozen=True)
class GridSpec:
    nx: int = 64
    ny: int = 64
    nz: int = 32
    cell_size: float = 10.0
    origin: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("nx", "ny", "nz"):
            v = getattr(self, name)
            if int(v) != v or v < 2:
                raise ValidationError(f"{name} must be an integer >= 2, got {v!r}")
            object.__setattr__(self, name, int(v))
        if not (math.isfinite(self.cell_size) and self.cell_size > 0):
            raise ValidationError(f"cell_size must be > 0, got {self.cell_size!r}")
        object.__setattr__(self, "cell_size", float(self.cell_size))
        if len(self.origin) != 3:
            raise ValidationError("origin must have three components")
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @property
    def shape(self) -> tuple:
        return (self.nx, self.ny, self.nz)

    @property
    def size(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def width_x(self) -> float:
        return self.nx * self.cell_size

    @property
    def width_y(self) -> float:
        return self.ny * self.cell_size

    @property
    def total_depth(self) -> float:
        return self.nz * self.cell_size

    def centers(self, axis: int) -> np.ndarray:
        """Cell-center coordinates along one axis (0=x, 1=y, 2=z), float64."""
        n = self.shape[axis]
        return self.origin[axis] + (np.arange(n, dtype=np.float64) + 0.5) * self.cell_size


def voxel_center(spec: GridSpec, i: int, j: int, k: int) -> tuple:
    """Return the (x, y, z) center in meters of cell ``(i, j, k)``."""
    for idx, n, name in ((i, spec.nx, "i"), (j, spec.ny, "j"), (k, spec.nz, "k")):
        if not 0 <= idx < n:
            raise BoundsError(f"index {name}={idx} out of range [0, {n})")
    h = spec.cell_size
    ox, oy, oz = spec.origin
    return (ox + (i + 0.5) * h, oy + (j + 0.5) * h, oz + (k + 0.5) * h)


def nearest_index(spec: GridSpec, x: float, y: float, z: float) -> tuple:
    """Index of the cell whose center is nearest to a point inside the domain."""
    h = spec.cell_size
    ox, oy, oz = spec.origin
    idx = (
        int(math.floor((x - ox) / h)),
        int(math.floor((y - oy) / h)),
        int(math.floor((z - oz) / h)),
    )
    for v, n in zip(idx, spec.shape):
        if not 0 <= v < n:
            raise BoundsError(f"point ({x}, {y}, {z}) lies outside the grid")
    return idx


def clamp_resistivity(v: float) -> float:
    if not math.isfinite(v):
        raise ValidationError(f"resistivity must be finite, got {v!r}")
    return min(RHO_MAX, max(RHO_MIN, float(v)))


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Dense resistivity model in ohm-m. ``values`` is read-only float32."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float32)
        if v.shape != self.spec.shape:
            raise ValidationError(f"values shape {v.shape} does not match grid {self.spec.shape}")
        if v.size:
            lo, hi = float(v.min()), float(v.max())
            # NaN fails both comparisons; inf fails the upper bound
            if not (lo >= RHO_MIN and hi <= RHO_MAX):
                raise ValidationError(f"resistivity outside [{RHO_MIN}, {RHO_MAX}]: min={lo}, max={hi}")
        if v is self.values and v.flags.writeable:
            v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __eq__(self, other):
        if not isinstance(other, VoxelGrid):
            return NotImplemented
        return self.spec == other.spec and self.tobytes() == other.tobytes()

    def tobytes(self) -> bytes:
        return self.values.astype("<f4", copy=False).tobytes(order="C")


class ModelCategory(enum.Enum):
    """The nine model families. Values are the CLI/config slugs."""

    HalfspaceAnomaly = "halfspace_anomaly"
    Layered = "layered"
    LayeredAnomaly = "layered_anomaly"
    LayeredFault = "layered_fault"
    LayeredFaultAnomaly = "layered_fault_anomaly"
    Folded = "folded"
    FoldedAnomaly = "folded_anomaly"
    FoldedFault = "folded_fault"
    FoldedFaultAnomaly = "folded_fault_anomaly"

    @property
    def has_anomalies(self) -> bool:
        return self.value.endswith("anomaly")

    @property
    def has_layers(self) -> bool:
        return self is not ModelCategory.HalfspaceAnomaly

    @property
    def has_faults(self) -> bool:
        return "fault" in self.value

    @property
    def has_folds(self) -> bool:
        return self.value.startswith("folded")

    @classmethod
    def parse(cls, name: str) -> "ModelCategory":
        key = name.strip().lower().replace("-", "_")
        for c in cls:
            if key in (c.value, c.name.lower()):
                return c
        valid = ", ".join(c.value for c in cls)
        raise ValidationError(f"unknown category {name!r}; valid names: {valid}")


CATEGORY_NAMES = tuple(c.value for c in ModelCategory)


class AnomalyKind(enum.Enum):
    QuadrangularPrism = "quadrangular_prism"
    TriangularPrism = "triangular_prism"
    Sphere = "sphere"
    Ellipsoid = "ellipsoid"
    Irregular = "irregular"


@dataclass(frozen=True)
class AnomalyDescriptor:
    """One anomalous body.

    ``extent`` holds half-sizes per local axis (the radius, repeated, for a
    sphere). ``orientation`` is a rotation about the vertical axis in radians.
    """

    kind: AnomalyKind
    center: tuple
    extent: tuple
    resistivity: float
    orientation: float = 0.0
    irregular_seed: Optional[int] = None

    def __post_init__(self):
        if not isinstance(self.kind, AnomalyKind):
            object.__setattr__(self, "kind", AnomalyKind(self.kind))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "extent", tuple(float(e) for e in self.extent))
        if len(self.center) != 3 or len(self.extent) != 3:
            raise ValidationError("center and extent need three components")
        if min(self.extent) <= 0:
            raise ValidationError(f"extent must be positive, got {self.extent}")
        if not RHO_MIN <= self.resistivity <= RHO_MAX:
            raise ValidationError(f"anomaly resistivity {self.resistivity} outside [1, 2000]")
        if self.kind is AnomalyKind.Irregular and self.irregular_seed is None:
            raise ValidationError("irregular anomalies need an irregular_seed")

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind.value,
            "center": list(self.center),
            "extent": list(self.extent),
            "orientation": self.orientation,
            "resistivity": self.resistivity,
        }
        if self.irregular_seed is not None:
            d["irregular_seed"] = self.irregular_seed
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AnomalyDescriptor":
        return cls(
            kind=AnomalyKind(d["kind"]),
            center=tuple(d["center"]),
            extent=tuple(d["extent"]),
            resistivity=float(d["resistivity"]),
            orientation=float(d.get("orientation", 0.0)),
            irregular_seed=d.get("irregular_seed"),
        )


@dataclass(frozen=True)
class ModelRecord:
    """Manifest row for one generated model.

    ``extra`` carries recipe details (fault count, fold mode, layer stack,
    ...) that are informative but not part of the validated core schema.
    """

    id: str
    category: ModelCategory
    seed: int
    n_anomalies: int
    transmitter_height_m: float
    generator_version: str
    grid_path: str
    n_layers: Optional[int] = None
    anomalies: tuple = ()
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if not self.id:
            raise ValidationError("record id must be non-empty")
        if not isinstance(self.category, ModelCategory):
            raise ValidationError(f"bad category {self.category!r}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.category.has_layers:
            if self.n_layers is None or not 3 <= self.n_layers <= 7:
                raise ValidationError(f"n_layers must be in [3, 7] for {self.category.value}, got {self.n_layers}")
        elif self.n_layers is not None:
            raise ValidationError("halfspace models carry no n_layers")
        if self.category.has_anomalies:
            if not 1 <= self.n_anomalies <= 5:
                raise ValidationError(f"n_anomalies must be in [1, 5], got {self.n_anomalies}")
        elif self.n_anomalies != 0:
            raise ValidationError(f"{self.category.value} must have no anomalies")
        if len(self.anomalies) != self.n_anomalies:
            raise ValidationError("n_anomalies does not match the descriptor list")
        h = self.transmitter_height_m
        if not (isinstance(h, (int, float)) and 25.0 <= h <= 100.0):
            raise ValidationError(f"transmitter_height_m must be in [25, 100], got {h!r}")
        if not self.grid_path or not self.generator_version:
            raise ValidationError("grid_path and generator_version are required")

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "category": self.category.value,
            "seed": self.seed,
            "n_layers": self.n_layers,
            "n_anomalies": self.n_anomalies,
            "anomalies": [a.to_dict() for a in self.anomalies],
            "transmitter_height_m": self.transmitter_height_m,
            "generator_version": self.generator_version,
            "grid_path": self.grid_path,
        }
        if self.extra:
            d["extra"] = self.extra
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelRecord":
        required = ("id", "category", "seed", "n_anomalies", "transmitter_height_m",
                    "generator_version", "grid_path")
        missing = [k for k in required if k not in d]
        if missing:
            raise ValidationError(f"record is missing fields: {', '.join(missing)}")
        return cls(
            id=d["id"],
            category=ModelCategory.parse(d["category"]),
            seed=int(d["seed"]),
            n_layers=d.get("n_layers"),
            n_anomalies=int(d["n_anomalies"]),
            anomalies=tuple(AnomalyDescriptor.from_dict(a) for a in d.get("anomalies", [])),
            transmitter_height_m=float(d["transmitter_height_m"]),
            generator_version=d["generator_version"],
            grid_path=d["grid_path"],
            extra=d.get("extra", {}),
        )
