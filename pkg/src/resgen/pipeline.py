"""Category recipes and deterministic batch generation.

Model ``index`` (its position in the batch, categories in canonical order)
fixes its seed through :func:`derive_model_seed`; every random draw for the
model comes from ``numpy.random.default_rng([model_seed, attempt])``. Batch
output therefore does not depend on the number of worker processes.
"""
from __future__ import annotations

import dataclasses
import hashlib
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .anomalies import AnomalyRanges, sample_anomaly_set, stamp_anomalies
from .core import GridSpec, ModelCategory, ModelRecord, VoxelGrid
from .errors import ConfigError, OutputError, SamplingError
from .export import Manifest, write_manifest, write_metadata, write_npy
from .layers import HALFSPACE_BACKGROUNDS, build_halfspace_grid, build_layered_grid, sample_layer_stack
from .special import VonKarmanParams
from .structures import (FaultKind, FaultRanges, FoldMode, FoldRanges, HangingWallSource,
                         apply_fault, apply_fold, sample_fault_params, sample_fold_params)

log = logging.getLogger(__name__)

GENERATOR_VERSION = f"resgen-{__version__}"
MAX_ATTEMPTS = 10
PARTIAL_MARKER = ".partial"

_MASK64 = (1 << 64) - 1
SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
INDEX_MULTIPLIER = 0xD1B54A32D192ED03


def splitmix64(x: int) -> int:
    z = (x + SPLITMIX_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_model_seed(global_seed: int, index: int) -> int:
    """``splitmix64(global_seed XOR (index * 0xD1B54A32D192ED03 mod 2^64))``.

    Injective in ``index`` for a fixed ``global_seed``: multiplication by an
    odd constant, XOR, and the SplitMix64 finalizer are all bijections.
    """
    return splitmix64((int(global_seed) & _MASK64) ^ ((int(index) * INDEX_MULTIPLIER) & _MASK64))


@dataclass(frozen=True)
class GenerationConfig:
    grid: GridSpec = GridSpec()
    counts: dict = field(default_factory=lambda: {c: 1 for c in ModelCategory})
    global_seed: int = 0
    fold_mode: FoldMode = FoldMode.Geological
    hanging_wall_source: HangingWallSource = HangingWallSource.Initial
    fault_iterations: tuple = (1, 3)
    fold_iterations: tuple = (1, 2)
    n_layers: tuple = (3, 7)
    layer_min_thickness: float = 20.0
    layer_contrast_floor: float = 0.05
    vk_amplitude: float = 1.0
    vk_scale: float = 1.0
    vk_nu: tuple = (0.3, 1.0)
    vk_length: tuple = (50.0, 300.0)
    transmitter_height: tuple = (25.0, 100.0)
    fault: FaultRanges = FaultRanges()
    fold: FoldRanges = FoldRanges()
    anomaly: AnomalyRanges = AnomalyRanges()

    def __post_init__(self):
        counts = {ModelCategory.parse(c) if isinstance(c, str) else c: int(n)
                  for c, n in self.counts.items()}
        if not counts or any(n < 1 for n in counts.values()):
            raise ConfigError("counts must name at least one category, each with count >= 1")
        object.__setattr__(self, "counts", {c: counts[c] for c in ModelCategory if c in counts})
        if not 0 <= int(self.global_seed) < 2**64:
            raise ConfigError("global_seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "fold_mode", FoldMode(self.fold_mode))
        object.__setattr__(self, "hanging_wall_source", HangingWallSource(self.hanging_wall_source))
        _check_range("fault_iterations", self.fault_iterations, 1, None)
        _check_range("fold_iterations", self.fold_iterations, 1, None)
        _check_range("n_layers", self.n_layers, 3, 7)
        _check_range("anomaly.count", self.anomaly.count, 1, 5)
        _check_range("transmitter_height", self.transmitter_height, 25.0, 100.0)
        _check_range("vk_nu", self.vk_nu, 1e-9, 2.0)
        _check_range("vk_length", self.vk_length, 1e-9, None)
        if self.n_layers[1] * self.layer_min_thickness > self.grid.total_depth:
            raise ConfigError("maximum layer count does not fit at the minimum thickness")
        for group in (self.fault, self.fold, self.anomaly):
            for f in dataclasses.fields(group):
                v = getattr(group, f.name)
                if isinstance(v, tuple):
                    _check_range(f.name, v, None, None)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def tasks(self):
        """``(category, index)`` for every model in the batch, in index order."""
        index = 0
        for cat, n in self.counts.items():
            for _ in range(n):
                yield cat, index
                index += 1

    def to_text(self) -> str:
        lines = ["# resgen generation config"]
        for key, getter, fmt, _ in _CONFIG_KEYS:
            lines.append(f"{key} = {fmt(getter(self))}")
        for cat, n in self.counts.items():
            lines.append(f"count.{cat.value} = {n}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    @classmethod
    def from_text(cls, text: str) -> "GenerationConfig":
        table = {key: setter for key, _, _, setter in _CONFIG_KEYS}
        values = {}
        counts = {}
        seen = set()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key in seen:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            seen.add(key)
            try:
                if key.startswith("count."):
                    counts[ModelCategory.parse(key[len("count."):])] = int(value)
                elif key in table:
                    table[key](values, value)
                else:
                    raise ConfigError(f"line {lineno}: unknown key {key!r}")
            except ConfigError:
                raise
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
        return _assemble(values, counts)

    @classmethod
    def from_file(cls, path) -> "GenerationConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise OutputError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text)


def _check_range(name, r, lo, hi):
    if len(r) != 2 or not r[0] <= r[1]:
        raise ConfigError(f"{name} must be a (low, high) pair with low <= high, got {r!r}")
    if (lo is not None and r[0] < lo) or (hi is not None and r[1] > hi):
        raise ConfigError(f"{name} must lie within [{lo}, {hi}], got {r!r}")


def _fmt_num(v):
    return repr(v) if isinstance(v, float) else str(v)


def _fmt_pair(v):
    return f"{_fmt_num(v[0])}, {_fmt_num(v[1])}"


def _parse_pair(kind):
    def parse(text):
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2:
            raise ValueError("expected two comma-separated numbers")
        return tuple(kind(p) for p in parts)
    return parse


def _parse_origin(text):
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError("origin needs three numbers")
    return tuple(parts)


def _key(name, path, fmt, parse):
    """Config key bound to an attribute path like ``("fault", "throw")``."""
    def getter(cfg):
        obj = cfg
        for p in path:
            obj = getattr(obj, p)
        return obj

    def setter(values, text):
        values[path] = parse(text)

    return name, getter, fmt, setter


_ENUM = (lambda v: v.value)
_CONFIG_KEYS = [
    _key("global_seed", ("global_seed",), str, int),
    _key("grid.nx", ("grid", "nx"), str, int),
    _key("grid.ny", ("grid", "ny"), str, int),
    _key("grid.nz", ("grid", "nz"), str, int),
    _key("grid.cell_size", ("grid", "cell_size"), repr, float),
    _key("grid.origin", ("grid", "origin"), lambda v: ", ".join(repr(x) for x in v), _parse_origin),
    _key("fold_mode", ("fold_mode",), _ENUM, FoldMode),
    _key("hanging_wall_source", ("hanging_wall_source",), _ENUM, HangingWallSource),
    _key("fault_iterations", ("fault_iterations",), _fmt_pair, _parse_pair(int)),
    _key("fold_iterations", ("fold_iterations",), _fmt_pair, _parse_pair(int)),
    _key("layers.count", ("n_layers",), _fmt_pair, _parse_pair(int)),
    _key("layers.min_thickness", ("layer_min_thickness",), repr, float),
    _key("layers.contrast_floor", ("layer_contrast_floor",), repr, float),
    _key("von_karman.amplitude", ("vk_amplitude",), repr, float),
    _key("von_karman.scale", ("vk_scale",), repr, float),
    _key("von_karman.nu", ("vk_nu",), _fmt_pair, _parse_pair(float)),
    _key("von_karman.length", ("vk_length",), _fmt_pair, _parse_pair(float)),
    _key("transmitter_height", ("transmitter_height",), _fmt_pair, _parse_pair(float)),
]
_CONFIG_KEYS += [
    _key(f"fault.{f.name}", ("fault", f.name), _fmt_pair, _parse_pair(float))
    for f in dataclasses.fields(FaultRanges)
]
_CONFIG_KEYS += [
    _key(f"fold.{f.name}", ("fold", f.name), _fmt_pair, _parse_pair(float))
    for f in dataclasses.fields(FoldRanges)
]
_CONFIG_KEYS += [
    _key("anomaly.count", ("anomaly", "count"), _fmt_pair, _parse_pair(int)),
    _key("anomaly.half_size", ("anomaly", "half_size"), _fmt_pair, _parse_pair(float)),
    _key("anomaly.contrast_floor", ("anomaly", "contrast_floor"), repr, float),
]


def _assemble(values: dict, counts: dict) -> GenerationConfig:
    base = GenerationConfig()
    grid_kw = {f.name: getattr(base.grid, f.name) for f in dataclasses.fields(GridSpec)}
    groups = {"fault": {}, "fold": {}, "anomaly": {}}
    top = {}
    for path, v in values.items():
        if path[0] == "grid":
            grid_kw[path[1]] = v
        elif path[0] in groups:
            groups[path[0]][path[1]] = v
        else:
            top[path[0]] = v
    return GenerationConfig(
        grid=GridSpec(**grid_kw),
        counts=counts or dict(base.counts),
        fault=FaultRanges(**groups["fault"]),
        fold=FoldRanges(**groups["fold"]),
        anomaly=AnomalyRanges(**groups["anomaly"]),
        **top,
    )


def model_id(category: ModelCategory, index: int) -> str:
    return f"m{index:07d}-{category.value}"


def sample_count(rng, r) -> int:
    """Uniform integer in the inclusive range ``r``; used for layer, anomaly and iteration counts."""
    return int(rng.integers(r[0], r[1] + 1))


def _build(category: ModelCategory, rng: np.random.Generator, cfg: GenerationConfig):
    spec = cfg.grid
    extra = {}
    height = float(rng.uniform(*cfg.transmitter_height))
    n_layers = None
    if category is ModelCategory.HalfspaceAnomaly:
        background = HALFSPACE_BACKGROUNDS[int(rng.integers(len(HALFSPACE_BACKGROUNDS)))]
        grid = build_halfspace_grid(background, spec)
        extra["background_ohm_m"] = background
    else:
        n_layers = sample_count(rng, cfg.n_layers)
        vk = VonKarmanParams(amplitude=cfg.vk_amplitude, scale=cfg.vk_scale,
                             length=float(rng.uniform(*cfg.vk_length)),
                             nu=float(rng.uniform(*cfg.vk_nu)))
        stack = sample_layer_stack(n_layers, spec, vk, rng, cfg.layer_min_thickness,
                                   cfg.layer_contrast_floor)
        r0 = build_layered_grid(stack, spec)
        grid = r0
        extra["von_karman"] = dataclasses.asdict(vk)
        extra["interface_depths_m"] = list(stack.interface_depths)
        extra["layer_resistivities"] = list(stack.resistivities)
        if category.has_faults:
            faults = []
            for _ in range(sample_count(rng, cfg.fault_iterations)):
                kind = FaultKind.Flat if rng.random() < 0.5 else FaultKind.Curved
                surf, warp = sample_fault_params(kind, spec, rng, cfg.fault)
                source = r0 if cfg.hanging_wall_source is HangingWallSource.Initial else grid
                grid = apply_fault(source, grid, surf, warp)
                faults.append({"kind": kind.value, "surface": dataclasses.asdict(surf),
                               "warp": dataclasses.asdict(warp)})
            extra["faults"] = faults
            extra["n_faults"] = len(faults)
            extra["hanging_wall_source"] = cfg.hanging_wall_source.value
        if category.has_folds:
            folds = []
            for _ in range(sample_count(rng, cfg.fold_iterations)):
                p = sample_fold_params(spec, rng, cfg.fold, cfg.fold_mode)
                grid = apply_fold(grid, p)
                d = dataclasses.asdict(p)
                d["mode"] = p.mode.value
                folds.append(d)
            extra["folds"] = folds
            extra["n_folds"] = len(folds)
            extra["fold_mode"] = cfg.fold_mode.value
    anomalies = ()
    if category.has_anomalies:
        n = sample_count(rng, cfg.anomaly.count)
        descs, masks = sample_anomaly_set(n, spec, rng, cfg.anomaly, host=grid, return_masks=True)
        overlap = False
        if len(masks) > 1:
            cover = np.zeros(spec.shape, dtype=np.int8)
            for m in masks:
                cover += m
            overlap = bool((cover > 1).any())
        grid = stamp_anomalies(grid, descs, masks)
        anomalies = tuple(descs)
        extra["anomaly_overlap"] = overlap
    return grid, n_layers, anomalies, height, extra


def generate_model(category: ModelCategory, index: int, cfg: GenerationConfig):
    """Build one model. Returns ``(VoxelGrid, ModelRecord)``.

    Sampling failures are retried with sub-seeds ``(model_seed, attempt)``
    up to ten times before :class:`SamplingError` propagates.
    """
    category = ModelCategory.parse(category) if isinstance(category, str) else category
    seed = derive_model_seed(cfg.global_seed, index)
    last = None
    for attempt in range(MAX_ATTEMPTS):
        rng = np.random.default_rng([seed, attempt])
        try:
            grid, n_layers, anomalies, height, extra = _build(category, rng, cfg)
        except SamplingError as exc:
            last = exc
            continue
        spec = cfg.grid
        extra["attempt"] = attempt
        extra["grid"] = {"shape": list(spec.shape), "cell_size": spec.cell_size,
                         "origin": list(spec.origin)}
        mid = model_id(category, index)
        record = ModelRecord(
            id=mid, category=category, seed=seed, n_layers=n_layers,
            n_anomalies=len(anomalies), anomalies=anomalies, transmitter_height_m=height,
            generator_version=GENERATOR_VERSION, grid_path=f"grids/{mid}.npy", extra=extra,
        )
        record.validate()
        return grid, record
    raise SamplingError(f"model {index} ({category.value}, seed {seed}) failed "
                        f"{MAX_ATTEMPTS} attempts; last error: {last}")


def _generate_and_write(cfg: GenerationConfig, out: Path, task) -> ModelRecord:
    category, index = task
    grid, record = generate_model(category, index, cfg)
    write_npy(grid, out / record.grid_path)
    write_metadata(record, out / "meta" / f"{record.id}.json")
    return record


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("RESGEN_WORKERS", "1")))
    except ValueError:
        return 1


def generate_batch(cfg: GenerationConfig, output_dir, workers: int = 1, progress=None) -> Manifest:
    """Generate every model in ``cfg`` into ``output_dir``.

    Layout: ``grids/<id>.npy``, ``meta/<id>.json``, ``config.txt``,
    ``dataset.json`` and finally ``manifest.jsonl``. A ``.partial`` marker
    exists while the run is in progress and is left behind on failure.
    """
    out = Path(output_dir)
    marker = out / PARTIAL_MARKER
    try:
        (out / "grids").mkdir(parents=True, exist_ok=True)
        (out / "meta").mkdir(exist_ok=True)
        marker.write_text("generation in progress\n")
    except OSError as exc:
        raise OutputError(f"cannot prepare output directory {out}: {exc}") from exc
    tasks = list(cfg.tasks())
    work = partial(_generate_and_write, cfg, out)
    records = []
    try:
        if workers <= 1:
            for n, task in enumerate(tasks, 1):
                records.append(work(task))
                if progress:
                    progress(n, len(tasks))
        else:
            chunk = max(1, min(64, len(tasks) // (4 * workers)))
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for n, rec in enumerate(pool.map(work, tasks, chunksize=chunk), 1):
                    records.append(rec)
                    if progress:
                        progress(n, len(tasks))
        (out / "config.txt").write_text(cfg.to_text())
        manifest = Manifest(records, cfg.digest(), GENERATOR_VERSION, root=out)
        write_manifest(manifest, out)
    except BaseException as exc:
        try:
            marker.write_text(f"generation failed: {type(exc).__name__}: {exc}\n")
        except OSError:
            pass
        if isinstance(exc, OSError) and not isinstance(exc, OutputError):
            raise OutputError(str(exc)) from exc
        raise
    marker.unlink()
    log.info("wrote %d models to %s", len(records), out)
    return manifest


def iter_models(cfg: GenerationConfig):
    """Yield ``(grid, record)`` for every model without touching the disk."""
    for category, index in cfg.tasks():
        yield generate_model(category, index, cfg)


def generate_grid(category, index: int = 0, cfg: GenerationConfig = None) -> VoxelGrid:
    return generate_model(category, index, cfg or GenerationConfig())[0]
