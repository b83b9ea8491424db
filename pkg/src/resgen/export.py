"""Byte-deterministic dataset serialization.

* grids: NPY format 1.0, ``<f4``, C order, shape ``(nx, ny, nz)``
* metadata: canonical JSON (sorted keys, compact separators, ``repr`` floats)
* manifest: JSON lines, one record per line
* slices: 8-bit binary PGM (P5), gray level ``round(255 log10(rho) / log10(2000))``
"""
from __future__ import annotations

import ast
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import LOG_RHO_MAX, GridSpec, ModelCategory, ModelRecord, VoxelGrid
from .errors import BoundsError, FormatError, ValidationError

NPY_MAGIC = b"\x93NUMPY"
NPY_VERSION = (1, 0)
NPY_ALIGN = 64

MANIFEST_NAME = "manifest.jsonl"
DATASET_NAME = "dataset.json"


def npy_header(shape) -> bytes:
    """Complete NPY 1.0 preamble (magic through newline) for a ``<f4`` C-order array."""
    shape = tuple(int(s) for s in shape)
    text = "{'descr': '<f4', 'fortran_order': False, 'shape': %r, }" % (shape,)
    pad = -(len(NPY_MAGIC) + 2 + 2 + len(text) + 1) % NPY_ALIGN
    text = text + " " * pad + "\n"
    return NPY_MAGIC + bytes(NPY_VERSION) + struct.pack("<H", len(text)) + text.encode("latin1")


def npy_bytes(grid: VoxelGrid) -> bytes:
    return npy_header(grid.spec.shape) + grid.tobytes()


def write_npy(grid: VoxelGrid, path) -> None:
    Path(path).write_bytes(npy_bytes(grid))


def parse_npy(data: bytes, cell_size: float = 10.0, origin=(0.0, 0.0, 0.0)) -> VoxelGrid:
    if len(data) < 10 or data[:6] != NPY_MAGIC:
        raise FormatError("not an NPY file (bad magic)")
    if tuple(data[6:8]) != NPY_VERSION:
        raise FormatError(f"unsupported NPY version {tuple(data[6:8])}")
    (hlen,) = struct.unpack("<H", data[8:10])
    start = 10 + hlen
    if len(data) < start:
        raise FormatError("truncated NPY header")
    text = data[10:start].decode("latin1")
    if not text.endswith("\n") or start % NPY_ALIGN:
        raise FormatError("NPY header is not newline-terminated and 64-byte aligned")
    try:
        header = ast.literal_eval(text.strip())
    except (SyntaxError, ValueError) as exc:
        raise FormatError(f"unparseable NPY header: {text!r}") from exc
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise FormatError(f"unexpected NPY header keys: {header!r}")
    if header["descr"] != "<f4" or header["fortran_order"] is not False:
        raise FormatError(f"expected little-endian float32 in C order, got {header!r}")
    shape = header["shape"]
    if not (isinstance(shape, tuple) and len(shape) == 3 and all(isinstance(s, int) for s in shape)):
        raise FormatError(f"expected a 3-D shape, got {shape!r}")
    n = shape[0] * shape[1] * shape[2]
    payload = data[start:]
    if len(payload) != 4 * n:
        raise FormatError(f"payload has {len(payload)} bytes, shape {shape} needs {4 * n}")
    values = np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)
    spec = GridSpec(*shape, cell_size=cell_size, origin=tuple(origin))
    return VoxelGrid(spec, values)


def read_npy(path, cell_size: float = 10.0, origin=(0.0, 0.0, 0.0)) -> VoxelGrid:
    """Read a grid written by :func:`write_npy`.

    NPY carries no geometry, so ``cell_size`` and ``origin`` are supplied by
    the caller (the model's metadata records them under ``extra.grid``).
    """
    return parse_npy(Path(path).read_bytes(), cell_size, origin)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True,
                      allow_nan=False) + "\n"


def write_metadata(record: ModelRecord, path) -> None:
    record.validate()
    Path(path).write_text(canonical_json(record.to_dict()), encoding="ascii")


def read_metadata(path) -> ModelRecord:
    return ModelRecord.from_dict(json.loads(Path(path).read_text(encoding="ascii")))


@dataclass
class Manifest:
    records: list
    config_digest: str
    generator_version: str
    root: Path = None

    def __len__(self):
        return len(self.records)

    def grid_file(self, record: ModelRecord) -> Path:
        return (self.root or Path(".")) / record.grid_path


def write_manifest(manifest: Manifest, directory) -> Path:
    directory = Path(directory)
    ids = [r.id for r in manifest.records]
    if len(set(ids)) != len(ids):
        raise ValidationError("manifest ids are not unique")
    info = {
        "config_digest": manifest.config_digest,
        "generator_version": manifest.generator_version,
        "n_models": len(manifest.records),
    }
    (directory / DATASET_NAME).write_text(canonical_json(info), encoding="ascii")
    path = directory / MANIFEST_NAME
    path.write_text("".join(canonical_json(r.to_dict()) for r in manifest.records), encoding="ascii")
    return path


def read_manifest(path) -> Manifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    records = []
    with path.open(encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(ModelRecord.from_dict(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON") from exc
    info_path = path.parent / DATASET_NAME
    info = json.loads(info_path.read_text()) if info_path.exists() else {}
    return Manifest(records, info.get("config_digest", ""), info.get("generator_version", ""),
                    root=path.parent)


@dataclass(frozen=True)
class SplitAssignment:
    train: tuple
    validation: tuple
    test: tuple

    def to_dict(self) -> dict:
        return {"train": list(self.train), "validation": list(self.validation), "test": list(self.test)}


def largest_remainder(n: int, ratio) -> list:
    """Integer sizes summing to ``n`` in proportion to ``ratio``."""
    total = sum(ratio)
    sizes = [n * r // total for r in ratio]
    rems = [n * r % total for r in ratio]
    order = sorted(range(len(ratio)), key=lambda i: (-rems[i], i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def parse_ratio(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 3:
        raise ValidationError(f"ratio must have three terms like 8:1:1, got {text!r}")
    try:
        ratio = tuple(int(p) for p in parts)
    except ValueError as exc:
        raise ValidationError(f"ratio terms must be integers, got {text!r}") from exc
    if any(r < 0 for r in ratio) or sum(ratio) == 0:
        raise ValidationError(f"ratio terms must be non-negative and not all zero, got {text!r}")
    return ratio


def _augment(extra, rems, need) -> list:
    """Assign one extra unit per (group, column) edge by augmenting paths.

    Groups supply ``extra[g]`` units, columns absorb ``need[i]`` units, and a
    group may feed a column only where its quota has a fractional part.
    """
    n_cols = len(need)
    used = [[0] * n_cols for _ in extra]
    left = list(extra)
    room = list(need)

    def find_path(g, seen):
        # depth-first search for a path from group g to a column with room
        for i in range(n_cols):
            if rems[g][i] == 0 or used[g][i] or i in seen:
                continue
            seen.add(i)
            if room[i] > 0:
                return [(g, i)]
            for h in range(len(extra)):
                if used[h][i]:
                    tail = find_path_from_group(h, i, seen)
                    if tail is not None:
                        return [(g, i)] + tail
        return None

    def find_path_from_group(h, freed, seen):
        # move h's unit off column `freed` onto another column
        tail = find_path(h, seen)
        if tail is None:
            return None
        return [(h, -freed - 1)] + tail

    for g in range(len(extra)):
        while left[g] > 0:
            path = find_path(g, set())
            if path is None:
                break
            for h, i in path:
                if i < 0:
                    used[h][-i - 1] = 0
                else:
                    used[h][i] = 1
            room[path[-1][1]] -= 1
            left[g] -= 1
    return used


def stratified_sizes(group_sizes, ratio) -> list:
    """Per-group partition sizes that also hit the global targets.

    Every entry is the floor or ceiling of its quota ``n_g * r_i / sum(r)``,
    every row sums to ``n_g``, and every column sums to
    ``largest_remainder(sum(n_g), ratio)``. The rounding-up units are placed
    by bipartite matching between groups and columns.
    """
    total = sum(ratio)
    floors = [[n * r // total for r in ratio] for n in group_sizes]
    rems = [[n * r % total for r in ratio] for n in group_sizes]
    targets = largest_remainder(sum(group_sizes), ratio)
    need = [t - sum(row[i] for row in floors) for i, t in enumerate(targets)]
    extra = [n - sum(row) for n, row in zip(group_sizes, floors)]
    used = _augment(extra, rems, need)
    return [[f + u for f, u in zip(frow, urow)] for frow, urow in zip(floors, used)]


def split_manifest(manifest, ratio=(8, 1, 1), seed: int = 0) -> SplitAssignment:
    """Stratified train/validation/test split.

    Each category is shuffled with its own stream derived from ``(seed,
    category position)`` and cut into sizes from :func:`stratified_sizes`.
    Ids inside each partition keep manifest order.
    """
    records = manifest.records if isinstance(manifest, Manifest) else list(manifest)
    if not records:
        raise ValidationError("cannot split an empty manifest")
    if len(ratio) != 3:
        raise ValidationError("ratio must have three terms")
    position = {r.id: n for n, r in enumerate(records)}
    groups = []
    for cpos, cat in enumerate(ModelCategory):
        ids = [r.id for r in records if r.category is cat]
        if ids:
            groups.append((cpos, ids))
    sizes = stratified_sizes([len(ids) for _, ids in groups], ratio)
    parts = ([], [], [])
    for (cpos, ids), row in zip(groups, sizes):
        perm = np.random.default_rng([int(seed), cpos]).permutation(len(ids))
        start = 0
        for part, size in zip(parts, row):
            part.extend(ids[p] for p in perm[start:start + size])
            start += size
    return SplitAssignment(*(tuple(sorted(p, key=position.__getitem__)) for p in parts))


def slice_pixels(grid: VoxelGrid, axis: str, index: int) -> np.ndarray:
    """8-bit image of one slice.

    ``z`` slices are (y rows, x columns); ``x`` and ``y`` slices put depth
    down the rows.
    """
    axes = {"x": 0, "y": 1, "z": 2}
    if axis not in axes:
        raise ValidationError(f"axis must be x, y or z, got {axis!r}")
    ax = axes[axis]
    n = grid.spec.shape[ax]
    if not 0 <= index < n:
        raise BoundsError(f"slice index {index} out of range [0, {n})")
    plane = np.take(grid.values, index, axis=ax).astype(np.float64)
    img = plane.T  # x-slice (y, z) -> (z, y); y-slice (x, z) -> (z, x); z-slice (x, y) -> (y, x)
    level = np.floor(255.0 * np.log10(img) / LOG_RHO_MAX + 0.5)
    return np.clip(level, 0, 255).astype(np.uint8)


def pgm_bytes(pixels: np.ndarray) -> bytes:
    rows, cols = pixels.shape
    return b"P5\n%d %d\n255\n" % (cols, rows) + np.ascontiguousarray(pixels, dtype=np.uint8).tobytes()


def export_slice(grid: VoxelGrid, axis: str, index: int, path) -> None:
    Path(path).write_bytes(pgm_bytes(slice_pixels(grid, axis, index)))


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    tokens = data.split(maxsplit=4)
    if len(tokens) < 5 or tokens[0] != b"P5" or tokens[3] != b"255":
        raise FormatError("not an 8-bit binary PGM")
    cols, rows = int(tokens[1]), int(tokens[2])
    body = data[len(data) - rows * cols:]
    return np.frombuffer(body, dtype=np.uint8).reshape(rows, cols)

