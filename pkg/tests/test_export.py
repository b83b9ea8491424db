import io
import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from resgen.core import GridSpec, ModelCategory, ModelRecord, VoxelGrid
from resgen.errors import BoundsError, FormatError, ValidationError
from resgen.export import (Manifest, canonical_json, export_slice, largest_remainder, npy_header,
                           parse_npy, parse_ratio, read_manifest, read_metadata, read_npy, read_pgm,
                           slice_pixels, split_manifest, stratified_sizes, write_manifest,
                           write_metadata, write_npy)

SPEC = GridSpec()


def _grid(spec=SPEC, seed=0):
    rng = np.random.default_rng(seed)
    return VoxelGrid(spec, rng.uniform(1, 2000, spec.shape).astype(np.float32))


def test_default_header_layout():
    body = b"{'descr': '<f4', 'fortran_order': False, 'shape': (64, 64, 32), }"
    expected = b"\x93NUMPY\x01\x00" + struct.pack("<H", 118) + body + b" " * (117 - len(body)) + b"\n"
    assert len(expected) == 128
    assert npy_header(SPEC.shape) == expected
    buf = io.BytesIO()
    np.save(buf, np.zeros(SPEC.shape, dtype="<f4"))
    assert buf.getvalue()[:128] == expected


def test_file_size_and_numpy_interop(tmp_path):
    g = _grid()
    path = tmp_path / "g.npy"
    write_npy(g, path)
    assert path.stat().st_size == 128 + 524288
    assert np.array_equal(np.load(path), g.values)
    buf = io.BytesIO()
    np.save(buf, g.values)
    assert path.read_bytes() == buf.getvalue()


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 9), st.integers(2, 9), st.integers(2, 9), st.integers(0, 2**32))
def test_round_trip_any_shape(nx, ny, nz, seed):
    spec = GridSpec(nx=nx, ny=ny, nz=nz)
    g = _grid(spec, seed)
    from resgen.export import npy_bytes
    data = npy_bytes(g)
    assert len(data) % 64 == (4 * spec.size) % 64
    assert parse_npy(data).tobytes() == g.tobytes()


def test_bad_files(tmp_path):
    good = (tmp_path / "g.npy")
    write_npy(_grid(GridSpec(nx=2, ny=2, nz=2)), good)
    data = good.read_bytes()
    with pytest.raises(FormatError):
        parse_npy(b"\x93NUMPX" + data[6:])
    with pytest.raises(FormatError):
        parse_npy(data[:-4])
    with pytest.raises(FormatError):
        parse_npy(data.replace(b"<f4", b"<f8"))
    with pytest.raises(FormatError):
        parse_npy(data[:6] + b"\x02\x00" + data[8:])
    buf = io.BytesIO()
    np.save(buf, np.ones((2, 2), dtype="<f4"))
    with pytest.raises(FormatError):
        parse_npy(buf.getvalue())
    with pytest.raises(FileNotFoundError):
        read_npy(tmp_path / "missing.npy")


def _record(i=0, cat=ModelCategory.Layered, height=50.0):
    return ModelRecord(id=f"m{i:07d}", category=cat, seed=i, n_anomalies=0,
                       transmitter_height_m=height, generator_version="test",
                       grid_path=f"grids/m{i:07d}.npy", n_layers=3 + i % 5, extra={"b": 1.5, "a": [1, 2]})


def test_metadata_deterministic(tmp_path):
    r = _record()
    write_metadata(r, tmp_path / "a.json")
    write_metadata(r, tmp_path / "b.json")
    a = (tmp_path / "a.json").read_bytes()
    assert a == (tmp_path / "b.json").read_bytes()
    assert a.endswith(b"\n") and b" " not in a
    assert list(json.loads(a)) == sorted(json.loads(a))
    assert read_metadata(tmp_path / "a.json") == r


@pytest.mark.parametrize("height,ok", [(25.0, True), (100.0, True), (101.0, False), (24.9, False)])
def test_metadata_height_bounds(tmp_path, height, ok):
    if ok:
        write_metadata(_record(height=height), tmp_path / "m.json")
    else:
        with pytest.raises(ValidationError):
            write_metadata(_record(height=height), tmp_path / "m.json")


def test_canonical_json_rejects_nan():
    with pytest.raises(ValueError):
        canonical_json({"x": float("nan")})


def test_manifest_round_trip(tmp_path):
    m = Manifest([_record(i) for i in range(5)], "digest", "v1", root=tmp_path)
    write_manifest(m, tmp_path)
    back = read_manifest(tmp_path / "manifest.jsonl")
    assert back.records == m.records and back.config_digest == "digest"
    with pytest.raises(ValidationError):
        write_manifest(Manifest([_record(1), _record(1)], "d", "v"), tmp_path)
    (tmp_path / "manifest.jsonl").write_text("{not json\n")
    with pytest.raises(FormatError):
        read_manifest(tmp_path)


def test_largest_remainder():
    assert largest_remainder(10, (8, 1, 1)) == [8, 1, 1]
    assert largest_remainder(10_000, (8, 1, 1)) == [8000, 1000, 1000]
    assert largest_remainder(11, (8, 1, 1)) == [9, 1, 1]
    assert largest_remainder(7, (1, 1, 1)) == [3, 2, 2]


@settings(max_examples=200)
@given(st.lists(st.integers(0, 5000), min_size=1, max_size=9).filter(lambda g: sum(g) > 0),
       st.tuples(st.integers(0, 9), st.integers(0, 9), st.integers(0, 9)).filter(lambda r: sum(r) > 0))
def test_stratified_sizes_bounds(groups, ratio):
    sizes = stratified_sizes(groups, ratio)
    total = sum(ratio)
    assert [sum(r[i] for r in sizes) for i in range(3)] == largest_remainder(sum(groups), ratio)
    for n, row in zip(groups, sizes):
        assert sum(row) == n
        for v, r in zip(row, ratio):
            assert n * r // total <= v <= -(-n * r // total)


def _manifest(counts):
    recs, i = [], 0
    for cat, n in counts.items():
        for _ in range(n):
            recs.append(ModelRecord(id=f"m{i:07d}", category=cat, seed=i, n_anomalies=0,
                                    transmitter_height_m=50.0, generator_version="t",
                                    grid_path=f"grids/{i}.npy", n_layers=3))
            i += 1
    return Manifest(recs, "d", "t")


def test_split_examples():
    s = split_manifest(_manifest({ModelCategory.Layered: 10}), (8, 1, 1), seed=3)
    assert (len(s.train), len(s.validation), len(s.test)) == (8, 1, 1)
    assert split_manifest(_manifest({ModelCategory.Layered: 10}), (8, 1, 1), seed=3) == s
    ids = s.train + s.validation + s.test
    assert sorted(ids) == sorted(r.id for r in _manifest({ModelCategory.Layered: 10}).records)
    assert split_manifest(_manifest({ModelCategory.Layered: 10}), (8, 1, 1), seed=4) != s


def test_split_empty_and_ratio_parsing():
    with pytest.raises(ValidationError):
        split_manifest(Manifest([], "", ""))
    assert parse_ratio("8:1:1") == (8, 1, 1)
    for bad in ("7:2", "8:1:1:0", "a:b:c", "0:0:0", "-1:1:1"):
        with pytest.raises(ValidationError):
            parse_ratio(bad)


def test_slices(tmp_path):
    assert np.all(slice_pixels(VoxelGrid(SPEC, np.ones(SPEC.shape)), "z", 0) == 0)
    assert np.all(slice_pixels(VoxelGrid(SPEC, np.full(SPEC.shape, 2000.0)), "x", 5) == 255)
    g = _grid()
    export_slice(g, "z", 3, tmp_path / "s.pgm")
    img = read_pgm(tmp_path / "s.pgm")
    assert img.shape == (64, 64)
    level = np.floor(255 * np.log10(g.values[:, :, 3].astype(np.float64)) / np.log10(2000) + 0.5)
    assert np.array_equal(img, level.T.astype(np.uint8))
    assert slice_pixels(g, "x", 0).shape == (32, 64)
    with pytest.raises(BoundsError):
        slice_pixels(g, "z", 32)
    with pytest.raises(ValidationError):
        slice_pixels(g, "w", 0)
