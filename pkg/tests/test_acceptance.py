"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected into an "acceptance criteria" section at the
end of the pytest terminal report.
"""
import hashlib
import math
import os
import time
from pathlib import Path

import numpy as np
from scipy.stats import chi2 as chi2_dist

from oracles import fault_oracle, k_half
from resgen.core import GridSpec, ModelCategory, ModelRecord, VoxelGrid
from resgen.export import Manifest, npy_header, read_npy, split_manifest, write_npy
from resgen.layers import sample_gaussian_profile, sample_layer_stack, build_layered_grid
from resgen.pipeline import GenerationConfig, generate_batch, iter_models
from resgen.special import VonKarmanParams, bessel_k, von_karman_matrix
from resgen.stats import anomaly_count_histogram, layer_count_histogram, relative_error
from resgen.structures import (FaultKind, FaultSurfaceParams, FaultWarpParams, FoldMode, FoldParams,
                               apply_fault, apply_fold, fault_surface_grid, sample_fault_params)

CHI2_CRIT_DF4 = 13.28


def _tree_digest(root):
    h = hashlib.sha256()
    for p in sorted(Path(root).rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode() + b"\0")
            h.update(hashlib.sha256(p.read_bytes()).digest())
    return h.hexdigest()


def test_criterion_01_bessel_oracle(acceptance_report):
    start = time.perf_counter()
    worst_closed = 0.0
    for nu in (0.5, 1.5):
        for x in (0.1, 1.0, 10.0, 30.0):
            ref = k_half(nu, x)
            worst_closed = max(worst_closed, abs(bessel_k(nu, x) - ref) / ref)
    worst_sym = 0.0
    rng = np.random.default_rng(1)
    for nu, x in zip(rng.uniform(0, 2, 500), np.exp(rng.uniform(math.log(1e-4), math.log(60), 500))):
        a, b = bessel_k(nu, x), bessel_k(-nu, x)
        worst_sym = max(worst_sym, abs(a - b) / a)
    elapsed = time.perf_counter() - start
    ok = worst_closed <= 1e-8 and worst_sym <= 1e-12 and elapsed < 1.0
    acceptance_report(1, "Bessel closed forms and symmetry", ok,
                      f"closed-form rel err {worst_closed:.2e}, symmetry {worst_sym:.2e}, {elapsed:.3f} s")
    assert ok


def test_criterion_02_covariance_fidelity(acceptance_report):
    start = time.perf_counter()
    p = VonKarmanParams(amplitude=1.0, scale=1.0, length=100.0, nu=0.5)
    depths = np.linspace(10.0, 310.0, 16)
    sigma = von_karman_matrix(depths, p)
    draws = sample_gaussian_profile(depths, p, np.random.default_rng(2024), size=100_000)
    emp = np.cov(draws, rowvar=False)
    diag_err = np.max(np.abs(np.diag(emp) - np.diag(sigma)) / np.diag(sigma))
    sd_t, sd_e = np.sqrt(np.diag(sigma)), np.sqrt(np.diag(emp))
    corr_err = np.max(np.abs(emp / np.outer(sd_e, sd_e) - sigma / np.outer(sd_t, sd_t)))
    elapsed = time.perf_counter() - start
    ok = diag_err <= 0.05 and corr_err <= 0.05 and elapsed < 60
    acceptance_report(2, "covariance fidelity", ok,
                      f"diag rel err {diag_err:.4f}, corr abs err {corr_err:.4f}, {elapsed:.1f} s")
    assert ok


def test_criterion_03_dataset_statistics(acceptance_report):
    start = time.perf_counter()
    cfg = GenerationConfig(counts={c: 1000 for c in ModelCategory}, global_seed=20240601)
    records = []
    in_range = True
    for grid, rec in iter_models(cfg):
        v = grid.values
        in_range &= bool(v.min() >= 1.0 and v.max() <= 2000.0 and np.isfinite(v).all())
        records.append(rec)
    layers = layer_count_histogram(records)
    anomalies = anomaly_count_histogram(records)
    elapsed = time.perf_counter() - start
    ok = (len(records) == 9000 and layers.chi2 < CHI2_CRIT_DF4 and anomalies.chi2 < CHI2_CRIT_DF4
          and in_range)
    acceptance_report(3, "9,000-model histograms and value range", ok,
                      f"layer chi2 {layers.chi2:.2f} counts {layers.counts}, anomaly chi2 "
                      f"{anomalies.chi2:.2f} counts {anomalies.counts}, all voxels in [1, 2000]: "
                      f"{in_range}, {elapsed:.0f} s on {os.cpu_count()} core(s)")
    assert ok


def test_criterion_04_fault_branch_exactness(acceptance_report):
    # same physical extent as the default grid at half the resolution, so the
    # per-voxel oracle stays affordable
    spec = GridSpec(nx=32, ny=32, nz=16, cell_size=20.0)
    rng = np.random.default_rng(404)
    above_ok = below_ok = True
    n_faults = 0
    for model in range(100):
        if model % 2 == 0:
            stack = sample_layer_stack(int(rng.integers(3, 8)), spec, VonKarmanParams(nu=0.5, length=150.0), rng)
            r0 = build_layered_grid(stack, spec)
        else:
            palette = rng.uniform(1.0, 2000.0, 16).astype(np.float32)
            r0 = VoxelGrid(spec, palette[rng.integers(16, size=spec.shape)])
        grid = r0
        for _ in range(int(rng.integers(1, 4))):
            kind = FaultKind.Flat if rng.random() < 0.5 else FaultKind.Curved
            surf, warp = sample_fault_params(kind, spec, rng)
            out = apply_fault(r0, grid, surf, warp)
            f = fault_surface_grid(surf, spec)
            above = spec.centers(2)[None, None, :] < f[:, :, None]
            above_ok &= out.values[above].tobytes() == grid.values[above].tobytes()
            ref = fault_oracle(r0, grid, surf, warp)
            below_ok &= out.values[~above].tobytes() == ref[~above].tobytes()
            grid = out
            n_faults += 1
    ok = above_ok and below_ok
    acceptance_report(4, "fault branch exactness", ok,
                      f"100 models, {n_faults} faults, foot wall bitwise: {above_ok}, "
                      f"hanging wall equals oracle: {below_ok}")
    assert ok


def test_criterion_05_degeneracy_identities(acceptance_report):
    spec = GridSpec()
    rng = np.random.default_rng(505)
    fold_ok = fault_ok = True
    for _ in range(100):
        g = VoxelGrid(spec, rng.uniform(1.0, 2000.0, spec.shape).astype(np.float32))
        for mode in FoldMode:
            p = FoldParams(a=0.0, kx=rng.uniform(0, 0.01), ky=rng.uniform(0, 0.01),
                           phix=rng.uniform(0, 6), phiy=rng.uniform(0, 6), mode=mode)
            fold_ok &= apply_fold(g, p).tobytes() == g.tobytes()
        a1, a2 = rng.uniform(10, 40, 2)
        surf = FaultSurfaceParams(c=0.0, d=0.0, A1=a1, A2=a2, omega1=0.01, omega2=0.02,
                                  phi1=rng.uniform(0, 6), phi2=rng.uniform(0, 6),
                                  e=spec.total_depth + a1 + a2 + 1.0)
        warp = FaultWarpParams(a=rng.uniform(0, 60), k=0.003, s=rng.uniform(0, 100), s_prime=rng.uniform(-80, 80))
        src = VoxelGrid(spec, rng.uniform(1.0, 2000.0, spec.shape).astype(np.float32))
        fault_ok &= apply_fault(src, g, surf, warp).tobytes() == g.tobytes()
    ok = fold_ok and fault_ok
    acceptance_report(5, "degeneracy identities", ok,
                      f"fold a=0 identity: {fold_ok}, fault below domain identity: {fault_ok}")
    assert ok


def test_criterion_06_worker_determinism(acceptance_report, tmp_path):
    cfg = GenerationConfig(counts={c: 10 for c in ModelCategory}, global_seed=606)
    generate_batch(cfg, tmp_path / "w1", workers=1)
    generate_batch(cfg, tmp_path / "w8", workers=8)
    a, b = _tree_digest(tmp_path / "w1"), _tree_digest(tmp_path / "w8")
    n_files = sum(1 for p in (tmp_path / "w1").rglob("*") if p.is_file())
    ok = a == b
    acceptance_report(6, "workers 1 vs 8 byte-identical", ok, f"{n_files} files, tree sha256 {a[:16]}")
    assert ok


def test_criterion_07_npy_round_trip(acceptance_report, tmp_path):
    rng = np.random.default_rng(707)
    path = tmp_path / "g.npy"
    all_ok = True
    for n in range(1000):
        if n % 2:
            spec = GridSpec()
        else:
            spec = GridSpec(nx=int(rng.integers(2, 40)), ny=int(rng.integers(2, 40)), nz=int(rng.integers(2, 40)))
        g = VoxelGrid(spec, (10.0 ** rng.uniform(0, math.log10(2000), spec.shape)).clip(1, 2000).astype(np.float32))
        write_npy(g, path)
        all_ok &= read_npy(path).tobytes() == g.tobytes()
    body = b"{'descr': '<f4', 'fortran_order': False, 'shape': (64, 64, 32), }"
    expected = b"\x93NUMPY" + bytes([1, 0]) + (118).to_bytes(2, "little") + body.ljust(117) + b"\n"
    header_ok = npy_header((64, 64, 32)) == expected
    write_npy(VoxelGrid(GridSpec(), np.ones((64, 64, 32), np.float32)), path)
    size_ok = path.stat().st_size == 128 + 64 * 64 * 32 * 4
    ok = all_ok and header_ok and size_ok
    acceptance_report(7, "NPY round trip and header layout", ok,
                      f"1000 grids bitwise: {all_ok}, default header: {header_ok}, file size: {size_ok}")
    assert ok


def test_criterion_08_split(acceptance_report):
    rng = np.random.default_rng(808)
    cats = list(ModelCategory)
    records = [ModelRecord(id=f"m{i:07d}", category=cats[int(c)], seed=i, n_anomalies=0,
                           transmitter_height_m=50.0, generator_version="t", grid_path=f"g/{i}.npy")
               for i, c in enumerate(rng.integers(0, 9, 10_000))]
    manifest = Manifest(records, "d", "t")
    split = split_manifest(manifest, (8, 1, 1), seed=42)
    sizes = (len(split.train), len(split.validation), len(split.test))
    ids = set(split.train) | set(split.validation) | set(split.test)
    disjoint = len(ids) == 10_000
    by_id = {r.id: r.category for r in records}
    strat = True
    for cat in cats:
        n = sum(1 for r in records if r.category is cat)
        for part, r in zip((split.train, split.validation, split.test), (8, 1, 1)):
            k = sum(1 for i in part if by_id[i] is cat)
            strat &= n * r // 10 <= k <= -(-n * r // 10)
    repeat = split_manifest(manifest, (8, 1, 1), seed=42) == split
    differs = split_manifest(manifest, (8, 1, 1), seed=43) != split
    ok = sizes == (8000, 1000, 1000) and disjoint and strat and repeat and differs
    acceptance_report(8, "stratified 8:1:1 split", ok,
                      f"sizes {sizes}, partition: {disjoint}, per-category bounds: {strat}, "
                      f"same seed identical: {repeat}, other seed differs: {differs}")
    assert ok


def test_criterion_09_relative_error(acceptance_report):
    rng = np.random.default_rng(909)
    example = relative_error([1.0, 2.0], [2.0, 2.0]) == 25.0
    zero_iff_equal = scale = True
    for _ in range(2000):
        n = int(rng.integers(1, 50))
        ref = rng.normal(size=n) * 10.0 ** rng.uniform(-3, 3)
        pred = ref.copy()
        zero_iff_equal &= relative_error(pred, ref) == 0.0
        pred[int(rng.integers(n))] += rng.choice([-1, 1]) * 10.0 ** rng.uniform(-6, 2)
        e = relative_error(pred, ref)
        zero_iff_equal &= e > 0.0
        # power-of-two factors scale exactly, so the metric must not move at all
        c2 = 2.0 ** int(rng.integers(-20, 21))
        scale &= relative_error(c2 * pred, c2 * ref) == e
        # general factors: allow the rounding of the scaled inputs, amplified by
        # cancellation in |pred - ref|
        c = 10.0 ** rng.uniform(-3, 3)
        cond = np.abs(ref).sum() / np.abs(pred - ref).sum()
        scale &= math.isclose(relative_error(c * pred, c * ref), e, rel_tol=1e-12 + 8 * 2.0**-52 * cond)
    ok = example and zero_iff_equal and scale
    acceptance_report(9, "relative_error properties", ok,
                      f"[1,2] vs [2,2] = 25.0: {example}, zero iff equal: {zero_iff_equal}, "
                      f"scale invariance: {scale}")
    assert ok


def test_criterion_10_throughput(acceptance_report, tmp_path):
    workers = min(8, os.cpu_count() or 1)
    cfg = GenerationConfig(counts={c: 112 for c in ModelCategory}, global_seed=1010)
    start = time.perf_counter()
    manifest = generate_batch(cfg, tmp_path, workers=workers)
    elapsed = time.perf_counter() - start
    n = len(list((tmp_path / "grids").glob("*.npy")))
    ok = len(manifest) == n == 1008 and elapsed < 120.0
    acceptance_report(10, "throughput", ok,
                      f"{n} models generated and written in {elapsed:.1f} s with {workers} worker(s) "
                      f"on {os.cpu_count()} core(s)")
    assert ok
