"""Compare the numba and numpy kernel paths.

Usage::

    python benchmarks/bench_kernels.py [--repeat 20] [--models 200]

Kernel timings run in-process on default-size (64 x 64 x 32) inputs. The
end-to-end figure generates ``--models`` models in a subprocess per path,
with ``RESGEN_DISABLE_JIT`` set accordingly.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from resgen import _accel, kernels
from resgen.core import GridSpec

E2E = """
import time
from resgen import generate_model, GenerationConfig
from resgen.core import ModelCategory
cfg = GenerationConfig()
cats = list(ModelCategory)
generate_model(cats[-1], 0, cfg)  # warm-up (JIT compile or cache load)
t = time.perf_counter()
for i in range({n}):
    generate_model(cats[i % 9], i, cfg)
print(time.perf_counter() - t)
"""


def kernel_cases():
    spec = GridSpec()
    rng = np.random.default_rng(0)
    prev = rng.uniform(1, 2000, spec.shape).astype(np.float32)
    src = rng.uniform(1, 2000, spec.shape).astype(np.float32)
    xc, yc, zc = spec.centers(0), spec.centers(1), spec.centers(2)
    surface = rng.uniform(0, spec.total_depth, (spec.nx, spec.ny))
    ix = rng.integers(spec.nx, size=spec.nx)
    iy = rng.integers(spec.ny, size=spec.ny)
    iz = rng.integers(spec.nz, size=spec.nz)
    shift = rng.uniform(-50, 50, (spec.nx, spec.ny))
    liy = rng.integers(spec.ny, size=spec.nx)
    liz = rng.integers(spec.nz, size=spec.nx)
    body = (320.0, 320.0, 160.0, 100.0, 60.0, 80.0, 0.8, 0.6)
    return {
        "fault_select": ((prev, src, surface, zc, ix, iy, iz),),
        "fold_shear": ((prev, shift, zc, 0.0, spec.cell_size),),
        "fold_literal": ((prev, liy, liz),),
        "rasterize": tuple((code, xc, yc, zc) + body for code in range(4)),
    }


def bench(fn, arg_sets, repeat):
    for args in arg_sets:
        fn(*args)  # compile / warm caches
    t = timeit.timeit(lambda: [fn(*a) for a in arg_sets], number=repeat)
    return 1e3 * t / repeat


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--models", type=int, default=200)
    args = ap.parse_args()

    print(f"numba available: {_accel.HAVE_NUMBA}")
    print(f"{'kernel':<14}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name, arg_sets in kernel_cases().items():
        t_np = bench(getattr(kernels, f"{name}_np"), arg_sets, args.repeat)
        if _accel.HAVE_NUMBA:
            t_jit = bench(getattr(kernels, f"{name}_jit"), arg_sets, args.repeat)
            print(f"{name:<14}{t_jit:>12.3f}{t_np:>12.3f}{t_np / t_jit:>9.1f}x")
        else:
            print(f"{name:<14}{'-':>12}{t_np:>12.3f}{'-':>10}")

    print(f"\nend to end, {args.models} models (all categories):")
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, RESGEN_DISABLE_JIT=flag)
        res = subprocess.run([sys.executable, "-c", E2E.format(n=args.models)], env=env,
                             capture_output=True, text=True, check=True)
        secs = float(res.stdout.strip())
        print(f"  {label:<6} {secs:7.2f} s  ({1e3 * secs / args.models:.2f} ms/model)")


if __name__ == "__main__":
    main()
