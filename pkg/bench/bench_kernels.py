"""Compare the compiled and pure-Python kernel backends.

Usage: python3 bench/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from demri_eval import kernels
from demri_eval.metrics import hausdorff3d
from demri_eval.model import Volume3D
from demri_eval.radiomics import glcm
from demri_eval.scarseg import watershed_refine
from demri_eval.synthetic import ring_phantom


def _best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def workloads():
    rng = np.random.default_rng(0)
    v, truth = ring_phantom(rng, shape=(128, 128, 10), r_inner=25, r_outer=38)
    myo = np.isin(truth.labels, [2, 3, 4])
    rr, cc, zz = np.ogrid[:96, :96, :12]
    a = np.broadcast_to(np.hypot(rr - 48, cc - 48) < 30, (96, 96, 12))
    b = np.hypot(rr - 45, cc - 50) + zz < 33
    vol = Volume3D(rng.normal(size=(128, 128, 10)))
    region = rng.random((128, 128, 10)) < 0.6
    return {
        "watershed (128x128x10)": lambda be: watershed_refine(v, myo, 150.0, 30.0, be),
        "hausdorff (96x96x12 discs)": lambda be: hausdorff3d(a, b, (1.25, 1.25, 10.0), be),
        "glcm (128x128x10, 16 levels)": lambda be: glcm(vol, region, 16, (0, 1), be),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = sorted(kernels.BACKENDS)
    print(f"backends available: {', '.join(backends)} (default: {kernels.BACKEND})")
    print(f"{'kernel':32s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, fn in workloads().items():
        times = {be: _best_of(lambda: fn(be), args.repeat) for be in backends}
        row = f"{name:32s}" + "".join(f"{times[b] * 1e3:10.1f}ms" for b in backends)
        if "compiled" in times:
            row += f"{times['python'] / times['compiled']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
