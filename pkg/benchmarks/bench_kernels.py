"""Compiled vs pure-Python kernels: Hungarian solve, box cost matrix and a full Box-ICP run.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import math
import timeit

import numpy as np

from boxswarm import kernels
from boxswarm.registration import BoxSet, box_icp
from boxswarm.sim.scene import SyntheticDetector, make_scene, render_view, sample_pose


def cases():
    rng = np.random.default_rng(0)
    scene = make_scene(9, 4096.0, rng)
    ref = BoxSet(scene.corners(), scene.ids)
    view = render_view(scene, sample_pose(scene, rng), SyntheticDetector(1.0, 2.0), rng).observed
    square = rng.random((50, 50))
    wide = rng.random((10, 40))
    return {
        "lsa 50x50": lambda: kernels.lsa(square),
        "lsa 10x40": lambda: kernels.lsa(wide),
        "box_cost_matrix 9x9": lambda: kernels.box_cost_matrix(ref.corners, view.corners),
        "box_icp 9 boxes": lambda: box_icp(ref, view),
    }


def best_time(fn, repeat):
    number = max(1, int(0.2 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    if kernels.compiled() is None:
        raise SystemExit("compiled kernels not built; run `pip install -e . --no-build-isolation` first")
    results = {}
    for backend in ("cython", "python"):
        with kernels.use_backend(backend):
            for name, fn in cases().items():
                results.setdefault(name, {})[backend] = best_time(fn, args.repeat)
    print(f"{'kernel':<22}{'cython':>12}{'python':>12}{'speedup':>10}")
    for name, t in results.items():
        speedup = t["python"] / t["cython"] if t["cython"] > 0 else math.inf
        print(f"{name:<22}{t['cython'] * 1e6:>10.1f}us{t['python'] * 1e6:>10.1f}us{speedup:>9.1f}x")


if __name__ == "__main__":
    main()
