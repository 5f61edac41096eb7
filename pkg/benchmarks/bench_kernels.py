"""Compiled vs pure-Python kernels on representative workloads.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import random
import timeit

import numpy as np

from dominotower import domino, hypgeo, kernels
from dominotower.towers import TowerSpec, build_patch


def _walks(pres):
    walks = [[] for _ in range(pres.n_letters)]
    for r in hypgeo.symmetrized(pres):
        walks[r[0]].append(hypgeo._inv(r[1:]))
    return walks


def workloads():
    pres = hypgeo.surface_group(2)
    walks = _walks(pres)
    b = hypgeo.ball(pres, 5)
    rng = np.random.default_rng(0)
    starts = rng.integers(0, b.size, 4000)
    words = [list(rng.integers(0, 8, 3)) for _ in range(64)]
    r = random.Random(0)
    cols = list(range(3))
    trip = {(a, s, c) for a in cols for s in ("h", "v0") for c in cols if r.random() < 0.5}
    inst = domino.DominoInstance(cols, ["h", "v0"], trip)
    patch = build_patch(TowerSpec.grid(), 8, (0, 8))
    return {
        "cayley_bfs surface R=5": lambda m: m.cayley_bfs(8, walks, 5, 10**7),
        "norm_profile 4000x64": lambda m: m.norm_profile(b.adj, b.norm, starts, words),
        "walk_many 4000 starts": lambda m: m.walk_many(b.adj, starts, [0, 2, 1, 3, 4]),
        "solve_patch 8x8 grid": lambda m: domino.solve_patch(patch, inst, backend=m),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = kernels.backends()
    if "compiled" not in backends:
        print("compiled extension not built; timing the pure-Python kernels only")
    print(f"{'workload':28s}" + "".join(f"{name:>12s}" for name in backends) + "     speedup")
    for name, fn in workloads().items():
        times = {b: min(timeit.repeat(lambda: fn(m), number=1, repeat=args.repeat))
                 for b, m in backends.items()}
        row = f"{name:28s}" + "".join(f"{times[b]:11.4f}s" for b in backends)
        if "compiled" in times:
            row += f"  {times['python'] / max(times['compiled'], 1e-9):9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
