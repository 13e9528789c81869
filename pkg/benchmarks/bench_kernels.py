"""Time the numba and numpy kernel backends on the same deep-layer workload.

    python3 benchmarks/bench_kernels.py --vertices 20000 --states 20 --arcs 3
"""

import argparse
import time

import numpy as np

from cgmm import kernels
from cgmm.layer import StateAssignmentTable, _deep_args, _symbols, init_params, neighbor_frequency
from cgmm.synth import gen_random_graphs


def workload(n_vertices, C, A, seed=0):
    ds = gen_random_graphs(max(1, n_vertices // 5), (1, 10), 0.2, M=3, A=A, seed=seed)
    table = StateAssignmentTable().extended(
        np.random.default_rng(seed).integers(C, size=ds.packed.n_vertices), C)
    freq = neighbor_frequency(ds, table, [0])
    params = init_params(C, ds.M, ds.A, (0,), (C,), seed=seed)
    y = _symbols(params, ds)
    return ds, params, freq, y


def best_of(fn, repeats):
    fn()  # compile / warm caches
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--vertices", type=int, default=20000)
    ap.add_argument("--states", type=int, default=20)
    ap.add_argument("--arcs", type=int, default=3)
    ap.add_argument("--repeats", type=int, default=7)
    args = ap.parse_args(argv)

    ds, params, freq, y = workload(args.vertices, args.states, args.arcs)
    n = ds.packed.n_vertices
    deep = _deep_args(params, y, freq)
    resp, _ = kernels.NUMPY_KERNELS["estep"](*deep)
    acc = (freq.ptr, y, freq.pred, freq.arc, freq.state, resp, params.M, 1, params.A, freq.width)
    calls = {"estep": deep, "loglik": deep, "infer": deep, "accumulate": acc}

    backends = {"numpy": kernels.NUMPY_KERNELS}
    if kernels.NUMBA_KERNELS is not None:
        backends["numba"] = kernels.NUMBA_KERNELS
    print(f"{n} vertices, {len(freq.weight)} frequency entries, C={args.states}, A={args.arcs}")
    print(f"{'kernel':<12}" + "".join(f"{b:>14}" for b in backends) + "   vertices/ms")
    for name, call_args in calls.items():
        row = {b: best_of(lambda: table[name](*call_args), args.repeats) for b, table in backends.items()}
        fastest = min(row.values())
        print(f"{name:<12}" + "".join(f"{t * 1e3:>12.2f}ms" for t in row.values())
              + f"   {n / (fastest * 1e3):>10.0f}")


if __name__ == "__main__":
    main()
