"""Compare the compiled kernels with the numpy fallback.

Usage: ``python benchmarks/bench_kernels.py [--sizes 8 16 32] [--repeat 5]``
Prints one row per kernel and problem size with the best time per call.
"""
import argparse
import timeit

import numpy as np

from absnet import _pykernels as pk
from absnet.channel import NodeKind
from absnet.netgraph import NetworkState, build_capacity_graph, kernel_params

try:
    from absnet import _ckernels as ck
except ImportError:
    ck = None


def make_state(n_abs: int, seed: int = 0) -> NetworkState:
    rng = np.random.default_rng(seed)
    ground = np.array([[0.0, 0, 0], [200.0, 0, 0]])
    air = np.column_stack([rng.uniform(0, 200, (n_abs, 2)), rng.uniform(10, 60, n_abs)])
    kinds = (NodeKind.SOURCE, NodeKind.DESTINATION) + (NodeKind.ABS,) * n_abs
    return NetworkState(np.vstack([ground, air]), kinds, [[30.0, 0, 0], [120.0, 40, 0]])


def cases(n_abs: int):
    st = make_state(n_abs)
    args = (st.positions, st.aerial, st.interferers, kernel_params(st))
    ranges = np.full(st.n, np.inf)
    z = np.random.default_rng(1).random((st.n, st.n))
    z = z + z.T
    cap = build_capacity_graph(st).adjacency
    arc = cap > 0
    length = np.where(arc, 1.0 / np.where(arc, cap, 1.0), np.inf)
    t = st.n - 1

    def route(mod):
        mod.route_demand(length.copy(), cap, np.zeros_like(cap), 0, 1, 1.0, 0.01)

    return {
        "capacity_matrix": lambda mod: mod.capacity_matrix(*args, ranges),
        "lambda2_gradient_fd": lambda mod: mod.lambda2_gradient_fd(*args, z, st.abs_indices, 1e-3),
        "shortest_path_length": lambda mod: mod.shortest_path_length(length, 0, t),
        "route_demand": route,
    }


def best_time(fn, repeat: int) -> float:
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[8, 16, 32])
    ap.add_argument("--repeat", type=int, default=5)
    ns = ap.parse_args(argv)
    if ck is None:
        print("compiled extension not built; only the fallback is timed")
    print(f"{'kernel':<22}{'N_abs':>6}{'python [us]':>14}{'cython [us]':>14}{'speedup':>10}")
    for n in ns.sizes:
        for name, call in cases(n).items():
            t_py = best_time(lambda: call(pk), ns.repeat)
            if ck is None:
                print(f"{name:<22}{n:>6}{t_py * 1e6:>14.1f}{'-':>14}{'-':>10}")
                continue
            t_c = best_time(lambda: call(ck), ns.repeat)
            print(f"{name:<22}{n:>6}{t_py * 1e6:>14.1f}{t_c * 1e6:>14.1f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
