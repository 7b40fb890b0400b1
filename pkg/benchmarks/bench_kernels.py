"""Compiled vs pure-Python kernel timings on representative inputs.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on identical inputs under both backends; outputs are
checked for equality before timings are printed.
"""
import argparse
import importlib
import time

import numpy as np

from gridcosim import _kernels_py
from gridcosim.gridattack.fdi import _supports_all
from gridcosim.power.estimation import FLOW, INJECTION, Measurement, MeasurementSet, build_dc_jacobian
from gridcosim.power.grid import grid_from_dict


def _compiled():
    try:
        return importlib.import_module("gridcosim._kernels")
    except ImportError:
        return None


def queue_case(rng):
    arrivals = np.sort(rng.uniform(0.0, 1.0, 200_000))
    return (arrivals, 0.0, 4e-6, 64)


def cfb_case(rng, n=60):
    edges = {(k, k + 1) for k in range(n - 1)}
    while len(edges) < 3 * n:
        u, v = sorted(rng.choice(n, 2, replace=False).tolist())
        edges.add((u, v))
    eu, ev = (np.array(x, dtype=np.int64) for x in zip(*sorted(edges)))
    g = rng.uniform(0.5, 2.0, eu.size)
    L = np.zeros((n, n))
    np.add.at(L, (eu, ev), -g)
    np.add.at(L, (ev, eu), -g)
    L[np.diag_indices(n)] = -L.sum(axis=1)
    return (np.linalg.pinv(L), eu, ev, g)


def fdi_case(n_bus=12):
    buses = [{"id": 0, "kind": "slack"}] + [{"id": k} for k in range(1, n_bus)]
    branches = [{"id": k, "from_bus": k - 1, "to_bus": k, "r": 0.01, "x": 0.05 + 0.01 * k} for k in range(1, n_bus)]
    branches.append({"id": n_bus, "from_bus": 0, "to_bus": n_bus - 1, "r": 0.01, "x": 0.07})
    grid = grid_from_dict({"buses": buses, "branches": branches})
    meas = MeasurementSet(
        [Measurement(INJECTION, b["id"], 0.0, 1.0) for b in buses] + [Measurement(FLOW, br["id"], 0.0, 1.0) for br in branches]
    )
    Hm = build_dc_jacobian(grid, meas).mw
    protected = np.zeros(Hm.shape[0], dtype=np.uint8)
    protected[: n_bus // 2] = 1
    return (Hm, Hm.shape[0] - 3, 3.0, protected, _supports_all(Hm.shape[1], 3), 1e-9)


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    if isinstance(a, np.ndarray):
        return np.array_equal(a, b) or np.allclose(a, b, rtol=0, atol=1e-12)
    return a == b


def _time(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    compiled = _compiled()
    cases = {
        "queue_admit": queue_case(rng),
        "cfb_throughput": cfb_case(rng),
        "fdi_support_search": fdi_case(),
    }
    print(f"{'kernel':<20} {'python [s]':>11} {'cython [s]':>11} {'speedup':>8}  match")
    for name, case in cases.items():
        t_py, out_py = _time(getattr(_kernels_py, name), case, args.repeat)
        if compiled is None:
            print(f"{name:<20} {t_py:>11.4f} {'n/a':>11} {'n/a':>8}  -")
            continue
        t_cy, out_cy = _time(getattr(compiled, name), case, args.repeat)
        print(f"{name:<20} {t_py:>11.4f} {t_cy:>11.4f} {t_py / t_cy:>7.1f}x  {_same(out_py, out_cy)}")
    if compiled is None:
        print("compiled kernels not built; run: python3 setup.py build_ext --inplace")


if __name__ == "__main__":
    main()
