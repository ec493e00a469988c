"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Also runs one end-to-end workload (hash_rtr over an oscillating CSL pair)
under each backend in a subprocess, since the backend is fixed at import.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from tgrev import _kernels_py

try:
    from tgrev import _kernels
except ImportError:
    _kernels = None


def workloads(rng):
    rows = rng.integers(0, 50, size=(20000, 4)).astype(np.int64)
    sizes = rng.integers(1, 12, size=3000)
    indptr = np.r_[0, np.cumsum(sizes)].astype(np.int64)
    mrows = rng.integers(0, 30, size=(int(indptr[-1]), 3)).astype(np.int64)
    prefix = rng.integers(0, 100, size=(3000, 2)).astype(np.int64)
    n, cap, E = 500, 10, 20000
    src = rng.integers(0, n, E).astype(np.int64)
    dst = rng.integers(0, n, E).astype(np.int64)
    t = np.arange(E, dtype=np.float64)
    s = np.arange(E, dtype=np.int64)

    def ring(mod):
        nbr = np.full((n, cap), -1, np.int64)
        nt = np.zeros((n, cap))
        ns = np.zeros((n, cap), np.int64)
        ne = np.full((n, cap), -1, np.int64)
        cnt = np.zeros(n, np.int64)
        mod.ring_push(nbr, nt, ns, ne, cnt, src, dst, t, s, s)

    return {
        "unique_rows": lambda mod: mod.unique_rows(rows),
        "multiset_keys": lambda mod: mod.multiset_keys(indptr, mrows, prefix),
        "ring_push": ring,
    }


END_TO_END = (
    "import time;from tgrev.datasets import gen_oscillating_csl;from tgrev.expressive import make_engine;"
    "import numpy as np;ga,gb,_=gen_oscillating_csl(11,2,3,6,np.random.default_rng(0));"
    "f=make_engine('rtr-hetero');t=time.perf_counter();f(ga,gb);print(time.perf_counter()-t)"
)


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    wl = workloads(np.random.default_rng(0))
    report = {}
    for name, fn in wl.items():
        row = {"python": min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat))}
        if _kernels is not None:
            row["compiled"] = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat))
            row["speedup"] = round(row["python"] / row["compiled"], 2)
        report[name] = row
    e2e = {}
    for backend, env in (("compiled", {}), ("python", {"TGREV_PURE": "1"})):
        out = subprocess.run([sys.executable, "-c", END_TO_END], capture_output=True, text=True,
                             env={**os.environ, **env})
        e2e[backend] = float(out.stdout.strip()) if out.returncode == 0 else None
    report["hash_rtr_pair"] = e2e
    print(json.dumps(report, indent=1))


if __name__ == "__main__":
    main()
