"""Time the compiled and pure-Python integration kernels on representative shots.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one line per (case, backend) with the best wall time per shot, the
step count and the largest deviation of log(lambda) between backends.
"""

import argparse
import math
import time

from bubbleshoot.growth import gelfand, make_model
from bubbleshoot.kernels import available_backends
from bubbleshoot.solver import SolverConfig, shoot_unit_lambda

CASES = (
    ("gelfand mu=3", lambda: gelfand(), 3.0),
    ("power-exp p=3 mu=6", lambda: make_model("power-exp", p=3), 6.0),
    ("power-exp p=1.5 mu=400^(2/3)", lambda: make_model("power-exp", p=1.5), 400 ** (2 / 3)),
    ("multi-exp k=2 mu=6.1", lambda: make_model("multi-exp", k=2, m=1), 6.1),
)


def best_time(fn, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'case':32s} {'backend':8s} {'seconds':>10s} {'steps':>7s} {'speedup':>8s} {'dlog_lambda':>12s}")
    for name, make, mu in CASES:
        model = make()
        results = {}
        for be in backends:
            cfg = SolverConfig(backend=be)
            results[be] = best_time(lambda: shoot_unit_lambda(model, mu=mu, cfg=cfg), args.repeat)
        ref_t, ref_sol = results["python"]
        for be in backends:
            secs, sol = results[be]
            dl = abs(sol.log_lambda - ref_sol.log_lambda)
            print(f"{name:32s} {be:8s} {secs:10.4f} {sol.steps:7d} {ref_t / secs:8.1f} {dl:12.3e}")


if __name__ == "__main__":
    main()
