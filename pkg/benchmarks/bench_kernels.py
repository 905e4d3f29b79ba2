"""Compare the numba kernels with their numpy fallbacks.

Run: python3 benchmarks/bench_kernels.py [--repeats 200]

Three measurements:
  tape    one mean-field right-hand side evaluation (M=3, pumped, thermal)
  action  one application of the Lindblad generator, N_C=40, N_B=(4,4):
          compiled matrix-free loop vs the assembled CSR matrix
  run     full panel (f) mean-field integration, in a fresh interpreter
          with and without QBCHARGE_DISABLE_NUMBA=1 (includes JIT time)
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from qbcharge import kernels
from qbcharge._accel import HAS_NUMBA
from qbcharge.exact_solver import PackedGenerator, PackedSupport, build_channels
from qbcharge.moment_engine import generate_moment_system
from qbcharge.scenario import ScenarioConfig
from qbcharge.spin_algebra import initial_state

RUN_SNIPPET = """
import time
t0 = time.perf_counter()
from qbcharge import dynamics, panels
dynamics.run_to_steady(panels.panel_scenario("f"))
t1 = time.perf_counter()
dynamics.run_to_steady(panels.panel_scenario("f"))
print(t1 - t0, time.perf_counter() - t1)
"""


def best_ms(fn, repeats):
    fn()
    return 1e3 * min(timeit.repeat(fn, number=1, repeat=repeats))


def bench_tape(repeats):
    sys_ = generate_moment_system(ScenarioConfig(10**7, (100,) * 3, gamma_up=2.0, nbar=0.1))
    v = np.random.default_rng(0).normal(size=sys_._v.size) + 0j
    out = np.empty(sys_._out.size, complex)
    rows = [("numpy", best_ms(lambda: kernels._eval_tape_numpy(v, *sys_.tape, out), repeats))]
    if HAS_NUMBA:
        rows.append(("numba", best_ms(lambda: kernels.eval_tape_loop(v, *sys_.tape, out), repeats)))
    return f"tape ({len(sys_.tape[0])} terms)", rows


def bench_action(repeats):
    sc = ScenarioConfig(40, (4, 4), gamma_up=1.0)
    rho0 = initial_state(sc.initial_levels, sc.n_spins)
    support = PackedSupport.from_state(rho0)
    x = np.random.default_rng(0).normal(size=support.size) + 0j
    chans = build_channels(sc)
    matrix = PackedGenerator(support, chans, backend="numpy")
    m = matrix.matrix
    rows = [("numpy CSR", best_ms(lambda: m @ x, repeats))]
    if HAS_NUMBA:
        loop = PackedGenerator(support, chans, backend="numba")
        rows.append(("numba loop", best_ms(lambda: loop(0.0, x), repeats)))
    return f"action ({support.size} packed entries, nnz {m.nnz})", rows


def bench_run():
    rows = []
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, QBCHARGE_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", RUN_SNIPPET], env=env, capture_output=True, text=True, check=True)
        first, second = map(float, out.stdout.split())
        rows.append((f"{label} first", 1e3 * first))
        rows.append((f"{label} warm", 1e3 * second))
    return "panel f run", rows


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--repeats", type=int, default=200)
    args = p.parse_args()
    if not HAS_NUMBA:
        print("numba unavailable or disabled: only the numpy columns are timed")
    for title, rows in (bench_tape(args.repeats), bench_action(max(5, args.repeats // 10)), bench_run()):
        print(title)
        for name, ms in rows:
            print(f"  {name:<14} {ms:10.4f} ms")


if __name__ == "__main__":
    main()
