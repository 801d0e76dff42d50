#!/usr/bin/env python3
"""Benchmark the compiled posterior kernels against the pure NumPy twin.

Micro-benchmarks time the three hot functions on synthetic buffers; the
end-to-end benchmark runs a short desk-preset closed loop under each
backend (the pure path is forced with GPREG_PURE_PYTHON=1 in a
subprocess, since the backend is chosen at import time).

Usage: python benchmarks/bench_backends.py [--end-to-end]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def micro(impl, n, dim=2, n_out=1, repeats=2000):
    rng = np.random.default_rng(0)
    train_eta = np.ascontiguousarray(rng.standard_normal((n, dim)))
    ages = np.ascontiguousarray(np.sort(rng.random(n))[::-1].copy())
    weights = np.ascontiguousarray(rng.standard_normal((n, n_out)))
    gamma = rng.standard_normal((n, n))
    gamma = np.ascontiguousarray(gamma @ gamma.T + n * np.eye(n))
    eta = rng.standard_normal(dim)
    inv_l2 = np.full(dim, 1.0 / 0.02)
    out = {}
    for name, call in [
        ("kernel_vector", lambda: impl.kernel_vector(
            train_eta, ages, eta, 0.3, inv_l2, 0.125, 1.0)),
        ("mean_and_grad", lambda: impl.mean_and_grad(
            train_eta, ages, weights, eta, 0.3, inv_l2, 0.125, 1.0)),
        ("variance", lambda: impl.variance(
            train_eta, ages, gamma, eta, 0.3, inv_l2, 0.125, 1.0)),
    ]:
        call()  # warm up
        start = time.perf_counter()
        for _ in range(repeats):
            call()
        out[name] = (time.perf_counter() - start) / repeats * 1e6
    return out


def run_micro():
    from gpreg import _gpk_py
    impls = [("python", _gpk_py)]
    try:
        from gpreg import _gpk
        impls.append(("cython", _gpk))
    except ImportError:
        print("compiled backend not built; micro-benchmarking pure path only")
    print(f"{'function':<16}{'n':>5}" + "".join(f"{name:>12}" for name, _ in impls)
          + ("     speedup" if len(impls) == 2 else ""))
    for n in (10, 100):
        rows = [micro(impl, n) for _, impl in impls]
        for fn in ("kernel_vector", "mean_and_grad", "variance"):
            line = f"{fn:<16}{n:>5}"
            for row in rows:
                line += f"{row[fn]:>10.2f}us"
            if len(rows) == 2:
                line += f"{rows[0][fn] / rows[1][fn]:>11.1f}x"
            print(line)


END_TO_END = r"""
import time
import gpreg
from gpreg.experiment import ExperimentConfig, build_loop, integrator_config, _SCHEMA, _parse_value
from gpreg.presets import preset_table
from gpreg import simulate

cfg = ExperimentConfig()
for (section, key), raw in preset_table("desk").items():
    attr, kind = _SCHEMA[(section, key)]
    setattr(cfg, attr, _parse_value(raw, kind, key))
cfg.preset = "desk"
cfg.exosystem = "duffing"
cfg.regulator = "gp"
cfg.t_end = 5.0
loop = build_loop(cfg)
start = time.perf_counter()
arc = simulate(loop.system, loop.y0, loop.disc0, integrator_config(cfg))
print(f"{gpreg.BACKEND}: {time.perf_counter() - start:.2f}s "
      f"({sum(len(s.ts) for s in arc.segments)} points, {arc.n_jumps} jumps)")
"""


def run_end_to_end():
    print("\nend-to-end (5 s desk duffing closed loop):", flush=True)
    for env_extra in ({}, {"GPREG_PURE_PYTHON": "1"}):
        env = dict(os.environ, **env_extra)
        subprocess.run([sys.executable, "-c", END_TO_END], env=env, check=True)


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--end-to-end", action="store_true",
                        help="also run the closed-loop comparison")
    args = parser.parse_args()
    run_micro()
    if args.end_to_end:
        run_end_to_end()
