#!/usr/bin/env python3
"""Benchmark the compiled simulation kernel against the pure-Python backend.

The arithmetic backend is chosen at import time from the ``DPCSIM_NUMBA``
environment variable, so each backend is timed in its own subprocess:

  1. DPCSIM_NUMBA=1  - numba-compiled kernels (one warmup run first, so JIT
                       compilation is not billed to the timing)
  2. DPCSIM_NUMBA=0  - same source, plain Python execution

Both subprocesses run the bundled canonical scenario and write their trace
CSVs; the parent compares the files byte for byte — the two backends must
agree exactly, not just closely.

Usage:
    python benchmarks/benchmark_kernel.py [--repeats N]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import tempfile
import time
from pathlib import Path


def child(repeats: int, out_csv: str) -> None:
    import dpcsim

    config = dpcsim.load_bundled("canonical.ini")
    trace = dpcsim.run_simulation(config)          # warmup (JIT compile, caches)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        trace = dpcsim.run_simulation(config)
        times.append(time.perf_counter() - t0)
    dpcsim.write_trace_csv(trace, out_csv)
    print(json.dumps({
        "backend": dpcsim.active_backend(),
        "records": len(trace),
        "best_s": min(times),
        "mean_s": sum(times) / len(times),
    }))


def run_backend(flag: str, repeats: int, out_csv: str) -> dict:
    env = dict(os.environ, DPCSIM_NUMBA=flag)
    proc = subprocess.run(
        [sys.executable, __file__, "--child", "--repeats", str(repeats),
         "--out", out_csv],
        env=env, capture_output=True, text=True)
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        raise SystemExit(f"backend DPCSIM_NUMBA={flag} failed")
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=10)
    parser.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    parser.add_argument("--out", help=argparse.SUPPRESS)
    args = parser.parse_args()

    if args.child:
        child(args.repeats, args.out)
        return

    with tempfile.TemporaryDirectory() as tmp:
        csv_jit = str(Path(tmp) / "trace_numba.csv")
        csv_py = str(Path(tmp) / "trace_python.csv")
        res_jit = run_backend("1", args.repeats, csv_jit)
        res_py = run_backend("0", max(1, args.repeats // 5), csv_py)
        identical = Path(csv_jit).read_bytes() == Path(csv_py).read_bytes()

    n = res_jit["records"]
    print(f"canonical scenario: {n} records per run, best of N")
    print(f"  numba  ({res_jit['backend']:>6}): {res_jit['best_s'] * 1e3:9.3f} ms")
    print(f"  python ({res_py['backend']:>6}): {res_py['best_s'] * 1e3:9.3f} ms")
    print(f"  speedup: {res_py['best_s'] / res_jit['best_s']:.1f}x")
    print(f"  traces byte-identical across backends: {identical}")
    if not identical:
        raise SystemExit("backend disagreement: traces differ")


if __name__ == "__main__":
    main()
