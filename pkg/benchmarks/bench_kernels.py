"""Compiled GMP kernels versus the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Times each kernel directly on both backends, then one end-to-end flow run
per backend in a subprocess (the backend is chosen at import time).
"""
from __future__ import annotations

import argparse
import json
import os
import random
import subprocess
import sys
import timeit

from mab import _pykernels

try:
    from mab import _kernels
except ImportError:
    _kernels = None


def cases(rng: random.Random):
    out = []
    for bits in (256, 1024, 2048):
        m = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        b, e = rng.randrange(m), rng.getrandbits(bits)
        out.append((f"powmod {bits}", "powmod", (b, e, m)))
        out.append((f"powmod2 {bits}", "powmod2", (b, e, rng.randrange(m), e >> 1, m)))
        out.append((f"jacobi {bits}", "jacobi", (b, m)))
    p = (1 << 521) - 1  # Mersenne prime: every round runs to completion
    out.append(("miller_rabin 521 x20", "miller_rabin", (p, list(range(2, 22)))))
    primes = [q for q in range(3, 10_000, 2) if all(q % d for d in range(3, int(q**0.5) + 1, 2))]
    out.append(("first_divisor 521 B=1e4", "first_divisor", (p, primes)))  # full scan, no divisor
    out.append(("residues 2048 B=1e4", "residues", (rng.getrandbits(2048), primes)))
    return out


def per_call(fn, args, repeat):
    timer = timeit.Timer(lambda: fn(*args))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def flow_seconds(pure: bool) -> float:
    code = (
        "import time; from mab import flow; t = time.perf_counter();"
        "assert flow.run_transaction_flow(flow.FlowConfig(seed=1)).ok; print(time.perf_counter() - t)"
    )
    env = {**os.environ, "MAB_PURE_PYTHON": "1" if pure else "0"}
    res = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True)
    return float(res.stdout)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", dest="json_path")
    args = ap.parse_args(argv)
    if _kernels is None:
        print("compiled extension not built; only the fallback is available", file=sys.stderr)
    rows = []
    for name, fn, fargs in cases(random.Random(0)):
        py = per_call(getattr(_pykernels, fn), fargs, args.repeat)
        gmp = per_call(getattr(_kernels, fn), fargs, args.repeat) if _kernels else None
        if gmp is not None:
            assert getattr(_kernels, fn)(*fargs) == getattr(_pykernels, fn)(*fargs), name
        rows.append({"kernel": name, "python_us": py * 1e6, "gmp_us": None if gmp is None else gmp * 1e6})
    flow = {"python_s": flow_seconds(True), "gmp_s": flow_seconds(False) if _kernels else None}

    print(f"{'kernel':28} {'python us':>12} {'gmp us':>12} {'speedup':>8}")
    for r in rows:
        g = r["gmp_us"]
        speed = f"{r['python_us'] / g:7.1f}x" if g else "      -"
        print(f"{r['kernel']:28} {r['python_us']:12.1f} {g if g else float('nan'):12.1f} {speed}")
    g = flow["gmp_s"]
    print(f"{'flow run (test profile)':28} {flow['python_s'] * 1e6:12.0f} {g * 1e6 if g else float('nan'):12.0f}", end="")
    print(f" {flow['python_s'] / g:7.1f}x" if g else "")
    if args.json_path:
        with open(args.json_path, "w") as fh:
            json.dump({"kernels": rows, "flow": flow}, fh, indent=1)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
