"""Compare the compiled and interpreted kernel paths.

Each configuration runs in a fresh interpreter so that ``SESSIONCK_DISABLE_NUMBA``
takes effect at import time. The compiled run is timed after one warm-up call so
that JIT compilation is reported separately.

    python benchmarks/bench_kernels.py --lengths 3 4 5
"""

import argparse
import json
import os
import subprocess
import sys

PROBE = r"""
import json, sys, time
from sessionck import _jit
from sessionck.kernels import run_exhaustive
n_roles, n_labels, length = map(int, sys.argv[1:4])
t0 = time.perf_counter()
run_exhaustive(n_roles, n_labels, 1)
warm = time.perf_counter() - t0
t0 = time.perf_counter()
res = run_exhaustive(n_roles, n_labels, length)
run = time.perf_counter() - t0
print(json.dumps({"jit": _jit.ENABLED, "warmup_s": warm, "run_s": run,
                  "words": res.words, "agrees": res.agrees}))
"""


def measure(disable: bool, n_roles: int, n_labels: int, length: int) -> dict:
    env = dict(os.environ)
    env["SESSIONCK_DISABLE_NUMBA"] = "1" if disable else "0"
    out = subprocess.run(
        [sys.executable, "-c", PROBE, str(n_roles), str(n_labels), str(length)],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    return json.loads(out.stdout)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--roles", type=int, default=2)
    ap.add_argument("--labels", type=int, default=2)
    ap.add_argument("--lengths", type=int, nargs="+", default=[3, 4, 5])
    args = ap.parse_args(argv)
    print(f"{'len':>4} {'words':>10} {'pure s':>9} {'numba s':>9} {'jit s':>7} {'speedup':>8}")
    for n in args.lengths:
        pure = measure(True, args.roles, args.labels, n)
        fast = measure(False, args.roles, args.labels, n)
        if (pure["words"], pure["agrees"]) != (fast["words"], fast["agrees"]):
            print(f"length {n}: paths disagree: {pure} vs {fast}", file=sys.stderr)
            return 1
        speed = pure["run_s"] / fast["run_s"] if fast["run_s"] > 0 else float("inf")
        print(
            f"{n:>4} {fast['words']:>10} {pure['run_s']:>9.3f} {fast['run_s']:>9.3f}"
            f" {fast['warmup_s']:>7.2f} {speed:>7.1f}x"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())
