"""One-off confirmation of the all-doses-toxic early-stop rates.

Runs 10^4 seeded replicates per design of the all-toxic scenario and prints
the stop rate with a 99% Wilson interval, to confirm the frozen >= 0.95
threshold used by the acceptance suite.  Expect a multi-hour single-core
run; pass a smaller count for a spot check.

Usage: python tools/confirm_stop_rates.py [n_reps] [n_jobs]
"""

import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from trialbuilders import all_toxic_replicate  # noqa: E402


def wilson99(k, n):
    z = 2.5758293035489004
    p = k / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return center - half, center + half


def main():
    n_reps = int(sys.argv[1]) if len(sys.argv) > 1 else 10_000
    n_jobs = int(sys.argv[2]) if len(sys.argv) > 2 else 2
    for kind in ("efftox", "schedule"):
        t0 = time.time()
        tasks = [(kind, 900_000 + i) for i in range(n_reps)]
        if n_jobs > 1:
            with ProcessPoolExecutor(max_workers=n_jobs) as pool:
                results = list(pool.map(all_toxic_replicate, tasks, chunksize=25))
        else:
            results = [all_toxic_replicate(t) for t in tasks]
        k = sum(r["stopped_early"] for r in results)
        lo, hi = wilson99(k, n_reps)
        mean_n = sum(r["n"] for r in results) / n_reps
        print(
            f"{kind}: stopped early {k}/{n_reps} = {k / n_reps:.4f} "
            f"(99% CI {lo:.4f}-{hi:.4f}), mean sample size {mean_n:.1f}, "
            f"{(time.time() - t0) / 60:.1f} min"
        )


if __name__ == "__main__":
    main()
