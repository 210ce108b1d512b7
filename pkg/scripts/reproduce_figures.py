"""Write the data behind every figure and report per-figure wall time.

    python3 scripts/reproduce_figures.py --out results --samples 1000000
"""

import argparse
import json
import time
from pathlib import Path

from cogcap.experiments import FIGURES, reproduce_figure


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=20_240_601)
    ap.add_argument("--figures", nargs="*", default=list(FIGURES))
    args = ap.parse_args()

    timings = {}
    start = time.perf_counter()
    for fig in args.figures:
        t0 = time.perf_counter()
        files = reproduce_figure(fig, Path(args.out), n_samples=args.samples, seed=args.seed)
        timings[fig] = round(time.perf_counter() - t0, 2)
        print(f"{fig}: {len(files)} files in {timings[fig]:.1f} s")
    timings["total"] = round(time.perf_counter() - start, 2)
    print(json.dumps(timings))


if __name__ == "__main__":
    main()
