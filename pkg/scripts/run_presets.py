"""Run every preset (or the ones named) and write artifacts plus a summary table.

    python scripts/run_presets.py [--out runs] [--skip-slow] [PRESET ...]
"""

import argparse
import time
from pathlib import Path

from ngoschrod.cli import format_table, summarize, write_artifacts
from ngoschrod.experiments import PRESETS, default_config, run_experiment

SLOW = {"hopping-eps32"}


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("presets", nargs="*", default=sorted(PRESETS))
    ap.add_argument("--out", default="runs")
    ap.add_argument("--skip-slow", action="store_true")
    args = ap.parse_args()
    root = Path(args.out)
    for name in args.presets:
        if args.skip_slow and name in SLOW:
            continue
        t0 = time.perf_counter()
        res = run_experiment(default_config(name))
        d = write_artifacts(res, root)
        errs = " ".join(f"{k}={v:.3e}" for k, v in sorted(res.errors.items()))
        print(f"{name:28s} {time.perf_counter() - t0:7.1f} s  {errs}  -> {d}")
    print()
    print(format_table(summarize(root)))


if __name__ == "__main__":
    main()
