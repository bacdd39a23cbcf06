#!/usr/bin/env python3
"""Run the full evaluation sweep with the default configuration.

Equivalent to `gtvv evaluate`, kept as a plain script so the sweep can be
launched and tweaked without going through the CLI plumbing.

Usage: python3 scripts/run_sweep.py [out_dir] [--workers N] [--seed N]
"""

import argparse
import time

from gtvv.experiment import ExperimentConfig, run_experiment, write_results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", nargs="?", default="results",
                        help="output directory (default: results)")
    parser.add_argument("--workers", type=int, default=4)
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args()

    kwargs = {"workers": args.workers}
    if args.seed is not None:
        kwargs["seed"] = args.seed
    cfg = ExperimentConfig(**kwargs)

    start = time.monotonic()
    table, records = run_experiment(cfg)
    elapsed = time.monotonic() - start
    write_results(table, records, cfg, args.out)
    print(table.to_csv(), end="")
    print(f"# sweep of {len(records)} runs finished in {elapsed:.1f}s; "
          f"results in {args.out}/")


if __name__ == "__main__":
    main()
