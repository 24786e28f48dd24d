"""Local and network hit rates of every policy for uniform request streams.

Usage: python3 scripts/hit_rates.py [--capacity 5] [--reps 5] [--requests 10000]
"""
import argparse
import csv
import sys

import numpy as np

from edgecache.scenario import template_config
from edgecache.sweep import SweepSpec, run_sweep

POLICIES = ("greedy", "most_foa", "guaranteed_greedy", "locally_optimal", "distributed",
            "centralized")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--capacity", type=float, default=5.0)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--requests", type=int, default=10_000)
    args = ap.parse_args(argv)
    res = run_sweep(SweepSpec("capacity", (args.capacity,), template_config(men_count=4),
                              POLICIES, repetitions=args.reps, requests=args.requests))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["policy", "h_tot", "h_star_tot"])
    for p in POLICIES:
        rows = [r for r in res.rows if r.policy == p]
        w.writerow([p, f"{np.mean([r.h_tot for r in rows]):.6g}",
                    f"{np.mean([r.h_star_tot for r in rows]):.6g}"])


if __name__ == "__main__":
    main()
