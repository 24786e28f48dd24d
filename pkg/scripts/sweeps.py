"""Delay sweeps over capacity, content count or MEN count with all policies.

Defaults reproduce the experimental grids: capacity 0-10 GB at 200 contents,
contents 50-200 at 5 GB, and 2-10 nodes at 10 GB and 200 contents. Centralized
solves are expensive at these sizes; drop them with --no-centralized.

Usage: python3 scripts/sweeps.py capacity [--reps 5] [--out results/capacity.csv]
"""
import argparse
import sys

from edgecache.scenario import template_config
from edgecache.sweep import SweepSpec, csv_text, run_sweep

GRIDS = {
    "capacity": ((0.0, 2.0, 4.0, 6.0, 8.0, 10.0), dict(content_count=200)),
    "content_count": ((50, 100, 150, 200), dict(capacity_gb=5.0)),
    "men_count": (tuple(range(2, 11)), dict(capacity_gb=10.0, content_count=200)),
}
BASE = ("greedy", "most_foa", "guaranteed_greedy", "locally_optimal", "distributed")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("axis", choices=sorted(GRIDS))
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--no-centralized", action="store_true")
    ap.add_argument("--per-node", action="store_true")
    ap.add_argument("--out", default=None)
    args = ap.parse_args(argv)
    values, kw = GRIDS[args.axis]
    policies = BASE if args.no_centralized else BASE + ("centralized",)
    spec = SweepSpec(args.axis, values, template_config(men_count=4, **kw), policies,
                     repetitions=args.reps, per_node=args.per_node)
    text = csv_text(run_sweep(spec))
    if args.out:
        open(args.out, "w", newline="").write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
