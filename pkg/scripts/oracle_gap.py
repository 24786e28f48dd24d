"""Centralized and distributed objectives against the exhaustive optimum on small instances.

Usage: python3 scripts/oracle_gap.py [--seeds 10] [--out results/oracle_gap.csv]
"""
import argparse
import csv
import sys
from pathlib import Path

from edgecache.bnb import centralized_placement
from edgecache.distributed import distributed_placement
from edgecache.oracle import exhaustive_optimal
from edgecache.scenario import build_scenario, template_config, total_average_delay


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--capacities", default="1,1.5,2")
    ap.add_argument("--contents", type=int, default=15)
    ap.add_argument("--out", default=None)
    args = ap.parse_args(argv)
    rows = []
    for cap in map(float, args.capacities.split(",")):
        for seed in range(args.seeds):
            sc = build_scenario(template_config(men_count=1, content_count=args.contents,
                                                capacity_gb=cap, seed=seed))
            opt = exhaustive_optimal(sc).objective
            rep = centralized_placement(sc)
            dist = total_average_delay(sc, distributed_placement(sc))
            rows.append([cap, seed, f"{opt:.6g}", f"{rep.objective:.6g}", f"{dist:.6g}",
                         f"{rep.objective / opt:.6g}", f"{dist / opt:.6g}", rep.status,
                         rep.nodes_explored])
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["capacity_gb", "seed", "oracle", "centralized", "distributed",
                "centralized_ratio", "distributed_ratio", "status", "nodes_explored"])
    w.writerows(rows)


if __name__ == "__main__":
    main()
