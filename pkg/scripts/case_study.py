"""Distinct cached contents and delay on the 4-node, 30-content case study.

Usage: python3 scripts/case_study.py [--reps 5]
"""
import argparse
import sys

from edgecache.cli import main as cli_main


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=5)
    args = ap.parse_args(argv)
    return cli_main(["case-study", "--reps", str(args.reps),
                     "--policy", "locally-optimal,distributed,centralized"])


if __name__ == "__main__":
    sys.exit(main())
