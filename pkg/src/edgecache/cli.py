"""Command-line experiment runner.

Exit codes: 0 success, 2 bad config or arguments, 3 intractable request,
4 solver node limit reached.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .bnb import BnbParams
from .metrics import distinct_contents, generate_requests, hit_rates
from .oracle import OracleBudgetExceeded, exhaustive_optimal
from .scenario import MB_PER_GB, ScenarioError, build_scenario, load_config, template_config
from .sweep import (AXES, POLICIES, IntractableError, SolverLimitError, SweepError, SweepSpec,
                    csv_text, evaluate_policy, normalize_policy, run_sweep)

EXIT_OK, EXIT_CONFIG, EXIT_INTRACTABLE, EXIT_LIMIT = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


def case_study_config(seed: int = 0) -> dict:
    """Three MENs and the BS, fully meshed with equal links, 30 contents of 50-200 MB."""
    cfg = template_config(men_count=3, content_count=30, capacity_gb=0.6, bs_capacity_gb=1.0,
                          seed=seed, size_mb=(50.0, 200.0))
    cfg["links"] = {"backhaul_mbps": 60.0,
                    "pairs": [[a, b, 45.0] for a in range(1, 5) for b in range(a + 1, 5)]}
    return cfg


def _fmt(v) -> str:
    return f"{float(v):.6g}" if isinstance(v, (float, np.floating)) else str(v)


def _csv(rows: list[list], header: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, newline="")
    else:
        sys.stdout.write(text)


def _config(args) -> dict:
    if args.config:
        try:
            cfg = load_config(args.config)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config root must be an object")
    else:
        cfg = template_config()
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def _policies(text: str) -> list[str]:
    try:
        return [normalize_policy(p) for p in text.split(",") if p]
    except SweepError as exc:
        raise ConfigError(str(exc)) from exc


def _values(text: str, axis: str) -> tuple:
    try:
        vals = [float(v) for v in text.split(",") if v]
    except ValueError as exc:
        raise ConfigError(f"bad --values {text!r}") from exc
    if axis != "capacity":
        vals = [int(v) for v in vals]
    return tuple(vals)


def cmd_solve(args) -> int:
    sc = build_scenario(_config(args))
    pol = _policies(args.policy)
    spec = SweepSpec("capacity", (0,), policies=tuple(pol), per_node=args.per_node,
                     bnb=BnbParams(max_nodes=args.max_nodes), strict_limits=False)
    rows, limited = [], False
    for p in pol:
        x, per_node, nodes, status, _ = evaluate_policy(sc, p, spec)
        limited |= status == "node_limit"
        placement = ";".join("".join(map(str, row)) for row in x.astype(int))
        rows.append([p, sc.seed, per_node.sum(), per_node.sum() / sc.N, nodes, status,
                     distinct_contents(x), placement]
                    + (list(per_node) if args.per_node else []))
    header = ["policy", "seed", "total_delay", "objective", "nodes_explored", "status",
              "distinct_contents", "placement"]
    if args.per_node:
        header += [f"node_{k + 1}" for k in range(sc.N)]
    _write(_csv(rows, header), args.out)
    return EXIT_LIMIT if limited else EXIT_OK


def cmd_oracle(args) -> int:
    sc = build_scenario(_config(args))
    res = exhaustive_optimal(sc, args.budget)
    placement = ";".join("".join(map(str, row)) for row in res.placement.astype(int))
    _write(_csv([["oracle", sc.seed, res.objective, res.objective / sc.N, res.enumerated,
                  placement]],
                ["policy", "seed", "total_delay", "objective", "enumerated", "placement"]),
           args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    fixed = _config(args)
    if isinstance(fixed.get("nodes"), list) or "count" not in fixed.get("contents", {}):
        raise ConfigError("sweeps need a template config (men_count, count and size_mb)")
    if args.axis not in AXES:
        raise ConfigError(f"--axis must be one of {AXES}")
    spec = SweepSpec(args.axis, _values(args.values, args.axis), fixed,
                     tuple(_policies(args.policy)), args.reps,
                     args.seed if args.seed is not None else 0, args.per_node,
                     cooperative_baselines=args.cooperative_baselines,
                     bnb=BnbParams(max_nodes=args.max_nodes))
    res = run_sweep(spec)
    _write(csv_text(res), args.out)
    return EXIT_LIMIT if any(r.status == "node_limit" for r in res.rows) else EXIT_OK


def cmd_hit_rates(args) -> int:
    sc = build_scenario(_config(args))
    seed = sc.seed if sc.seed is not None else 0
    stream = generate_requests(sc, args.count, seed)
    spec = SweepSpec("capacity", (0,), bnb=BnbParams(max_nodes=args.max_nodes))
    rows = []
    limited = False
    for p in _policies(args.policy):
        x, _, _, status, _ = evaluate_policy(sc, p, spec)
        limited |= status == "node_limit"
        coop = p in ("distributed", "centralized", "oracle")
        rep = hit_rates(sc, x, stream, cooperative=coop)
        # the greedy baseline duplicates every cache, so its global hit is hidden by default
        hide = p == "greedy" and not args.show_greedy_global
        for n in range(sc.N):
            rows.append([p, n + 1, rep.local_hit[n], "" if hide else rep.global_hit[n],
                         rep.h_tot, rep.h_star_tot, seed, args.count])
    _write(_csv(rows, ["policy", "n", "local_hit", "global_hit", "h_tot", "h_star_tot", "seed",
                       "count"]), args.out)
    return EXIT_LIMIT if limited else EXIT_OK


def cmd_case_study(args) -> int:
    seeds = range(args.seed if args.seed is not None else 0,
                  (args.seed if args.seed is not None else 0) + args.reps)
    pols = _policies(args.policy)
    spec = SweepSpec("capacity", (0,), policies=tuple(pols),
                     bnb=BnbParams(max_nodes=args.max_nodes))
    rows, limited = [], False
    for s in seeds:
        sc = build_scenario(case_study_config(s))
        for p in pols:
            x, per_node, nodes, status, _ = evaluate_policy(sc, p, spec)
            limited |= status == "node_limit"
            placement = ";".join("".join(map(str, row)) for row in x.astype(int))
            rows.append([p, s, per_node.sum() / sc.N, distinct_contents(x), nodes, status,
                         placement])
    _write(_csv(rows, ["policy", "seed", "objective", "distinct_contents", "nodes_explored",
                       "status", "placement"]), args.out)
    return EXIT_LIMIT if limited else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="edgecache", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, policy_default):
        p.add_argument("--config", help="scenario JSON (default: built-in template)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", help="CSV output path (default: stdout)")
        p.add_argument("--policy", default=policy_default,
                       help=f"comma-separated, from {', '.join(p.replace('_', '-') for p in POLICIES)}")
        p.add_argument("--max-nodes", type=int, default=BnbParams().max_nodes)

    p = sub.add_parser("solve", help="place contents on one scenario")
    common(p, "distributed")
    p.add_argument("--per-node", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="exhaustive optimum of a small scenario")
    common(p, "oracle")
    p.add_argument("--budget", type=int, default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("sweep", help="seeded sweep over one scenario parameter")
    common(p, "greedy,most-foa,guaranteed-greedy,locally-optimal,distributed")
    p.add_argument("--axis", required=True, choices=AXES)
    p.add_argument("--values", required=True, help="comma-separated, strictly increasing")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--per-node", action="store_true")
    p.add_argument("--cooperative-baselines", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("hit-rates", help="local and global cache-hit rates")
    common(p, "most-foa,distributed")
    p.add_argument("--count", type=int, default=10_000)
    p.add_argument("--show-greedy-global", action="store_true")
    p.set_defaults(func=cmd_hit_rates)

    p = sub.add_parser("case-study", help="3 MENs + BS, 30 contents")
    common(p, "locally-optimal,distributed,centralized")
    p.add_argument("--reps", type=int, default=1)
    p.set_defaults(func=cmd_case_study)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, ScenarioError, SweepError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntractableError, OracleBudgetExceeded) as exc:
        print(f"intractable: {exc}", file=sys.stderr)
        return EXIT_INTRACTABLE
    except SolverLimitError as exc:
        print(f"solver limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT


if __name__ == "__main__":
    sys.exit(main())
