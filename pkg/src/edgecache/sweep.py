"""Seeded parameter sweeps comparing placement policies.

Every repetition rebuilds the scenario from ``base_seed + repetition`` and
all policies of a row group see that same instance. Baselines are scored
with the non-cooperative delay and the cooperative solutions with the
cooperative one (``cooperative_baselines`` scores everything cooperatively).
Objectives are reported per node, i.e. the network delay divided by N.
"""
from __future__ import annotations

import copy
import csv
import io
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .bnb import BnbParams, centralized_placement
from .distributed import distributed_placement
from .metrics import distinct_contents, generate_requests, hit_rates
from .oracle import DEFAULT_BUDGET, exhaustive_optimal
from .policies import PolicyKind, noncooperative_delays, place
from .scenario import MB_PER_GB, Scenario, build_scenario, request_delays, template_config

AXES = ("capacity", "content_count", "men_count")
PROPOSED = ("distributed", "centralized", "oracle")
POLICIES = tuple(k.value for k in PolicyKind) + PROPOSED
# centralized solves are refused above this many (node, content) pairs
CENTRALIZED_MAX_PAIRS = 1000


class SweepError(ValueError):
    """Invalid sweep definition."""


class IntractableError(RuntimeError):
    """The requested policy cannot be solved at this instance size."""


class SolverLimitError(RuntimeError):
    """The centralized solver stopped on its node limit."""


def normalize_policy(name: str) -> str:
    key = name.replace("-", "_").lower()
    if key not in POLICIES:
        raise SweepError(f"unknown policy {name!r}")
    return key


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    fixed: Mapping[str, Any] = field(default_factory=template_config)
    policies: tuple[str, ...] = ("greedy", "most_foa", "guaranteed_greedy", "locally_optimal",
                                 "distributed")
    repetitions: int = 1
    base_seed: int = 0
    per_node: bool = False
    cooperative_baselines: bool = False
    requests: int = 10_000
    bnb: BnbParams = field(default_factory=BnbParams)
    per_node_greedy: bool = False
    strict_limits: bool = False  # raise SolverLimitError instead of reporting node_limit rows

    def __post_init__(self):
        if self.axis not in AXES:
            raise SweepError(f"axis must be one of {AXES}, got {self.axis!r}")
        vals = tuple(self.values)
        if not vals:
            raise SweepError("values must be non-empty")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise SweepError("values must be strictly increasing")
        if self.repetitions < 1:
            raise SweepError("repetitions must be at least 1")
        if not self.policies:
            raise SweepError("at least one policy is needed")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "policies", tuple(normalize_policy(p) for p in self.policies))


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    policy: str
    repetition: int
    seed: int
    objective: float
    h_tot: float
    h_star_tot: float
    nodes_explored: int
    wall_time: float
    distinct: int
    status: str = ""
    per_node: tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class SweepResult:
    spec: SweepSpec
    rows: tuple[SweepRow, ...]

    def mean(self, policy: str, axis_value) -> float:
        vals = [r.objective for r in self.rows if r.policy == policy and r.axis_value == axis_value]
        return float(np.mean(vals)) if vals else float("nan")


def scenario_config(fixed: Mapping[str, Any], axis: str, value, seed: int) -> dict:
    cfg = copy.deepcopy(dict(fixed))
    cfg["seed"] = seed
    nodes = cfg["nodes"]
    if axis == "capacity":
        nodes["capacity_mb"] = float(value) * MB_PER_GB
        nodes["bs_capacity_mb"] = float(value) * MB_PER_GB
    elif axis == "content_count":
        cfg["contents"]["count"] = int(value)
    elif axis == "men_count":
        nodes["men_count"] = int(value) - 1  # the axis counts the BS too
    return cfg


def check_tractable(scenario: Scenario, policy: str) -> None:
    if policy == "centralized" and scenario.N * scenario.I > CENTRALIZED_MAX_PAIRS:
        raise IntractableError(
            f"centralized solve refused for N*I = {scenario.N * scenario.I} > {CENTRALIZED_MAX_PAIRS}")


def evaluate_policy(scenario: Scenario, policy: str, spec: SweepSpec, stream=None):
    """Placement, scored per-node delays, nodes explored, status and wall time."""
    t0 = time.perf_counter()
    nodes, status = 0, ""
    check_tractable(scenario, policy)
    if policy == "distributed":
        x = distributed_placement(scenario)
    elif policy == "centralized":
        rep = centralized_placement(scenario, spec.bnb, big_m="tight")
        if rep.placement is None:
            raise IntractableError(f"centralized solve ended with status {rep.status}")
        if rep.status != "eta_optimal" and spec.strict_limits:
            raise SolverLimitError(f"centralized solve stopped after {rep.nodes_explored} nodes")
        x, nodes, status = rep.placement, rep.nodes_explored, rep.status
    elif policy == "oracle":
        x = exhaustive_optimal(scenario, DEFAULT_BUDGET).placement
    else:
        x = place(scenario, policy, per_node=spec.per_node_greedy)
    wall = time.perf_counter() - t0
    coop = policy in PROPOSED or spec.cooperative_baselines
    d = request_delays(scenario, x) if coop else noncooperative_delays(scenario, x)
    per_node = (scenario.weights * d).sum(axis=1)
    return x, per_node, nodes, status, wall


def _row_group(spec: SweepSpec, value, rep: int) -> list[SweepRow]:
    seed = spec.base_seed + rep
    sc = build_scenario(scenario_config(spec.fixed, spec.axis, value, seed))
    stream = generate_requests(sc, spec.requests, seed)
    rows = []
    for pol in spec.policies:
        x, per_node, nodes, status, wall = evaluate_policy(sc, pol, spec)
        h = hit_rates(sc, x, stream, cooperative=False).h_tot
        hs = hit_rates(sc, x, stream, cooperative=True).h_star_tot
        rows.append(SweepRow(float(value), pol, rep, seed, float(per_node.sum() / sc.N), h, hs,
                             nodes, wall, distinct_contents(x), status,
                             tuple(float(v) for v in per_node) if spec.per_node else ()))
    return rows


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("EDGECACHE_THREADS", "1")))
    except ValueError:
        return 1


def run_sweep(spec: SweepSpec, workers: int | None = None) -> SweepResult:
    jobs = [(v, r) for v in spec.values for r in range(spec.repetitions)]
    workers = worker_count() if workers is None else max(1, workers)
    if workers == 1:
        groups = [_row_group(spec, v, r) for v, r in jobs]
    else:
        with ThreadPoolExecutor(workers) as pool:
            groups = list(pool.map(lambda j: _row_group(spec, *j), jobs))
    rows = [row for g in groups for row in g]
    order = {p: k for k, p in enumerate(spec.policies)}
    rows.sort(key=lambda r: (r.axis_value, r.repetition, order[r.policy]))
    return SweepResult(spec, tuple(rows))


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.6g}"
    return str(v)


CSV_COLUMNS = ("axis", "axis_value", "policy", "repetition", "seed", "objective", "h_tot",
               "h_star_tot", "nodes_explored", "distinct_contents", "status")


def csv_text(result: SweepResult, timing: bool = False) -> str:
    """CSV with 6 significant digits. Wall time is left out unless ``timing``
    is set, so that repeated runs give identical bytes."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n_nodes = max((len(r.per_node) for r in result.rows), default=0)
    header = list(CSV_COLUMNS) + [f"node_{k + 1}" for k in range(n_nodes)]
    if timing:
        header.append("wall_time")
    w.writerow(header)
    for r in result.rows:
        line = [result.spec.axis, _fmt(r.axis_value), r.policy, r.repetition, r.seed,
                _fmt(r.objective), _fmt(r.h_tot), _fmt(r.h_star_tot), r.nodes_explored,
                r.distinct, r.status]
        line += [_fmt(v) for v in r.per_node] + [""] * (n_nodes - len(r.per_node))
        if timing:
            line.append(_fmt(r.wall_time))
        w.writerow(line)
    return buf.getvalue()


def emit_csv(result: SweepResult, path: str | Path, timing: bool = False) -> None:
    Path(path).write_text(csv_text(result, timing), newline="")
