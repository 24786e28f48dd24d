"""Distributed caching: per-node exact knapsacks, then a neighbor deduplication pass.

Every node first caches the set that minimises its own delay when nobody
cooperates (the BS first, since the MENs' savings depend on what the BS
holds). The cooperation pass then walks contents in id order and, at each
node holding a content that a neighbor also holds, swaps it for the most
requested content missing from the neighborhood. A content round is kept
only if the cooperative network delay drops.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .scenario import Scenario, check_placement, request_delays


@dataclass(frozen=True, eq=False)
class LocalProblem:
    node: int
    savings: np.ndarray  # seconds saved per content if cached at this node
    weights: np.ndarray  # content sizes, megabits
    capacity: float


def local_problem(scenario: Scenario, node: int, bs_row: np.ndarray | None = None) -> LocalProblem:
    """Savings of caching each content at ``node`` without horizontal cooperation."""
    sc = scenario
    c, w = sc.sizes, sc.weights[node]
    if node == sc.bs:
        miss = sc.access_delay[node] + c / sc.topology.backhaul_bandwidth
    else:
        if bs_row is None:
            raise ValueError("MEN savings need the BS placement")
        via_bs = sc.access_delay[node] + c / sc.topology.bandwidth[node, sc.bs]
        miss = np.where(np.asarray(bs_row, dtype=bool), via_bs, sc.server_delay[node])
    return LocalProblem(node, w * (miss - sc.access_delay[node]), c, float(sc.capacities[node]))


def knapsack(weights: np.ndarray, values: np.ndarray, capacity: float) -> np.ndarray:
    """Exact 0-1 knapsack by dynamic programming over whole-megabit capacity.

    Weights are rounded up and the capacity down to integers. A later item
    replaces an earlier choice only on strict improvement, so among optimal
    sets the one preferring lower indices is returned.
    """
    wt = np.ceil(np.asarray(weights, dtype=float) - 1e-9).astype(np.int64)
    val = np.asarray(values, dtype=float)
    C = int(np.floor(capacity + 1e-9))
    n = len(wt)
    take = np.zeros(n, dtype=bool)
    if C <= 0 or n == 0:
        return take
    best = np.zeros(C + 1)
    keep = np.zeros((n, C + 1), dtype=bool)
    for i in range(n):
        if wt[i] > C or val[i] <= 0:
            continue
        cand = best[:C + 1 - wt[i]] + val[i]
        cur = best[wt[i]:]
        better = cand > cur + 1e-12 * np.maximum(1.0, np.abs(cur))
        keep[i, wt[i]:] = better
        best[wt[i]:] = np.where(better, cand, cur)
    c = C
    for i in range(n - 1, -1, -1):
        if keep[i, c]:
            take[i] = True
            c -= wt[i]
    return take


def solve_local(problem: LocalProblem) -> np.ndarray:
    return knapsack(problem.weights, problem.savings, problem.capacity)


def local_optimal_placement(scenario: Scenario, bs_placement=None) -> np.ndarray:
    """BS row from its own knapsack (unless given), then each MEN's knapsack given the BS row."""
    x = np.zeros((scenario.N, scenario.I), dtype=bool)
    if bs_placement is None:
        x[scenario.bs] = solve_local(local_problem(scenario, scenario.bs))
    else:
        x[scenario.bs] = np.asarray(bs_placement, dtype=bool)
    for n in range(scenario.N - 1):
        x[n] = solve_local(local_problem(scenario, n, x[scenario.bs]))
    return x


# -- cooperation ---------------------------------------------------------------

class LocalityError(RuntimeError):
    """A node read state outside its neighborhood."""


class NeighborhoodView:
    """Row access to the tentative placement on behalf of one node.

    Reads of rows other than the node's own and its neighbors' raise
    ``LocalityError``; every read is logged so tests can audit the pattern.
    """

    def __init__(self, x: np.ndarray, node: int, neighbors, log: list | None = None):
        self._x = x
        self.node = node
        self.allowed = frozenset([node, *neighbors])
        self.log = log

    def row(self, m: int) -> np.ndarray:
        if m not in self.allowed:
            raise LocalityError(f"node {self.node + 1} read the row of node {m + 1}")
        if self.log is not None:
            self.log.append((self.node, m))
        return self._x[m]

    def set(self, i: int, value: bool):
        self._x[self.node, i] = value


def local_delay(scenario: Scenario, view: NeighborhoodView) -> float:
    """Cooperative delay sum_i f U d at the viewing node, from neighborhood rows only."""
    n = view.node
    sc = scenario
    c = sc.sizes
    best = np.full(sc.I, np.inf)
    for m in sc.neighbor_lists[n]:
        best = np.where(view.row(m), np.minimum(best, c / sc.topology.bandwidth[n, m]), best)
    da = sc.access_delay[n]
    d = np.where(view.row(n), da, np.where(np.isfinite(best), da + best, sc.server_delay[n]))
    return float(sc.weights[n] @ d)


@dataclass
class CooperationStats:
    candidate_checks: int = 0
    rounds_accepted: int = 0
    passes: int = 0
    trace: list[str] = field(default_factory=list)
    reads: list[tuple[int, int]] | None = None


def _pick_candidate(scenario: Scenario, view: NeighborhoodView, i: int, room: float,
                    stats: CooperationStats) -> int | None:
    n = view.node
    own = view.row(n)
    around = np.zeros(scenario.I, dtype=bool)
    for m in scenario.neighbor_lists[n]:
        around |= view.row(m)
    f = scenario.foa[n]
    c = scenario.sizes
    fits = (~own) & (c <= room * (1 + 1e-12) + 1e-9)
    fits[i] = False
    stats.candidate_checks += scenario.I - 1
    for pool in (fits & ~around, fits):
        if pool.any():
            idx = np.flatnonzero(pool)
            return int(idx[np.argmax(f[idx])])  # argmax keeps the lowest id on ties
    return None


def cooperate(scenario: Scenario, placement, multi_pass: bool = False,
              stats: CooperationStats | None = None, track_reads: bool = False):
    """Neighbor deduplication pass. Returns ``(placement, cooperative total delay)``."""
    sc = scenario
    x = check_placement(sc, placement).copy()
    stats = stats if stats is not None else CooperationStats()
    if track_reads and stats.reads is None:
        stats.reads = []
    psi_n = np.array([local_delay(sc, NeighborhoodView(x, n, sc.neighbor_lists[n]))
                      for n in range(sc.N)])
    psi = float(psi_n.sum())
    while True:
        stats.passes += 1
        improved = False
        for i in range(sc.I):
            xt = x.copy()
            touched = []
            for n in range(sc.N):
                view = NeighborhoodView(xt, n, sc.neighbor_lists[n], stats.reads)
                if not view.row(n)[i]:
                    continue
                if not any(view.row(m)[i] for m in sc.neighbor_lists[n]):
                    continue
                view.set(i, False)
                used = view.row(n).astype(float) @ sc.sizes
                cand = _pick_candidate(sc, view, i, sc.capacities[n] - used, stats)
                if cand is not None:
                    view.set(cand, True)
                touched.append((n, cand))
            if not touched:
                continue
            # every node re-evaluates its own delay from its neighborhood; the
            # network figure is the sum of those scalars
            psi_c_n = np.array([local_delay(sc, NeighborhoodView(xt, n, sc.neighbor_lists[n],
                                                                 stats.reads))
                                for n in range(sc.N)])
            psi_c = float(psi_c_n.sum())
            ok = psi_c < psi - 1e-12 * max(1.0, abs(psi))
            for n, cand in touched:
                stats.trace.append(
                    f"{i + 1} {n + 1} {'-' if cand is None else cand + 1} "
                    f"{'accepted' if ok else 'reverted'} {psi:.6g} {psi_c:.6g}")
            if ok:
                x, psi, psi_n = xt, psi_c, psi_c_n
                stats.rounds_accepted += 1
                improved = True
        if not (multi_pass and improved) or stats.passes >= sc.I * sc.N:
            break
    return x, float((sc.weights * request_delays(sc, x)).sum())


def distributed_placement(scenario: Scenario, multi_pass: bool = False,
                          stats: CooperationStats | None = None) -> np.ndarray:
    x, _ = cooperate(scenario, local_optimal_placement(scenario), multi_pass, stats)
    return x
