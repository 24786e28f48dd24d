"""Depth-first branch-and-bound over the binaries of the transformed problem.

Each node solves the continuous relaxation with its fixings. A node is
closed when its relaxation is infeasible, when its value is within the
optimality tolerance of the incumbent, or when every free binary is within
``tau`` of an integer. Otherwise the most fractional free binary is
branched on, and the child fixing it to 1 is explored first.

The relaxation is nonconvex, so node values are local optima rather than
certified bounds; the reported gap is the gap between these values.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .ipm import INFEASIBLE, IpmParams, RelaxedSolution, solve_relaxation
from .scenario import Scenario, request_delays, total_average_delay
from .transform import Assignment, MinlpProblem, transform

ETA_OPTIMAL, NODE_LIMIT, STATUS_INFEASIBLE = "eta_optimal", "node_limit", "infeasible"


@dataclass(frozen=True)
class BnbParams:
    eta: float = 0.01
    eta_mode: str = "relative"  # or "absolute"
    tau: float = 1e-4
    max_nodes: int = 50_000
    branching_rule: str = "most_fractional"  # or "lowest_index"
    seed: int = 0
    rounding: bool = True  # try round_and_repair at every node
    polish: bool = True  # exact add/swap local search on every rounded incumbent
    ipm: IpmParams = field(default_factory=IpmParams)

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be non-negative")
        if not 0 < self.tau < 0.5:
            raise ValueError("tau must lie in (0, 0.5)")
        if self.eta_mode not in ("relative", "absolute"):
            raise ValueError("eta_mode must be 'relative' or 'absolute'")
        if self.branching_rule not in ("most_fractional", "lowest_index"):
            raise ValueError(f"unknown branching rule {self.branching_rule!r}")
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be positive")

    def eta_for(self, upper: float) -> float:
        if not np.isfinite(upper):
            return 0.0
        return self.eta * abs(upper) if self.eta_mode == "relative" else self.eta


@dataclass(frozen=True, eq=False)
class SolveReport:
    placement: np.ndarray | None
    delivery: dict
    z_hat: np.ndarray | None
    objective: float
    lower_bound: float
    upper_bound: float
    nodes_explored: int
    first_leaf_depth: int
    wall_time: float
    status: str
    eta: float = 0.0
    incumbents: tuple[float, ...] = ()
    max_depth: int = 0

    def to_record(self) -> str:
        """Line-oriented ``key value`` record (placement rows as 0/1 strings)."""
        lines = [f"status {self.status}", f"objective {self.objective:.10g}",
                 f"lower_bound {self.lower_bound:.10g}", f"upper_bound {self.upper_bound:.10g}",
                 f"eta {self.eta:.10g}", f"nodes_explored {self.nodes_explored}",
                 f"first_leaf_depth {self.first_leaf_depth}", f"max_depth {self.max_depth}"]
        if self.placement is not None:
            for n, row in enumerate(np.asarray(self.placement, dtype=int)):
                lines.append(f"x {n + 1} {''.join(map(str, row))}")
        return "\n".join(lines) + "\n"


class IntegralError(ValueError):
    """No free binary is fractional beyond the threshold."""


def _binaries(problem: MinlpProblem | None, relaxed) -> np.ndarray:
    if isinstance(relaxed, Assignment):
        return np.concatenate([np.ravel(relaxed.x), np.ravel(relaxed.y)])
    v = np.asarray(relaxed, dtype=float)
    if problem is not None and v.shape == (problem.nvar,):
        return v[:problem.n_binary]
    return v


def branch_variable(relaxed, rule: str = "most_fractional", tau: float = 1e-4,
                    free: np.ndarray | None = None, problem: MinlpProblem | None = None) -> int:
    """Index (x first, then y) of the binary to branch on."""
    v = _binaries(problem, relaxed)
    frac = np.abs(v - np.round(v))
    cand = frac >= tau
    if free is not None:
        cand &= np.asarray(free, dtype=bool)
    if not cand.any():
        raise IntegralError("no free binary is fractional")
    if rule == "lowest_index":
        return int(np.flatnonzero(cand)[0])
    if rule != "most_fractional":
        raise ValueError(f"unknown branching rule {rule!r}")
    score = np.where(cand, frac, -1.0)
    return int(np.argmax(score))  # first maximum = lowest index on ties


def _repair_scores(problem: MinlpProblem) -> np.ndarray:
    sc = problem.scenario
    return sc.weights * (sc.server_delay - sc.access_delay)


def round_and_repair(relaxed: Assignment, problem: MinlpProblem,
                     fixings: dict[int, float] | None = None) -> Assignment | None:
    """Round x, evict the least valuable contents until capacities hold, then
    recompute the optimal delivery variables. Returns None if contents fixed
    to 1 alone overfill a node."""
    sc = problem.scenario
    x = np.round(np.asarray(relaxed.x, dtype=float)).astype(bool)
    pinned = np.zeros_like(x)
    for k, v in (fixings or {}).items():
        if k < problem.nx:
            n, i = divmod(k, problem.I)
            x[n, i] = bool(v)
            pinned[n, i] = bool(v)
    score = _repair_scores(problem)
    for n in range(sc.N):
        used = x[n] @ sc.sizes
        if used <= sc.capacities[n] * (1 + 1e-12) + 1e-9:
            continue
        order = [i for i in np.lexsort((np.arange(sc.I), score[n])) if x[n, i] and not pinned[n, i]]
        for i in order:
            x[n, i] = False
            used -= sc.sizes[i]
            if used <= sc.capacities[n] * (1 + 1e-12) + 1e-9:
                break
        if used > sc.capacities[n] * (1 + 1e-12) + 1e-9:
            return None
    return problem.complete(x.astype(float))


def _flip_deltas(scenario: Scenario, x: np.ndarray) -> np.ndarray:
    """delta[n, i]: change of the network delay when x[n, i] alone is flipped.

    The delay separates by content, so flipping a whole row at once gives
    every single-entry flip of that row in one evaluation.
    """
    w = scenario.weights
    base = (w * request_delays(scenario, x)).sum(axis=0)
    out = np.empty(x.shape)
    for n in range(scenario.N):
        xf = x.copy()
        xf[n] = ~xf[n]
        out[n] = (w * request_delays(scenario, xf)).sum(axis=0) - base
    return out


def _refit_sets(N: int) -> list[tuple[int, ...]]:
    from itertools import combinations

    sets = [(n,) for n in range(N)]
    if N <= 8:
        sets += list(combinations(range(N), 2))
    if N > 2:
        sets.append(tuple(range(N)))
    return sets


def _row_refit(scenario: Scenario, x: np.ndarray) -> bool:
    """Give a set of nodes one common row that is optimal given the other rows.

    With the remaining rows fixed, the saving of caching content i at every
    node of the set does not depend on the other contents, so the common row
    is a 0-1 knapsack at the smallest capacity of the set. Singletons and
    pairs are tried (plus the full node set). Returns True on any improvement.
    """
    from .distributed import knapsack

    sc = scenario
    w = sc.weights
    changed = False
    for S in _refit_sets(sc.N):
        S = list(S)
        x0, x1 = x.copy(), x.copy()
        x0[S], x1[S] = False, True
        c0 = (w * request_delays(sc, x0)).sum(axis=0)
        gain = c0 - (w * request_delays(sc, x1)).sum(axis=0)
        row = knapsack(sc.sizes, gain, sc.capacities[S].min())
        x2 = x0.copy()
        x2[S] = row
        cur = (w * request_delays(sc, x)).sum()
        new = (w * request_delays(sc, x2)).sum()
        if new < cur - 1e-9 * max(1.0, cur):
            x[:] = x2
            changed = True
    return changed


def polish(scenario: Scenario, placement, max_moves: int | None = None) -> np.ndarray:
    """Local search on a feasible placement.

    Alternates exact per-row knapsack refits with best-improvement add and
    swap moves until neither improves the network delay.
    """
    sc = scenario
    x = np.asarray(placement, dtype=bool).copy()
    c = sc.sizes
    tol = 1e-9
    for _ in range(max_moves if max_moves is not None else 4 * sc.N * sc.I):
        refit = _row_refit(sc, x)
        d = _flip_deltas(sc, x)
        room = sc.capacities - x @ c
        best, move = -1e-9 * max(1.0, total_average_delay(sc, x)), None
        for n in range(sc.N):
            out_ = np.flatnonzero(~x[n])
            if out_.size == 0:
                continue
            add = out_[c[out_] <= room[n] + tol]
            if add.size:
                k = add[np.argmin(d[n, add])]
                if d[n, k] < best:
                    best, move = d[n, k], (n, None, k)
            in_ = np.flatnonzero(x[n])
            if in_.size == 0:
                continue
            gain = d[n, in_][:, None] + d[n, out_][None, :]
            fits = c[out_][None, :] - c[in_][:, None] <= room[n] + tol
            gain = np.where(fits, gain, np.inf)
            r, q = np.unravel_index(np.argmin(gain), gain.shape)
            if gain[r, q] < best:
                best, move = gain[r, q], (n, in_[r], out_[q])
        if move is None:
            if not refit:
                break
            continue
        n, i, j = move
        if i is not None:
            x[n, i] = False
        x[n, j] = True
    return x


@dataclass
class _Node:
    fixings: dict
    depth: int
    hint: np.ndarray | None
    parent_value: float


def solve(problem: MinlpProblem, params: BnbParams = BnbParams(),
          root_hints: list[np.ndarray] | tuple = ()) -> SolveReport:
    """Branch-and-bound with interior-point relaxations.

    ``root_hints`` are points (in the problem's variable layout) used as
    extra starting points for the root relaxation, typically heuristic
    placements completed with their optimal y and z.
    """
    t0 = time.perf_counter()
    sc = problem.scenario
    ipm = replace(params.ipm, seed=params.seed)
    nb = problem.n_binary
    best_x: np.ndarray | None = None
    best_a: Assignment | None = None
    upper = np.inf
    history: list[float] = []
    closed_min = np.inf  # smallest value among nodes closed without branching
    first_leaf = -1
    explored = 0
    max_depth = 0

    def offer(a: Assignment, depth: int) -> None:
        nonlocal best_x, best_a, upper, first_leaf
        x = a.x >= 0.5
        if params.polish:
            x = polish(sc, x)
            a = problem.complete(x.astype(float))
        val = total_average_delay(sc, x)
        if val < upper - 1e-12 * max(1.0, abs(upper)) if np.isfinite(upper) else True:
            best_x, best_a, upper = x, a, val
            history.append(val)
            if first_leaf < 0:
                first_leaf = depth

    stack = [_Node({}, 0, None, -np.inf)]
    root_infeasible = False
    while stack:
        if explored >= params.max_nodes:
            break
        node = stack.pop()
        explored += 1
        max_depth = max(max_depth, node.depth)
        hints = list(root_hints) if node.depth == 0 else ([node.hint] if node.hint is not None else [])
        rel: RelaxedSolution = solve_relaxation(problem, node.fixings, ipm, hints)
        if rel.status == INFEASIBLE:
            if node.depth == 0:
                root_infeasible = True
            continue
        val = rel.objective
        if params.rounding:
            for pt in (rel.point, *rel.others):
                a = round_and_repair(problem.unpack(pt), problem, node.fixings)
                if a is not None:
                    offer(a, node.depth)
        if val > upper - params.eta_for(upper):
            closed_min = min(closed_min, val)
            continue
        free = np.ones(nb, dtype=bool)
        for k in node.fixings:
            free[k] = False
        v = problem.pack(rel.assignment)[:nb]
        frac = np.abs(v - np.round(v)) * free
        if frac.max(initial=0.0) < params.tau:
            a = problem.complete(np.round(rel.assignment.x))
            offer(a, node.depth)
            closed_min = min(closed_min, val)
            continue
        zeta = branch_variable(v, params.branching_rule, params.tau, free)
        for bit in (0.0, 1.0):  # the 1-child is pushed last and popped first
            fx = dict(node.fixings)
            fx[zeta] = bit
            hint = problem.pack(rel.assignment).copy()
            hint[zeta] = bit
            stack.append(_Node(fx, node.depth + 1, hint, val))

    wall = time.perf_counter() - t0
    if best_x is None:
        status = STATUS_INFEASIBLE if root_infeasible or not stack else NODE_LIMIT
        return SolveReport(None, {}, None, np.inf, np.inf if status == STATUS_INFEASIBLE else -np.inf,
                           np.inf, explored, max(first_leaf, 0), wall, status,
                           params.eta_for(np.inf), tuple(history), max_depth)
    open_min = min((n.parent_value for n in stack), default=np.inf)
    lower = min(upper, closed_min, open_min)
    status = ETA_OPTIMAL if not stack else NODE_LIMIT
    return SolveReport(best_x, problem.delivery(best_a), best_a.z, upper, lower, upper, explored,
                       max(first_leaf, 0), wall, status, params.eta_for(upper), tuple(history),
                       max_depth)


def centralized_placement(scenario: Scenario, params: BnbParams = BnbParams(),
                          big_m="tight", hints: bool = True) -> SolveReport:
    """Solve the transformed problem, seeding the root with heuristic placements.

    The tight penalty is the default: it has the same binary optimum as the
    large one but a far less binary-forcing relaxation.
    """
    from .distributed import distributed_placement, local_optimal_placement

    problem = transform(scenario, big_m)
    root = []
    if hints:
        for x in (distributed_placement(scenario), local_optimal_placement(scenario)):
            root.append(problem.pack(problem.complete(x.astype(float))))
    return solve(problem, params, root)
