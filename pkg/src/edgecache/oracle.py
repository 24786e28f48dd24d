"""Exhaustive ground truth for small instances.

The objective separates by content once the column ``x[:, i]`` is known, so
a table ``cost[pattern, i]`` over all 2^N column patterns is built first.
Enumeration then walks the cross product of per-node feasible subsets; the
last (BS) row is scored for all of its subsets at once with a matrix product.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Scenario, request_delays
from .transform import MinlpProblem

DEFAULT_BUDGET = 2 ** 32
_CHUNK = 256
# counting stops here when reporting an exceeded budget; larger counts are lower bounds
_ESTIMATE_CAP = 2 ** 16


class OracleBudgetExceeded(RuntimeError):
    def __init__(self, estimate: int, budget: int):
        super().__init__(f"exhaustive search needs at least {estimate} placements"
                         f" > budget {budget}")
        self.estimate = estimate
        self.budget = budget


@dataclass(frozen=True)
class OracleBudget:
    max_enumerations: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.max_enumerations < 1:
            raise ValueError("budget must be positive")


@dataclass(frozen=True, eq=False)
class OracleResult:
    placement: np.ndarray
    objective: float
    enumerated: int


def feasible_subsets(sizes: np.ndarray, capacity: float, limit: int | None = None) -> np.ndarray:
    """All subsets fitting ``capacity``, as boolean rows in lexicographic order.

    Depth-first over contents with "leave out" explored before "take", which
    yields ascending lexicographic order of the 0/1 vectors.
    """
    sizes = np.asarray(sizes, dtype=float)
    I = len(sizes)
    tol = 1e-9 * max(1.0, capacity)
    out: list[list[bool]] = []
    cur = [False] * I

    def dfs(j: int, room: float):
        if limit is not None and len(out) > limit:
            return
        if j == I:
            out.append(cur.copy())
            return
        dfs(j + 1, room)
        if sizes[j] <= room + tol:
            cur[j] = True
            dfs(j + 1, room - sizes[j])
            cur[j] = False

    dfs(0, float(capacity))
    return np.array(out, dtype=bool).reshape(-1, I)


def column_costs(scenario: Scenario) -> np.ndarray:
    """cost[p, i] = sum_n f U d[n, i] when column i caches at the nodes in bitmask p."""
    N, I = scenario.N, scenario.I
    cost = np.empty((2 ** N, I))
    bits = 1 << np.arange(N)
    for p in range(2 ** N):
        col = (p & bits) > 0
        x = np.repeat(col[:, None], I, axis=1)
        cost[p] = (scenario.weights * request_delays(scenario, x)).sum(axis=0)
    return cost


def _enumerate(cost: np.ndarray, subsets: list[np.ndarray], budget: int) -> OracleResult:
    """Lexicographically first minimiser of sum_i cost[code_i, i] over the subset product."""
    N = len(subsets)
    I = cost.shape[1]
    counts = [len(s) for s in subsets]
    total = int(np.prod(counts, dtype=object))
    if total > budget:
        raise OracleBudgetExceeded(total, budget)
    cols = np.arange(I)
    last = subsets[-1].astype(float)
    bs_bit = 1 << (N - 1)
    radix = counts[:-1]
    n_outer = int(np.prod(radix, dtype=object)) if radix else 1
    best_val, best_pos = np.inf, None

    for start in range(0, n_outer, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, n_outer))
        code = np.zeros((len(idx), I), dtype=np.int64)
        rem = idx.copy()
        digits = []
        for n in range(N - 2, -1, -1):  # node 0 is the most significant digit
            digits.append(rem % radix[n])
            rem //= radix[n]
        digits.reverse()
        for n in range(N - 1):
            code |= subsets[n][digits[n]].astype(np.int64) << n
        base = cost[code, cols].sum(axis=1)
        delta = cost[code | bs_bit, cols] - cost[code, cols]
        # admissible bound: the BS row can at best collect every negative delta
        lb = base + np.minimum(delta, 0.0).sum(axis=1)
        keep = lb <= best_val + _tie(best_val)
        if not keep.any():
            continue
        rows = np.flatnonzero(keep)
        tot = base[rows, None] + delta[rows] @ last.T
        m = tot.min()
        if m < best_val - _tie(best_val):
            r, c = np.argwhere(tot <= m + _tie(m))[0]
            best_val, best_pos = float(tot[r, c]), (int(idx[rows[r]]), int(c))
            best_digits = [int(d[rows[r]]) for d in digits]
        # later ties lose: chunks arrive in lexicographic order
    x = np.vstack([subsets[n][best_digits[n]] for n in range(N - 1)] + [subsets[-1][best_pos[1]]])
    return OracleResult(x, best_val, total)


def _tie(v: float) -> float:
    return 1e-9 * max(1.0, abs(v)) if np.isfinite(v) else 0.0


def estimate_enumerations(scenario: Scenario, budget: int = DEFAULT_BUDGET,
                          per_node_limit: int | None = None) -> int:
    """Number of placements the oracle would enumerate, counted until it passes ``budget``.

    With ``per_node_limit`` each node's count stops just past that limit, so the
    result is a lower bound whenever some node has more feasible subsets.
    """
    total = 1
    lim = budget if per_node_limit is None else min(budget, per_node_limit)
    for n in range(scenario.N):
        k = len(feasible_subsets(scenario.sizes, scenario.capacities[n], limit=lim))
        total *= k
        if total > budget:
            break
    return total


def exhaustive_optimal(scenario: Scenario, budget: OracleBudget | int | None = None) -> OracleResult:
    """Exact minimiser of the cooperative network delay; ties to the lexicographically smallest x."""
    b = _budget(budget)
    subsets = []
    total = 1
    for n in range(scenario.N):
        s = feasible_subsets(scenario.sizes, scenario.capacities[n], limit=b)
        total *= len(s)
        if total > b:
            raise OracleBudgetExceeded(max(total, estimate_enumerations(scenario, 2 ** 62, _ESTIMATE_CAP)), b)
        subsets.append(s)
    return _enumerate(column_costs(scenario), subsets, b)


def minlp_enumerate(problem: MinlpProblem, budget: OracleBudget | int | None = None) -> OracleResult:
    """Binary optimum of the transformed problem by enumeration over (x, y).

    For each column pattern and node, every admissible y (one selected
    neighbor per group) is tried with z at its lower bound, and the per-term
    objective of the transformed problem is minimised. The x enumeration
    then proceeds as in :func:`exhaustive_optimal`.
    """
    sc = problem.scenario
    N, I = sc.N, sc.I
    b = _budget(budget)
    cost = np.empty((2 ** N, I))
    bits = 1 << np.arange(N)
    for p in range(2 ** N):
        x = np.repeat(((p & bits) > 0)[:, None], I, axis=1).astype(float)
        best = np.full((N, I), np.inf)
        for j in range(max(len(nb) for nb in sc.neighbor_lists)):
            y = np.ones(problem.ny)
            for n in range(N):
                k = len(sc.neighbor_lists[n])
                if j >= k:
                    continue
                sel = (problem.y_node == n) & (problem.y_nbr == sc.neighbor_lists[n][j])
                y[sel] = 0.0
            z = problem.z_lower_bound(x, y)
            t = problem.terms(np.concatenate([x.ravel(), y, z.ravel()]))
            for n in range(N):
                if j < len(sc.neighbor_lists[n]):
                    best[n] = np.minimum(best[n], t[n])
        cost[p] = best.sum(axis=0)
    subsets = [feasible_subsets(sc.sizes, sc.capacities[n], limit=b) for n in range(N)]
    return _enumerate(cost, subsets, b)


def _budget(budget) -> int:
    if budget is None:
        return DEFAULT_BUDGET
    if isinstance(budget, OracleBudget):
        return budget.max_enumerations
    return OracleBudget(int(budget)).max_enumerations
