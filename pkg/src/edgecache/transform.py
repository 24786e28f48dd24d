"""Mixed-integer reformulation of the joint caching/delivery problem.

The inner "fastest caching neighbor" minimisation is replaced by auxiliary
binaries ``y[n,m,i]`` (one per requester, neighbor and content; ``y = 0``
marks the serving neighbor) and a delivery-time variable ``z[n,i]`` bounded
below by big-M selection constraints::

    (c_i/l_nm) * (x[m,i] + (1 - x[m,i]) V - V y[n,m,i]) - z[n,i] <= 0
    sum_m y[n,m,i] = |neighbors(n)| - 1

The y-term carries the same ``c_i/l_nm`` factor as the penalised delivery
time so that ``y = 1`` makes the row vacuous for every ``V``.

Variables are stacked as ``p = [x.ravel(), y, z.ravel()]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .scenario import Scenario


@dataclass(frozen=True, eq=False)
class Assignment:
    x: np.ndarray  # (N, I) in [0, 1]
    y: np.ndarray  # (Y,) aligned with MinlpProblem.y_keys
    z: np.ndarray  # (N, I) >= 0

    def is_binary(self, tol: float = 0.0) -> bool:
        g = np.concatenate([np.ravel(self.x), np.ravel(self.y)])
        return bool(np.all(np.abs(g - np.round(g)) <= tol))


@dataclass(frozen=True, eq=False)
class MinlpProblem:
    scenario: Scenario
    big_m: float
    y_node: np.ndarray
    y_nbr: np.ndarray
    y_content: np.ndarray

    # -- index spaces ------------------------------------------------------
    @property
    def N(self) -> int:
        return self.scenario.N

    @property
    def I(self) -> int:  # noqa: E743
        return self.scenario.I

    @property
    def nx(self) -> int:
        return self.N * self.I

    @property
    def ny(self) -> int:
        return len(self.y_node)

    @property
    def nz(self) -> int:
        return self.N * self.I

    @property
    def nvar(self) -> int:
        return self.nx + self.ny + self.nz

    @property
    def n_binary(self) -> int:
        return self.nx + self.ny

    def x_index(self, n, i):
        return np.asarray(n) * self.I + np.asarray(i)

    def z_index(self, n, i):
        return self.nx + self.ny + np.asarray(n) * self.I + np.asarray(i)

    @cached_property
    def y_keys(self) -> list[tuple[int, int, int]]:
        return list(zip(self.y_node.tolist(), self.y_nbr.tolist(), self.y_content.tolist()))

    @cached_property
    def y_lookup(self) -> dict[tuple[int, int, int], int]:
        return {k: j for j, k in enumerate(self.y_keys)}

    @cached_property
    def groups(self) -> list[np.ndarray]:
        """y positions of each (n, i) selection group, ordered by (n, i)."""
        order = np.lexsort((self.y_nbr, self.y_content, self.y_node))
        keys = self.y_node[order] * self.I + self.y_content[order]
        cuts = np.flatnonzero(np.diff(keys)) + 1
        return [g for g in np.split(order, cuts) if len(g)]

    @cached_property
    def group_keys(self) -> list[tuple[int, int]]:
        return [(int(self.y_node[g[0]]), int(self.y_content[g[0]])) for g in self.groups]

    # -- constraint data ---------------------------------------------------
    @cached_property
    def transfer(self) -> np.ndarray:
        """c_i / l_nm for every y variable."""
        bw = self.scenario.topology.bandwidth[self.y_node, self.y_nbr]
        return self.scenario.sizes[self.y_content] / bw

    @cached_property
    def capacity_matrix(self) -> sp.csr_matrix:
        rows = np.repeat(np.arange(self.N), self.I)
        cols = np.arange(self.nx)
        vals = np.tile(self.scenario.sizes, self.N)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.N, self.nvar))

    @cached_property
    def selection_matrix(self) -> sp.csr_matrix:
        """Rows ``G`` with ``G p <= h`` for the big-M selection constraints."""
        Y, V, t = self.ny, self.big_m, self.transfer
        r = np.arange(Y)
        rows = np.concatenate([r, r, r])
        cols = np.concatenate([self.x_index(self.y_nbr, self.y_content), self.nx + r,
                               self.z_index(self.y_node, self.y_content)])
        vals = np.concatenate([t * (1.0 - V), -t * V, -np.ones(Y)])
        return sp.csr_matrix((vals, (rows, cols)), shape=(Y, self.nvar))

    @cached_property
    def selection_rhs(self) -> np.ndarray:
        return -self.transfer * self.big_m

    # -- packing -------------------------------------------------------------
    def pack(self, a: Assignment) -> np.ndarray:
        return np.concatenate([np.ravel(a.x), np.ravel(a.y), np.ravel(a.z)]).astype(float)

    def unpack(self, p: np.ndarray) -> Assignment:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.nvar,):
            raise ValueError(f"expected {self.nvar} variables, got {p.shape}")
        return Assignment(p[:self.nx].reshape(self.N, self.I).copy(),
                          p[self.nx:self.nx + self.ny].copy(),
                          p[self.nx + self.ny:].reshape(self.N, self.I).copy())

    # -- objective -----------------------------------------------------------
    def terms(self, p: np.ndarray) -> np.ndarray:
        """Per-(n, i) objective contributions; their sum is the objective."""
        sc = self.scenario
        x, _, z = self._split(p)
        dalpha, delta = sc.access_delay, sc.server_delay - sc.access_delay
        out = np.empty((self.N, self.I))
        for n in range(self.N):
            P = _prod(1.0 - x[list(sc.neighbor_lists[n])])
            u = 1.0 - x[n]
            out[n] = sc.weights[n] * (dalpha[n] + u * z[n] + u * P * (delta[n] - z[n]))
        return out

    def objective(self, p: np.ndarray) -> float:
        return float(self.terms(p).sum())

    def gradient(self, p: np.ndarray) -> np.ndarray:
        sc = self.scenario
        x, _, z = self._split(p)
        delta = sc.server_delay - sc.access_delay
        gx = np.zeros((self.N, self.I))
        gz = np.zeros((self.N, self.I))
        for n in range(self.N):
            nb = sc.neighbor_lists[n]
            a = 1.0 - x[list(nb)]
            P = _prod(a)
            w, u, r = sc.weights[n], 1.0 - x[n], delta[n] - z[n]
            gx[n] -= w * (z[n] + P * r)
            gz[n] += w * u * (1.0 - P)
            for j, m in enumerate(nb):
                gx[m] -= w * u * _prod_except(a, j) * r
        return np.concatenate([gx.ravel(), np.zeros(self.ny), gz.ravel()])

    def hessian(self, p: np.ndarray) -> sp.csr_matrix:
        rows, cols, vals = self.hessian_entries(p)
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.nvar, self.nvar))

    def hessian_entries(self, p: np.ndarray):
        """COO triplets (both triangles) of the objective Hessian."""
        sc = self.scenario
        x, _, z = self._split(p)
        delta = sc.server_delay - sc.access_delay
        ii = np.arange(self.I)
        R, C, Vv = [], [], []

        def put(a, b, v):
            R.extend((a, b))
            C.extend((b, a))
            Vv.extend((v, v))

        for n in range(self.N):
            nb = sc.neighbor_lists[n]
            a = 1.0 - x[list(nb)]
            P = _prod(a)
            w, u, r = sc.weights[n], 1.0 - x[n], delta[n] - z[n]
            xn, zn = self.x_index(n, ii), self.z_index(n, ii)
            put(xn, zn, -w * (1.0 - P))
            for j, m in enumerate(nb):
                Pj = _prod_except(a, j)
                xm = self.x_index(m, ii)
                put(xn, xm, w * Pj * r)
                put(xm, zn, w * u * Pj)
                for l in range(j + 1, len(nb)):
                    xl = self.x_index(nb[l], ii)
                    put(xm, xl, w * u * _prod_except(a, j, l) * r)
        if not R:
            e = np.zeros(0)
            return e.astype(int), e.astype(int), e
        return np.concatenate(R), np.concatenate(C), np.concatenate(Vv)

    def _split(self, p):
        p = np.asarray(p, dtype=float)
        x = p[:self.nx].reshape(self.N, self.I)
        y = p[self.nx:self.nx + self.ny]
        z = p[self.nx + self.ny:].reshape(self.N, self.I)
        return x, y, z

    # -- auxiliary completion -------------------------------------------------
    def z_lower_bound(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Smallest z satisfying the selection rows and z >= 0."""
        x = np.asarray(x, dtype=float)
        xm = x[self.y_nbr, self.y_content]
        V = self.big_m
        rhs = self.transfer * (xm + (1.0 - xm) * V - V * np.asarray(y, dtype=float))
        z = np.zeros(self.N * self.I)
        np.maximum.at(z, self.y_node * self.I + self.y_content, rhs)
        return z.reshape(self.N, self.I)

    def selection_choice(self, x: np.ndarray) -> np.ndarray:
        """Optimal y for binary x: 0 at the neighbor with least penalised delivery time."""
        x = np.asarray(x, dtype=float)
        xm = x[self.y_nbr, self.y_content]
        q = self.transfer * (xm + (1.0 - xm) * self.big_m)
        y = np.ones(self.ny)
        for g in self.groups:
            # groups are ordered by neighbor id, so argmin ties go to the lowest id
            y[g[int(np.argmin(q[g]))]] = 0.0
        return y

    def complete(self, x: np.ndarray) -> Assignment:
        """Binary x extended with its optimal selection y and tight z."""
        x = np.asarray(x, dtype=float)
        y = self.selection_choice(x)
        return Assignment(x.copy(), y, self.z_lower_bound(x, y))

    def delivery(self, a: Assignment) -> dict[tuple[int, int], int | None]:
        """Serving neighbor for each (n, i) that does not cache i, from y (None: server)."""
        out: dict[tuple[int, int], int | None] = {}
        x = np.asarray(a.x)
        for g, (n, i) in zip(self.groups, self.group_keys):
            if x[n, i] >= 0.5:
                continue
            sel = g[np.argmin(a.y[g])]
            m = int(self.y_nbr[sel])
            out[n, i] = m if x[m, i] >= 0.5 else None
        return out

    # -- text dump ---------------------------------------------------------------
    def dump(self) -> str:
        """Line-oriented listing of variables and constraints for inspection."""
        sc = self.scenario
        lines = [f"problem N={self.N} I={self.I} V={self.big_m:.6g}",
                 f"vars x={self.nx} y={self.ny} z={self.nz}"]
        for n in range(self.N):
            lines.append(f"cap {n + 1}: sum c*x <= {sc.capacities[n]:.6g}")
        for (n, m, i), t in zip(self.y_keys, self.transfer):
            lines.append(f"sel {n + 1} {m + 1} {i + 1}: {t:.6g}*(x[{m + 1},{i + 1}]+(1-x)V-V*y) <= z")
        for g, (n, i) in zip(self.groups, self.group_keys):
            lines.append(f"gamma {n + 1} {i + 1}: sum y = {len(g) - 1}")
        return "\n".join(lines) + "\n"


def _prod(a: np.ndarray) -> np.ndarray:
    return np.prod(a, axis=0) if len(a) else np.ones(a.shape[1])


def _prod_except(a: np.ndarray, *skip: int) -> np.ndarray:
    keep = [k for k in range(len(a)) if k not in skip]
    return _prod(a[keep]) if keep else np.ones(a.shape[1])


def auto_big_m(scenario: Scenario) -> float:
    bw = scenario.topology.bandwidth
    slowest = bw[bw > 0].min()
    return float(10.0 * scenario.sizes.max() / slowest + scenario.server_delay.max())


def tight_big_m(scenario: Scenario) -> float:
    """Smallest V for which a non-caching neighbor never beats a caching one.

    A non-caching m is priced at V c/l_nm and a caching k at c/l_nk, so
    V >= l_nm / l_nk over every pair of neighbors of a node suffices.
    """
    bw = scenario.topology.bandwidth
    ratio = 1.0
    for n, nb in enumerate(scenario.neighbor_lists):
        if len(nb) > 1:
            l = bw[n, nb]
            ratio = max(ratio, float(l.max() / l.min()))
    return ratio


def transform(scenario: Scenario, big_m: float | str = "auto") -> MinlpProblem:
    """Build the transformed problem. ``big_m`` is a number, ``"auto"`` or ``"tight"``."""
    if big_m in (None, "auto", "AUTO"):
        V = auto_big_m(scenario)
    elif big_m in ("tight", "TIGHT"):
        V = tight_big_m(scenario)
    else:
        V = float(big_m)
    keys = [(n, m, i) for n in range(scenario.N) for m in scenario.neighbor_lists[n]
            for i in range(scenario.I)]
    arr = np.array(keys, dtype=int).reshape(-1, 3)
    return MinlpProblem(scenario, V, arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy())


def evaluate_objective(problem: MinlpProblem, assignment: Assignment) -> float:
    a = assignment
    if np.shape(a.x) != (problem.N, problem.I) or np.shape(a.z) != (problem.N, problem.I) \
            or np.shape(a.y) != (problem.ny,):
        raise ValueError("assignment dimensions do not match the problem")
    return problem.objective(problem.pack(a))


def check_feasibility(problem: MinlpProblem, assignment: Assignment,
                      tolerance: float = 1e-9) -> list[str]:
    """Human-readable list of violated constraints (empty when feasible)."""
    a, sc = assignment, problem.scenario
    x, y, z = np.asarray(a.x, float), np.asarray(a.y, float), np.asarray(a.z, float)
    out = []
    used = x @ sc.sizes
    for n in np.flatnonzero(used - sc.capacities > tolerance * np.maximum(1.0, sc.capacities)):
        out.append(f"capacity: node {n + 1} uses {used[n]:.6g} > {sc.capacities[n]:.6g}")
    p = problem.pack(a)
    sel = problem.selection_matrix @ p - problem.selection_rhs
    scale = problem.transfer * problem.big_m
    for j in np.flatnonzero(sel > tolerance * np.maximum(1.0, scale)):
        n, m, i = problem.y_keys[j]
        out.append(f"selection: ({n + 1},{m + 1},{i + 1}) exceeds z by {sel[j]:.6g}")
    for g, (n, i) in zip(problem.groups, problem.group_keys):
        r = y[g].sum() - (len(g) - 1)
        if abs(r) > tolerance:
            out.append(f"gamma: ({n + 1},{i + 1}) sum y - (M-1) = {r:.6g}")
    for name, v, lo, hi in (("x", x.ravel(), 0.0, 1.0), ("y", y, 0.0, 1.0), ("z", z.ravel(), 0.0, np.inf)):
        bad = np.flatnonzero((v < lo - tolerance) | (v > hi + tolerance))
        if len(bad):
            out.append(f"bounds: {len(bad)} {name} value(s) outside [{lo}, {hi}]")
    return out
