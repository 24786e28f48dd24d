"""Baseline caching policies and the non-cooperative delay used to score them."""
from __future__ import annotations

from enum import Enum

import numpy as np

from .distributed import knapsack, local_optimal_placement
from .scenario import Scenario, check_placement


class PolicyKind(str, Enum):
    GREEDY = "greedy"
    MOST_FOA = "most_foa"
    GUARANTEED_GREEDY = "guaranteed_greedy"
    LOCALLY_OPTIMAL = "locally_optimal"

    @classmethod
    def parse(cls, name: str) -> "PolicyKind":
        return cls(name.replace("-", "_").lower())


def noncooperative_delays(scenario: Scenario, x) -> np.ndarray:
    """Per-request delays when nodes never fetch from one another (MENs may use the BS cache)."""
    x = np.asarray(x, dtype=bool)
    sc = scenario
    c, da = sc.sizes, sc.access_delay
    out = np.empty((sc.N, sc.I))
    bs = sc.bs
    for n in range(sc.N - 1):
        via_bs = da[n] + c / sc.topology.bandwidth[n, bs]
        out[n] = np.where(x[n], da[n], np.where(x[bs], via_bs, sc.server_delay[n]))
    out[bs] = np.where(x[bs], da[bs], sc.server_delay[bs])
    return out


def noncooperative_delay(scenario: Scenario, placement) -> float:
    x = check_placement(scenario, placement)
    return float((scenario.weights * noncooperative_delays(scenario, x)).sum())


def greedy(scenario: Scenario) -> np.ndarray:
    """Per node: smallest contents first until the next one no longer fits."""
    x = np.zeros((scenario.N, scenario.I), dtype=bool)
    order = np.argsort(scenario.sizes, kind="stable")
    for n in range(scenario.N):
        room = scenario.capacities[n]
        for i in order:
            if scenario.sizes[i] > room + 1e-9:
                break
            x[n, i] = True
            room -= scenario.sizes[i]
    return x


def most_foa(scenario: Scenario) -> np.ndarray:
    """Per node: most requested first, skipping contents that do not fit."""
    x = np.zeros((scenario.N, scenario.I), dtype=bool)
    for n in range(scenario.N):
        room = scenario.capacities[n]
        for i in np.argsort(-scenario.foa[n], kind="stable"):
            if scenario.sizes[i] <= room + 1e-9:
                x[n, i] = True
                room -= scenario.sizes[i]
    return x


def _gains(scenario: Scenario, x: np.ndarray) -> np.ndarray:
    """Reduction of the non-cooperative network delay from adding each (n, i)."""
    sc = scenario
    c, w, bs = sc.sizes, sc.weights, sc.bs
    B = sc.topology.backhaul_bandwidth
    g = np.empty((sc.N, sc.I))
    for n in range(sc.N - 1):
        to_bs = c / sc.topology.bandwidth[n, bs]
        g[n] = w[n] * np.where(x[bs], to_bs, to_bs + c / B)
    # the BS cache also shortens every MEN miss by the backhaul leg
    men_miss = (w[:-1] * ~x[:-1]).sum(axis=0)
    g[bs] = (c / B) * (w[bs] + men_miss)
    return np.where(x, 0.0, g)


def guaranteed_greedy(scenario: Scenario, per_node: bool = False) -> np.ndarray:
    """Density greedy on the non-cooperative caching gain.

    The global variant repeatedly adds the fitting (node, content) pair with
    the largest gain per megabit; ``per_node`` runs the same rule node by node
    (BS first).
    """
    sc = scenario
    x = np.zeros((sc.N, sc.I), dtype=bool)
    room = sc.capacities.astype(float).copy()
    if per_node:
        for n in [sc.bs, *range(sc.N - 1)]:
            while True:
                dens = _gains(sc, x)[n] / sc.sizes
                ok = (~x[n]) & (sc.sizes <= room[n] + 1e-9) & (dens > 0)
                if not ok.any():
                    break
                i = int(np.flatnonzero(ok)[np.argmax(dens[ok])])
                x[n, i] = True
                room[n] -= sc.sizes[i]
        return x
    while True:
        dens = _gains(sc, x) / sc.sizes[None, :]
        ok = (~x) & (sc.sizes[None, :] <= room[:, None] + 1e-9) & (dens > 0)
        if not ok.any():
            return x
        flat = np.flatnonzero(ok.ravel())
        k = int(flat[np.argmax(dens.ravel()[flat])])
        n, i = divmod(k, sc.I)
        x[n, i] = True
        room[n] -= sc.sizes[i]


def locally_optimal(scenario: Scenario) -> np.ndarray:
    return local_optimal_placement(scenario)


def place(scenario: Scenario, kind: PolicyKind | str, per_node: bool = False) -> np.ndarray:
    kind = PolicyKind.parse(kind) if isinstance(kind, str) else kind
    if kind is PolicyKind.GREEDY:
        return greedy(scenario)
    if kind is PolicyKind.MOST_FOA:
        return most_foa(scenario)
    if kind is PolicyKind.GUARANTEED_GREEDY:
        return guaranteed_greedy(scenario, per_node)
    return locally_optimal(scenario)


def knapsack_savings(scenario: Scenario, x: np.ndarray) -> float:
    """Total non-cooperative saving of ``x`` relative to the empty placement."""
    empty = np.zeros_like(x, dtype=bool)
    return noncooperative_delay(scenario, empty) - noncooperative_delay(scenario, x)


__all__ = ["PolicyKind", "greedy", "guaranteed_greedy", "knapsack", "locally_optimal",
           "most_foa", "noncooperative_delay", "noncooperative_delays", "place"]
