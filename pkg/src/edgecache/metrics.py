"""Request streams and cache-hit rates.

Requests pick a node and a content independently and uniformly. A request
at node n for content i is a local hit when n caches i. Its global hit
depends on the scoring mode: cooperatively, a directly connected neighbor
holding i serves it; non-cooperatively, only the BS cache can. Network
averages are

    h_tot      = (sum_{n<N} h_n + N h_N) / N
    h_star_tot = sum_n (h_n + g_n) / N

with h_n the local-hit rate of node n, h_N that of the BS, and g_n the
cooperative global-hit rate of node n.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Scenario, check_placement


@dataclass(frozen=True, eq=False)
class RequestStream:
    nodes: np.ndarray  # 0-based node id per request
    contents: np.ndarray  # 0-based content id per request
    seed: int
    count: int

    @property
    def requests(self) -> list[tuple[int, int]]:
        return list(zip(self.nodes.tolist(), self.contents.tolist()))


@dataclass(frozen=True, eq=False)
class HitReport:
    local_hit: np.ndarray
    global_hit: np.ndarray
    h_tot: float
    h_star_tot: float
    requests: np.ndarray  # requests seen per node
    cooperative: bool


def generate_requests(scenario: Scenario, count: int, seed: int) -> RequestStream:
    if count < 1:
        raise ValueError("count must be at least 1")
    rng = np.random.default_rng([seed, 404])
    nodes = rng.integers(0, scenario.N, size=count)
    contents = rng.integers(0, scenario.I, size=count)
    return RequestStream(nodes, contents, seed, count)


def network_hit_rate(local_hit, bs_local_hit: float | None = None) -> float:
    """Non-cooperative network average; the BS rate is the last entry unless given."""
    h = np.asarray(local_hit, dtype=float)
    if bs_local_hit is None:
        h, bs_local_hit = h[:-1], h[-1]
    N = len(h) + 1
    return float((h.sum() + N * bs_local_hit) / N)


def cooperative_hit_rate(local_hit, global_hit) -> float:
    h, g = np.asarray(local_hit, dtype=float), np.asarray(global_hit, dtype=float)
    return float((h + g).sum() / len(h))


def hit_rates(scenario: Scenario, placement, stream: RequestStream,
              cooperative: bool = True) -> HitReport:
    sc = scenario
    x = check_placement(sc, placement)
    n, i = stream.nodes, stream.contents
    if (n < 0).any() or (n >= sc.N).any() or (i < 0).any() or (i >= sc.I).any():
        raise ValueError("request outside the scenario")
    local = x[n, i]
    if cooperative:
        # reach[n, i]: some directly connected node caches i
        adj = sc.topology.bandwidth > 0
        np.fill_diagonal(adj, False)
        reach = (adj.astype(int) @ x.astype(int)) > 0
        remote = ~local & reach[n, i]
    else:
        remote = ~local & x[sc.bs, i] & (n != sc.bs)
    seen = np.bincount(n, minlength=sc.N)
    denom = np.maximum(seen, 1)
    h = np.bincount(n, weights=local, minlength=sc.N) / denom
    g = np.bincount(n, weights=remote, minlength=sc.N) / denom
    return HitReport(h, g, network_hit_rate(h), cooperative_hit_rate(h, g), seen, cooperative)


def distinct_contents(placement) -> int:
    """Number of contents cached somewhere in the network."""
    return int(np.asarray(placement, dtype=bool).any(axis=0).sum())
