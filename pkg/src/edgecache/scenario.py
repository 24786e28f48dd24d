"""Network instances and exact delay evaluation.

Units are fixed across the package: sizes in megabits, bandwidths in
megabits/second, delays in seconds. Config files give sizes in megabytes
(1 MB = 8 Mbit, 1 GB = 1000 MB) and are converted on ingestion.

Nodes are indexed ``0..N-1`` in the Python API; the base station (BS) is
always the last node. Config files and CLI output use 1-based ids.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

MBIT_PER_MB = 8.0
MB_PER_GB = 1000.0


class ScenarioError(ValueError):
    """Invalid scenario description."""


@dataclass(frozen=True)
class Content:
    size: float  # megabits

    def __post_init__(self):
        if not self.size > 0:
            raise ScenarioError(f"content size must be positive, got {self.size}")


@dataclass(frozen=True)
class Node:
    storage_capacity: float  # megabits
    user_count: int = 5
    user_bandwidth: float = 10.0  # Mbps, shared by all users at the node
    is_bs: bool = False

    def __post_init__(self):
        if self.storage_capacity < 0:
            raise ScenarioError("storage capacity must be non-negative")
        if self.user_count < 1:
            raise ScenarioError("user_count must be >= 1")
        if not self.user_bandwidth > 0:
            raise ScenarioError("non-positive user bandwidth")


@dataclass(frozen=True, eq=False)
class Topology:
    """Symmetric link bandwidths (0 = no direct link) plus the BS-CS backhaul."""

    bandwidth: np.ndarray
    backhaul_bandwidth: float = 60.0

    def __post_init__(self):
        bw = np.asarray(self.bandwidth, dtype=float)
        if bw.ndim != 2 or bw.shape[0] != bw.shape[1]:
            raise ScenarioError("bandwidth matrix must be square")
        if not np.allclose(bw, bw.T, rtol=0, atol=0):
            raise ScenarioError("link bandwidths must be symmetric")
        if np.any(bw < 0) or np.any(np.diag(bw) != 0):
            raise ScenarioError("non-positive bandwidth or self link")
        if not self.backhaul_bandwidth > 0:
            raise ScenarioError("non-positive backhaul bandwidth")
        bw.setflags(write=False)
        object.__setattr__(self, "bandwidth", bw)

    @classmethod
    def from_links(cls, node_count: int, links: Mapping[tuple[int, int], float],
                   backhaul_bandwidth: float = 60.0) -> "Topology":
        bw = np.zeros((node_count, node_count))
        for (a, b), mbps in links.items():
            if a == b:
                raise ScenarioError(f"self link on node {a + 1}")
            if not mbps > 0:
                raise ScenarioError(f"non-positive bandwidth on link ({a + 1},{b + 1})")
            if bw[a, b] != 0:
                raise ScenarioError(f"duplicate link ({a + 1},{b + 1})")
            bw[a, b] = bw[b, a] = mbps
        return cls(bw, backhaul_bandwidth)

    @property
    def node_count(self) -> int:
        return self.bandwidth.shape[0]

    def neighbors(self, n: int) -> list[int]:
        return [int(m) for m in np.flatnonzero(self.bandwidth[n])]

    def links(self) -> list[tuple[int, int, float]]:
        """Undirected links as (a, b, mbps) with a < b."""
        a, b = np.nonzero(np.triu(self.bandwidth))
        return [(int(i), int(j), float(self.bandwidth[i, j])) for i, j in zip(a, b)]


@dataclass(frozen=True, eq=False)
class Scenario:
    nodes: tuple[Node, ...]
    contents: tuple[Content, ...]
    topology: Topology
    foa: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "contents", tuple(self.contents))
        N, I = len(self.nodes), len(self.contents)
        if N < 2:
            raise ScenarioError("need at least one MEN and the BS")
        if I < 1:
            raise ScenarioError("need at least one content")
        bs = [k for k, node in enumerate(self.nodes) if node.is_bs]
        if bs != [N - 1]:
            raise ScenarioError("exactly one BS is required and it must be the last node")
        if self.topology.node_count != N:
            raise ScenarioError("topology size does not match node count")
        for n in range(N - 1):
            if self.topology.bandwidth[n, N - 1] <= 0:
                raise ScenarioError(f"disconnected node {n + 1}: no link to the base station")
        foa = np.array(self.foa, dtype=float)
        if foa.shape != (N, I):
            raise ScenarioError(f"FoA matrix must be {N}x{I}, got {foa.shape}")
        if np.any(foa < 0) or np.any(foa.sum(axis=1) <= 0):
            raise ScenarioError("FoA rows must be non-negative with positive mass")
        foa = foa / foa.sum(axis=1, keepdims=True)
        foa.setflags(write=False)
        object.__setattr__(self, "foa", foa)

    # -- array views -------------------------------------------------------
    @property
    def N(self) -> int:
        return len(self.nodes)

    @property
    def I(self) -> int:  # noqa: E743
        return len(self.contents)

    @property
    def bs(self) -> int:
        return self.N - 1

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.array([c.size for c in self.contents])

    @cached_property
    def capacities(self) -> np.ndarray:
        return np.array([n.storage_capacity for n in self.nodes])

    @cached_property
    def users(self) -> np.ndarray:
        return np.array([n.user_count for n in self.nodes], dtype=float)

    @cached_property
    def user_bandwidth(self) -> np.ndarray:
        return np.array([n.user_bandwidth for n in self.nodes])

    @cached_property
    def weights(self) -> np.ndarray:
        """Request weight f[n,i] * U_n."""
        return self.foa * self.users[:, None]

    @cached_property
    def access_delay(self) -> np.ndarray:
        """d_alpha[n,i]: last-hop download time."""
        return self.sizes[None, :] / self.user_bandwidth[:, None]

    @cached_property
    def server_delay(self) -> np.ndarray:
        """d_delta[n,i]: fetch from the content server via the BS (BS: access + backhaul only)."""
        c = self.sizes[None, :]
        B = self.topology.backhaul_bandwidth
        d = self.access_delay + c / B
        to_bs = np.zeros(self.N)
        to_bs[:-1] = 1.0 / self.topology.bandwidth[:-1, self.bs]
        return d + c * to_bs[:, None]

    @cached_property
    def neighbor_lists(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(self.topology.neighbors(n)) for n in range(self.N))

    def with_users(self, users: Sequence[int]) -> "Scenario":
        nodes = [Node(nd.storage_capacity, int(u), nd.user_bandwidth, nd.is_bs)
                 for nd, u in zip(self.nodes, users)]
        return Scenario(nodes, self.contents, self.topology, self.foa, self.seed)

    def with_capacities(self, capacities: Sequence[float]) -> "Scenario":
        nodes = [Node(float(s), nd.user_count, nd.user_bandwidth, nd.is_bs)
                 for nd, s in zip(self.nodes, capacities)]
        return Scenario(nodes, self.contents, self.topology, self.foa, self.seed)

    def permuted(self, order: Sequence[int]) -> "Scenario":
        """Relabel contents: new content k is old content order[k]."""
        order = list(order)
        return Scenario(self.nodes, [self.contents[k] for k in order], self.topology,
                        self.foa[:, order], self.seed)


# -- placements -------------------------------------------------------------

def empty_placement(scenario: Scenario) -> np.ndarray:
    return np.zeros((scenario.N, scenario.I), dtype=bool)


def is_feasible(scenario: Scenario, x: np.ndarray, tol: float = 1e-9) -> bool:
    x = np.asarray(x)
    if x.shape != (scenario.N, scenario.I):
        return False
    used = x.astype(float) @ scenario.sizes
    return bool(np.all(used <= scenario.capacities * (1 + tol) + tol))


def check_placement(scenario: Scenario, x) -> np.ndarray:
    x = np.asarray(x)
    if x.shape != (scenario.N, scenario.I):
        raise ScenarioError(f"placement must be {scenario.N}x{scenario.I}, got {x.shape}")
    if not np.all((x == 0) | (x == 1)):
        raise ScenarioError("placement must be binary")
    x = x.astype(bool)
    if not is_feasible(scenario, x):
        used = x.astype(float) @ scenario.sizes
        over = [n + 1 for n in np.flatnonzero(used > scenario.capacities * (1 + 1e-9) + 1e-9)]
        raise ScenarioError(f"infeasible placement: capacity exceeded at node(s) {over}")
    return x


# -- delay cases ------------------------------------------------------------

def delay_case1(c_i: float, b: float) -> float:
    """Content is cached at the requesting node."""
    if not b > 0:
        raise ZeroDivisionError("user bandwidth must be positive")
    return c_i / b


def delay_case2(c_i: float, b: float,
                neighbor_links: Sequence[tuple[bool, float]]) -> tuple[float, int]:
    """Fetch from the fastest caching neighbor.

    ``neighbor_links`` lists ``(cached, bandwidth)`` in node-id order. Returns the
    delay and the position of the chosen neighbor in that list; ties go to the
    earliest entry. Raises ``ValueError`` if no neighbor caches the content.
    """
    best, arg = np.inf, -1
    for k, (cached, link) in enumerate(neighbor_links):
        if cached:
            t = c_i / link
            if t < best:
                best, arg = t, k
    if arg < 0:
        raise ValueError("no caching neighbor; use delay_case3")
    return delay_case1(c_i, b) + best, arg


def delay_case3(c_i: float, b: float, l_to_bs: float, backhaul: float,
                requester_is_bs: bool = False) -> float:
    """Fetch from the content server through the BS."""
    if not backhaul > 0:
        raise ZeroDivisionError("backhaul bandwidth must be positive")
    d = delay_case1(c_i, b) + c_i / backhaul
    if not requester_is_bs:
        if not l_to_bs > 0:
            raise ZeroDivisionError("link to the BS must be positive")
        d += c_i / l_to_bs
    return d


def request_delays(scenario: Scenario, x: np.ndarray, nodes: Sequence[int] | None = None
                   ) -> np.ndarray:
    """Per-request delay d[n,i] under the cooperative model.

    Case 1 if n caches i; otherwise Case 2 over directly connected caching nodes
    (the BS included, for MENs; all linked MENs, for the BS); otherwise Case 3.
    Only rows of ``nodes`` are filled (all nodes by default).
    """
    x = np.asarray(x, dtype=bool)
    c = scenario.sizes
    bw = scenario.topology.bandwidth
    out = np.zeros((scenario.N, scenario.I))
    rows = range(scenario.N) if nodes is None else nodes
    for n in rows:
        best = np.full(scenario.I, np.inf)
        for m in scenario.neighbor_lists[n]:
            best = np.where(x[m], np.minimum(best, c / bw[n, m]), best)
        d_alpha = scenario.access_delay[n]
        out[n] = np.where(x[n], d_alpha,
                          np.where(np.isfinite(best), d_alpha + best, scenario.server_delay[n]))
    return out


def delivery_choices(scenario: Scenario, x: np.ndarray) -> dict[tuple[int, int], int | None]:
    """Serving node for each uncached (n, i): neighbor index, or None for the content server."""
    x = np.asarray(x, dtype=bool)
    c = scenario.sizes
    bw = scenario.topology.bandwidth
    out: dict[tuple[int, int], int | None] = {}
    for n in range(scenario.N):
        for i in np.flatnonzero(~x[n]):
            links = [(bool(x[m, i]), bw[n, m]) for m in scenario.neighbor_lists[n]]
            if any(cached for cached, _ in links):
                _, k = delay_case2(c[i], scenario.user_bandwidth[n], links)
                out[n, int(i)] = scenario.neighbor_lists[n][k]
            else:
                out[n, int(i)] = None
    return out


def node_delays(scenario: Scenario, x: np.ndarray) -> np.ndarray:
    """Per-node total delay sum_i f U d (cooperative model)."""
    return (scenario.weights * request_delays(scenario, x)).sum(axis=1)


def total_average_delay(scenario: Scenario, x) -> float:
    """Network objective F(x): sum over nodes and contents of f * U * d."""
    x = check_placement(scenario, x)
    return float((scenario.weights * request_delays(scenario, x)).sum())


def average_node_delay(scenario: Scenario, x) -> float:
    """F(x) / N, the per-node figure used in sweep reports."""
    return total_average_delay(scenario, x) / scenario.N


def caching_only_delay(scenario: Scenario) -> float:
    """Value of F when every node serves every request locally."""
    return float((scenario.weights * scenario.access_delay).sum())


# -- FoA ----------------------------------------------------------------------

def zipf_weights(content_count: int, shape: float) -> np.ndarray:
    if content_count < 1 or shape < 0:
        raise ValueError("need content_count >= 1 and shape >= 0")
    w = 1.0 / np.arange(1, content_count + 1) ** shape
    return w / w.sum()


def zipf_foa(content_count: int, shape: float, seed: int,
             per_node_rank_shuffle: bool = True, node_count: int = 1) -> np.ndarray:
    """Zipf frequency-of-access rows, one per node.

    Row k is drawn from its own stream ``(seed, k)`` so a node's row does not
    depend on how many nodes are generated.
    """
    w = zipf_weights(content_count, shape)
    rows = np.empty((node_count, content_count))
    for k in range(node_count):
        if per_node_rank_shuffle:
            rank = np.random.default_rng([seed, k]).permutation(content_count)
            rows[k] = w[rank]
        else:
            rows[k] = w
    return rows


# -- construction from config -------------------------------------------------

# sub-stream tags for reproducible draws
_SIZES, _FOA_MEN, _FOA_BS, _TOPO = 101, 202, 203, 303


def random_men_links(men_count: int, mean_degree: float, seed: int) -> list[tuple[int, int]]:
    """Uniformly sampled MEN-MEN pairs giving the requested mean MEN degree."""
    pairs = [(a, b) for a in range(men_count) for b in range(a + 1, men_count)]
    k = min(len(pairs), int(round(mean_degree * men_count / 2)))
    if k == 0:
        return []
    rng = np.random.default_rng([seed, _TOPO])
    chosen = sorted(rng.choice(len(pairs), size=k, replace=False))
    return [pairs[j] for j in chosen]


def build_scenario(config: Mapping[str, Any]) -> Scenario:
    """Validated scenario from a config tree (see ``configs/`` and the README)."""
    try:
        return _build(config)
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"malformed config: {exc!r}") from exc


def _build(config: Mapping[str, Any]) -> Scenario:
    seed = int(config.get("seed", 0))
    nodes_cfg = config["nodes"]
    if isinstance(nodes_cfg, Mapping):
        men = int(nodes_cfg["men_count"])
        cap = float(nodes_cfg["capacity_mb"])
        bs_cap = float(nodes_cfg.get("bs_capacity_mb", cap))
        users = int(nodes_cfg.get("users", 5))
        ub = float(nodes_cfg.get("user_mbps", 10.0))
        node_list = [dict(capacity_mb=cap, users=users, user_mbps=ub) for _ in range(men)]
        node_list.append(dict(capacity_mb=bs_cap, users=users, user_mbps=ub))
    else:
        node_list = list(nodes_cfg)
    N = len(node_list)
    nodes = [Node(float(d["capacity_mb"]) * MBIT_PER_MB, int(d.get("users", 5)),
                  float(d.get("user_mbps", 10.0)), is_bs=(k == N - 1))
             for k, d in enumerate(node_list)]

    cc = config["contents"]
    if "sizes_mb" in cc:
        sizes_mb = [float(s) for s in cc["sizes_mb"]]
    else:
        lo, hi = cc["size_mb"]
        rng = np.random.default_rng([seed, _SIZES])
        sizes_mb = list(rng.uniform(float(lo), float(hi), size=int(cc["count"])))
    contents = [Content(s * MBIT_PER_MB) for s in sizes_mb]
    I = len(contents)

    lc = config["links"]
    backhaul = float(lc.get("backhaul_mbps", 60.0))
    links: dict[tuple[int, int], float] = {}

    def add(a: int, b: int, mbps: float):
        key = (min(a, b), max(a, b))
        if key in links:
            raise ScenarioError(f"duplicate link ({key[0] + 1},{key[1] + 1})")
        if not 0 <= a < N or not 0 <= b < N:
            raise ScenarioError(f"link ({a + 1},{b + 1}) references an unknown node")
        links[key] = mbps

    if "pairs" in lc:
        for a, b, mbps in lc["pairs"]:
            add(int(a) - 1, int(b) - 1, float(mbps))
    if "generate" in lc:
        g = lc["generate"]
        for n in range(N - 1):
            add(n, N - 1, float(g.get("bs_mbps", 10.0)))
        for a, b in random_men_links(N - 1, float(g.get("mean_degree", 2.0)), seed):
            add(a, b, float(g.get("men_mbps", 45.0)))
    topology = Topology.from_links(N, links, backhaul)

    fc = config["foa"]
    if "matrix" in fc:
        foa = np.array(fc["matrix"], dtype=float)
    else:
        shape = float(fc.get("zipf_shape", 0.1))
        shuffle = bool(fc.get("shuffle", True))
        men_rows = zipf_foa(I, shape, seed * 1000 + _FOA_MEN, shuffle, N - 1)
        bs_row = zipf_foa(I, shape, seed * 1000 + _FOA_BS, shuffle, 1)
        foa = np.vstack([men_rows, bs_row])
    return Scenario(nodes, contents, topology, foa, seed)


def scenario_to_config(scenario: Scenario) -> dict[str, Any]:
    """Explicit config that rebuilds ``scenario`` exactly."""
    return {
        "seed": scenario.seed if scenario.seed is not None else 0,
        "nodes": [dict(capacity_mb=nd.storage_capacity / MBIT_PER_MB, users=nd.user_count,
                       user_mbps=nd.user_bandwidth) for nd in scenario.nodes],
        "contents": {"sizes_mb": [c.size / MBIT_PER_MB for c in scenario.contents]},
        "links": {"backhaul_mbps": scenario.topology.backhaul_bandwidth,
                  "pairs": [[a + 1, b + 1, mbps] for a, b, mbps in scenario.topology.links()]},
        "foa": {"matrix": scenario.foa.tolist()},
    }


def dumps_config(config: Mapping[str, Any]) -> str:
    return json.dumps(config, indent=2, sort_keys=True) + "\n"


def load_config(path: str | Path) -> dict[str, Any]:
    with open(path) as fh:
        return json.load(fh)


def save_config(config: Mapping[str, Any], path: str | Path) -> None:
    Path(path).write_text(dumps_config(config))


def template_config(men_count: int = 4, content_count: int = 200, capacity_gb: float = 10.0,
                    bs_capacity_gb: float | None = None, seed: int = 0,
                    size_mb: tuple[float, float] = (100.0, 300.0), zipf_shape: float = 0.1,
                    users: int = 5, user_mbps: float = 10.0, men_mbps: float = 45.0,
                    bs_mbps: float = 10.0, backhaul_mbps: float = 60.0,
                    mean_degree: float = 2.0, shuffle: bool = True) -> dict[str, Any]:
    """Config using the default experimental settings (BS-star + random MEN links)."""
    bs_cap = capacity_gb if bs_capacity_gb is None else bs_capacity_gb
    return {
        "seed": seed,
        "nodes": {"men_count": men_count, "capacity_mb": capacity_gb * MB_PER_GB,
                  "bs_capacity_mb": bs_cap * MB_PER_GB, "users": users, "user_mbps": user_mbps},
        "contents": {"count": content_count, "size_mb": [size_mb[0], size_mb[1]]},
        "links": {"backhaul_mbps": backhaul_mbps,
                  "generate": {"men_mbps": men_mbps, "bs_mbps": bs_mbps,
                               "mean_degree": mean_degree}},
        "foa": {"zipf_shape": zipf_shape, "shuffle": shuffle},
    }
