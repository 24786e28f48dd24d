import numpy as np
import pytest

from edgecache.scenario import build_scenario, template_config

# acceptance PASS/FAIL lines, collected for the terminal summary
ACCEPTANCE_LINES = pytest.StashKey[list]()

TOY_CONFIG = {
    "nodes": [{"capacity_mb": 100, "users": 1}, {"capacity_mb": 100, "users": 1}],
    "contents": {"sizes_mb": [100, 100]},
    "links": {"backhaul_mbps": 60, "pairs": [[1, 2, 45]]},
    "foa": {"matrix": [[1, 1], [1, 1]]},
}


def toy():
    return build_scenario(TOY_CONFIG)


def small(seed, men=1, contents=15, capacity_gb=1.0, **kw):
    return build_scenario(template_config(men_count=men, content_count=contents,
                                          capacity_gb=capacity_gb, seed=seed, **kw))


def tiny_random(rng, max_men=2, max_contents=6, fast_links=False):
    """Random instance small enough for exhaustive search, with varied links.

    ``fast_links`` makes every link at least as fast as the backhaul, so that
    a neighbor fetch is never slower than the server path.
    """
    men = int(rng.integers(1, max_men + 1))
    I = int(rng.integers(2, max_contents + 1))
    N = men + 1
    nodes = [{"capacity_mb": float(rng.uniform(0, 450)), "users": int(rng.integers(1, 6))}
             for _ in range(N)]
    pairs = [[n + 1, N, float(rng.uniform(5, 20))] for n in range(men)]
    for a in range(men):
        for b in range(a + 1, men):
            if rng.random() < 0.6:
                pairs.append([a + 1, b + 1, float(rng.uniform(20, 60))])
    backhaul = float(rng.uniform(40, 80))
    if fast_links:
        for p in pairs:
            p[2] = backhaul + p[2]
    foa = rng.random((N, I)) + 0.01
    cfg = {"nodes": nodes, "contents": {"sizes_mb": list(rng.uniform(50, 200, I))},
           "links": {"backhaul_mbps": backhaul, "pairs": pairs},
           "foa": {"matrix": foa.tolist()}}
    return build_scenario(cfg)




def literal_objective(sc, x, V):
    """Objective evaluated term by term with the big-M penalised neighbor minimum.

    Independent of the vectorised evaluator: a neighbor that does not cache i
    is charged V extra, and the server path is used only when no neighbor caches.
    """
    x = np.asarray(x, dtype=float)
    bw = sc.topology.bandwidth
    total = 0.0
    for n in range(sc.N):
        b = sc.nodes[n].user_bandwidth
        for i in range(sc.I):
            c = sc.contents[i].size
            d_alpha = c / b
            nbrs = [m for m in range(sc.N) if m != n and bw[n, m] > 0]
            phi = 1.0 - np.prod([1.0 - x[m, i] for m in nbrs])
            q = min(d_alpha + c / bw[n, m] + V * (1.0 - x[m, i]) for m in nbrs)
            if n == sc.N - 1:
                d_delta = d_alpha + c / sc.topology.backhaul_bandwidth
            else:
                d_delta = d_alpha + c / bw[n, sc.N - 1] + c / sc.topology.backhaul_bandwidth
            d = x[n, i] * d_alpha + (1 - x[n, i]) * (phi * q + (1 - phi) * d_delta)
            total += sc.foa[n, i] * sc.nodes[n].user_count * d
    return total


def all_placements(sc):
    """Every feasible binary placement (small instances only)."""
    import itertools
    N, I = sc.N, sc.I
    rows = []
    for n in range(N):
        ok = []
        for bits in itertools.product((0, 1), repeat=I):
            if np.dot(bits, sc.sizes) <= sc.capacities[n] + 1e-9:
                ok.append(bits)
        rows.append(ok)
    for combo in itertools.product(*rows):
        yield np.array(combo, dtype=bool)
