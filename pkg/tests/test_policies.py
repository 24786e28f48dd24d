import itertools
import json

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

from edgecache.distributed import knapsack, local_problem
from edgecache.policies import (PolicyKind, greedy, guaranteed_greedy, knapsack_savings,
                                locally_optimal, most_foa, noncooperative_delay, place)
from edgecache.scenario import build_scenario, total_average_delay
from helpers import TOY_CONFIG, all_placements, tiny_random, toy


def one_node(sizes_mb, cap_mb, foa=None):
    foa = foa or [1.0] * len(sizes_mb)
    return build_scenario({"nodes": [{"capacity_mb": cap_mb, "users": 1}] * 2,
                           "contents": {"sizes_mb": sizes_mb},
                           "links": {"pairs": [[1, 2, 10]]},
                           "foa": {"matrix": [foa, foa]}})


def test_greedy_smallest_first():
    x = greedy(one_node([100, 200, 300], 300))
    assert x[0].tolist() == [True, True, False]


def test_most_foa_first_fills():
    x = most_foa(one_node([300, 100, 100], 300, [0.5, 0.3, 0.2]))
    assert x[0].tolist() == [True, False, False]


def test_noncooperative_closed_forms():
    sc = tiny_random(np.random.default_rng(4))
    empty = np.zeros((sc.N, sc.I), dtype=bool)
    assert noncooperative_delay(sc, empty) == pytest.approx((sc.weights * sc.server_delay).sum())
    full = build_scenario(json.loads(json.dumps(TOY_CONFIG)) | {
        "nodes": [{"capacity_mb": 200, "users": 1}] * 2})
    ones = np.ones((2, 2), dtype=bool)
    assert noncooperative_delay(full, ones) == pytest.approx(total_average_delay(full, ones))


def test_toy_locally_optimal_noncooperative_value():
    sc = toy()
    x = locally_optimal(sc)
    # MEN-1 holds c2 and gets c1 from the BS copy: 0.5*97.78 + 0.5*80 + 0.5*80 + 0.5*93.33
    assert noncooperative_delay(sc, x) == pytest.approx(175.56, abs=5e-3)
    best = min(noncooperative_delay(sc, p) for p in all_placements(sc))
    assert noncooperative_delay(sc, x) == pytest.approx(best)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_cooperation_never_slower_on_fast_links(seed):
    rng = np.random.default_rng(seed)
    sc = tiny_random(rng, max_men=3, fast_links=True)
    x = rng.random((sc.N, sc.I)) < 0.5
    x &= np.cumsum(x * sc.sizes, axis=1) <= sc.capacities[:, None]
    assert noncooperative_delay(sc, x) >= total_average_delay(sc, x) - 1e-9


def test_cooperative_fetch_over_a_slow_link_is_slower():
    # the BS takes a MEN copy over 10 Mbps (80 s) instead of the backhaul (13.33 s)
    cfg = json.loads(json.dumps(TOY_CONFIG))
    cfg["links"]["pairs"] = [[1, 2, 10]]
    sc = build_scenario(cfg)
    x = [[1, 0], [0, 0]]
    assert total_average_delay(sc, x) - noncooperative_delay(sc, x) == pytest.approx(
        0.5 * (160 - 93.333), abs=1e-2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
def test_greedy_maximises_count(seed):
    rng = np.random.default_rng(seed)
    sc = tiny_random(rng, max_men=1, max_contents=10)
    x = greedy(sc)
    for n in range(sc.N):
        best = max(sum(b) for b in itertools.product((0, 1), repeat=sc.I)
                   if np.dot(b, sc.sizes) <= sc.capacities[n] + 1e-9)
        assert x[n].sum() == best


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000))
@example(217)  # a row fits exactly but not after rounding sizes up
def test_locally_optimal_rows_are_exact(seed):
    sc = tiny_random(np.random.default_rng(seed), max_men=2, max_contents=6)
    x = locally_optimal(sc)
    bs = local_problem(sc, sc.bs)
    assert bs.savings[x[sc.bs]].sum() == pytest.approx(
        bs.savings[knapsack(sc.sizes, bs.savings, sc.capacities[sc.bs])].sum())
    for n in range(sc.N - 1):
        # the MEN row minimises the non-cooperative delay given the BS row, over the
        # rows that fit once sizes are rounded up to whole megabits
        rows = [np.array(b, dtype=bool) for b in itertools.product((0, 1), repeat=sc.I)
                if np.dot(b, np.ceil(sc.sizes)) <= np.floor(sc.capacities[n])]

        def with_row(r):
            y = x.copy()
            y[n] = r
            return noncooperative_delay(sc, y)
        assert with_row(x[n]) == pytest.approx(min(with_row(r) for r in rows))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000))
def test_guaranteed_greedy_savings_fraction(seed):
    sc = tiny_random(np.random.default_rng(seed), max_men=2, max_contents=6)
    lo = knapsack_savings(sc, locally_optimal(sc))
    gg = knapsack_savings(sc, guaranteed_greedy(sc))
    assert gg >= (1 - 1 / np.e) * lo - 1e-9


def test_policies_deterministic_and_feasible():
    sc = tiny_random(np.random.default_rng(9), max_men=3, max_contents=8)
    for kind in PolicyKind:
        a, b = place(sc, kind), place(sc, kind.value.replace("_", "-"))
        np.testing.assert_array_equal(a, b)
        assert ((a @ sc.sizes) <= sc.capacities + 1e-9).all()
    np.testing.assert_array_equal(place(sc, "guaranteed_greedy", per_node=True),
                                  guaranteed_greedy(sc, per_node=True))
