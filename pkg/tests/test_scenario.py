import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edgecache.scenario import (ScenarioError, build_scenario, delay_case1, delay_case2,
                                delay_case3, delivery_choices, dumps_config, load_config,
                                save_config, scenario_to_config, template_config,
                                total_average_delay, zipf_foa, zipf_weights)
from helpers import TOY_CONFIG, all_placements, literal_objective, tiny_random, toy


def test_template_instance_shape():
    sc = build_scenario(template_config(men_count=4, content_count=200, seed=42))
    assert sc.foa.shape == (5, 200)
    np.testing.assert_allclose(sc.foa.sum(axis=1), 1.0)
    mb = sc.sizes / 8
    assert mb.min() >= 100 and mb.max() <= 300
    assert sc.bs == 4
    assert all(4 in sc.neighbor_lists[n] for n in range(4))


def test_minimal_instance_topology():
    sc = toy()
    assert sc.topology.links() == [(0, 1, 45.0)]
    assert sc.N == 2 and sc.I == 2


def test_missing_bs_link_rejected():
    cfg = {"nodes": [{"capacity_mb": 1}] * 4, "contents": {"sizes_mb": [1, 2]},
           "links": {"pairs": [[1, 4, 10], [2, 4, 10], [2, 3, 45]]},
           "foa": {"matrix": [[1, 1]] * 4}}
    with pytest.raises(ScenarioError, match="disconnected node 3"):
        build_scenario(cfg)


def test_duplicate_and_unknown_links_rejected():
    cfg = json.loads(json.dumps(TOY_CONFIG))
    cfg["links"]["pairs"].append([2, 1, 10])
    with pytest.raises(ScenarioError, match="duplicate"):
        build_scenario(cfg)
    cfg["links"]["pairs"] = [[1, 2, 45], [1, 3, 10]]
    with pytest.raises(ScenarioError, match="unknown node"):
        build_scenario(cfg)


def test_malformed_config_is_scenario_error():
    with pytest.raises(ScenarioError):
        build_scenario({"nodes": []})


def test_zipf_closed_form():
    np.testing.assert_allclose(zipf_weights(3, 0.1), [0.3535, 0.3298, 0.3167], atol=5e-5)
    np.testing.assert_allclose(zipf_weights(7, 0.0), np.full(7, 1 / 7))


def test_zipf_seeding():
    a, b = zipf_foa(50, 0.1, 7, node_count=3), zipf_foa(50, 0.1, 7, node_count=3)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, zipf_foa(50, 0.1, 8, node_count=3))
    np.testing.assert_allclose(np.sort(a[0]), np.sort(zipf_weights(50, 0.1)))
    np.testing.assert_array_equal(zipf_foa(5, 0.1, 1, per_node_rank_shuffle=False)[0],
                                  zipf_weights(5, 0.1))


def test_case1():
    assert delay_case1(800, 10) == 80
    assert delay_case1(0, 10) == 0
    assert delay_case1(2400, 10) == 240


def test_case2():
    d, k = delay_case2(800, 10, [(True, 45), (False, 45)])
    assert d == pytest.approx(80 + 800 / 45) and k == 0
    assert d == pytest.approx(97.78, abs=5e-3)
    d, k = delay_case2(800, 10, [(True, 10), (True, 45)])
    assert d == pytest.approx(97.78, abs=5e-3) and k == 1
    assert delay_case2(800, 10, [(True, 45), (True, 45)])[1] == 0
    with pytest.raises(ValueError):
        delay_case2(800, 10, [(False, 45)])


def test_case3():
    assert delay_case3(800, 10, 10, 60) == pytest.approx(173.33, abs=5e-3)
    assert delay_case3(800, 10, None, 60, requester_is_bs=True) == pytest.approx(93.33, abs=5e-3)
    assert delay_case3(800, 10, 45, 60) == pytest.approx(111.11, abs=5e-3)


@given(st.lists(st.tuples(st.booleans(), st.floats(1, 100)), min_size=1, max_size=6),
       st.floats(1, 3000))
def test_case2_never_picks_non_caching_neighbor(links, c):
    if not any(cached for cached, _ in links):
        return
    d, k = delay_case2(c, 10, links)
    assert links[k][0]
    assert d == pytest.approx(c / 10 + min(c / l for cached, l in links if cached))


def test_toy_objective_values():
    sc = toy()
    # oracle by hand: 9 feasible placements, best is split caching
    assert total_average_delay(sc, [[1, 0], [0, 1]]) == pytest.approx(1600 / 9)
    assert total_average_delay(sc, [[1, 0], [1, 0]]) == pytest.approx(182.22, abs=5e-3)
    vals = sorted(total_average_delay(sc, x) for x in all_placements(sc))
    assert len(vals) == 9 and vals[0] == pytest.approx(177.78, abs=5e-3)


def test_all_cached_is_access_sum():
    sc = tiny_random(np.random.default_rng(3)).with_capacities([1e9] * 3)
    x = np.ones((sc.N, sc.I), dtype=bool)
    assert total_average_delay(sc, x) == pytest.approx((sc.weights * sc.access_delay).sum())


def test_infeasible_placement_rejected():
    with pytest.raises(ScenarioError, match="node"):
        total_average_delay(toy(), [[1, 1], [0, 0]])


def test_delivery_choices_lowest_id_on_ties():
    cfg = {"nodes": [{"capacity_mb": 100, "users": 1}] * 3, "contents": {"sizes_mb": [100]},
           "links": {"pairs": [[1, 2, 45], [1, 3, 45], [2, 3, 45]]},
           "foa": {"matrix": [[1]] * 3}}
    sc = build_scenario(cfg)
    assert delivery_choices(sc, [[0], [1], [1]])[(0, 0)] == 1


def _big_v(sc):
    c = sc.sizes
    l = sc.topology.bandwidth[sc.topology.bandwidth > 0]
    return 2 * (c.max() * sc.topology.backhaul_bandwidth / l.min()) / c.min() + 1e3


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_matches_literal_penalised_evaluation(seed):
    rng = np.random.default_rng(seed)
    sc = tiny_random(rng)
    x = rng.random((sc.N, sc.I)) < 0.5
    x &= np.cumsum(x * sc.sizes, axis=1) <= sc.capacities[:, None]
    assert total_average_delay(sc, x) == pytest.approx(literal_objective(sc, x, _big_v(sc)),
                                                       rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_caching_more_never_hurts_with_fast_links(seed):
    rng = np.random.default_rng(seed)
    sc = tiny_random(rng, fast_links=True)
    sc = sc.with_capacities([1e9] * sc.N)
    x = rng.random((sc.N, sc.I)) < 0.4
    base = total_average_delay(sc, x)
    y = x.copy()
    y[rng.integers(sc.N), rng.integers(sc.I)] = True
    assert total_average_delay(sc, y) <= base + 1e-9


def test_caching_can_hurt_over_a_slow_neighbor_link():
    # a neighbor copy always pre-empts the server path, even when slower
    cfg = json.loads(json.dumps(TOY_CONFIG))
    cfg["links"]["pairs"] = [[1, 2, 10]]
    cfg["nodes"][1]["users"] = 3
    sc = build_scenario(cfg)
    empty = total_average_delay(sc, [[0, 0], [0, 0]])
    more = total_average_delay(sc, [[1, 0], [0, 0]])
    # MEN saves 173.33 - 80; the BS now pays 80 s over the MEN link, not 13.33 s of backhaul
    assert more - empty == pytest.approx(0.5 * (80 - 173.333) + 1.5 * (160 - 93.333), abs=1e-2)
    assert more > empty


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 7))
def test_user_scaling(seed, k):
    rng = np.random.default_rng(seed)
    sc = tiny_random(rng, max_contents=4)
    u = rng.integers(1, 5, size=sc.N)
    a, b = sc.with_users(u), sc.with_users(k * u)
    x = rng.random((sc.N, sc.I)) < 0.3
    x &= np.cumsum(x * sc.sizes, axis=1) <= sc.capacities[:, None]
    assert total_average_delay(b, x) == pytest.approx(k * total_average_delay(a, x))
    best_a = min(all_placements(a), key=lambda p: total_average_delay(a, p))
    best_b = min(all_placements(b), key=lambda p: total_average_delay(b, p))
    np.testing.assert_array_equal(best_a, best_b)


def test_config_round_trip(tmp_path):
    sc = build_scenario(template_config(men_count=2, content_count=5, seed=4))
    cfg = scenario_to_config(sc)
    p = tmp_path / "s.json"
    save_config(cfg, p)
    text = p.read_text()
    again = build_scenario(load_config(p))
    np.testing.assert_array_equal(again.foa, sc.foa)
    np.testing.assert_array_equal(again.sizes, sc.sizes)
    save_config(load_config(p), p)
    assert p.read_text() == text == dumps_config(cfg)
