import pickle

import pytest

from edgecache.scenario import build_scenario, template_config
from edgecache.sweep import (IntractableError, SweepError, SweepResult, SweepRow, SweepSpec,
                             csv_text, emit_csv, evaluate_policy, run_sweep, scenario_config)

BASELINES = ("greedy", "most_foa", "guaranteed_greedy", "locally_optimal", "distributed")


def _fixed(men=1, contents=12):
    return template_config(men_count=men, content_count=contents)


def test_spec_validation():
    with pytest.raises(SweepError):
        SweepSpec("capacity", ())
    with pytest.raises(SweepError):
        SweepSpec("capacity", (2, 1))
    with pytest.raises(SweepError):
        SweepSpec("capacity", (1, 1))
    with pytest.raises(SweepError):
        SweepSpec("capacity", (1,), repetitions=0)
    with pytest.raises(SweepError):
        SweepSpec("bandwidth", (1,))
    with pytest.raises(SweepError):
        SweepSpec("capacity", (1,), policies=("lru",))
    assert SweepSpec("capacity", (1,), policies=("most-foa",)).policies == ("most_foa",)


def test_one_row_per_value_policy_repetition():
    spec = SweepSpec("capacity", (0.5, 1.0), _fixed(), BASELINES, repetitions=2)
    res = run_sweep(spec)
    keys = [(r.axis_value, r.policy, r.repetition) for r in res.rows]
    assert len(keys) == len(set(keys)) == 2 * len(BASELINES) * 2
    assert {r.seed for r in res.rows} == {0, 1}
    assert all(r.seed == spec.base_seed + r.repetition for r in res.rows)


def test_repeated_sweep_gives_identical_bytes(tmp_path):
    spec = SweepSpec("content_count", (8, 12), _fixed(), BASELINES, repetitions=3, per_node=True)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(run_sweep(spec), a)
    emit_csv(run_sweep(spec), b)
    assert a.read_bytes() == b.read_bytes()


def test_parallel_rows_do_not_change_bytes():
    spec = SweepSpec("capacity", (0.5, 1.0, 1.5), _fixed(), BASELINES, repetitions=2)
    assert csv_text(run_sweep(spec, workers=1)) == csv_text(run_sweep(spec, workers=3))


def test_empty_result_is_header_only(tmp_path):
    res = SweepResult(SweepSpec("capacity", (1,)), ())
    p = tmp_path / "e.csv"
    emit_csv(res, p)
    lines = p.read_text().splitlines()
    assert len(lines) == 1 and lines[0].startswith("axis,axis_value,policy")


def test_two_rows_three_lines(tmp_path):
    row = SweepRow(1.0, "greedy", 0, 0, 1.0 / 3, 0.5, 0.25, 0, 0.1, 3)
    res = SweepResult(SweepSpec("capacity", (1,)), (row, row))
    p = tmp_path / "t.csv"
    emit_csv(res, p)
    lines = p.read_text().splitlines()
    assert len(lines) == 3
    assert lines[1].split(",")[5] == "0.333333"
    emit_csv(res, tmp_path / "u.csv")
    assert (tmp_path / "u.csv").read_bytes() == p.read_bytes()


def test_timing_column_only_on_request():
    row = SweepRow(1.0, "greedy", 0, 0, 1.0, 0.5, 0.25, 0, 0.1, 3)
    res = SweepResult(SweepSpec("capacity", (1,)), (row,))
    assert "wall_time" not in csv_text(res)
    assert csv_text(res, timing=True).splitlines()[0].endswith("wall_time")


def test_quoting_of_commas():
    row = SweepRow(1.0, "greedy", 0, 0, 1.0, 0.5, 0.25, 0, 0.1, 3, status="a,b")
    text = csv_text(SweepResult(SweepSpec("capacity", (1,)), (row,)))
    assert '"a,b"' in text


def test_scenario_config_axes():
    base = _fixed(men=2, contents=20)
    assert scenario_config(base, "men_count", 5, 3)["nodes"]["men_count"] == 4
    assert scenario_config(base, "content_count", 7, 3)["contents"]["count"] == 7
    cap = scenario_config(base, "capacity", 2, 3)["nodes"]
    assert cap["capacity_mb"] == cap["bs_capacity_mb"] == 2000.0
    assert base["nodes"]["men_count"] == 2  # untouched


def _fingerprint(sc):
    derived = (sc.sizes, sc.capacities, sc.weights, sc.server_delay, sc.topology.bandwidth)
    return pickle.dumps((sc.nodes, sc.contents, sc.foa, sc.seed, sc.neighbor_lists,
                         [a.tobytes() for a in derived]))


def test_policies_see_identical_instances():
    sc = build_scenario(template_config(men_count=2, content_count=10, seed=4))
    before = _fingerprint(sc)
    spec = SweepSpec("capacity", (1,))
    for pol in BASELINES + ("centralized",):
        evaluate_policy(sc, pol, spec)
        assert _fingerprint(sc) == before
    fwd = run_sweep(SweepSpec("capacity", (0.5,), _fixed(), BASELINES))
    rev = run_sweep(SweepSpec("capacity", (0.5,), _fixed(), BASELINES[::-1]))
    assert {r.policy: r.objective for r in fwd.rows} == {r.policy: r.objective for r in rev.rows}


def test_centralized_refused_when_large():
    sc = build_scenario(template_config(men_count=4, content_count=201, seed=0))
    with pytest.raises(IntractableError):
        evaluate_policy(sc, "centralized", SweepSpec("capacity", (1,)))


def test_per_node_breakdown_sums_to_objective():
    spec = SweepSpec("capacity", (1.0,), _fixed(men=2), ("locally_optimal",), per_node=True)
    (row,) = run_sweep(spec).rows
    assert len(row.per_node) == 3
    assert sum(row.per_node) / 3 == pytest.approx(row.objective)
