import csv
import filecmp

import numpy as np
import pytest

from absnet.scenario import (FLOW_METRIC, SCHEMA, ScenarioError, ScenarioParseError,
                             bundled_scenarios, load_scenario, parse_scenario_text,
                             random_stationary_baseline, read_trajectories_csv, run_experiment,
                             validate_trajectories)

MINIMAL = """
[scenario]
schema_version = 1
abs.initial = [[50, 10, 20], [100, 10, 20], [150, 10, 20]]
interferers = [[30, 0, 0]]
mobility.max_iterations = 4
"""


def text(**overrides):
    lines = [MINIMAL.rstrip()]
    lines += [f"{k} = {v}" for k, v in overrides.items()]
    return "\n".join(lines) + "\n"


def with_keys(extra: str):
    return parse_scenario_text(MINIMAL + extra)


# loading --------------------------------------------------------------------------

def test_bundled_set():
    assert bundled_scenarios() == ["fig1_single_si", "fig2_multicast", "fig3_multiunicast",
                                   "fig5_height_floor", "fig6_energy"]
    for name in bundled_scenarios():
        load_scenario(name)


def test_fig1_layout():
    sc = load_scenario("fig1_single_si")
    np.testing.assert_array_equal(sc.abs_initial, [[0, 25 * i, 20] for i in range(1, 9)])
    np.testing.assert_array_equal(sc.sources, [[0, 0, 0]])
    np.testing.assert_array_equal(sc.destinations, [[200, 0, 0]])
    np.testing.assert_array_equal(sc.interferers, [[30, 0, 0]])
    assert sc.metric == "max_flow"


def test_family_sizes():
    assert len(load_scenario("fig2_multicast").abs_initial) == 12
    assert len(load_scenario("fig2_multicast").interferers) == 3
    assert len(load_scenario("fig2_multicast").destinations) == 3
    f3 = load_scenario("fig3_multiunicast")
    assert len(f3.abs_initial) == 16 and len(f3.interferers) == 2 and len(f3.commodities()) == 2
    assert load_scenario("fig5_height_floor").mobility.height_floor_m == 20
    assert load_scenario("fig6_energy").mode == "energy-efficient"


def test_defaults_applied():
    sc = parse_scenario_text(MINIMAL)
    assert sc.network["bandwidth_hz"] == 1.0
    assert sc.mobility.v_max == 5.0
    assert sc.flow_eval == "single"


def test_every_schema_key_is_accepted():
    # each default value round-trips through the parser
    import json
    for key, (default, _) in SCHEMA.items():
        if key in ("abs.initial", "abs.line", "schema_version", "interferers", "mobility.max_iterations"):
            continue
        value = json.dumps(default) if not isinstance(default, str) else default
        with_keys(f"{key} = {value}\n")


@pytest.mark.parametrize("key,value", [
    ("network.r_int_m", "-1"),
    ("network.bandwidth_hz", "0"),
    ("mobility.v_max", "-5"),
    ("mode", "sideways"),
    ("flow_eval", "broadcast"),
    ("monte_carlo_runs", "0"),
    ("flow.concurrent_eps", "0.7"),
    ("energy.speed_model", "warp"),
    ("commodities", "[[0, 3, 1]]"),
    ("sources", "[[0, 0, 5]]"),
])
def test_validation_names_key(key, value):
    with pytest.raises(ScenarioError) as info:
        with_keys(f"{key} = {value}\n")
    assert info.value.key.split(".")[0] == key.split(".")[0]
    assert not isinstance(info.value, ScenarioParseError)


def test_unknown_key():
    with pytest.raises(ScenarioError, match="bogus.key: unknown key"):
        with_keys("bogus.key = 1\n")


def test_outside_region_and_floor():
    with pytest.raises(ScenarioError, match="abs.initial"):
        parse_scenario_text(MINIMAL.replace("[150, 10, 20]", "[250, 10, 20]"))
    with pytest.raises(ScenarioError, match="abs.initial"):
        with_keys("mobility.height_floor_m = 30\n")


def test_parse_errors_are_distinct():
    with pytest.raises(ScenarioParseError, match="section"):
        parse_scenario_text("schema_version = 1\n")
    with pytest.raises(ScenarioParseError):
        parse_scenario_text("[scenario]\nsources = [[0, 0\n")
    with pytest.raises(ScenarioError, match="schema_version"):
        parse_scenario_text(MINIMAL.replace("schema_version = 1", "schema_version = 9"))


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        load_scenario("no_such_scenario_anywhere.ini")
    with pytest.raises(FileNotFoundError):
        load_scenario("")


def test_file_path_loading(tmp_path):
    p = tmp_path / "mine.ini"
    p.write_text(MINIMAL)
    assert len(load_scenario(p).abs_initial) == 3


# baseline --------------------------------------------------------------------------

def test_baseline_determinism_and_single_run():
    sc = load_scenario("fig1_single_si")
    a = random_stationary_baseline(sc, runs=5)
    b = random_stationary_baseline(sc, runs=5)
    assert a.mean == b.mean
    one = random_stationary_baseline(sc, runs=1)
    assert one.mean == one.values[0] and one.std == 0
    assert random_stationary_baseline(sc, runs=5, seed=1).mean != a.mean
    with pytest.raises(ScenarioError):
        random_stationary_baseline(sc, runs=0)


# experiments -----------------------------------------------------------------------

def test_weighted_run_outputs(tmp_path):
    sc = load_scenario("fig1_single_si")
    bundle = run_experiment(sc, "weighted", runs=2, out_dir=tmp_path, iterations=10)
    assert len(bundle.runs) == 2
    rows = list(csv.reader(open(tmp_path / "trajectories.csv")))
    assert rows[0] == ["run", "slot", "node_id", "x", "y", "z"]
    flow_rows = list(csv.DictReader(open(tmp_path / "flow.csv")))
    assert {r["metric_name"] for r in flow_rows} == {"max_flow", "lambda2"}
    assert validate_trajectories(tmp_path / "trajectories.csv", sc.mobility) == []
    arr = read_trajectories_csv(tmp_path / "trajectories.csv")
    np.testing.assert_allclose(arr[0], bundle.runs[0].log.abs_positions())


def test_validate_flags_tampered_csv(tmp_path):
    sc = load_scenario("fig1_single_si")
    run_experiment(sc, "weighted", runs=1, out_dir=tmp_path, iterations=5)
    path = tmp_path / "trajectories.csv"
    rows = list(csv.reader(open(path)))
    for r in rows[1:]:
        if r[1] == "1":
            r[3] = repr(float(r[3]) + 50)
            r[5] = "3.0"
    with open(path, "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    probs = validate_trajectories(path, load_scenario("fig5_height_floor").mobility)
    assert any("exceeds" in p for p in probs) and any("floor" in p for p in probs)


def test_byte_identical_reruns(tmp_path):
    sc = load_scenario("fig1_single_si")
    for d in ("a", "b"):
        run_experiment(sc, "weighted", runs=2, out_dir=tmp_path / d, iterations=15)
    for name in ("trajectories.csv", "flow.csv"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False)


def test_seed_changes_jitter():
    sc = load_scenario("fig1_single_si")
    assert not np.array_equal(sc.initial_positions(0), sc.initial_positions(1))
    np.testing.assert_array_equal(sc.initial_positions(3), sc.initial_positions(3))


def test_energy_mode_outputs(tmp_path):
    sc = load_scenario("fig6_energy")
    bundle = run_experiment(sc, out_dir=tmp_path, iterations=30)
    rows = list(csv.DictReader(open(tmp_path / "energy.csv")))
    assert len(rows) == len(sc.abs_initial)
    assert set(rows[0]) == {"abs_id", "D_m", "E_maxflow_J", "E_efficient_J", "savings_pct"}
    r0 = bundle.runs[0]
    assert np.all(r0.path_straight <= r0.path_maxflow + 1e-9)
    names = {r["metric_name"] for r in csv.DictReader(open(tmp_path / "flow.csv"))}
    assert "max_flow_energy_efficient" in names


def test_distributed_trace_written(tmp_path):
    sc = parse_scenario_text(text(**{"mobility.fiedler_source": "distributed",
                                     "distfiedler.iters": 50}))
    run_experiment(sc, out_dir=tmp_path)
    rows = list(csv.reader(open(tmp_path / "distfiedler_error.csv")))
    assert rows[0] == ["iteration", "error_norm", "messages"] and len(rows) == 51


def test_empty_interferers_still_valid(tmp_path):
    sc = parse_scenario_text(MINIMAL.replace("interferers = [[30, 0, 0]]", "interferers = []"))
    bundle = run_experiment(sc, out_dir=tmp_path)
    assert validate_trajectories(tmp_path / "trajectories.csv", sc.mobility) == []
    assert np.isfinite(bundle.mean_final_flow)


def test_multi_metrics():
    for name, metric in (("fig2_multicast", "multicast_flow"), ("fig3_multiunicast", "concurrent_flow")):
        sc = load_scenario(name)
        assert sc.metric == metric == FLOW_METRIC[sc.flow_eval]
        val = sc.flow_metrics(sc.state())[metric]
        assert val >= 0


def test_random_baseline_mode(tmp_path):
    sc = load_scenario("fig1_single_si")
    bundle = run_experiment(sc, "random-baseline", runs=3, out_dir=tmp_path)
    rows = list(csv.DictReader(open(tmp_path / "flow.csv")))
    assert len(rows) == 3
    assert float(rows[0]["value"]) == bundle.baseline.values[0]
