import json

import jsonschema
import pytest
from hypothesis import given, settings, strategies as st

from holdlab.harness.scenarios import GenParams, builtin_scenario, case1, gen_scenario, load_scenario, stop_totals
from holdlab.sim.config import CONSTANT, SCENARIO_SCHEMA, Demand, LineConfig, ScenarioConfig, StopSpec


def test_case1_shape():
    sc = builtin_scenario("case1")
    (ln,) = sc.lines
    assert ln.circular and len(ln.stops) == 8 and ln.fleet_size == 6
    assert ln.positions == [666.0 + 1332.0 * k for k in range(8)]
    assert ln.route_length == 10656.0 and ln.speed == 5.55 and ln.departure_interval == 320.0
    assert sc.capacity >= 1000 and sc.board_time_per_pax == 3.0 and sc.alight_time_per_pax == 0.0
    assert all(40 <= r <= 180 for r in sc.demand.rates.values())


def test_case2_shape():
    sc = builtin_scenario("case2-synthetic")
    assert len(sc.lines) == 2 and sc.capacity == 120
    assert all(len(ln.stops) == 27 for ln in sc.lines)
    assert sum(sc.is_shared(s) for s in sc.stop_ids) == 8
    assert sorted(ln.route_length for ln in sc.lines) == [22580.0, 24950.0]


@pytest.mark.parametrize("name", ["case1", "case2-synthetic"])
def test_builtin_validates_and_round_trips(name, tmp_path):
    sc = builtin_scenario(name)
    jsonschema.validate(sc.to_dict(), SCENARIO_SCHEMA)
    sc.to_json(tmp_path / "s.json")
    back = load_scenario(str(tmp_path / "s.json"))
    assert back.to_dict() == sc.to_dict()
    assert json.loads((tmp_path / "s.json").read_text())["sim_duration_s"] == sc.sim_duration


def test_gen_scenario_deterministic():
    assert gen_scenario(GenParams(), 9).to_dict() == gen_scenario(GenParams(), 9).to_dict()


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_gen_scenario_ranges(seed):
    sc = gen_scenario(GenParams(), seed)
    assert 2 <= len(sc.lines) <= 10
    for ln in sc.lines:
        assert 16 <= len(ln.stops) <= 25
    for sid, total in stop_totals(sc).items():
        if total > 0:
            assert 100 <= total <= 1100 + 1e-6
    ScenarioConfig.from_dict(sc.to_dict())


def test_gen_scenario_degenerate_range():
    for s in range(20):
        assert len(gen_scenario(GenParams(n_lines=(2, 2)), s).lines) == 2


def test_line_spacing_counts_expected_dwell():
    ln = LineConfig("L", 2500.0, [StopSpec("a", 0.0), StopSpec("b", 1000.0), StopSpec("c", 2000.0)], 300.0,
                    travel_model=CONSTANT, speed=5.0)
    sc = ScenarioConfig([ln], demand=Demand(rates={("a", "L"): 36.0, ("b", "L"): 36.0}, hourly_multipliers=[0.5, 1.5]))
    # run 400 s; 72 pax/h * 300 s = 6 riders per bus, each costing 3 + 1.8 s of dwell
    assert sc.line_spacing("L") == pytest.approx(300 * 2000 / (400 + 6 * 4.8))
    assert case1().ideal_headway() == 10656.0 / 6
