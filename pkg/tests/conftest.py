from __future__ import annotations

import pytest

from holdlab.sim.config import CONSTANT, Demand, LineConfig, ScenarioConfig, StopSpec


def loop_line(line_id: str = "A", n_stops: int = 4, length: float = 4000.0, fleet: int = 2,
              interval: float = 300.0, speed: float = 5.0) -> LineConfig:
    spacing = length / n_stops
    stops = [StopSpec(f"{line_id}{k}", spacing / 2 + k * spacing) for k in range(n_stops)]
    return LineConfig(line_id, length, stops, interval, circular=True, fleet_size=fleet,
                      travel_model=CONSTANT, speed=speed)


def tiny_scenario(rate: float = 60.0, duration: int = 1800, **kw) -> ScenarioConfig:
    """One loop line, four stops, two buses: fast enough for property tests."""
    ln = loop_line(**kw)
    rates = {(s.stop_id, ln.line_id): rate for s in ln.stops}
    return ScenarioConfig([ln], capacity=40, sim_duration=duration,
                          demand=Demand(rates=rates, hourly_multipliers=[1.0]), name="tiny")


@pytest.fixture
def tiny() -> ScenarioConfig:
    return tiny_scenario()
