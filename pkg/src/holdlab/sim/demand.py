from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ConfigError, ScenarioConfig

UNSET = -1.0


@dataclass(eq=False)
class PassengerRecord:
    pid: int
    origin_stop: str
    arrive_time: float
    alight_stop: str
    # lines that can carry this rider from origin to alight_stop
    feasible_lines: tuple[str, ...]
    line: str | None = None
    board_time: float = UNSET
    alight_time: float = UNSET
    bus_id: int = -1
    shared: bool = False

    @property
    def boarded(self) -> bool:
        return self.board_time != UNSET

    @property
    def completed(self) -> bool:
        return self.alight_time != UNSET

    def as_tuple(self) -> tuple:
        return (self.pid, self.origin_stop, self.line, self.arrive_time, self.alight_stop,
                self.board_time, self.alight_time, self.bus_id)


def stream(seed: int, purpose: int) -> np.random.Generator:
    """Independent RNG stream for one purpose (demand, travel times, ...)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, purpose]))


DEMAND_STREAM = 1
TRAVEL_STREAM = 2


def hourly_profile(scenario: ScenarioConfig, key: tuple[str, str], rng: np.random.Generator) -> list[float]:
    d = scenario.demand
    if key in d.hourly_rates:
        rates = list(d.hourly_rates[key])
    else:
        base = d.rates.get(key, 0.0)
        if d.rate_range is not None:
            base = float(rng.uniform(*d.rate_range))
        rates = [base * m for m in d.hourly_multipliers]
    if d.rate_jitter > 0:
        rates = [r * float(rng.uniform(1 - d.rate_jitter, 1 + d.rate_jitter)) for r in rates]
    return rates


def generate_passengers(scenario: ScenarioConfig, seed: int) -> list[PassengerRecord]:
    rng = stream(seed, DEMAND_STREAM)
    T = scenario.sim_duration
    shared_stops = {s for s in scenario.stop_ids if scenario.is_shared(s)}
    frac = scenario.demand.shared_passenger_fraction
    raw: list[tuple[float, str, str, tuple[str, ...], bool]] = []

    for key in scenario.demand.keys():
        stop, line = key
        rates = hourly_profile(scenario, key, rng)
        if not any(r > 0 for r in rates):
            continue
        downstream = scenario.downstream_stops(line, stop)
        if not downstream:
            raise ConfigError(f"stop {stop} on line {line} has demand but no downstream stops")
        shared_dest = [s for s in downstream if s in shared_stops] if stop in shared_stops else []
        for h, rate in enumerate(rates):
            t0 = h * 3600.0
            if t0 >= T:
                break
            t1 = min(T, t0 + 3600.0)
            lam = rate * (t1 - t0) / 3600.0
            n = int(rng.poisson(lam)) if lam > 0 else 0
            if n == 0:
                continue
            times = rng.uniform(t0, t1, size=n)
            if frac is not None and shared_dest:
                pick_shared = rng.random(n) < frac
            else:
                pick_shared = np.zeros(n, dtype=bool)
            for i in range(n):
                if pick_shared[i]:
                    dest = shared_dest[int(rng.integers(len(shared_dest)))]
                else:
                    dest = downstream[int(rng.integers(len(downstream)))]
                lines = _feasible_lines(scenario, stop, dest, line, shared_stops)
                raw.append((float(times[i]), stop, dest, lines, len(lines) > 1))

    raw.sort(key=lambda r: (r[0], r[1], r[2]))
    return [
        PassengerRecord(pid=i, origin_stop=o, arrive_time=t, alight_stop=d, feasible_lines=ls, shared=sh,
                        line=ls[0] if len(ls) == 1 else None)
        for i, (t, o, d, ls, sh) in enumerate(raw)
    ]


def _feasible_lines(scenario: ScenarioConfig, origin: str, dest: str, line: str,
                    shared_stops: set[str]) -> tuple[str, ...]:
    if origin not in shared_stops or dest not in shared_stops:
        return (line,)
    out = [lid for lid in scenario.served_lines[origin]
           if dest in scenario.downstream_stops(lid, origin)]
    return tuple(sorted(out))


def expected_count(scenario: ScenarioConfig) -> float:
    """Mean number of passengers when no rate is randomized."""
    total = 0.0
    for key in scenario.demand.keys():
        d = scenario.demand
        rates = d.hourly_rates.get(key) or [d.rates.get(key, 0.0) * m for m in d.hourly_multipliers]
        for h, r in enumerate(rates):
            span = min(scenario.sim_duration, (h + 1) * 3600) - h * 3600
            if span > 0:
                total += r * span / 3600.0
    return total

