"""Scenario description: lines, stops, timing constants and demand.

Scenarios round-trip through JSON (``ScenarioConfig.to_dict`` /
``ScenarioConfig.from_dict``); demand may also be read from a CSV of
``stop,line,hour,rate`` rows.
"""

from __future__ import annotations

import copy
import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema


class ConfigError(ValueError):
    """Raised when a scenario is internally inconsistent."""


CONSTANT = "constant"
GAMMA = "gamma"


@dataclass
class StopSpec:
    stop_id: str
    position: float


@dataclass
class LineConfig:
    line_id: str
    route_length: float
    stops: list[StopSpec]
    departure_interval: float
    circular: bool = False
    # circular lines: number of buses in the loop; linear lines: None means
    # dispatch every interval for the whole simulation
    fleet_size: int | None = None
    travel_model: str = CONSTANT
    speed: float = 5.55
    # mean seconds per segment (GAMMA); len = n_segments
    segment_means: list[float] | None = None
    gamma_shape: float = 4.0

    @property
    def stop_ids(self) -> list[str]:
        return [s.stop_id for s in self.stops]

    @property
    def positions(self) -> list[float]:
        return [s.position for s in self.stops]

    @property
    def n_segments(self) -> int:
        n = len(self.stops)
        return n if self.circular else n - 1

    def segment_length(self, i: int) -> float:
        pos = self.positions
        if i < len(pos) - 1:
            return pos[i + 1] - pos[i]
        return self.route_length - pos[-1] + pos[0]

    def mean_segment_time(self, i: int) -> float:
        if self.travel_model == GAMMA:
            assert self.segment_means is not None
            return self.segment_means[i]
        return self.segment_length(i) / self.speed

    def mean_speed(self) -> float:
        dist = sum(self.segment_length(i) for i in range(self.n_segments))
        time = sum(self.mean_segment_time(i) for i in range(self.n_segments))
        return dist / time

    def validate(self) -> None:
        pos = self.positions
        if len(pos) < 2:
            raise ConfigError(f"line {self.line_id}: needs at least 2 stops")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ConfigError(f"line {self.line_id}: stop positions must be strictly increasing")
        if pos[0] < 0 or pos[-1] >= self.route_length:
            raise ConfigError(f"line {self.line_id}: stop positions must lie in [0, route_length)")
        if len(set(self.stop_ids)) != len(pos):
            raise ConfigError(f"line {self.line_id}: duplicate stop ids")
        if self.departure_interval <= 0:
            raise ConfigError(f"line {self.line_id}: departure_interval must be > 0")
        if self.circular and not self.fleet_size:
            raise ConfigError(f"line {self.line_id}: circular lines need fleet_size")
        if self.travel_model == GAMMA:
            if self.segment_means is None or len(self.segment_means) != self.n_segments:
                raise ConfigError(f"line {self.line_id}: need one mean travel time per segment")
            if any(m <= 0 for m in self.segment_means) or self.gamma_shape <= 0:
                raise ConfigError(f"line {self.line_id}: gamma parameters must be positive")
        elif self.travel_model == CONSTANT:
            if self.speed <= 0:
                raise ConfigError(f"line {self.line_id}: speed must be > 0")
        else:
            raise ConfigError(f"line {self.line_id}: unknown travel model {self.travel_model!r}")


@dataclass
class Demand:
    """Arrival-rate profile in pax/h.

    ``rates`` maps (stop, line) to a base rate; ``hourly_rates`` maps
    (stop, line) to explicit per-hour rates and overrides ``rates``. When
    ``rate_range`` is set, every (stop, line) pair listed in ``rates`` gets
    its base rate redrawn uniformly from the range for each passenger seed.
    """

    rates: dict[tuple[str, str], float] = field(default_factory=dict)
    hourly_multipliers: list[float] = field(default_factory=lambda: [1.0])
    hourly_rates: dict[tuple[str, str], list[float]] = field(default_factory=dict)
    rate_range: tuple[float, float] | None = None
    rate_jitter: float = 0.0
    shared_passenger_fraction: float | None = None

    def keys(self) -> list[tuple[str, str]]:
        return sorted(set(self.rates) | set(self.hourly_rates))

    def mean_rate(self, key: tuple[str, str]) -> float:
        """Expected pax/h for one (stop, line) pair, averaged over the hours."""
        if key in self.hourly_rates:
            hours = self.hourly_rates[key]
            return sum(hours) / len(hours) if hours else 0.0
        if key not in self.rates:
            return 0.0
        base = sum(self.rate_range) / 2 if self.rate_range else self.rates[key]
        mult = self.hourly_multipliers or [1.0]
        return base * sum(mult) / len(mult)


@dataclass
class ScenarioConfig:
    lines: list[LineConfig]
    capacity: int = 120
    board_time_per_pax: float = 3.0
    alight_time_per_pax: float = 1.8
    sim_duration: int = 14400
    action_step: int = 5
    max_hold: int = 90
    demand: Demand = field(default_factory=Demand)
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self) -> None:
        self._index()

    def _index(self) -> None:
        self.line_by_id = {ln.line_id: ln for ln in self.lines}
        served: dict[str, list[str]] = {}
        for ln in self.lines:
            for sid in ln.stop_ids:
                served.setdefault(sid, []).append(ln.line_id)
        self.served_lines = served

    @property
    def stop_ids(self) -> list[str]:
        return sorted(self.served_lines)

    def is_shared(self, stop_id: str) -> bool:
        return len(self.served_lines[stop_id]) > 1

    def stop_index(self, line_id: str, stop_id: str) -> int:
        return self.line_by_id[line_id].stop_ids.index(stop_id)

    def downstream_stops(self, line_id: str, stop_id: str) -> list[str]:
        ln = self.line_by_id[line_id]
        ids = ln.stop_ids
        i = ids.index(stop_id)
        if ln.circular:
            return ids[i + 1:] + ids[:i]
        return ids[i + 1:]

    def line_spacing(self, line_id: str) -> float:
        """Target spacing between consecutive buses of a line, in meters.

        Loops divide the route by the fleet. One-way lines use the dispatch
        interval times the effective speed, where the expected dwell at
        every stop is added to the running time.
        """
        ln = self.line_by_id[line_id]
        if ln.circular and ln.fleet_size:
            return ln.route_length / ln.fleet_size
        dist = sum(ln.segment_length(i) for i in range(ln.n_segments))
        run = sum(ln.mean_segment_time(i) for i in range(ln.n_segments))
        riders = sum(self.demand.mean_rate((sid, line_id)) for sid in ln.stop_ids) * ln.departure_interval / 3600.0
        dwell = riders * (self.board_time_per_pax + self.alight_time_per_pax)
        return ln.departure_interval * dist / (run + dwell)

    def ideal_headway(self) -> float:
        return sum(self.line_spacing(ln.line_id) for ln in self.lines) / len(self.lines)

    def validate(self) -> None:
        if not self.lines:
            raise ConfigError("scenario has no lines")
        if len(self.line_by_id) != len(self.lines):
            raise ConfigError("duplicate line ids")
        for ln in self.lines:
            ln.validate()
        if self.action_step <= 0:
            raise ConfigError("action_step must be > 0")
        if self.max_hold <= 0 or self.max_hold % self.action_step:
            raise ConfigError("max_hold must be a positive multiple of action_step")
        if self.capacity <= 0 or self.sim_duration <= 0:
            raise ConfigError("capacity and sim_duration must be positive")
        if self.board_time_per_pax < 0 or self.alight_time_per_pax < 0:
            raise ConfigError("per-passenger times must be >= 0")
        d = self.demand
        if any(m < 0 for m in d.hourly_multipliers):
            raise ConfigError("hourly multipliers must be >= 0")
        if d.rate_range is not None and not 0 <= d.rate_range[0] <= d.rate_range[1]:
            raise ConfigError("rate_range must satisfy 0 <= lo <= hi")
        if not 0 <= d.rate_jitter < 1:
            raise ConfigError("rate_jitter must be in [0, 1)")
        for (sid, lid) in d.keys():
            if lid not in self.line_by_id or sid not in self.line_by_id[lid].stop_ids:
                raise ConfigError(f"demand references stop {sid} not on line {lid}")
        for key, r in d.rates.items():
            if r < 0 or math.isnan(r):
                raise ConfigError(f"negative rate for {key}")
        for key, rs in d.hourly_rates.items():
            if any(r < 0 for r in rs):
                raise ConfigError(f"negative rate for {key}")

    # serialization

    def to_dict(self) -> dict[str, Any]:
        lines = []
        for ln in self.lines:
            tt: dict[str, Any]
            if ln.travel_model == GAMMA:
                tt = {"model": GAMMA, "segment_means": list(ln.segment_means or []), "shape": ln.gamma_shape}
            else:
                tt = {"model": CONSTANT, "speed": ln.speed}
            lines.append({
                "id": ln.line_id,
                "route_length": ln.route_length,
                "circular": ln.circular,
                "departure_interval": ln.departure_interval,
                "fleet_size": ln.fleet_size,
                "stops": [{"id": s.stop_id, "position": s.position} for s in ln.stops],
                "travel_time": tt,
            })
        d = self.demand
        demand: dict[str, Any] = {
            "hourly_multipliers": list(d.hourly_multipliers),
            "rates": [{"stop": s, "line": ln, "rate": r} for (s, ln), r in sorted(d.rates.items())],
            "rate_jitter": d.rate_jitter,
        }
        if d.hourly_rates:
            demand["hourly_rates"] = [
                {"stop": s, "line": ln, "rates": list(rs)} for (s, ln), rs in sorted(d.hourly_rates.items())
            ]
        if d.rate_range is not None:
            demand["rate_range"] = list(d.rate_range)
        if d.shared_passenger_fraction is not None:
            demand["shared_passenger_fraction"] = d.shared_passenger_fraction
        return {
            "name": self.name,
            "lines": lines,
            "stops": [{"id": sid, "lines": self.served_lines[sid], "shared": self.is_shared(sid)}
                      for sid in self.stop_ids],
            "capacity": self.capacity,
            "board_time_per_pax": self.board_time_per_pax,
            "alight_time_per_pax": self.alight_time_per_pax,
            "sim_duration_s": self.sim_duration,
            "action_step_s": self.action_step,
            "max_hold_s": self.max_hold,
            "demand": demand,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioConfig":
        jsonschema.validate(data, SCENARIO_SCHEMA)
        lines = []
        for ld in data["lines"]:
            tt = ld.get("travel_time", {"model": CONSTANT, "speed": 5.55})
            lines.append(LineConfig(
                line_id=str(ld["id"]),
                route_length=float(ld["route_length"]),
                stops=[StopSpec(str(s["id"]), float(s["position"])) for s in ld["stops"]],
                departure_interval=float(ld["departure_interval"]),
                circular=bool(ld.get("circular", False)),
                fleet_size=ld.get("fleet_size"),
                travel_model=tt["model"],
                speed=float(tt.get("speed", 5.55)),
                segment_means=[float(m) for m in tt["segment_means"]] if "segment_means" in tt else None,
                gamma_shape=float(tt.get("shape", 4.0)),
            ))
        dd = data.get("demand", {})
        demand = Demand(
            rates={(str(r["stop"]), str(r["line"])): float(r["rate"]) for r in dd.get("rates", [])},
            hourly_multipliers=[float(m) for m in dd.get("hourly_multipliers", [1.0])],
            hourly_rates={(str(r["stop"]), str(r["line"])): [float(x) for x in r["rates"]]
                          for r in dd.get("hourly_rates", [])},
            rate_range=tuple(dd["rate_range"]) if "rate_range" in dd else None,
            rate_jitter=float(dd.get("rate_jitter", 0.0)),
            shared_passenger_fraction=dd.get("shared_passenger_fraction"),
        )
        cfg = cls(
            lines=lines,
            capacity=int(data["capacity"]),
            board_time_per_pax=float(data["board_time_per_pax"]),
            alight_time_per_pax=float(data["alight_time_per_pax"]),
            sim_duration=int(data["sim_duration_s"]),
            action_step=int(data["action_step_s"]),
            max_hold=int(data["max_hold_s"]),
            demand=demand,
            seed=int(data.get("seed", 0)),
            name=str(data.get("name", "scenario")),
        )
        for sd in data.get("stops", []):
            sid = str(sd["id"])
            if sid not in cfg.served_lines:
                raise ConfigError(f"stop {sid} listed but not on any line")
            if "lines" in sd and sorted(map(str, sd["lines"])) != sorted(cfg.served_lines[sid]):
                raise ConfigError(f"stop {sid}: served lines disagree with line definitions")
        cfg.validate()
        return cfg

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, path: str | Path) -> "ScenarioConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def copy(self) -> "ScenarioConfig":
        return copy.deepcopy(self)


def load_demand_csv(path: str | Path) -> dict[tuple[str, str], list[float]]:
    """Read ``stop,line,hour,rate`` rows into per-hour rate lists.

    Hours are zero-based; missing hours inside the covered range are 0.
    """
    table: dict[tuple[str, str], dict[int, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            key = (row["stop"].strip(), row["line"].strip())
            hour = int(row["hour"])
            rate = float(row["rate"])
            if hour < 0 or rate < 0:
                raise ConfigError(f"bad demand row {row}")
            table.setdefault(key, {})[hour] = rate
    out = {}
    for key, by_hour in table.items():
        n = max(by_hour) + 1
        out[key] = [by_hour.get(h, 0.0) for h in range(n)]
    return out


_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

SCENARIO_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["lines", "capacity", "board_time_per_pax", "alight_time_per_pax",
                 "sim_duration_s", "action_step_s", "max_hold_s", "demand"],
    "properties": {
        "name": {"type": "string"},
        "lines": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["id", "route_length", "departure_interval", "stops"],
                "properties": {
                    "id": {"type": ["string", "integer"]},
                    "route_length": _POS,
                    "circular": {"type": "boolean"},
                    "departure_interval": _POS,
                    "fleet_size": {"type": ["integer", "null"], "minimum": 1},
                    "stops": {
                        "type": "array",
                        "minItems": 2,
                        "items": {
                            "type": "object",
                            "required": ["id", "position"],
                            "properties": {"id": {"type": ["string", "integer"]}, "position": _NUM},
                        },
                    },
                    "travel_time": {
                        "type": "object",
                        "required": ["model"],
                        "properties": {
                            "model": {"enum": [CONSTANT, GAMMA]},
                            "speed": _POS,
                            "segment_means": {"type": "array", "items": _POS},
                            "shape": _POS,
                        },
                    },
                },
            },
        },
        "stops": {"type": "array", "items": {"type": "object", "required": ["id"]}},
        "capacity": {"type": "integer", "minimum": 1},
        "board_time_per_pax": {"type": "number", "minimum": 0},
        "alight_time_per_pax": {"type": "number", "minimum": 0},
        "sim_duration_s": {"type": "integer", "minimum": 1},
        "action_step_s": {"type": "integer", "minimum": 1},
        "max_hold_s": {"type": "integer", "minimum": 1},
        "demand": {
            "type": "object",
            "properties": {
                "hourly_multipliers": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "rates": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["stop", "line", "rate"],
                        "properties": {"rate": {"type": "number", "minimum": 0}},
                    },
                },
                "hourly_rates": {"type": "array"},
                "rate_range": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                "rate_jitter": {"type": "number", "minimum": 0, "maximum": 1},
                "shared_passenger_fraction": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
            },
        },
        "seed": {"type": "integer"},
    },
}
