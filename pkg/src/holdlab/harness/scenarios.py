"""Built-in scenarios and the random generic-scenario generator."""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ..sim.config import CONSTANT, GAMMA, ConfigError, Demand, LineConfig, ScenarioConfig, StopSpec, load_demand_csv

CASE1_STOPS = [666.0 + 1332.0 * k for k in range(8)]
CASE1_MULTIPLIERS = [0.6, 0.8, 1.2, 0.5]


def case1(rate_seed: int = 2024) -> ScenarioConfig:
    """Single circular corridor, six buses, boarding-only dwell."""
    line = LineConfig(
        line_id="1",
        route_length=10656.0,
        stops=[StopSpec(f"S{k}", x) for k, x in enumerate(CASE1_STOPS)],
        departure_interval=320.0,
        circular=True,
        fleet_size=6,
        travel_model=CONSTANT,
        speed=5.55,
    )
    # per-stop base rates are drawn once so every run sees the same profile
    rng = np.random.default_rng(rate_seed)
    rates = {(f"S{k}", "1"): round(float(rng.uniform(40, 180)), 3) for k in range(8)}
    cfg = ScenarioConfig(
        lines=[line],
        capacity=10000,
        board_time_per_pax=3.0,
        alight_time_per_pax=0.0,
        sim_duration=14400,
        demand=Demand(rates=rates, hourly_multipliers=list(CASE1_MULTIPLIERS)),
        name="case1",
    )
    cfg.validate()
    return cfg


CASE2_LENGTHS = {"1": 24950.0, "52": 22580.0}
CASE2_SHARED_START = {"1": 10, "52": 8}
CASE2_N_STOPS = 27
CASE2_N_SHARED = 8
CASE2_SHARED_SPACING = 700.0
CASE2_SPEED = 6.0


def _case2_line(lid: str) -> LineConfig:
    L = CASE2_LENGTHS[lid]
    start = CASE2_SHARED_START[lid]
    n = CASE2_N_STOPS
    span = L * (n - 1) / n
    corridor = CASE2_SHARED_SPACING * (CASE2_N_SHARED - 1)
    n_branch_gaps = (n - 1) - (CASE2_N_SHARED - 1)
    gap = (span - corridor) / n_branch_gaps
    pos, x = [], 0.0
    for k in range(n):
        pos.append(round(x, 3))
        in_corridor = start <= k < start + CASE2_N_SHARED - 1
        x += CASE2_SHARED_SPACING if in_corridor else gap
    stops = []
    for k, p in enumerate(pos):
        j = k - start
        sid = f"C{j}" if 0 <= j < CASE2_N_SHARED else f"L{lid}-{k:02d}"
        stops.append(StopSpec(sid, p))
    seg = [(pos[k + 1] - pos[k]) / CASE2_SPEED for k in range(n - 1)]
    return LineConfig(line_id=lid, route_length=L, stops=stops, departure_interval=300.0,
                      travel_model=GAMMA, segment_means=[round(s, 3) for s in seg], gamma_shape=4.0)


def case2_demand_path() -> Path:
    return Path(str(resources.files("holdlab.harness") / "data" / "case2_demand.csv"))


def case2_synthetic() -> ScenarioConfig:
    """Two linear lines sharing an eight-stop corridor; synthetic demand file."""
    lines = [_case2_line("1"), _case2_line("52")]
    hourly = load_demand_csv(case2_demand_path())
    cfg = ScenarioConfig(
        lines=lines,
        capacity=120,
        board_time_per_pax=3.0,
        alight_time_per_pax=1.8,
        sim_duration=14400,
        demand=Demand(hourly_rates=hourly, rate_jitter=0.1, shared_passenger_fraction=0.5),
        name="case2-synthetic",
    )
    cfg.validate()
    return cfg


def case2_profile_rows() -> list[tuple[str, str, int, float]]:
    """Rows of the bundled case-2 demand file (kept here so it can be regenerated)."""
    rows = []
    hour_mult = [0.9, 1.2, 1.0, 0.8]
    for lid in ("1", "52"):
        ln = _case2_line(lid)
        n = len(ln.stops)
        for k, s in enumerate(ln.stops[:-1]):
            # busier toward the middle of the route and along the shared corridor
            base = 20.0 + 50.0 * math.exp(-((k - n / 2) / (n / 4)) ** 2)
            if s.stop_id.startswith("C"):
                base *= 0.75  # split between two lines, so each line sees less of it
            for h, m in enumerate(hour_mult):
                rows.append((s.stop_id, lid, h, round(base * m, 2)))
    return rows


BUILTINS = {"case1": case1, "case2-synthetic": case2_synthetic}


def builtin_scenario(name: str) -> ScenarioConfig:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ConfigError(f"unknown builtin scenario {name!r}; choose from {sorted(BUILTINS)}") from None


def load_scenario(ref: str) -> ScenarioConfig:
    if ref.startswith("builtin:"):
        return builtin_scenario(ref.split(":", 1)[1])
    return ScenarioConfig.from_json(ref)


@dataclass
class GenParams:
    n_lines: tuple[int, int] = (2, 10)
    n_stops: tuple[int, int] = (16, 25)
    pax_per_stop: tuple[float, float] = (100.0, 1100.0)
    shared_pool: tuple[int, int] = (2, 6)
    spacing: tuple[float, float] = (400.0, 900.0)
    speed: float = 6.0
    duration: int = 14400
    target_load: float = 0.6
    gamma_shape: float = 16.0

    def validate(self) -> None:
        for name in ("n_lines", "n_stops", "pax_per_stop", "shared_pool", "spacing"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"empty range for {name}")
        if self.n_stops[0] < 4:
            raise ConfigError("lines need at least 4 stops")


def gen_scenario(params: GenParams | None = None, seed: int = 0) -> ScenarioConfig:
    """Random multi-line system with shared stops at interior positions."""
    p = params or GenParams()
    p.validate()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 77]))
    n_lines = int(rng.integers(p.n_lines[0], p.n_lines[1] + 1))
    pool = [f"H{j}" for j in range(int(rng.integers(p.shared_pool[0], p.shared_pool[1] + 1)))]

    lines: list[LineConfig] = []
    for li in range(n_lines):
        lid = f"R{li + 1}"
        n = int(rng.integers(p.n_stops[0], p.n_stops[1] + 1))
        k = int(rng.integers(0, min(len(pool), n - 2) + 1))
        hubs = sorted(rng.choice(len(pool), size=k, replace=False).tolist()) if k else []
        slots = sorted(rng.choice(np.arange(1, n - 1), size=k, replace=False).tolist()) if k else []
        ids = [f"{lid}-{j:02d}" for j in range(n)]
        for h, slot in zip(hubs, slots):
            ids[slot] = pool[h]
        gaps = rng.uniform(p.spacing[0], p.spacing[1], size=n - 1)
        pos = np.concatenate([[0.0], np.cumsum(gaps)])
        stops = [StopSpec(sid, round(float(x), 3)) for sid, x in zip(ids, pos)]
        L = round(float(pos[-1]) + float(p.spacing[0]), 3)
        seg = [round(float(g) / p.speed, 3) for g in gaps]
        lines.append(LineConfig(line_id=lid, route_length=L, stops=stops, departure_interval=300.0,
                                travel_model=GAMMA, segment_means=seg, gamma_shape=p.gamma_shape))

    cfg = ScenarioConfig(lines=lines, capacity=120, board_time_per_pax=3.0, alight_time_per_pax=1.8,
                         sim_duration=p.duration, name=f"generic-{seed}", seed=int(seed))
    hours = p.duration / 3600.0
    rates: dict[tuple[str, str], float] = {}
    for sid in cfg.stop_ids:
        total = float(rng.uniform(p.pax_per_stop[0], p.pax_per_stop[1]))
        origins = [lid for lid in cfg.served_lines[sid] if cfg.downstream_stops(lid, sid)]
        if not origins:
            continue
        for lid in origins:
            rates[(sid, lid)] = total / hours / len(origins)
    cfg.demand = Demand(rates=rates, hourly_multipliers=[1.0] * math.ceil(hours), shared_passenger_fraction=0.3)
    for ln in cfg.lines:
        ln.departure_interval = service_interval(ln.stop_ids, rates, ln.line_id, cfg.capacity, p.target_load)
    cfg.validate()
    return cfg


def peak_load(stop_ids: list[str], rates: dict[tuple[str, str], float], line_id: str) -> float:
    """Expected riders/h on the busiest segment with uniform downstream destinations."""
    n = len(stop_ids)
    best = 0.0
    for k in range(n - 1):
        load = sum(rates.get((stop_ids[j], line_id), 0.0) * (n - 1 - k) / (n - 1 - j) for j in range(k + 1))
        best = max(best, load)
    return best


def service_interval(stop_ids: list[str], rates: dict[tuple[str, str], float], line_id: str,
                     capacity: int, target_load: float) -> float:
    """Headway that keeps the mean peak-segment load near ``target_load * capacity``."""
    peak = peak_load(stop_ids, rates, line_id)
    if peak <= 0:
        return 600.0
    raw = target_load * capacity * 3600.0 / peak
    return float(min(600.0, max(60.0, 10.0 * math.floor(raw / 10.0))))


def stop_totals(cfg: ScenarioConfig) -> dict[str, float]:
    """Expected passengers per stop over the whole run."""
    out: dict[str, float] = {}
    hours = cfg.sim_duration / 3600.0
    for (sid, _lid), r in cfg.demand.rates.items():
        out[sid] = out.get(sid, 0.0) + r * hours
    return out
