from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np


@dataclass
class LineMetrics:
    sd_headway: float = 0.0
    avg_travel_time: float = 0.0
    avg_waiting_time: float = 0.0
    avg_holding_time: float = 0.0
    n_headways: int = 0
    n_travel: int = 0
    n_waiting: int = 0
    n_visits: int = 0


@dataclass
class MetricsReport:
    lines: dict[str, LineMetrics]
    overall: LineMetrics
    shared: LineMetrics | None
    incomplete_fraction: float
    n_passengers: int
    # per line: stop id -> [sd headway, mean wait, mean hold]
    per_stop: dict[str, dict[str, list[float]]] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "lines": {k: asdict(v) for k, v in self.lines.items()},
            "overall": asdict(self.overall),
            "shared": None if self.shared is None else asdict(self.shared),
            "incomplete_fraction": self.incomplete_fraction,
            "n_passengers": self.n_passengers,
            "per_stop": self.per_stop,
        }

    def flat(self) -> dict[str, float]:
        """Single-row summary used by tables and the evaluation CSV."""
        o = self.overall
        return {
            "sd_headway": o.sd_headway,
            "avg_travel_time": o.avg_travel_time,
            "avg_waiting_time": o.avg_waiting_time,
            "avg_holding_time": o.avg_holding_time,
            "incomplete_fraction": self.incomplete_fraction,
        }


def _mean(xs: list[float]) -> float:
    return float(np.mean(xs)) if xs else 0.0


def _sd(xs: list[float]) -> float:
    return float(np.std(xs)) if xs else 0.0


def headway_samples(arrivals: list[int]) -> list[float]:
    ts = sorted(arrivals)
    return [float(b - a) for a, b in zip(ts, ts[1:])]


def _passenger_block(pax: list) -> tuple[list[float], list[float]]:
    travel = [p.alight_time - p.arrive_time for p in pax if p.completed]
    wait = [p.board_time - p.arrive_time for p in pax if p.boarded]
    return travel, wait


def compute_metrics(env) -> MetricsReport:
    cfg = env.cfg
    lines: dict[str, LineMetrics] = {}
    per_stop: dict[str, dict[str, list[float]]] = {}
    all_hw: list[float] = []
    all_holds: list[float] = []
    by_line: dict[str, list] = {ln.line_id: [] for ln in cfg.lines}
    for p in env.passengers:
        if p.boarded:
            by_line[p.line].append(p)

    holds_by: dict[str, dict[str, list[float]]] = {ln.line_id: {} for ln in cfg.lines}
    for b in env.buses:
        for sid, _t, hold in b.visits:
            holds_by[b.line].setdefault(sid, []).append(float(hold))

    for ln in cfg.lines:
        lid = ln.line_id
        hw: list[float] = []
        ps: dict[str, list[float]] = {}
        wait_by_stop: dict[str, list[float]] = {}
        for p in by_line[lid]:
            wait_by_stop.setdefault(p.origin_stop, []).append(p.board_time - p.arrive_time)
        for sid in ln.stop_ids:
            s = headway_samples(env.arrival_log[lid][sid])
            hw.extend(s)
            ps[sid] = [_sd(s), _mean(wait_by_stop.get(sid, [])), _mean(holds_by[lid].get(sid, []))]
        holds = [h for sid in ln.stop_ids for h in holds_by[lid].get(sid, [])]
        travel, wait = _passenger_block(by_line[lid])
        lines[lid] = LineMetrics(_sd(hw), _mean(travel), _mean(wait), _mean(holds),
                                 len(hw), len(travel), len(wait), len(holds))
        per_stop[lid] = ps
        all_hw.extend(hw)
        all_holds.extend(holds)

    boarded = [p for p in env.passengers if p.boarded]
    travel, wait = _passenger_block(boarded)
    overall = LineMetrics(_sd(all_hw), _mean(travel), _mean(wait), _mean(all_holds),
                          len(all_hw), len(travel), len(wait), len(all_holds))

    shared = None
    if len(cfg.lines) > 1:
        shared_stops = [s for s in cfg.stop_ids if cfg.is_shared(s)]
        hw = []
        for sid in shared_stops:
            ts = [t for lid in cfg.served_lines[sid] for t in env.arrival_log[lid][sid]]
            hw.extend(headway_samples(ts))
        holds = [h for sid in shared_stops for lid in cfg.served_lines[sid] for h in holds_by[lid].get(sid, [])]
        spax = [p for p in boarded if p.shared]
        st, sw = _passenger_block(spax)
        shared = LineMetrics(_sd(hw), _mean(st), _mean(sw), _mean(holds), len(hw), len(st), len(sw), len(holds))

    n = len(env.passengers)
    incomplete = sum(1 for p in env.passengers if not p.completed)
    return MetricsReport(lines, overall, shared, incomplete / n if n else 0.0, n, per_stop)
