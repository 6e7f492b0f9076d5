"""Tick-based bus system simulator.

One call to :meth:`BusEnv.step` processes a single second ``t`` in a fixed
order:

1. passengers with ``arrive_time <= t`` join their origin stop queue
2. buses due at ``t`` are dispatched
3. moving buses advance one second; a bus reaching its next stop arrives
4. arrivals (in bus-id order): alight, board FIFO up to capacity, start dwell
5. holding buses accumulate one second of holding
6. ``controller.on_tick(env)``
7. buses at a decision point (dwell done, or a hold step done) are resolved
8. the clock advances

A released bus starts moving on the following tick. Buses of one line never
pass each other: a bus released while the bus ahead of it is still at the
same stop waits (status ``blocked``) and leaves one tick after it, and a
moving bus cannot close the gap to a moving leader on the same segment.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from typing import Any, Protocol

import numpy as np

from .config import GAMMA, ScenarioConfig
from .demand import DEMAND_STREAM, TRAVEL_STREAM, PassengerRecord, generate_passengers, stream
from .dynamics import InvariantViolation, alighting_set, boarding_count, dwell_time, line_headways

PENDING, MOVING, DWELLING, HOLDING, RETIRED = "pending", "moving", "dwelling", "holding", "retired"
BLOCKED = "blocked"
AT_STOP = (DWELLING, HOLDING, BLOCKED)
SNAP_EPS = 1e-9
FOLLOW_GAP = 1e-6
OBS_DIM = 6


class Controller(Protocol):
    def reset(self, env: "BusEnv") -> None: ...

    def on_tick(self, env: "BusEnv") -> None: ...

    def decide(self, env: "BusEnv", bus: "Bus", obs: np.ndarray) -> int: ...

    def on_episode_end(self, env: "BusEnv") -> None: ...


@dataclass(eq=False)
class Bus:
    bus_id: int
    line: str
    ordinal: int
    dispatch_time: int
    status: str = PENDING
    position: float = 0.0
    stop_index: int = -1
    onboard: list[PassengerRecord] = field(default_factory=list)
    dwell_end: int = -1
    hold_until: int = -1
    holding_elapsed: int = 0
    depart_tick: int = -1
    speed: float = 0.0
    remaining: float = 0.0
    last_arrival: int = -1
    terminal: bool = False
    # (stop_id, arrival tick, holding seconds at that visit)
    visits: list[list] = field(default_factory=list)

    @property
    def n_onboard(self) -> int:
        return len(self.onboard)

    @property
    def current_stop(self) -> str | None:
        return self.visits[-1][0] if self.visits else None


@dataclass(eq=False)
class Stop:
    stop_id: str
    served_lines: tuple[str, ...]
    positions: dict[str, float]
    shared: bool
    queue: list[PassengerRecord] = field(default_factory=list)
    holdup: dict[str, int] = field(default_factory=dict)


@dataclass
class Event:
    t: int
    kind: str
    bus: int | None
    stop: str | None
    payload: dict[str, Any]

    def to_json(self) -> str:
        return json.dumps({"t": self.t, "kind": self.kind, "bus": self.bus, "stop": self.stop,
                           "payload": self.payload}, sort_keys=True)


class BusEnv:
    def __init__(self, scenario: ScenarioConfig, seed: int, controller: Controller | None = None,
                 record_events: bool = True, check_invariants: bool = False,
                 passengers: list[PassengerRecord] | None = None) -> None:
        self.cfg = scenario
        self.seed = int(seed)
        self.controller = controller
        self.record_events = record_events
        self.check = check_invariants
        self._passengers_override = passengers
        self.reset()

    # setup

    def reset(self) -> None:
        cfg = self.cfg
        self.t = 0
        self.passengers = (copy.deepcopy(self._passengers_override) if self._passengers_override is not None
                           else generate_passengers(cfg, self.seed))
        self._next_pax = 0
        self.n_alighted = 0
        self.travel_rng = stream(self.seed, TRAVEL_STREAM)
        self.events: list[Event] = []
        self.stops: dict[str, Stop] = {}
        for sid in cfg.stop_ids:
            lines = tuple(cfg.served_lines[sid])
            pos = {lid: cfg.line_by_id[lid].positions[cfg.stop_index(lid, sid)] for lid in lines}
            self.stops[sid] = Stop(sid, lines, pos, len(lines) > 1, holdup={lid: 0 for lid in lines})
        self.buses: list[Bus] = []
        for ln in cfg.lines:
            if ln.circular:
                n = int(ln.fleet_size or 0)
            else:
                n = math.ceil(cfg.sim_duration / ln.departure_interval)
                if ln.fleet_size:
                    n = min(n, ln.fleet_size)
            for k in range(n):
                self.buses.append(Bus(bus_id=-1, line=ln.line_id, ordinal=k,
                                      dispatch_time=int(round(k * ln.departure_interval))))
        self.buses.sort(key=lambda b: (b.dispatch_time, [ln.line_id for ln in cfg.lines].index(b.line), b.ordinal))
        for i, b in enumerate(self.buses):
            b.bus_id = i
        self._pending = list(self.buses)
        self.by_line: dict[str, list[Bus]] = {ln.line_id: [] for ln in cfg.lines}
        for b in sorted(self.buses, key=lambda b: b.ordinal):
            self.by_line[b.line].append(b)
        self.active: dict[str, list[Bus]] = {ln.line_id: [] for ln in cfg.lines}
        # per line, per stop arrival ticks
        self.arrival_log: dict[str, dict[str, list[int]]] = {
            ln.line_id: {s: [] for s in ln.stop_ids} for ln in cfg.lines}
        self.boarding_checks = 0
        if self.controller is not None:
            self.controller.reset(self)

    def clone(self) -> "BusEnv":
        """Deep copy without the controller (for what-if rollouts)."""
        ctrl, events = self.controller, self.events
        self.controller, self.events = None, []
        try:
            twin = copy.deepcopy(self)
        finally:
            self.controller, self.events = ctrl, events
        twin.record_events = False
        return twin

    def resample_future(self, seed: int) -> None:
        """Replace unreleased passengers and travel-time draws with a fresh realization."""
        fresh = generate_passengers(self.cfg, seed)
        released = self.passengers[:self._next_pax]
        future = [p for p in fresh if p.arrive_time > self.t - 1]
        base = len(released)
        for i, p in enumerate(future):
            p.pid = base + i
        self.passengers = released + future
        self.travel_rng = stream(seed, TRAVEL_STREAM)

    # main loop

    def emit(self, kind: str, bus: Bus | None, stop: str | None, **payload: Any) -> None:
        if self.record_events:
            self.events.append(Event(self.t, kind, None if bus is None else bus.bus_id, stop, payload))

    @property
    def done(self) -> bool:
        return self.t >= self.cfg.sim_duration

    def step(self) -> None:
        t = self.t
        pax = self.passengers
        while self._next_pax < len(pax) and pax[self._next_pax].arrive_time <= t:
            p = pax[self._next_pax]
            self.stops[p.origin_stop].queue.append(p)
            self._next_pax += 1

        arrivals: list[Bus] = []
        while self._pending and self._pending[0].dispatch_time <= t:
            bus = self._pending.pop(0)
            if self._dispatch(bus, t):
                arrivals.append(bus)

        for bus in self.buses:
            if bus.status == MOVING and bus.depart_tick < t:
                move = bus.speed
                lead = self.leader(bus)
                if lead is not None and lead.status == MOVING and lead.stop_index == bus.stop_index:
                    gap = lead.position - bus.position
                    if self.cfg.line_by_id[bus.line].circular:
                        gap %= self.cfg.line_by_id[bus.line].route_length
                    if move >= gap:
                        move = max(gap - FOLLOW_GAP, 0.0)
                bus.position += move
                bus.remaining -= move
                if bus.remaining <= SNAP_EPS:
                    arrivals.append(bus)
        arrivals.sort(key=lambda b: b.bus_id)
        for bus in arrivals:
            self._arrive(bus, t)

        for bus in self.buses:
            if bus.status == HOLDING:
                bus.holding_elapsed += 1

        if self.controller is not None:
            self.controller.on_tick(self)
        self.finish_tick()

    def finish_tick(self) -> None:
        """Resolve decision points for the current tick and advance the clock.

        Split from :meth:`step` so a clone taken inside ``on_tick`` can resume
        exactly where the original left off.
        """
        t = self.t
        for bus in self.buses:
            if bus.status == BLOCKED and not self._blocked_by_leader(bus, t):
                self._depart(bus, t)
        for bus in self.buses:
            if (bus.status == DWELLING and bus.dwell_end == t) or (bus.status == HOLDING and bus.hold_until == t):
                self._decide(bus, t)

        if self.check:
            self.check_invariants()
        self.t += 1

    def run(self, until: int | None = None) -> "BusEnv":
        end = self.cfg.sim_duration if until is None else min(until, self.cfg.sim_duration)
        while self.t < end:
            self.step()
        if self.done and self.controller is not None and until is None:
            self.controller.on_episode_end(self)
        return self

    # bus lifecycle

    def _dispatch(self, bus: Bus, t: int) -> bool:
        ln = self.cfg.line_by_id[bus.line]
        self.active[bus.line].append(bus)
        bus.last_arrival = t
        self.emit("dispatch", bus, None, line=bus.line, ordinal=bus.ordinal)
        first = ln.positions[0]
        if not ln.circular or first == 0.0:
            bus.position = first
            bus.stop_index = -1
            bus.remaining = 0.0
            return True
        # circular loop: start at the depot (position 0), mid-way into the last segment
        last = len(ln.stops) - 1
        bus.position = 0.0
        bus.stop_index = last
        seg_len = ln.segment_length(last)
        tau = self._sample_segment_time(ln, last)
        bus.speed = seg_len / tau
        bus.remaining = first
        bus.status = MOVING
        bus.depart_tick = t
        return False

    def _sample_segment_time(self, ln, seg: int) -> float:
        if ln.travel_model == GAMMA:
            mean = ln.segment_means[seg]
            tau = float(self.travel_rng.gamma(ln.gamma_shape, mean / ln.gamma_shape))
            return max(tau, 1.0)
        return ln.segment_length(seg) / ln.speed

    def _arrive(self, bus: Bus, t: int) -> None:
        if bus.status not in (PENDING, MOVING):
            raise InvariantViolation(f"bus {bus.bus_id} arrived while {bus.status}")
        cfg = self.cfg
        ln = cfg.line_by_id[bus.line]
        k = (bus.stop_index + 1) % len(ln.stops)
        bus.stop_index = k
        bus.position = ln.positions[k]
        bus.remaining = 0.0
        sid = ln.stop_ids[k]
        stop = self.stops[sid]
        bus.last_arrival = t
        self.arrival_log[bus.line][sid].append(t)

        off, stay = alighting_set(bus.onboard, sid)
        for p in off:
            p.alight_time = float(t)
        self.n_alighted += len(off)
        n_before = len(bus.onboard)

        eligible, others = [], []
        for p in stop.queue:
            (eligible if bus.line in p.feasible_lines else others).append(p)
        boarded_n, holdup = boarding_count(len(eligible), cfg.capacity, n_before, len(off))
        boarded, left = eligible[:boarded_n], eligible[boarded_n:]
        if boarded_n + holdup != len(eligible):
            raise InvariantViolation("boarding identity broken")
        self.boarding_checks += 1
        for p in boarded:
            p.board_time = float(t)
            p.line = bus.line
            p.bus_id = bus.bus_id
        if boarded:
            keep = set(map(id, left)) | set(map(id, others))
            stop.queue = [p for p in stop.queue if id(p) in keep]
        stop.holdup[bus.line] = holdup
        bus.onboard = stay + boarded

        d = dwell_time(len(boarded), len(off), cfg.board_time_per_pax, cfg.alight_time_per_pax)
        bus.dwell_end = t + math.ceil(round(d, 9))
        bus.status = DWELLING
        bus.holding_elapsed = 0
        bus.terminal = (not ln.circular) and k == len(ln.stops) - 1
        bus.visits.append([sid, t, 0])
        self.emit("arrival", bus, sid, alight=len(off), board=len(boarded), holdup=holdup,
                  onboard=len(bus.onboard))

    def _decide(self, bus: Bus, t: int) -> None:
        sid = bus.current_stop
        if bus.terminal:
            bus.status = RETIRED
            self.active[bus.line].remove(bus)
            self.emit("retire", bus, sid)
            return
        if bus.holding_elapsed >= self.cfg.max_hold:
            self.emit("decision", bus, sid, action=1, forced=True, holding=bus.holding_elapsed)
            self._release(bus, t)
            return
        obs = self.observe(bus)
        action = 1 if self.controller is None else self.controller.decide(self, bus, obs)
        if action not in (0, 1):
            raise ValueError(f"controller returned invalid action {action!r}")
        self.emit("decision", bus, sid, action=int(action), forced=False, holding=bus.holding_elapsed,
                  obs=[float(x) for x in obs])
        if action == 0:
            bus.status = HOLDING
            bus.hold_until = t + self.cfg.action_step
        else:
            self._release(bus, t)

    def leader(self, bus: Bus) -> Bus | None:
        """The bus dispatched just before ``bus`` on its line, if it is in service."""
        seq = self.by_line[bus.line]
        if self.cfg.line_by_id[bus.line].circular:
            if len(seq) < 2:
                return None
            lead = seq[(bus.ordinal - 1) % len(seq)]
        else:
            if bus.ordinal == 0:
                return None
            lead = seq[bus.ordinal - 1]
        return None if lead.status in (PENDING, RETIRED) else lead

    def _blocked_by_leader(self, bus: Bus, t: int) -> bool:
        lead = self.leader(bus)
        if lead is None or lead.stop_index != bus.stop_index:
            return False
        if lead.status in AT_STOP:
            return (lead.last_arrival, lead.dispatch_time, lead.bus_id) < (bus.last_arrival, bus.dispatch_time,
                                                                          bus.bus_id)
        # the leader left this very tick; give it one second of head start
        return lead.status == MOVING and lead.depart_tick >= t

    def _release(self, bus: Bus, t: int) -> None:
        bus.visits[-1][2] = bus.holding_elapsed
        if self._blocked_by_leader(bus, t):
            bus.status = BLOCKED
            self.emit("blocked", bus, bus.current_stop, leader=self.leader(bus).bus_id)
            return
        self._depart(bus, t)

    def _depart(self, bus: Bus, t: int) -> None:
        ln = self.cfg.line_by_id[bus.line]
        seg = bus.stop_index
        tau = self._sample_segment_time(ln, seg)
        seg_len = ln.segment_length(seg)
        bus.speed = seg_len / tau
        bus.remaining = seg_len
        bus.status = MOVING
        bus.depart_tick = t
        self.emit("departure", bus, bus.current_stop, holding=bus.holding_elapsed, onboard=len(bus.onboard))

    # observation

    def headways(self, bus: Bus, stop_id: str | None = None) -> dict[str, tuple[float, float]]:
        """Forward/backward space headway per line serving ``stop_id``.

        The bus position is projected onto each line through the shared stop,
        so a bus that has left the stop keeps its offset from it.
        """
        sid = stop_id or bus.current_stop
        stop = self.stops[sid]
        own = self.cfg.line_by_id[bus.line]
        offset = bus.position - stop.positions[bus.line]
        if own.circular:
            offset %= own.route_length
            if offset > own.route_length / 2:
                offset -= own.route_length
        key = (bus.last_arrival, bus.dispatch_time, bus.bus_id)
        out = {}
        for m in stop.served_lines:
            ln = self.cfg.line_by_id[m]
            ref = stop.positions[m] + offset
            if ln.circular:
                ref %= ln.route_length
            others = [(b.position, (b.last_arrival, b.dispatch_time, b.bus_id) < key)
                      for b in self.active[m] if b is not bus]
            out[m] = line_headways(ref, others, ln.route_length, ln.circular)
        return out

    def observe(self, bus: Bus, stop_id: str | None = None) -> np.ndarray:
        hw = self.headways(bus, stop_id)
        same = hw[bus.line]
        other = [v for m, v in hw.items() if m != bus.line]
        if other:
            of = min(v[0] for v in other)
            ob = min(v[1] for v in other)
        else:
            of = ob = 0.0
        return np.array([same[0], same[1], of, ob, float(len(bus.onboard)), float(bus.holding_elapsed)])

    # bookkeeping

    def counts(self) -> dict[str, int]:
        waiting = sum(len(s.queue) for s in self.stops.values())
        onboard = sum(len(b.onboard) for b in self.buses)
        return {
            "pending": len(self.passengers) - self._next_pax,
            "waiting": waiting,
            "onboard": onboard,
            "alighted": self.n_alighted,
            "total": len(self.passengers),
        }

    def check_invariants(self) -> None:
        c = self.counts()
        if c["pending"] + c["waiting"] + c["onboard"] + c["alighted"] != c["total"]:
            raise InvariantViolation(f"passenger conservation broken at t={self.t}: {c}")
        for b in self.buses:
            if len(b.onboard) > self.cfg.capacity:
                raise InvariantViolation(f"bus {b.bus_id} over capacity at t={self.t}")
            if not 0 <= b.holding_elapsed <= self.cfg.max_hold:
                raise InvariantViolation(f"bus {b.bus_id} holding {b.holding_elapsed} out of range")
            if b.status == HOLDING and b.hold_until == self.t and b.holding_elapsed % self.cfg.action_step:
                raise InvariantViolation(f"bus {b.bus_id} decision off the action grid")
        for s in self.stops.values():
            if any(h < 0 for h in s.holdup.values()):
                raise InvariantViolation(f"negative holdup at {s.stop_id}")

    def event_log(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)


def run_episode(scenario: ScenarioConfig, seed: int, controller: Controller | None = None,
                **kw: Any) -> BusEnv:
    return BusEnv(scenario, seed, controller, **kw).run()


__all__ = ["BusEnv", "Bus", "Stop", "Event", "Controller", "run_episode", "OBS_DIM",
           "PENDING", "MOVING", "DWELLING", "HOLDING", "BLOCKED", "RETIRED", "DEMAND_STREAM"]
