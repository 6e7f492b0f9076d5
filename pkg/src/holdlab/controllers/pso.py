"""Window-based holding plans optimized by particle swarm over sampled futures."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .base import HOLD, RELEASE, HoldingController

ROBUST = "robust"
STOCHASTIC = "stochastic"

Slot = tuple[str, str, int]  # (stop id, line id, dispatch ordinal)


@dataclass
class PSOConfig:
    window: int = 2000
    n_scenarios: int = 5
    swarm: int = 40
    iterations: int = 60
    inertia: float = 0.7
    c1: float = 1.5
    c2: float = 1.5
    # plans are snapped to this grid before evaluation; defaults to the action step
    quantum: int | None = None
    seed: int = 0


class PlanExecutor(HoldingController):
    """Applies one hold duration per slot, on the slot's first visit in the window."""

    name = "plan"

    def __init__(self, plan: dict[Slot, int], window_start: int, window_end: int) -> None:
        self.plan = plan
        self.start = window_start
        self.end = window_end
        self._claimed: dict[Slot, tuple[int, int]] = {}

    def decide(self, env, bus, obs: np.ndarray) -> int:
        sid = bus.current_stop
        slot = (sid, bus.line, bus.ordinal)
        visit_tick = bus.visits[-1][1]
        if slot not in self.plan or not self.start <= visit_tick < self.end:
            return RELEASE
        visit = len(bus.visits)
        claim = self._claimed.setdefault(slot, (bus.bus_id, visit))
        if claim != (bus.bus_id, visit):
            return RELEASE
        return HOLD if bus.holding_elapsed < self.plan[slot] else RELEASE


def window_waiting_time(env, t0: int, t1: int) -> float:
    """Passenger-seconds spent waiting inside [t0, t1)."""
    total = 0.0
    for p in env.passengers:
        if p.arrive_time >= t1:
            continue
        start = max(p.arrive_time, t0)
        end = min(p.board_time if p.boarded else t1, t1)
        if end > start:
            total += end - start
    return total


def forecast_slots(env, window: int) -> list[Slot]:
    """Slots visited during the window under no holding, in visit order."""
    twin = env.clone()
    t0 = twin.t
    twin.finish_tick()
    end = t0 + window
    while twin.t < min(end, twin.cfg.sim_duration):
        twin.step()
    slots: list[Slot] = []
    seen = set()
    visits = sorted((v[1], b.bus_id, v[0], b.line, b.ordinal) for b in twin.buses for v in b.visits if v[1] >= t0)
    for t, _bid, sid, line, ordinal in visits:
        slot = (sid, line, ordinal)
        if t < end and slot not in seen and not _is_terminal(twin.cfg, line, sid):
            seen.add(slot)
            slots.append(slot)
    return slots


def _is_terminal(cfg, line: str, sid: str) -> bool:
    ln = cfg.line_by_id[line]
    return not ln.circular and ln.stop_ids[-1] == sid


@dataclass
class PlanProblem:
    """Fitness of a holding plan over K what-if futures from one snapshot."""

    env: object
    slots: list[Slot]
    window: int
    scenario_seeds: list[int]
    mode: str = ROBUST
    quantum: int = 5
    max_hold: int = 90
    cache: dict[tuple[int, ...], tuple[float, ...]] = field(default_factory=dict)
    evaluations: int = 0

    def quantize(self, x: np.ndarray) -> tuple[int, ...]:
        q = self.quantum
        v = np.floor(np.clip(np.asarray(x, dtype=float), 0, self.max_hold) / q + 0.5) * q
        return tuple(int(min(self.max_hold, a)) for a in v)

    def scenario_costs(self, plan: tuple[int, ...]) -> tuple[float, ...]:
        if plan in self.cache:
            return self.cache[plan]
        t0 = self.env.t
        t1 = t0 + self.window
        mapping = dict(zip(self.slots, plan))
        costs = []
        for s in self.scenario_seeds:
            twin = self.env.clone()
            twin.resample_future(s)
            twin.controller = PlanExecutor(mapping, t0, t1)
            twin.finish_tick()
            while twin.t < min(t1, twin.cfg.sim_duration):
                twin.step()
            costs.append(window_waiting_time(twin, t0, t1))
        self.evaluations += 1
        out = tuple(costs)
        self.cache[plan] = out
        return out

    def fitness(self, x) -> float:
        costs = self.scenario_costs(self.quantize(x))
        return aggregate(costs, self.mode)


def aggregate(costs, mode: str) -> float:
    if mode == ROBUST:
        return float(max(costs))
    if mode == STOCHASTIC:
        return float(np.mean(costs))
    raise ValueError(f"unknown PSO mode {mode!r}")


@dataclass
class PSOResult:
    plan: tuple[int, ...]
    fitness: float
    initial_fitness: list[float]
    history: list[float]


def pso_optimize(problem: PlanProblem, cfg: PSOConfig, rng: np.random.Generator) -> PSOResult:
    """Standard global-best PSO; particle 0 starts at the all-zero plan."""
    D = len(problem.slots)
    hi = float(problem.max_hold)
    if D == 0:
        f = problem.fitness(np.zeros(0))
        return PSOResult((), f, [f], [f])
    n = max(1, cfg.swarm)
    x = rng.uniform(0.0, hi, size=(n, D))
    x[0] = 0.0
    v = rng.uniform(-hi, hi, size=(n, D)) * 0.2
    f = np.array([problem.fitness(xi) for xi in x])
    pbest, pbest_f = x.copy(), f.copy()
    g = int(np.argmin(f))
    gbest, gbest_f = x[g].copy(), float(f[g])
    init = [float(a) for a in f]
    history = [gbest_f]
    for _ in range(cfg.iterations):
        r1 = rng.random((n, D))
        r2 = rng.random((n, D))
        v = cfg.inertia * v + cfg.c1 * r1 * (pbest - x) + cfg.c2 * r2 * (gbest - x)
        v = np.clip(v, -hi, hi)
        x = np.clip(x + v, 0.0, hi)
        f = np.array([problem.fitness(xi) for xi in x])
        better = f < pbest_f
        pbest[better] = x[better]
        pbest_f[better] = f[better]
        g = int(np.argmin(pbest_f))
        if pbest_f[g] < gbest_f:
            gbest, gbest_f = pbest[g].copy(), float(pbest_f[g])
        history.append(gbest_f)
    return PSOResult(problem.quantize(gbest), gbest_f, init, history)


def brute_force(problem: PlanProblem, grid: list[int]) -> tuple[tuple[int, ...], float]:
    """Exhaustive search over every plan on ``grid`` (small instances only)."""
    best, best_f = None, float("inf")
    for plan in itertools.product(grid, repeat=len(problem.slots)):
        f = aggregate(problem.scenario_costs(tuple(plan)), problem.mode)
        if f < best_f:
            best, best_f = tuple(plan), f
    return best, best_f


class PSOController(HoldingController):
    """Re-plans every ``window`` seconds; holds per the current plan."""

    def __init__(self, mode: str = ROBUST, cfg: PSOConfig | None = None) -> None:
        if mode not in (ROBUST, STOCHASTIC):
            raise ValueError(f"unknown PSO mode {mode!r}")
        self.mode = mode
        self.cfg = cfg or PSOConfig()
        self.name = f"pso-{mode}"
        self.executor: PlanExecutor | None = None
        self.results: list[PSOResult] = []

    def reset(self, env) -> None:
        self.executor = None
        self.results = []

    def on_tick(self, env) -> None:
        t = env.t
        if t % self.cfg.window or t >= env.cfg.sim_duration:
            return
        quantum = self.cfg.quantum or env.cfg.action_step
        slots = forecast_slots(env, self.cfg.window)
        seeds = [int(s) for s in np.random.SeedSequence([self.cfg.seed, env.seed, t]).generate_state(
            self.cfg.n_scenarios)]
        problem = PlanProblem(env, slots, self.cfg.window, seeds, self.mode, quantum, env.cfg.max_hold)
        rng = np.random.default_rng([self.cfg.seed, env.seed, t, 1])
        res = pso_optimize(problem, self.cfg, rng)
        self.results.append(res)
        self.executor = PlanExecutor(dict(zip(slots, res.plan)), t, t + self.cfg.window)

    def decide(self, env, bus, obs: np.ndarray) -> int:
        if self.executor is None:
            return RELEASE
        return self.executor.decide(env, bus, obs)
