"""Shared-parameter DQN holding agent.

Every stop agent reads the same network and writes into the same replay
buffer. A decision taken at tick t is paired with the observation of the
same bus at t + action_step (measured from the stop where it decided).
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from ..controllers.base import HOLD, RELEASE, HoldingController
from ..reward.ast import EvalError, RewardProgram
from ..sim.config import ScenarioConfig
from ..sim.env import OBS_DIM, BusEnv
from ..sim.metrics import MetricsReport, compute_metrics
from .qnet import QNetworkParams, dqn_update, forward, init_params
from .replay import ReplayBuffer

log = logging.getLogger(__name__)

TERMINAL_SCALE = 1e4


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    gamma: float = 0.95
    episodes: int = 70
    updates_per_episode: int = 200
    batch_size: int = 64
    eps_start: float = 1.0
    eps_end: float = 0.02
    eps_decay_episodes: int = 50
    buffer_capacity: int = 100_000
    hidden: tuple[int, ...] = (400, 400, 400, 400)
    seed: int = 0
    dtype: str = "float32"
    # optional cap on the gradient's global L2 norm; off by default
    max_grad_norm: float | None = None

    def validate(self) -> None:
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must be in (0, 1)")
        if not 0 <= self.eps_end <= self.eps_start <= 1:
            raise ValueError("need 0 <= eps_end <= eps_start <= 1")
        if self.episodes < 0 or self.updates_per_episode < 0 or self.batch_size <= 0:
            raise ValueError("episode, update and batch counts must be non-negative")
        if self.max_grad_norm is not None and not self.max_grad_norm > 0:
            raise ValueError("max_grad_norm must be > 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def epsilon(episode: int, start: float = 1.0, end: float = 0.02, decay_episodes: int = 50) -> float:
    if episode < 0:
        raise ValueError("episode must be >= 0")
    return max(end, start - (start - end) * episode / decay_episodes)


def select_action(q: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; exact ties go to release."""
    if eps > 0 and rng.random() < eps:
        return int(rng.integers(0, 2))
    return RELEASE if q[RELEASE] >= q[HOLD] else HOLD


class ObsNormalizer:
    """Scales raw observations before they reach the network.

    Headways are divided by the scenario's nominal spacing, the load by a
    reference load (capacity, capped at 120 so an effectively unlimited
    capacity does not flatten the signal) and holding by max_hold.
    """

    def __init__(self, scenario: ScenarioConfig) -> None:
        h = scenario.ideal_headway()
        n_ref = float(min(scenario.capacity, 120))
        self.scale = np.array([h, h, h, h, n_ref, float(scenario.max_hold)])

    def __call__(self, obs: np.ndarray) -> np.ndarray:
        return np.asarray(obs, dtype=float) / self.scale


@dataclass
class Step:
    """One decision of the test trajectory (raw, unnormalized states)."""

    t: int
    bus: int
    stop: str
    state: list[float]
    action: int
    reward: float = 0.0
    next_state: list[float] | None = None


class RewardFailure(RuntimeError):
    def __init__(self, err: EvalError, cur, action, nxt) -> None:
        super().__init__(f"reward evaluation failed: {err.message} at state={list(cur)} action={action} "
                         f"next_state={list(nxt)}")
        self.error = err
        self.cur, self.action, self.nxt = list(cur), action, list(nxt)


class DQNAgent(HoldingController):
    name = "rl"

    def __init__(self, params: QNetworkParams, normalizer: ObsNormalizer, reward: RewardProgram | None,
                 rng: np.random.Generator, eps: float = 0.0,
                 q_override: Callable[[np.ndarray], np.ndarray] | None = None) -> None:
        self.params = params
        self.norm = normalizer
        self.reward = reward
        self.rng = rng
        self.eps = eps
        self.q_override = q_override
        self.steps: list[Step] = []
        self._pending: dict[int, list[tuple[int, Step]]] = {}

    def q_values(self, obs: np.ndarray) -> np.ndarray:
        if self.q_override is not None:
            return np.asarray(self.q_override(obs), dtype=float)
        return forward(self.params, self.norm(obs)[None, :])[0]

    def reset(self, env: BusEnv) -> None:
        self.steps = []
        self._pending = {}

    def decide(self, env: BusEnv, bus, obs: np.ndarray) -> int:
        a = select_action(self.q_values(obs), self.eps, self.rng)
        st = Step(env.t, bus.bus_id, bus.current_stop, [float(x) for x in obs], a)
        self._pending.setdefault(env.t + env.cfg.action_step, []).append((bus.bus_id, st))
        return a

    def on_tick(self, env: BusEnv) -> None:
        due = self._pending.pop(env.t, None)
        if not due:
            return
        for bus_id, st in due:
            bus = env.buses[bus_id]
            nxt = env.observe(bus, st.stop)
            st.next_state = [float(x) for x in nxt]
            if self.reward is not None:
                try:
                    st.reward = self.reward.evaluate(st.state, st.action, st.next_state)
                except EvalError as e:
                    raise RewardFailure(e, st.state, st.action, st.next_state) from e
            self.steps.append(st)

    def on_episode_end(self, env: BusEnv) -> None:
        self._pending = {}


def total_travel_time(env: BusEnv) -> float:
    """Passenger-seconds from arrival to alighting, counting unfinished trips up to the horizon."""
    T = float(env.cfg.sim_duration)
    total = 0.0
    for p in env.passengers:
        end = p.alight_time if p.completed else T
        total += end - p.arrive_time
    return total


def apply_terminal_penalty(steps: list[Step], penalty: float) -> None:
    """Add ``penalty`` to the last transition of every stop's decision stream."""
    last: dict[str, Step] = {}
    for st in steps:
        last[st.stop] = st
    for st in last.values():
        st.reward += penalty


@dataclass
class TrainResult:
    params: QNetworkParams
    evol: list[float]
    losses: list[float] = field(default_factory=list)
    n_transitions: list[int] = field(default_factory=list)


def episode_seed(seed: int, episode: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(episode), 11]).generate_state(1)[0])


def network_dims(cfg: TrainConfig) -> list[int]:
    return [OBS_DIM, *cfg.hidden, 2]


def run_training(scenario: ScenarioConfig, reward: RewardProgram, cfg: TrainConfig,
                 init: QNetworkParams | None = None,
                 progress: Callable[[int, float], None] | None = None) -> TrainResult:
    """Episodes of epsilon-greedy interaction, each followed by minibatch updates."""
    cfg.validate()
    dtype = np.dtype(cfg.dtype)
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 3]))
    params = init.copy() if init is not None else init_params(network_dims(cfg), rng, dtype)
    norm = ObsNormalizer(scenario)
    buffer = ReplayBuffer(cfg.buffer_capacity, OBS_DIM, dtype)
    sample_rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 5]))
    act_rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 7]))
    agent = DQNAgent(params, norm, reward, act_rng)
    result = TrainResult(params, [])

    for ep in range(cfg.episodes):
        agent.params = params
        agent.eps = epsilon(ep, cfg.eps_start, cfg.eps_end, cfg.eps_decay_episodes)
        env = BusEnv(scenario, episode_seed(cfg.seed, ep), agent, record_events=False)
        env.run()
        steps = agent.steps
        if reward.terminal_travel_penalty:
            apply_terminal_penalty(steps, -total_travel_time(env) / TERMINAL_SCALE)
        for st in steps:
            buffer.push(norm(st.state), st.action, st.reward, norm(st.next_state))
        ep_loss = []
        for _ in range(cfg.updates_per_episode):
            batch = buffer.sample(cfg.batch_size, sample_rng)
            params, loss = dqn_update(params, batch, cfg.gamma, cfg.learning_rate, cfg.max_grad_norm)
            ep_loss.append(loss)
        if not params.is_finite():
            raise FloatingPointError(f"network diverged in episode {ep}")
        total = float(sum(st.reward for st in steps))
        result.evol.append(total)
        result.losses.append(float(np.mean(ep_loss)) if ep_loss else 0.0)
        result.n_transitions.append(len(steps))
        log.debug("episode %d eps=%.3f reward=%.4f loss=%.5f", ep, agent.eps, total, result.losses[-1])
        if progress is not None:
            progress(ep, total)
    result.params = params
    return result


@dataclass
class TestResult:
    traj: list[Step]
    metrics: MetricsReport
    events: str = ""


def run_test(params: QNetworkParams | None, scenario: ScenarioConfig, reward: RewardProgram | None,
             seed: int, q_override: Callable[[np.ndarray], np.ndarray] | None = None,
             record_events: bool = False) -> TestResult:
    """Greedy rollout with the shared policy on one seed."""
    norm = ObsNormalizer(scenario)
    agent = DQNAgent(params, norm, reward, np.random.default_rng(0), eps=0.0, q_override=q_override)
    env = BusEnv(scenario, seed, agent, record_events=record_events)
    env.run()
    if reward is not None and reward.terminal_travel_penalty:
        apply_terminal_penalty(agent.steps, -total_travel_time(env) / TERMINAL_SCALE)
    return TestResult(agent.steps, compute_metrics(env), env.event_log() if record_events else "")


class GreedyPolicy(DQNAgent):
    """Greedy controller around fixed parameters, for evaluation harnesses."""

    def __init__(self, params: QNetworkParams, scenario: ScenarioConfig) -> None:
        super().__init__(params, ObsNormalizer(scenario), None, np.random.default_rng(0), eps=0.0)
